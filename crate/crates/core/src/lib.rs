//! Additive hazards regression with coefficients that vary smoothly in an
//! effect modifier `W`:
//!
//! ```text
//! λ(t | W, X, Z) = λ₀(t) + β(W)ᵀX + αᵀZ
//! ```
//!
//! The global estimator solves one joint linear system for `β` at every grid
//! node together with `α`, then refits `α` with `β̂(W)ᵀX` as an offset and
//! estimates the cumulative baseline hazard. Inference uses multiplier
//! perturbation of the linear expansions: sandwich standard errors,
//! simultaneous bands for scalar `W`, and standard errors for `α̃`.
//!
//! Constant, discrete-modifier, and pointwise local kernel estimators are
//! included for comparison, along with a simulation generator, concordance
//! metrics, and the `addhaz` command-line tool (see [`cli`]).

pub mod cli;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod grid;
pub mod inference;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod simgen;
pub mod stepfun;
