//! Standard errors and simultaneous confidence bands by multiplier
//! perturbation of the estimators' linear expansions.

pub mod alpha;
pub mod band;
pub mod influence;

pub use alpha::{alpha_perturbation_map, perturb_alpha_se};
pub use band::{build_band, quantile_index, BandOptions, BandResult};
pub use influence::{
    perturb_beta, sandwich_variance, InfluenceBasis, InfluenceContext, PerturbationDraw,
};
