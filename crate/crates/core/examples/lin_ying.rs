//! Constant-coefficient additive hazards fit with robust standard errors.
//!
//! ```text
//! cargo run --release --example lin_ying
//! ```

use addhaz::estimators::{lin_ying_with, Covariates};
use addhaz::simgen::{simulate_replicate, SimDesign};

fn main() -> addhaz::error::Result<()> {
    let design = SimDesign::new(1)?.with_censoring_mean(2.0)?;
    let ds = simulate_replicate(&design, 1000, 7, 0)?;
    let fit = lin_ying_with(&ds, &Covariates::XZ.matrix(&ds))?;
    let cov = fit.robust_covariance().expect("denominator is invertible");

    println!("n = {}, events = {}", ds.n(), ds.n_events());
    for (j, name) in ["x1", "x2", "x3", "z1", "z2"].iter().enumerate() {
        println!("{name}: {:+.4} (se {:.4})", fit.coef[j], cov[(j, j)].sqrt());
    }
    Ok(())
}
