//! Pointwise local kernel fits against the global estimator on the same data,
//! scored by squared error of the linear predictor on a held-out sample.
//!
//! ```text
//! cargo run --release --example local_vs_global
//! ```

use addhaz::estimators::{
    fit_local_method, fit_varying_coefficient, AlphaWeighting, ConstantFit, FitOptions,
};
use addhaz::grid::{build_grid, EstimationGrid, GridKind};
use addhaz::kernel::{silverman_bandwidth, KernelWeighting};
use addhaz::metrics::mse;
use addhaz::simgen::{calibrate_censoring, simulate_replicate, test_sample, true_beta, SimDesign};

fn main() -> addhaz::error::Result<()> {
    let design = SimDesign::new(1)?;
    let mu = calibrate_censoring(&design, 0.3, 100_000, 1)?;
    let design = design.with_censoring_mean(mu)?;
    let ds = simulate_replicate(&design, 500, 5, 0)?;
    let test = test_sample(&design, 5000, 5, 0)?;

    let kernel = KernelWeighting::Gaussian(silverman_bandwidth(&ds)?);
    let constant = ConstantFit::fit(&ds)?;
    let dense = EstimationGrid::even(&[(0.0, 1.0)], &[101])?;
    let local = fit_local_method(&ds, &kernel, &dense, AlphaWeighting::InverseVariance)?;
    let grid = build_grid(&ds, GridKind::Even, &[5])?;
    let global = fit_varying_coefficient(&ds, &grid, &kernel, &FitOptions::default())?;

    let alpha = &design.alpha;
    println!("censoring mean {mu:.4}");
    println!(
        "constant MSE {:.4}",
        mse(&constant, &test, true_beta, alpha)?
    );
    println!("local    MSE {:.4}", mse(&local, &test, true_beta, alpha)?);
    println!("global   MSE {:.4}", mse(&global, &test, true_beta, alpha)?);
    Ok(())
}
