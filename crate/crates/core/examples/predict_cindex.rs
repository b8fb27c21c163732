//! Risk scores for new subjects and their concordance with event times.
//!
//! ```text
//! cargo run --release --example predict_cindex
//! ```

use addhaz::estimators::{fit_varying_coefficient, CoefficientSurface, FitOptions};
use addhaz::grid::{build_grid, GridKind};
use addhaz::kernel::{silverman_bandwidth, KernelWeighting};
use addhaz::metrics::{c_index, c_index_harrell};
use addhaz::simgen::{simulate_replicate, test_sample, SimDesign};

fn main() -> addhaz::error::Result<()> {
    let design = SimDesign::new(1)?.with_censoring_mean(2.0)?;
    let ds = simulate_replicate(&design, 500, 8, 0)?;
    let grid = build_grid(&ds, GridKind::Quantile, &[5])?;
    let kernel = KernelWeighting::Gaussian(silverman_bandwidth(&ds)?);
    let fit = fit_varying_coefficient(&ds, &grid, &kernel, &FitOptions::default())?;

    let test = test_sample(&design, 10_000, 8, 0)?;
    let scores = test
        .iter()
        .map(|r| fit.linear_predictor(&r.w, &r.x, &r.z))
        .collect::<addhaz::error::Result<Vec<f64>>>()?;
    let times: Vec<f64> = test.iter().map(|r| r.true_event_time).collect();
    println!(
        "C-index on uncensored test sample: {:.4}",
        c_index(&scores, &times)?
    );

    // Harrell's version on the (censored) training data
    let train = (0..ds.n())
        .map(|i| fit.linear_predictor(&ds.w_row(i), ds.x_row(i).as_slice(), ds.z_row(i).as_slice()))
        .collect::<addhaz::error::Result<Vec<f64>>>()?;
    println!(
        "Harrell C on training data: {:.4}",
        c_index_harrell(&train, ds.times(), ds.statuses())?
    );
    Ok(())
}
