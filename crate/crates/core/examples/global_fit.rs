//! Global kernel fit on a quantile grid: coefficients at the nodes, refitted
//! constant effects, and the cumulative baseline hazard. Optionally saves the
//! simulated data as CSV for use with the command-line tool.
//!
//! ```text
//! cargo run --release --example global_fit -- [data.csv]
//! ```

use addhaz::dataset::{save_csv, CsvSchema};
use addhaz::estimators::{fit_varying_coefficient, FitOptions};
use addhaz::grid::{build_grid, GridKind};
use addhaz::kernel::{silverman_bandwidth, KernelWeighting};
use addhaz::simgen::{simulate_replicate, true_beta, SimDesign};

fn main() -> addhaz::error::Result<()> {
    let design = SimDesign::new(1)?.with_censoring_mean(2.0)?;
    let ds = simulate_replicate(&design, 800, 11, 0)?;
    if let Some(path) = std::env::args().nth(1) {
        save_csv(&ds, &CsvSchema::default_names(1, 3, 2), &path)?;
        println!("wrote {path}");
    }

    let grid = build_grid(&ds, GridKind::Quantile, &[5])?;
    let kernel = KernelWeighting::Gaussian(silverman_bandwidth(&ds)?);
    let fit = fit_varying_coefficient(&ds, &grid, &kernel, &FitOptions::default())?;

    println!(
        "bandwidth {:.4}, condition {:.2e}",
        kernel.bandwidth().unwrap().values()[0],
        fit.system_condition
    );
    for (k, beta) in fit.beta_grid.iter().enumerate() {
        let w = grid.point(k);
        let truth = true_beta(&w);
        println!(
            "w = {:.3}  beta = [{:+.3}, {:+.3}, {:+.3}]  truth = [{:+.3}, {:+.3}, {:+.3}]",
            w[0], beta[0], beta[1], beta[2], truth[0], truth[1], truth[2]
        );
    }
    println!("alpha (joint) = {:.4?}", fit.alpha_joint.as_slice());
    println!("alpha (refit) = {:.4?}", fit.alpha_refit.as_slice());
    for t in [0.25, 0.5, 1.0] {
        println!(
            "Lambda0({t}) = {:.4}  (truth {:.4})",
            fit.cumhaz.eval(t)?,
            0.5 * t * t
        );
    }
    Ok(())
}
