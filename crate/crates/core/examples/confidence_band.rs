//! Pointwise and simultaneous 95% bands for the varying coefficients, with
//! perturbation standard errors for the constant effects.
//!
//! ```text
//! cargo run --release --example confidence_band
//! ```

use addhaz::estimators::{fit_varying_coefficient, FitOptions};
use addhaz::grid::{build_grid, GridKind};
use addhaz::inference::{build_band, perturb_alpha_se, BandOptions};
use addhaz::kernel::{silverman_bandwidth, KernelWeighting};
use addhaz::simgen::{simulate_replicate, true_beta, SimDesign};

fn main() -> addhaz::error::Result<()> {
    let design = SimDesign::new(1)?.with_censoring_mean(2.0)?;
    let ds = simulate_replicate(&design, 500, 21, 0)?;
    let grid = build_grid(&ds, GridKind::Even, &[5])?;
    let kernel = KernelWeighting::Gaussian(silverman_bandwidth(&ds)?);
    let fit = fit_varying_coefficient(&ds, &grid, &kernel, &FitOptions::default())?;

    let options = BandOptions {
        interval: Some((0.05, 0.95)),
        replicates: 1000,
        seed: 99,
        ..BandOptions::default()
    };
    let band = build_band(&ds, &fit, &options)?;
    println!("critical values {:.3?}", band.critical);
    println!("covers truth {:?}", band.covers(|w| true_beta(&[w])));

    let (lo, hi) = (band.lower_band(), band.upper_band());
    for j in (0..band.eval_points.len()).step_by(20) {
        println!(
            "w = {:.2}  beta1 = {:+.3}  band [{:+.3}, {:+.3}]",
            band.eval_points[j], band.beta_hat[j][0], lo[j][0], hi[j][0]
        );
    }

    let se = perturb_alpha_se(&ds, &fit, 1000, 99)?;
    for k in 0..ds.r() {
        println!(
            "alpha{} = {:+.4} (se {:.4})",
            k + 1,
            fit.alpha_refit[k],
            se[k]
        );
    }
    Ok(())
}
