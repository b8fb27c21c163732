//! Varying coefficients when the modifier takes a handful of values: one
//! coefficient vector per level, estimated jointly.
//!
//! ```text
//! cargo run --release --example discrete_modifier
//! ```

use addhaz::dataset::{SurvivalDataset, SurvivalRecord};
use addhaz::estimators::discrete_block_estimate;
use addhaz::simgen::{simulate_replicate, true_beta, SimDesign};

fn main() -> addhaz::error::Result<()> {
    let design = SimDesign::new(1)?.with_censoring_mean(2.0)?;
    let raw = simulate_replicate(&design, 2000, 3, 0)?;

    // round W to three levels; the hazard itself used the continuous value
    let records: Vec<SurvivalRecord> = (0..raw.n())
        .map(|i| {
            let mut r = raw.record(i);
            r.w = vec![(r.w[0] * 3.0).floor().min(2.0) / 2.0];
            r
        })
        .collect();
    let ds = SurvivalDataset::new(records)?;
    let fit = discrete_block_estimate(&ds, None)?;

    let midpoints = [1.0 / 6.0, 0.5, 5.0 / 6.0];
    for ((level, beta), mid) in fit.levels.iter().zip(&fit.beta).zip(midpoints) {
        let b: Vec<String> = beta.iter().map(|v| format!("{v:+.3}")).collect();
        let t: Vec<String> = true_beta(&[mid])
            .iter()
            .map(|v| format!("{v:+.3}"))
            .collect();
        println!(
            "w = {:.1}: beta = [{}]  truth at bin midpoint = [{}]",
            level[0],
            b.join(", "),
            t.join(", ")
        );
    }
    println!("alpha = [{:+.3}, {:+.3}]", fit.alpha[0], fit.alpha[1]);
    Ok(())
}
