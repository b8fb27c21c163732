//! Desk-scale simulation: constant, local, and global fits on data from the
//! built-in design, with MSE, C-index, `α` summaries, and band coverage.
//!
//! ```text
//! cargo run --release --example simulation_study -- [replicates] [n]
//! ```

use addhaz::simgen::study::{run_study, StudyBand, StudyConfig};

fn main() -> addhaz::error::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let replicates = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let n = args.next().and_then(|s| s.parse().ok()).unwrap_or(500);

    let mut config = StudyConfig::new(1, vec![n], replicates, 2024)?;
    config.band = Some(StudyBand {
        interval: (0.05, 0.95),
        alpha_level: 0.05,
        replicates: 500,
    });
    let report = run_study(&config)?;

    println!(
        "censoring mean {:.4}, observed rate {:.3}",
        report.censoring_mean, report.censoring_rate[0].1
    );
    for s in &report.summaries {
        println!(
            "{:<9} ok={:<4} failed={:<3} MSE={:.4} C={:.4}",
            s.method.to_string(),
            s.succeeded,
            s.failed,
            s.mse,
            s.c_index
        );
        for a in &s.alpha {
            println!(
                "    {} bias={:+.4} sd={:.4} se={} cr={}",
                a.parameter,
                a.bias,
                a.sd,
                a.mean_se.map_or("-".into(), |v| format!("{v:.4}")),
                a.coverage.map_or("-".into(), |v| format!("{v:.3}"))
            );
        }
        if let Some(cov) = &s.band_coverage {
            println!("    band coverage {cov:?}");
        }
    }
    Ok(())
}
