//! Synthetic data from an additive hazards model with baseline `λ(t) = t`,
//! three varying effects and two constant effects.
//!
//! ```text
//! λ(t | w, x, z) = t + β₁(w̄)x₁ + β₂(w̄)x₂ + β₃(w̄)x₃ + α₁z₁ + α₂z₂
//! β₁(w̄) = 1 / (1 + e^{−20(w̄ − 0.5)}),  β₂(w̄) = 1 − sin(πw̄),  β₃ = 0.2,  α = (0.2, 0.2)
//! ```
//!
//! `w̄` is the mean of the components of `w`; all covariates are Uniform(0, 1)
//! and censoring is exponential.

pub mod study;

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{SurvivalDataset, SurvivalRecord};
use crate::error::{Error, Result};
use crate::metrics::PredictionRecord;
use crate::rng::{stream_rng, streams};

pub const P: usize = 3;
pub const R: usize = 2;

/// Simulation design. `censoring_mean` is the mean of the exponential
/// censoring distribution; `None` means no censoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub q: usize,
    pub censoring_mean: Option<f64>,
    pub alpha: Vec<f64>,
}

impl SimDesign {
    pub fn new(q: usize) -> Result<Self> {
        if !(q == 1 || q == 2) {
            return Err(Error::InvalidArgument(format!(
                "design supports q = 1 or 2, got {q}"
            )));
        }
        Ok(Self {
            q,
            censoring_mean: None,
            alpha: vec![0.2, 0.2],
        })
    }

    pub fn with_censoring_mean(mut self, mean: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "censoring mean must be positive, got {mean}"
            )));
        }
        self.censoring_mean = Some(mean);
        Ok(self)
    }

    /// `β₀(w)`.
    pub fn true_beta(&self, w: &[f64]) -> Vec<f64> {
        true_beta(w)
    }

    /// Covariate part of the hazard, `β₀(w)ᵀx + α₀ᵀz`.
    pub fn hazard_offset(&self, w: &[f64], x: &[f64], z: &[f64]) -> f64 {
        let b = true_beta(w);
        b.iter().zip(x).map(|(b, x)| b * x).sum::<f64>()
            + self.alpha.iter().zip(z).map(|(a, z)| a * z).sum::<f64>()
    }

    fn covariates<G: Rng>(&self, rng: &mut G) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let w = (0..self.q).map(|_| rng.random()).collect();
        let x = (0..P).map(|_| rng.random()).collect();
        let z = (0..R).map(|_| rng.random()).collect();
        (w, x, z)
    }
}

/// `β₀(w)` with `w̄` the mean of `w`.
pub fn true_beta(w: &[f64]) -> Vec<f64> {
    let wbar = w.iter().sum::<f64>() / w.len() as f64;
    vec![
        1.0 / (1.0 + (-20.0 * (wbar - 0.5)).exp()),
        1.0 - (PI * wbar).sin(),
        0.2,
    ]
}

/// `Λ(t | c) = t²/2 + ct`.
pub fn cumulative_hazard(t: f64, c: f64) -> f64 {
    0.5 * t * t + c * t
}

/// Solves `Λ(t | c) = e` for `t ≥ 0`.
///
/// Uses `2e / (c + √(c² + 2e))`, algebraically `−c + √(c² + 2e)` but without
/// the cancellation for large `c`.
pub fn invert_cumulative_hazard(c: f64, e: f64) -> Result<f64> {
    if c < 0.0 || !c.is_finite() {
        return Err(Error::NegativeHazardOffset(c));
    }
    if !(e >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "target must be nonnegative, got {e}"
        )));
    }
    if e == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * e / (c + (c * c + 2.0 * e).sqrt()))
}

/// Event time with hazard `t + c`, by inverting the cumulative hazard at an
/// `Exp(1)` draw.
pub fn draw_event_time<G: Rng>(c: f64, rng: &mut G) -> Result<f64> {
    let e: f64 = Exp1.sample(rng);
    invert_cumulative_hazard(c, e)
}

/// Uncensored event times for `n` subjects of a pilot sample, used to
/// calibrate censoring.
fn pilot_event_times(design: &SimDesign, n: usize, seed: u64) -> Result<Vec<f64>> {
    const CHUNK: usize = 4096;
    let chunks = n.div_ceil(CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, streams::PILOT, c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len)
                .map(|_| {
                    let (w, x, z) = design.covariates(&mut rng);
                    draw_event_time(design.hazard_offset(&w, &x, &z), &mut rng)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.concat())
}

/// Expected censoring fraction `mean(1 − e^{−T̃/μ})` for exponential
/// censoring with mean `μ`.
pub fn expected_censoring_rate(event_times: &[f64], mean: f64) -> f64 {
    let total: f64 = event_times.iter().map(|t| -(-t / mean).exp_m1()).sum();
    total / event_times.len() as f64
}

/// Censoring mean giving censoring fraction `target` on a pilot sample of
/// `pilot_n` subjects, by bisection on `log μ`.
pub fn calibrate_censoring(
    design: &SimDesign,
    target: f64,
    pilot_n: usize,
    seed: u64,
) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target rate must lie in (0, 1), got {target}"
        )));
    }
    if pilot_n == 0 {
        return Err(Error::InvalidArgument("pilot sample is empty".into()));
    }
    const MAX_ITER: usize = 200;
    let times = pilot_event_times(design, pilot_n, seed)?;
    // the rate decreases in μ
    let (mut lo, mut hi) = (-20.0f64, 20.0f64);
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let rate = expected_censoring_rate(&times, mid.exp());
        if (rate - target).abs() < 1e-6 || hi - lo < 1e-12 {
            return Ok(mid.exp());
        }
        if rate > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence(MAX_ITER))
}

/// One simulated subject as an observed record and its event time.
fn draw_subject<G: Rng>(design: &SimDesign, rng: &mut G) -> Result<(SurvivalRecord, f64)> {
    let (w, x, z) = design.covariates(rng);
    let event = draw_event_time(design.hazard_offset(&w, &x, &z), rng)?;
    let censor = match design.censoring_mean {
        Some(mu) => {
            let e: f64 = Exp1.sample(rng);
            e * mu
        }
        None => f64::INFINITY,
    };
    let rec = SurvivalRecord {
        time: event.min(censor),
        status: event <= censor,
        w,
        x,
        z,
    };
    Ok((rec, event))
}

/// Dataset number `index` under `seed`; bit-identical for the same inputs.
pub fn simulate_replicate(
    design: &SimDesign,
    n: usize,
    seed: u64,
    index: u64,
) -> Result<SurvivalDataset> {
    let mut rng = stream_rng(seed, streams::REPLICATE, index);
    let records = (0..n)
        .map(|_| draw_subject(design, &mut rng).map(|(r, _)| r))
        .collect::<Result<Vec<_>>>()?;
    SurvivalDataset::new(records)
}

/// Independent uncensored evaluation sample for replicate `index`.
pub fn test_sample(
    design: &SimDesign,
    size: usize,
    seed: u64,
    index: u64,
) -> Result<Vec<PredictionRecord>> {
    let mut rng = stream_rng(seed, streams::TEST_SAMPLE, index);
    (0..size)
        .map(|_| {
            let (w, x, z) = design.covariates(&mut rng);
            let t = draw_event_time(design.hazard_offset(&w, &x, &z), &mut rng)?;
            Ok(PredictionRecord {
                w,
                x,
                z,
                true_event_time: t,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn inversion_examples() {
        assert_eq!(invert_cumulative_hazard(0.0, 2.0).unwrap(), 2.0);
        assert!((invert_cumulative_hazard(1.0, 1.5).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(invert_cumulative_hazard(0.0, 0.0).unwrap(), 0.0);
        assert!(matches!(
            invert_cumulative_hazard(-0.1, 1.0),
            Err(Error::NegativeHazardOffset(_))
        ));
    }

    #[test]
    fn true_coefficients() {
        let b = true_beta(&[0.5]);
        assert!((b[0] - 0.5).abs() < 1e-15);
        assert!(b[1].abs() < 1e-15);
        assert_eq!(b[2], 0.2);
        assert_eq!(true_beta(&[0.2, 0.8]), true_beta(&[0.5]));
    }

    #[test]
    fn censoring_rate_limits() {
        let times = [0.5, 1.0, 2.0];
        assert!(expected_censoring_rate(&times, 1e12) < 1e-9);
        assert!(expected_censoring_rate(&times, 1e-12) > 1.0 - 1e-9);
    }

    #[test]
    fn replicate_is_reproducible_and_in_range() {
        let d = SimDesign::new(1).unwrap().with_censoring_mean(2.0).unwrap();
        let a = simulate_replicate(&d, 50, 11, 3).unwrap();
        let b = simulate_replicate(&d, 50, 11, 3).unwrap();
        assert_eq!(a.times(), b.times());
        assert_eq!(a.x(), b.x());
        for m in [a.w(), a.x(), a.z()] {
            assert!(m.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn draws_use_the_rng() {
        let mut rng = stream_rng(1, 2, 3);
        let t = draw_event_time(0.3, &mut rng).unwrap();
        assert!(t > 0.0);
    }
}
