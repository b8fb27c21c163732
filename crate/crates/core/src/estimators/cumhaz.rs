use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};

/// Estimated cumulative baseline hazard: jumps `ΔN/Y` at observed event
/// times and a linear drift `−Σ Yᵢ(β̂(Wᵢ)ᵀXᵢ + α̃ᵀZᵢ)/Σ Yᵢ` in between.
///
/// Piece `d` covers `(times[d-1], times[d]]`; the drift over it has slope
/// `-rates[d]` and the jump `jumps[d]` lands at `times[d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeHazard {
    times: Vec<f64>,
    jumps: Vec<f64>,
    rates: Vec<f64>,
    /// `Λ̂(times[d])`
    values: Vec<f64>,
    horizon: f64,
    last_time: f64,
}

impl CumulativeHazard {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    /// Drift rate subtracted on each piece.
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn check(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time must be nonnegative, got {t}"
            )));
        }
        if t > self.last_time {
            return Err(Error::EmptyRiskSet(t));
        }
        if t > self.horizon {
            return Err(Error::InvalidArgument(format!(
                "t = {t} lies beyond the integration horizon {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// `Λ̂(t)`, right-continuous.
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        let d = self.times.partition_point(|&s| s < t);
        if d < self.times.len() && self.times[d] == t {
            return Ok(self.values[d]);
        }
        let (start, base) = if d == 0 {
            (0.0, 0.0)
        } else {
            (self.times[d - 1], self.values[d - 1])
        };
        Ok(base - self.rates[d] * (t - start))
    }

    /// `∫₀ᵗ Λ̂(s) ds`, exact (trapezoids on the linear pieces).
    pub fn integral(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        let mut acc = 0.0;
        let mut start = 0.0;
        let mut base = 0.0;
        for d in 0..self.times.len() {
            let end = self.times[d].min(t);
            if end > start {
                let len = end - start;
                acc += len * base - 0.5 * self.rates[d] * len * len;
            }
            if self.times[d] >= t {
                break;
            }
            start = self.times[d];
            base = self.values[d];
        }
        Ok(acc)
    }
}

/// Builds `Λ̂` from fitted linear predictors.
///
/// `beta_at_subjects[i]` is `β̂(Wᵢ)`; `alpha` has length `r`.
pub fn estimate_cumhaz(
    ds: &SurvivalDataset,
    beta_at_subjects: &[DVector<f64>],
    alpha: &DVector<f64>,
) -> Result<CumulativeHazard> {
    let n = ds.n();
    if beta_at_subjects.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: beta_at_subjects.len(),
        });
    }
    if alpha.len() != ds.r() {
        return Err(Error::DimensionMismatch {
            expected: ds.r(),
            found: alpha.len(),
        });
    }
    let tl = ds.timeline();
    let tau = ds.tau();
    let predictor: Vec<f64> = (0..n)
        .map(|i| beta_at_subjects[i].dot(&ds.x_row(i)) + alpha.dot(&ds.z_row(i)))
        .collect();
    let sums = tl.risk_sums(0.0, |i| predictor[i]);

    let mut times = Vec::new();
    let mut jumps = Vec::new();
    let mut rates = Vec::new();
    let mut values = Vec::new();
    let mut current = 0.0;
    let mut prev = 0.0;
    for d in 0..tl.len() {
        let y = tl.at_risk()[d] as f64;
        let t = tl.times()[d];
        if t > tau {
            // partial piece up to the horizon, no jump
            if tau > prev {
                let rate = sums[d] / y;
                current -= rate * (tau - prev);
                times.push(tau);
                jumps.push(0.0);
                rates.push(rate);
                values.push(current);
            }
            break;
        }
        let events = tl
            .subjects_at(d)
            .iter()
            .filter(|&&i| ds.counts_event(i))
            .count() as f64;
        let rate = sums[d] / y;
        let jump = events / y;
        current += jump - rate * (t - prev);
        times.push(t);
        jumps.push(jump);
        rates.push(rate);
        values.push(current);
        prev = t;
    }
    Ok(CumulativeHazard {
        times,
        jumps,
        rates,
        values,
        horizon: tau,
        last_time: tl.times().last().copied().unwrap_or(0.0),
    })
}
