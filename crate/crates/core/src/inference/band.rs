use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::estimators::{CoefficientSurface, VaryingCoefficientFit};
use crate::inference::influence::{InfluenceContext, PerturbationDraw};
use crate::rng::streams;

/// Settings for [`build_band`].
#[derive(Debug, Clone)]
pub struct BandOptions {
    /// `[a, b]`; defaults to the 5th and 95th percentiles of `W`.
    pub interval: Option<(f64, f64)>,
    pub alpha_level: f64,
    pub replicates: usize,
    pub seed: u64,
    pub eval_points: usize,
}

impl Default for BandOptions {
    fn default() -> Self {
        Self {
            interval: None,
            alpha_level: 0.05,
            replicates: 1000,
            seed: 0,
            eval_points: 101,
        }
    }
}

/// Simultaneous and pointwise bands for every component of `β(·)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandResult {
    pub eval_points: Vec<f64>,
    /// `beta_hat[j][k]` is `β̂ₖ` at `eval_points[j]`.
    pub beta_hat: Vec<Vec<f64>>,
    pub se: Vec<Vec<f64>>,
    /// `c_{αk}` per component.
    pub critical: Vec<f64>,
    /// Same-level quantile of the standardized statistic at each single point.
    pub pointwise_critical: Vec<Vec<f64>>,
    pub alpha_level: f64,
    pub replicates: usize,
}

impl BandResult {
    pub fn lower_band(&self) -> Vec<Vec<f64>> {
        self.envelope(-1.0, |_, k| self.critical[k])
    }

    pub fn upper_band(&self) -> Vec<Vec<f64>> {
        self.envelope(1.0, |_, k| self.critical[k])
    }

    pub fn lower_pointwise(&self) -> Vec<Vec<f64>> {
        self.envelope(-1.0, |j, k| self.pointwise_critical[j][k])
    }

    pub fn upper_pointwise(&self) -> Vec<Vec<f64>> {
        self.envelope(1.0, |j, k| self.pointwise_critical[j][k])
    }

    fn envelope(&self, sign: f64, crit: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
        self.beta_hat
            .iter()
            .enumerate()
            .map(|(j, b)| {
                b.iter()
                    .enumerate()
                    .map(|(k, v)| v + sign * crit(j, k) * self.se[j][k])
                    .collect()
            })
            .collect()
    }

    /// Whether `truth(w)` lies inside the simultaneous band at every
    /// evaluation point, per component.
    pub fn covers(&self, truth: impl Fn(f64) -> Vec<f64>) -> Vec<bool> {
        let p = self.critical.len();
        let mut out = vec![true; p];
        for (j, &w) in self.eval_points.iter().enumerate() {
            let t = truth(w);
            for k in 0..p {
                let half = self.critical[k] * self.se[j][k];
                if (t[k] - self.beta_hat[j][k]).abs() > half {
                    out[k] = false;
                }
            }
        }
        out
    }
}

/// Index (0-based) of the `(1−α)` empirical quantile among `b` sorted values:
/// the `⌈(1−α)b⌉`-th order statistic.
pub fn quantile_index(alpha_level: f64, b: usize) -> usize {
    let rank = ((1.0 - alpha_level) * b as f64 - 1e-9).ceil() as usize;
    rank.clamp(1, b) - 1
}

/// Nearest-order-statistic percentile `x_(⌈pn⌉)`.
pub(crate) fn percentile(values: &[f64], prob: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (prob * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

/// Perturbation band over `[a, b]` for a scalar effect modifier.
pub fn build_band(
    ds: &SurvivalDataset,
    fit: &VaryingCoefficientFit,
    options: &BandOptions,
) -> Result<BandResult> {
    if ds.q() != 1 {
        return Err(Error::UnsupportedDimension(ds.q()));
    }
    if options.replicates < 100 {
        return Err(Error::TooFewReplicates(options.replicates));
    }
    if !(options.alpha_level > 0.0 && options.alpha_level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha level must lie in (0, 1), got {}",
            options.alpha_level
        )));
    }
    if options.eval_points < 2 {
        return Err(Error::InvalidArgument(
            "need at least two evaluation points".into(),
        ));
    }
    let (a, b) = match options.interval {
        Some(ab) => ab,
        None => {
            let w: Vec<f64> = ds.w().column(0).iter().copied().collect();
            (percentile(&w, 0.05), percentile(&w, 0.95))
        }
    };
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidArgument(format!(
            "band interval [{a}, {b}] is empty"
        )));
    }
    let count = options.eval_points;
    let eval_points: Vec<f64> = (0..count)
        .map(|j| {
            if j + 1 == count {
                b
            } else {
                a + (b - a) * j as f64 / (count - 1) as f64
            }
        })
        .collect();

    let ctx = InfluenceContext::for_fit(ds, fit)?;
    let bases = eval_points
        .par_iter()
        .map(|&w| ctx.at(&[w]))
        .collect::<Result<Vec<_>>>()?;
    let beta_hat = eval_points
        .iter()
        .map(|&w| fit.beta_at(&[w]).map(|v| v.iter().copied().collect()))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let se: Vec<Vec<f64>> = bases
        .iter()
        .map(|b| b.standard_errors().iter().copied().collect())
        .collect();

    let stats = standardized_draws(ds, &bases, &se, options.replicates, options.seed)?;
    let p = fit.p();
    let idx = quantile_index(options.alpha_level, options.replicates);
    let critical = (0..p)
        .map(|k| {
            let sups: Vec<f64> = stats
                .iter()
                .map(|draw| (0..count).map(|j| draw[(j, k)]).fold(0.0, f64::max))
                .collect();
            order_statistic(sups, idx)
        })
        .collect();
    let pointwise_critical = (0..count)
        .map(|j| {
            (0..p)
                .map(|k| order_statistic(stats.iter().map(|d| d[(j, k)]).collect(), idx))
                .collect()
        })
        .collect();

    Ok(BandResult {
        eval_points,
        beta_hat,
        se,
        critical,
        pointwise_critical,
        alpha_level: options.alpha_level,
        replicates: options.replicates,
    })
}

fn order_statistic(mut v: Vec<f64>, idx: usize) -> f64 {
    v.sort_by(f64::total_cmp);
    v[idx]
}

/// `|v̂ₖ(w) M̃ₙₖ(w)|` for every draw, as a (points × p) matrix per draw.
fn standardized_draws(
    ds: &SurvivalDataset,
    bases: &[crate::inference::InfluenceBasis],
    se: &[Vec<f64>],
    replicates: usize,
    seed: u64,
) -> Result<Vec<DMatrix<f64>>> {
    let n = ds.n();
    (0..replicates)
        .into_par_iter()
        .map(|b| {
            let draw = PerturbationDraw::generate(n, seed, streams::BAND, b as u64);
            let psi = DVector::from_column_slice(&draw.psi);
            let p = bases[0].u.nrows();
            let mut out = DMatrix::zeros(bases.len(), p);
            for (j, basis) in bases.iter().enumerate() {
                let v = &basis.u * &psi;
                for k in 0..p {
                    out[(j, k)] = if se[j][k] > 0.0 {
                        (v[k] / se[j][k]).abs()
                    } else {
                        0.0
                    };
                }
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_convention() {
        assert_eq!(quantile_index(0.05, 1000), 949);
        assert_eq!(quantile_index(0.05, 100), 94);
        assert_eq!(quantile_index(0.05, 500), 474);
        assert_eq!(quantile_index(0.5, 3), 1);
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.05), 5.0);
        assert_eq!(percentile(&v, 0.95), 95.0);
    }
}
