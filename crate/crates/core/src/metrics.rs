//! Predictive accuracy: squared error of the linear predictor and concordance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::CoefficientSurface;

/// A held-out subject with its uncensored event time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub w: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub true_event_time: f64,
}

/// Mean over `test` of `{(β̂ − β₀)(W)ᵀX + (α̂ − α₀)ᵀZ}²`.
pub fn mse<S: CoefficientSurface>(
    fit: &S,
    test: &[PredictionRecord],
    true_beta: impl Fn(&[f64]) -> Vec<f64>,
    true_alpha: &[f64],
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for rec in test {
        let est = fit.linear_predictor(&rec.w, &rec.x, &rec.z)?;
        let b0 = true_beta(&rec.w);
        let truth: f64 = b0.iter().zip(&rec.x).map(|(b, x)| b * x).sum::<f64>()
            + true_alpha
                .iter()
                .zip(&rec.z)
                .map(|(a, z)| a * z)
                .sum::<f64>();
        total += (est - truth).powi(2);
    }
    Ok(total / test.len() as f64)
}

/// Binary indexed tree over score ranks.
struct Fenwick(Vec<usize>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Self(vec![0; n + 1])
    }

    fn add(&mut self, rank: usize) {
        let mut i = rank + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted ranks `< rank`.
    fn below(&self, rank: usize) -> usize {
        let mut i = rank;
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Core pair count: for each `i` with `use_as_earlier[i]`, every later `j`
/// (`tⱼ > tᵢ`) is compared; higher score on the earlier time is concordant.
fn concordance(
    scores: &[f64],
    times: &[f64],
    use_as_earlier: impl Fn(usize) -> bool,
) -> Result<f64> {
    let n = scores.len();
    if n != times.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: times.len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "concordance needs at least two subjects".into(),
        ));
    }
    if scores.iter().chain(times).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "scores and times must be finite".into(),
        ));
    }
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let rank = |s: f64| sorted.partition_point(|&v| v < s);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    let mut tree = Fenwick::new(sorted.len());
    let (mut concordant, mut pairs) = (0.0, 0.0);
    let mut inserted = 0usize;
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end < n && times[order[end]] == times[order[start]] {
            end += 1;
        }
        for &i in &order[start..end] {
            if !use_as_earlier(i) {
                continue;
            }
            let r = rank(scores[i]);
            let lower = tree.below(r);
            let tied = tree.below(r + 1) - lower;
            concordant += lower as f64 + 0.5 * tied as f64;
            pairs += inserted as f64;
        }
        for &i in &order[start..end] {
            tree.add(rank(scores[i]));
        }
        inserted += end - start;
        start = end;
    }
    if pairs == 0.0 {
        return Err(Error::AllTimesTied);
    }
    Ok(concordant / pairs)
}

/// Concordance over all pairs with distinct (uncensored) times: the fraction
/// where the larger score belongs to the earlier time, score ties counting ½.
pub fn c_index(scores: &[f64], times: &[f64]) -> Result<f64> {
    concordance(scores, times, |_| true)
}

/// Harrell's concordance for censored data: a pair is usable when the
/// earlier observed time is an event.
pub fn c_index_harrell(scores: &[f64], times: &[f64], status: &[bool]) -> Result<f64> {
    if status.len() != times.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: status.len(),
        });
    }
    concordance(scores, times, |i| status[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(scores: &[f64], times: &[f64]) -> f64 {
        let (mut c, mut t) = (0.0, 0.0);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if times[i] < times[j] {
                    t += 1.0;
                    if scores[i] > scores[j] {
                        c += 1.0;
                    } else if scores[i] == scores[j] {
                        c += 0.5;
                    }
                }
            }
        }
        c / t
    }

    #[test]
    fn examples() {
        assert_eq!(c_index(&[3.0, 2.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(c_index(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), 0.5);
        assert!((c_index(&[3.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            c_index(&[1.0, 2.0], &[1.0, 1.0]),
            Err(Error::AllTimesTied)
        ));
    }

    #[test]
    fn harrell_skips_censored_earlier() {
        // subject 0 censored first: pairs (0,*) unusable; (1,2) concordant
        let h = c_index_harrell(&[0.0, 2.0, 1.0], &[1.0, 2.0, 3.0], &[false, true, true]).unwrap();
        assert_eq!(h, 1.0);
    }

    proptest! {
        #[test]
        fn matches_brute_force(data in prop::collection::vec((0u8..6, 0u8..8), 2..60)) {
            let scores: Vec<f64> = data.iter().map(|d| d.0 as f64).collect();
            let times: Vec<f64> = data.iter().map(|d| d.1 as f64).collect();
            prop_assume!(times.iter().any(|t| *t != times[0]));
            let fast = c_index(&scores, &times).unwrap();
            prop_assert!((fast - brute(&scores, &times)).abs() < 1e-12);
        }

        #[test]
        fn negation_complements(data in prop::collection::vec((-1e3f64..1e3, 0.0f64..10.0), 2..50)) {
            let scores: Vec<f64> = data.iter().map(|d| d.0).collect();
            let times: Vec<f64> = data.iter().map(|d| d.1).collect();
            let mut s = scores.clone();
            s.sort_by(f64::total_cmp);
            prop_assume!(s.windows(2).all(|w| w[0] != w[1]));
            prop_assume!(times.iter().any(|t| *t != times[0]));
            let neg: Vec<f64> = scores.iter().map(|v| -v).collect();
            let sum = c_index(&scores, &times).unwrap() + c_index(&neg, &times).unwrap();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn monotone_transform_invariant(data in prop::collection::vec((-5f64..5.0, 0.0f64..10.0), 2..50)) {
            let scores: Vec<f64> = data.iter().map(|d| d.0).collect();
            let times: Vec<f64> = data.iter().map(|d| d.1).collect();
            prop_assume!(times.iter().any(|t| *t != times[0]));
            let exp: Vec<f64> = scores.iter().map(|v| v.exp()).collect();
            prop_assert_eq!(c_index(&scores, &times).unwrap(), c_index(&exp, &times).unwrap());
        }
    }
}
