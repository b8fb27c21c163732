//! Gaussian product kernel with a diagonal bandwidth matrix.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};

/// Per-dimension bandwidths `h₁, …, h_q`, i.e. `H = diag(h₁², …, h_q²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bandwidth(Vec<f64>);

impl Bandwidth {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::InvalidBandwidth("no components".into()));
        }
        if let Some(bad) = h.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidBandwidth(format!(
                "components must be positive and finite, got {bad}"
            )));
        }
        Ok(Self(h))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Same bandwidth in every one of `q` dimensions.
    pub fn uniform(h: f64, q: usize) -> Result<Self> {
        Self::new(vec![h; q])
    }
}

/// `K_H(u) = ∏ⱼ (hⱼ√(2π))⁻¹ exp(−uⱼ²/(2hⱼ²))`.
pub fn gaussian_kernel_weight(u: &[f64], bw: &Bandwidth) -> Result<f64> {
    if u.len() != bw.dim() {
        return Err(Error::DimensionMismatch {
            expected: bw.dim(),
            found: u.len(),
        });
    }
    Ok(gaussian_unchecked(u.iter().copied(), bw))
}

fn gaussian_unchecked(u: impl Iterator<Item = f64>, bw: &Bandwidth) -> f64 {
    let norm = (2.0 * PI).sqrt();
    u.zip(bw.values())
        .map(|(uj, &h)| {
            let s = uj / h;
            (-0.5 * s * s).exp() / (h * norm)
        })
        .product()
}

/// Silverman's rule of thumb, `hⱼ = σ̂ⱼ [4/(n(q+2))]^{1/(q+4)}`, with the
/// `n − 1` sample standard deviation.
pub fn silverman_bandwidth(ds: &SurvivalDataset) -> Result<Bandwidth> {
    silverman_from_columns(ds.w())
}

pub fn silverman_from_columns(w: &DMatrix<f64>) -> Result<Bandwidth> {
    let (n, q) = (w.nrows(), w.ncols());
    if n < 2 {
        return Err(Error::InvalidArgument("need n ≥ 2 for a bandwidth".into()));
    }
    let factor = (4.0 / (n as f64 * (q as f64 + 2.0))).powf(1.0 / (q as f64 + 4.0));
    let h = (0..q)
        .map(|j| {
            let col = w.column(j);
            let mean = col.mean();
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let sd = var.sqrt();
            if sd > 0.0 && sd.is_finite() {
                Ok(sd * factor)
            } else {
                Err(Error::DegenerateColumn(j))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Bandwidth::new(h)
}

/// How subject `i` is weighted at node `w`.
///
/// `Gaussian` is the estimator's kernel. `Constant` and `Indicator` exist to
/// reproduce the constant-coefficient and discrete-modifier special cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum KernelWeighting {
    Gaussian(Bandwidth),
    Constant(f64),
    Indicator,
}

impl KernelWeighting {
    pub fn weight(&self, wi: &[f64], node: &[f64]) -> f64 {
        match self {
            Self::Gaussian(bw) => gaussian_unchecked(wi.iter().zip(node).map(|(a, b)| a - b), bw),
            Self::Constant(c) => *c,
            Self::Indicator => {
                if wi == node {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn bandwidth(&self) -> Option<&Bandwidth> {
        match self {
            Self::Gaussian(bw) => Some(bw),
            _ => None,
        }
    }

    /// `K(Wᵢ − w)` for every subject.
    pub fn weights_at(&self, ds: &SurvivalDataset, node: &[f64]) -> Result<Vec<f64>> {
        if node.len() != ds.q() {
            return Err(Error::DimensionMismatch {
                expected: ds.q(),
                found: node.len(),
            });
        }
        if let Self::Gaussian(bw) = self {
            if bw.dim() != ds.q() {
                return Err(Error::DimensionMismatch {
                    expected: ds.q(),
                    found: bw.dim(),
                });
            }
        }
        let w = ds.w();
        let mut row = vec![0.0; ds.q()];
        Ok((0..ds.n())
            .map(|i| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = w[(i, j)];
                }
                self.weight(&row, node)
            })
            .collect())
    }

    /// `n × m` matrix of `K(Wᵢ − w_k)`.
    pub fn weight_matrix(&self, ds: &SurvivalDataset, nodes: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let mut k = DMatrix::zeros(ds.n(), nodes.len());
        for (c, node) in nodes.iter().enumerate() {
            let col = self.weights_at(ds, node)?;
            k.column_mut(c).copy_from_slice(&col);
        }
        Ok(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SurvivalRecord;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ds_with_w(ws: &[Vec<f64>]) -> SurvivalDataset {
        let recs = ws
            .iter()
            .enumerate()
            .map(|(i, w)| SurvivalRecord {
                time: 1.0 + i as f64,
                status: true,
                w: w.clone(),
                x: vec![1.0],
                z: vec![],
            })
            .collect();
        SurvivalDataset::new(recs).unwrap()
    }

    #[test]
    fn kernel_values_at_zero() {
        let one = Bandwidth::new(vec![1.0]).unwrap();
        assert_abs_diff_eq!(
            gaussian_kernel_weight(&[0.0], &one).unwrap(),
            0.398_942_280_4,
            epsilon = 1e-9
        );
        let two = Bandwidth::new(vec![2.0]).unwrap();
        assert_abs_diff_eq!(
            gaussian_kernel_weight(&[0.0], &two).unwrap(),
            0.199_471_140_2,
            epsilon = 1e-9
        );
        let ones = Bandwidth::new(vec![1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(
            gaussian_kernel_weight(&[0.0, 0.0], &ones).unwrap(),
            0.159_154_943_1,
            epsilon = 1e-9
        );
        assert!(matches!(
            gaussian_kernel_weight(&[0.0], &ones),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bandwidth_validation() {
        assert!(Bandwidth::new(vec![0.0]).is_err());
        assert!(Bandwidth::new(vec![f64::NAN]).is_err());
        assert!(Bandwidth::new(vec![]).is_err());
    }

    // Closed form evaluated independently: (4/300)^(1/5) and (4/400)^(1/6),
    // values from a 30-digit evaluation.
    #[test]
    fn silverman_closed_form() {
        let n = 100;
        // columns with unit sample sd: ±c alternating around 0, c = sqrt((n-1)/n)
        let c = ((n as f64 - 1.0) / n as f64).sqrt();
        let col: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { c } else { -c }).collect();
        let w1 = DMatrix::from_column_slice(n, 1, &col);
        let h = silverman_from_columns(&w1).unwrap();
        assert_abs_diff_eq!(h.values()[0], 0.421_684_606_3, epsilon = 1e-9);
        let mut both = col.clone();
        both.extend(col.iter().rev());
        let w2 = DMatrix::from_column_slice(n, 2, &both);
        let h = silverman_from_columns(&w2).unwrap();
        assert_abs_diff_eq!(h.values()[0], 0.464_158_883_4, epsilon = 1e-9);
        assert_abs_diff_eq!(h.values()[1], 0.464_158_883_4, epsilon = 1e-9);
    }

    #[test]
    fn silverman_rejects_constant_column() {
        let ds = ds_with_w(&[vec![1.0, 0.0], vec![1.0, 2.0], vec![1.0, 3.0]]);
        assert!(matches!(
            silverman_bandwidth(&ds),
            Err(Error::DegenerateColumn(0))
        ));
    }

    #[test]
    fn indicator_and_constant() {
        assert_eq!(KernelWeighting::Indicator.weight(&[1.0], &[1.0]), 1.0);
        assert_eq!(KernelWeighting::Indicator.weight(&[1.0], &[2.0]), 0.0);
        assert_eq!(KernelWeighting::Constant(3.0).weight(&[1.0], &[9.0]), 3.0);
    }

    #[test]
    fn kernel_integrates_to_one() {
        // importance sampling from N(0, (2h)^2) per axis
        let bw = Bandwidth::new(vec![0.3, 0.7]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let mut total = 0.0;
        for _ in 0..draws {
            let mut ratio = 1.0;
            let mut u = [0.0; 2];
            for (j, h) in bw.values().iter().enumerate() {
                let s = 2.0 * h;
                let z: f64 =
                    rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                u[j] = s * z;
                let proposal = (-0.5 * z * z).exp() / (s * (2.0 * PI).sqrt());
                ratio /= proposal;
            }
            total += gaussian_kernel_weight(&u, &bw).unwrap() * ratio;
        }
        let estimate = total / draws as f64;
        assert!((estimate - 1.0).abs() < 0.02, "{estimate}");
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric_and_peaked(u in prop::collection::vec(-3.0f64..3.0, 1..4), h in 0.05f64..2.0) {
            let bw = Bandwidth::uniform(h, u.len()).unwrap();
            let neg: Vec<f64> = u.iter().map(|v| -v).collect();
            let a = gaussian_kernel_weight(&u, &bw).unwrap();
            let b = gaussian_kernel_weight(&neg, &bw).unwrap();
            prop_assert_eq!(a, b);
            let zero = vec![0.0; u.len()];
            prop_assert!(gaussian_kernel_weight(&zero, &bw).unwrap() >= a);
        }

        #[test]
        fn silverman_scales_linearly(vals in prop::collection::vec(-5.0f64..5.0, 5..40), s in 0.1f64..10.0) {
            let ws: Vec<Vec<f64>> = vals.iter().map(|v| vec![*v]).collect();
            let scaled: Vec<Vec<f64>> = vals.iter().map(|v| vec![v * s]).collect();
            if let (Ok(a), Ok(b)) = (silverman_bandwidth(&ds_with_w(&ws)), silverman_bandwidth(&ds_with_w(&scaled))) {
                prop_assert!((b.values()[0] - s * a.values()[0]).abs() <= 1e-9 * b.values()[0]);
            }
        }
    }
}
