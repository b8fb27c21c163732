use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::estimators::lin_ying::{weighted_lin_ying, Covariates};
use crate::estimators::CoefficientSurface;
use crate::grid::EstimationGrid;
use crate::kernel::KernelWeighting;

/// Kernel-weighted fit at a single modifier value.
#[derive(Debug, Clone)]
pub struct LocalFit {
    pub w: Vec<f64>,
    pub beta: DVector<f64>,
    /// Local estimate of the `Z` effect (empty when `r = 0`).
    pub alpha: DVector<f64>,
    /// Robust sandwich covariance of `(β, α)` at `w`.
    pub covariance: DMatrix<f64>,
}

impl LocalFit {
    /// Trace of the `α` block of the covariance.
    pub fn alpha_variance_trace(&self, p: usize) -> f64 {
        let r = self.alpha.len();
        (0..r).map(|j| self.covariance[(p + j, p + j)]).sum()
    }
}

/// Local estimator `V(w)⁻¹ b(w)`: every subject carries weight `K(Wᵢ − w)`.
/// With `Z` present, `(β(w), α(w))` are fitted jointly.
pub fn local_kernel_fit(
    ds: &SurvivalDataset,
    w: &[f64],
    kernel: &KernelWeighting,
) -> Result<LocalFit> {
    let weights = kernel.weights_at(ds, w)?;
    if weights.iter().all(|k| *k == 0.0) {
        return Err(Error::SingularDenominator(format!(
            "no kernel mass near w = {w:?}; bandwidth too small"
        )));
    }
    let cov = Covariates::XZ.matrix(ds);
    let fit = weighted_lin_ying(ds, &weights, &cov)?;
    let p = ds.p();
    let covariance = fit
        .robust_covariance()
        .unwrap_or_else(|| DMatrix::from_element(cov.ncols(), cov.ncols(), f64::NAN));
    Ok(LocalFit {
        w: w.to_vec(),
        beta: fit.coef.rows(0, p).into_owned(),
        alpha: fit.coef.rows(p, ds.r()).into_owned(),
        covariance,
    })
}

/// `Σ ωᵢ α̂(Wᵢ) / Σ ωᵢ`.
pub fn local_alpha_aggregate(per_point: &[DVector<f64>], weights: &[f64]) -> Result<DVector<f64>> {
    let Some(first) = per_point.first() else {
        return Err(Error::InvalidArgument(
            "no local estimates to aggregate".into(),
        ));
    };
    if per_point.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: per_point.len(),
            found: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument(
            "aggregation weights must sum to a positive value".into(),
        ));
    }
    let mut acc = DVector::zeros(first.len());
    for (a, wt) in per_point.iter().zip(weights) {
        acc.axpy(*wt / total, a, 1.0);
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaWeighting {
    /// Inverse trace of each local `α` covariance, uniform if any is unusable.
    #[default]
    InverseVariance,
    Uniform,
}

/// The local method as a whole: `α` averaged over fits at every `Wᵢ`, `β`
/// from fits on an evaluation grid with interpolation in between.
#[derive(Debug, Clone)]
pub struct LocalMethodFit {
    pub grid: EstimationGrid,
    pub beta_grid: Vec<DVector<f64>>,
    pub alpha: DVector<f64>,
    pub skipped_subjects: usize,
}

impl CoefficientSurface for LocalMethodFit {
    fn beta_at(&self, w: &[f64]) -> Result<DVector<f64>> {
        self.grid.interpolate(&self.beta_grid, w)
    }
    fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }
}

pub fn fit_local_method(
    ds: &SurvivalDataset,
    kernel: &KernelWeighting,
    eval_grid: &EstimationGrid,
    weighting: AlphaWeighting,
) -> Result<LocalMethodFit> {
    let beta_grid = eval_grid
        .points()
        .par_iter()
        .map(|w| local_kernel_fit(ds, w, kernel).map(|f| f.beta))
        .collect::<Result<Vec<_>>>()?;

    let mut skipped = 0;
    let alpha = if ds.r() == 0 {
        DVector::zeros(0)
    } else {
        let fits: Vec<Option<LocalFit>> = (0..ds.n())
            .into_par_iter()
            .map(|i| local_kernel_fit(ds, &ds.w_row(i), kernel).ok())
            .collect();
        let ok: Vec<&LocalFit> = fits.iter().flatten().collect();
        skipped = ds.n() - ok.len();
        if ok.is_empty() {
            return Err(Error::SingularDenominator(
                "every local fit at the observed W failed".into(),
            ));
        }
        let alphas: Vec<DVector<f64>> = ok.iter().map(|f| f.alpha.clone()).collect();
        let inverse: Vec<f64> = ok
            .iter()
            .map(|f| 1.0 / f.alpha_variance_trace(ds.p()))
            .collect();
        let usable = inverse.iter().all(|v| v.is_finite() && *v > 0.0);
        let weights = match weighting {
            AlphaWeighting::InverseVariance if usable => inverse,
            _ => vec![1.0; ok.len()],
        };
        local_alpha_aggregate(&alphas, &weights)?
    };
    Ok(LocalMethodFit {
        grid: eval_grid.clone(),
        beta_grid,
        alpha,
        skipped_subjects: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SurvivalRecord;
    use crate::estimators::lin_ying::lin_ying;
    use crate::kernel::Bandwidth;

    fn two_subjects() -> SurvivalDataset {
        SurvivalDataset::new(vec![
            SurvivalRecord {
                time: 1.0,
                status: true,
                w: vec![0.5],
                x: vec![0.0],
                z: vec![],
            },
            SurvivalRecord {
                time: 2.0,
                status: true,
                w: vec![0.9],
                x: vec![1.0],
                z: vec![],
            },
        ])
        .unwrap()
    }

    #[test]
    fn constant_weights_reduce_to_lin_ying() {
        let ds = two_subjects();
        for w in [0.0, 0.5, 7.0] {
            let fit = local_kernel_fit(&ds, &[w], &KernelWeighting::Constant(1.0)).unwrap();
            assert!((fit.beta[0] + 1.0).abs() < 1e-12);
        }
        assert!((lin_ying(&ds, Covariates::X).unwrap()[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_bandwidth_far_away_is_singular() {
        let ds = two_subjects();
        let k = KernelWeighting::Gaussian(Bandwidth::new(vec![1e-3]).unwrap());
        assert!(matches!(
            local_kernel_fit(&ds, &[50.0], &k),
            Err(Error::SingularDenominator(_))
        ));
    }

    #[test]
    fn aggregate_examples() {
        let a = DVector::from_vec(vec![0.0]);
        let b = DVector::from_vec(vec![2.0]);
        assert_eq!(
            local_alpha_aggregate(&[a.clone(), b.clone()], &[1.0, 1.0]).unwrap()[0],
            1.0
        );
        assert_eq!(
            local_alpha_aggregate(&[a.clone(), b], &[3.0, 1.0]).unwrap()[0],
            0.5
        );
        let c = DVector::from_vec(vec![1.5, -2.0]);
        let same =
            local_alpha_aggregate(&[c.clone(), c.clone(), c.clone()], &[1.0, 5.0, 0.5]).unwrap();
        assert!((same - c).amax() < 1e-15);
        assert!(local_alpha_aggregate(&[a], &[0.0]).is_err());
    }
}
