use nalgebra::{DMatrix, DVector};

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::linalg::{diag_scale, solve_psd};
use crate::stepfun::safe_ratio;

/// Which covariate block a constant-coefficient fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Covariates {
    X,
    Z,
    XZ,
}

impl Covariates {
    pub fn matrix(self, ds: &SurvivalDataset) -> DMatrix<f64> {
        match self {
            Self::X => ds.x().clone(),
            Self::Z => ds.z().clone(),
            Self::XZ => {
                let (n, p, r) = (ds.n(), ds.p(), ds.r());
                let mut m = DMatrix::zeros(n, p + r);
                m.columns_mut(0, p).copy_from(ds.x());
                m.columns_mut(p, r).copy_from(ds.z());
                m
            }
        }
    }
}

/// Pieces of a (weighted) additive-hazards fit with constant coefficients.
#[derive(Debug, Clone)]
pub struct LinYingFit {
    pub coef: DVector<f64>,
    /// `Σᵢ ωᵢ ∫ Yᵢ (Cᵢ − C̄)⊗² dt`
    pub denominator: DMatrix<f64>,
    /// `Σᵢ ωᵢ ∫ (Cᵢ − C̄) dNᵢ`
    pub numerator: DVector<f64>,
    /// `Σᵢ ωᵢ² ∫ (Cᵢ − C̄)⊗² dNᵢ`, the meat of the robust variance
    pub meat: DMatrix<f64>,
}

impl LinYingFit {
    /// Robust sandwich `A⁻¹ B A⁻¹`.
    pub fn robust_covariance(&self) -> Option<DMatrix<f64>> {
        let inv = self.denominator.clone().try_inverse()?;
        Some(&inv * &self.meat * &inv)
    }
}

/// Closed-form constant-coefficient estimator on the chosen block.
pub fn lin_ying(ds: &SurvivalDataset, covariates: Covariates) -> Result<DVector<f64>> {
    lin_ying_with(ds, &covariates.matrix(ds)).map(|f| f.coef)
}

/// Constant-coefficient estimator on an arbitrary `n × d` covariate matrix.
pub fn lin_ying_with(ds: &SurvivalDataset, cov: &DMatrix<f64>) -> Result<LinYingFit> {
    weighted_lin_ying(ds, &vec![1.0; ds.n()], cov)
}

/// Lin–Ying estimator with subject weights `ωᵢ` attached to every term:
/// `C̄(t) = Σ ωᵢYᵢCᵢ / Σ ωᵢYᵢ` and both the `dt` and `dN` integrals carry `ωᵢ`.
pub fn weighted_lin_ying(
    ds: &SurvivalDataset,
    weights: &[f64],
    cov: &DMatrix<f64>,
) -> Result<LinYingFit> {
    let (n, d) = (ds.n(), cov.ncols());
    if cov.nrows() != n || weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: cov.nrows().min(weights.len()),
        });
    }
    if ds.n_counted_events() == 0 {
        return Err(Error::NoEvents);
    }
    let tl = ds.timeline();
    let lens = tl.interval_lengths(ds.tau());
    let row = |i: usize| cov.row(i).transpose();

    let mass = tl.risk_sums(0.0, |i| weights[i]);
    let sums = tl.risk_sums(DVector::zeros(d), |i| row(i) * weights[i]);
    let means: Vec<DVector<f64>> = sums
        .iter()
        .zip(&mass)
        .enumerate()
        .map(|(k, (s, &m))| safe_ratio(s, m).ok_or(Error::DivisionByNonzeroOverZero(tl.times()[k])))
        .collect::<Result<_>>()?;

    let mut second = DMatrix::zeros(d, d);
    let mut numerator = DVector::zeros(d);
    let mut meat = DMatrix::zeros(d, d);
    for i in 0..n {
        let ci = row(i);
        second += &ci * ci.transpose() * (weights[i] * ds.exposure(i));
        if ds.counts_event(i) {
            let centered = &ci - &means[tl.slot(i)];
            numerator.axpy(weights[i], &centered, 1.0);
            meat += &centered * centered.transpose() * (weights[i] * weights[i]);
        }
    }
    let mut denominator = second.clone();
    for ((len, m), mean) in lens.iter().zip(&mass).zip(&means) {
        if *len > 0.0 {
            denominator -= mean * mean.transpose() * (len * m);
        }
    }
    if weights.iter().all(|w| *w == 0.0) {
        return Err(Error::SingularDenominator(
            "all subject weights vanish".into(),
        ));
    }
    let coef = solve_psd(&denominator, &numerator, diag_scale(&second)).ok_or_else(|| {
        Error::SingularDenominator("covariates have no spread over the risk sets".into())
    })?;
    Ok(LinYingFit {
        coef,
        denominator,
        numerator,
        meat,
    })
}
