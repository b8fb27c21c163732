use nalgebra::{DMatrix, DVector};

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::linalg::{diag_scale, solve_psd};

/// Unweighted risk-set mean `Z̃(t) = Σ YᵢZᵢ / Σ Yᵢ`, one value per distinct time.
pub(crate) fn risk_mean_z(ds: &SurvivalDataset) -> Vec<DVector<f64>> {
    let tl = ds.timeline();
    let sums = tl.risk_sums(DVector::zeros(ds.r()), |i| ds.z_row(i));
    sums.iter()
        .zip(tl.at_risk())
        .map(|(s, &y)| s / y as f64)
        .collect()
}

/// `Σᵢ ∫ Yᵢ {Zᵢ − Z̃(t)}⊗² dt`.
pub(crate) fn refit_denominator(
    ds: &SurvivalDataset,
    zbar: &[DVector<f64>],
) -> (DMatrix<f64>, f64) {
    let tl = ds.timeline();
    let lens = tl.interval_lengths(ds.tau());
    let r = ds.r();
    let mut second = DMatrix::zeros(r, r);
    for i in 0..ds.n() {
        let z = ds.z_row(i);
        second += &z * z.transpose() * ds.exposure(i);
    }
    let mut den = second.clone();
    for (d, zb) in zbar.iter().enumerate() {
        if lens[d] > 0.0 {
            den -= zb * zb.transpose() * (lens[d] * tl.at_risk()[d] as f64);
        }
    }
    (den, diag_scale(&second))
}

/// Constant-effect coefficients with the varying part held fixed at
/// `β̂(Wᵢ)`:
///
/// ```text
/// α̃ = [Σᵢ ∫ Yᵢ {Zᵢ − Z̃}⊗² dt]⁻¹ Σᵢ ∫ {Zᵢ − Z̃} {dNᵢ − Yᵢ β̂(Wᵢ)ᵀXᵢ dt}
/// ```
///
/// Returns an empty vector when there is no `Z` block.
pub fn refit_alpha(
    ds: &SurvivalDataset,
    beta_at_subjects: &[DVector<f64>],
) -> Result<DVector<f64>> {
    let (n, r) = (ds.n(), ds.r());
    if beta_at_subjects.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: beta_at_subjects.len(),
        });
    }
    if r == 0 {
        return Ok(DVector::zeros(0));
    }
    if ds.n_counted_events() == 0 {
        return Err(Error::NoEvents);
    }
    let tl = ds.timeline();
    let lens = tl.interval_lengths(ds.tau());
    let zbar = risk_mean_z(ds);
    let offset: Vec<f64> = (0..n)
        .map(|i| beta_at_subjects[i].dot(&ds.x_row(i)))
        .collect();
    let offset_sums = tl.risk_sums(0.0, |i| offset[i]);

    let mut num = DVector::zeros(r);
    for i in 0..n {
        let z = ds.z_row(i);
        if ds.counts_event(i) {
            num += &z - &zbar[tl.slot(i)];
        }
        num -= z * (offset[i] * ds.exposure(i));
    }
    for (d, zb) in zbar.iter().enumerate() {
        if lens[d] > 0.0 {
            num += zb * (lens[d] * offset_sums[d]);
        }
    }
    let (den, scale) = refit_denominator(ds, &zbar);
    solve_psd(&den, &num, scale).ok_or_else(|| {
        Error::SingularDenominator("constant-effect covariates have no spread".into())
    })
}
