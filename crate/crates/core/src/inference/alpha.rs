use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::estimators::refit::{refit_denominator, risk_mean_z};
use crate::estimators::VaryingCoefficientFit;
use crate::inference::influence::{InfluenceContext, PerturbationDraw};
use crate::linalg::inverse_psd;
use crate::rng::streams;

/// Linear map `ψ ↦ perturbed α̃ − α̃` (an `r × n` matrix).
///
/// The perturbed expansion of the refitted constant effect is
///
/// ```text
/// A⁻¹ [ Σᵢ ∫ {Zᵢ − Z̃} dNᵢ ψᵢ − Σᵢ ∫ {Zᵢ − Z̃} Yᵢ δβ(Wᵢ)ᵀXᵢ dt ]
/// ```
///
/// with `A = Σᵢ ∫ Yᵢ {Zᵢ − Z̃}⊗² dt` and `δβ` the perturbation of `β̂`, taken
/// at the grid nodes and interpolated to each `Wᵢ` like `β̂` itself. Both
/// terms share the same `ψ`.
pub fn alpha_perturbation_map(
    ds: &SurvivalDataset,
    fit: &VaryingCoefficientFit,
) -> Result<DMatrix<f64>> {
    let (n, p, r) = (ds.n(), ds.p(), ds.r());
    if r == 0 {
        return Err(Error::InvalidArgument(
            "no constant-effect covariates".into(),
        ));
    }
    let tl = ds.timeline();
    let lens = tl.interval_lengths(ds.tau());
    let zbar = risk_mean_z(ds);
    let (den, scale) = refit_denominator(ds, &zbar);
    let den_inv = inverse_psd(&den, scale).ok_or_else(|| {
        Error::SingularDenominator("constant-effect covariates have no spread".into())
    })?;

    // ∫₀^{Tᵢ∧τ} Z̃(t) dt at every distinct time
    let mut cumulative = Vec::with_capacity(tl.len());
    let mut acc = DVector::zeros(r);
    for d in 0..tl.len() {
        acc += &zbar[d] * lens[d];
        cumulative.push(acc.clone());
    }

    let mut map = DMatrix::zeros(r, n);
    for i in 0..n {
        if ds.counts_event(i) {
            map.set_column(i, &(ds.z_row(i) - &zbar[tl.slot(i)]));
        }
    }

    // G_k = Σᵢ λᵢₖ cᵢ Xᵢᵀ where λᵢₖ are interpolation weights of Wᵢ
    let m = fit.grid.len();
    let mut g = vec![DMatrix::<f64>::zeros(r, p); m];
    for i in 0..n {
        let c = ds.z_row(i) * ds.exposure(i) - &cumulative[tl.slot(i)];
        let cx = &c * ds.x_row(i).transpose();
        for (k, weight) in fit.grid.interpolation_weights(&ds.w_row(i))? {
            g[k] += &cx * weight;
        }
    }
    let ctx = InfluenceContext::for_fit(ds, fit)?;
    let nodes = fit.grid.points();
    let offsets = (0..m)
        .into_par_iter()
        .map(|k| ctx.at(&nodes[k]).map(|basis| &g[k] * basis.u))
        .collect::<Result<Vec<_>>>()?;
    for o in offsets {
        map -= o;
    }
    Ok(den_inv * map)
}

/// Standard errors of `α̃` from `replicates` perturbation draws.
pub fn perturb_alpha_se(
    ds: &SurvivalDataset,
    fit: &VaryingCoefficientFit,
    replicates: usize,
    seed: u64,
) -> Result<DVector<f64>> {
    if replicates < 2 {
        return Err(Error::TooFewReplicates(replicates));
    }
    let map = alpha_perturbation_map(ds, fit)?;
    let draws: Vec<DVector<f64>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let draw = PerturbationDraw::generate(ds.n(), seed, streams::ALPHA_SE, b as u64);
            &map * DVector::from_column_slice(&draw.psi)
        })
        .collect();
    Ok(sample_sd(&draws))
}

/// Per-component sample standard deviation (denominator `B − 1`).
pub(crate) fn sample_sd(draws: &[DVector<f64>]) -> DVector<f64> {
    let b = draws.len() as f64;
    let r = draws[0].len();
    let mut mean = DVector::zeros(r);
    for d in draws {
        mean += d;
    }
    mean /= b;
    let mut ss = DVector::zeros(r);
    for d in draws {
        let dev = d - &mean;
        ss += dev.component_mul(&dev);
    }
    (ss / (b - 1.0)).map(f64::sqrt)
}
