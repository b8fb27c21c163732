//! Point estimators for additive hazards models with constant, discrete, and
//! kernel-smoothed varying coefficients.

pub mod cumhaz;
pub mod discrete;
pub mod global;
pub mod lin_ying;
pub mod local;
pub mod refit;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::grid::EstimationGrid;
use crate::kernel::{Bandwidth, KernelWeighting};

pub use cumhaz::{estimate_cumhaz, CumulativeHazard};
pub use discrete::{
    discrete_block_estimate, distinct_levels, expanded_covariates, DiscreteBlockFit,
};
pub use global::{
    assemble_at_points, assemble_global_system, solve_global, AssembledSystem, GlobalSolution,
};
pub use lin_ying::{lin_ying, lin_ying_with, weighted_lin_ying, Covariates, LinYingFit};
pub use local::{
    fit_local_method, local_alpha_aggregate, local_kernel_fit, AlphaWeighting, LocalFit,
    LocalMethodFit,
};
pub use refit::refit_alpha;

/// Anything that yields `β̂(w)` and a constant-effect vector, so fits of
/// different methods can be scored the same way.
pub trait CoefficientSurface {
    fn beta_at(&self, w: &[f64]) -> Result<DVector<f64>>;

    fn alpha(&self) -> &DVector<f64>;

    /// `β̂(w)ᵀx + α̂ᵀz`.
    fn linear_predictor(&self, w: &[f64], x: &[f64], z: &[f64]) -> Result<f64> {
        let beta = self.beta_at(w)?;
        let alpha = self.alpha();
        if beta.len() != x.len() || alpha.len() != z.len() {
            return Err(Error::DimensionMismatch {
                expected: beta.len() + alpha.len(),
                found: x.len() + z.len(),
            });
        }
        let xs: f64 = beta.iter().zip(x).map(|(b, v)| b * v).sum();
        let zs: f64 = alpha.iter().zip(z).map(|(a, v)| a * v).sum();
        Ok(xs + zs)
    }
}

/// Constant coefficients for both blocks.
#[derive(Debug, Clone)]
pub struct ConstantFit {
    pub beta: DVector<f64>,
    pub alpha: DVector<f64>,
}

impl ConstantFit {
    pub fn fit(ds: &SurvivalDataset) -> Result<Self> {
        let coef = lin_ying(ds, Covariates::XZ)?;
        Ok(Self {
            beta: coef.rows(0, ds.p()).into_owned(),
            alpha: coef.rows(ds.p(), ds.r()).into_owned(),
        })
    }
}

impl CoefficientSurface for ConstantFit {
    fn beta_at(&self, _w: &[f64]) -> Result<DVector<f64>> {
        Ok(self.beta.clone())
    }
    fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }
}

/// Options for [`fit_varying_coefficient`].
#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    /// Added to the diagonal of the joint system; zero means none.
    pub ridge: f64,
}

/// Result of the global kernel fit.
#[derive(Debug, Clone)]
pub struct VaryingCoefficientFit {
    pub grid: EstimationGrid,
    pub kernel: KernelWeighting,
    /// `β̂(wₖ)` in grid order.
    pub beta_grid: Vec<DVector<f64>>,
    /// `α̂` from the joint system.
    pub alpha_joint: DVector<f64>,
    /// `α̃` refitted with `β̂(Wᵢ)` held fixed; the reported constant effect.
    pub alpha_refit: DVector<f64>,
    pub cumhaz: CumulativeHazard,
    pub system_condition: f64,
    pub warnings: Vec<String>,
}

impl VaryingCoefficientFit {
    pub fn bandwidth(&self) -> Option<&Bandwidth> {
        self.kernel.bandwidth()
    }

    pub fn p(&self) -> usize {
        self.beta_grid.first().map_or(0, |b| b.len())
    }

    pub fn r(&self) -> usize {
        self.alpha_refit.len()
    }

    /// `β̂(Wᵢ)` for every subject, by interpolation on the grid.
    pub fn beta_at_subjects(&self, ds: &SurvivalDataset) -> Result<Vec<DVector<f64>>> {
        beta_at_subjects(&self.grid, &self.beta_grid, ds)
    }
}

impl CoefficientSurface for VaryingCoefficientFit {
    fn beta_at(&self, w: &[f64]) -> Result<DVector<f64>> {
        self.grid.interpolate(&self.beta_grid, w)
    }
    fn alpha(&self) -> &DVector<f64> {
        &self.alpha_refit
    }
}

pub(crate) fn beta_at_subjects(
    grid: &EstimationGrid,
    beta_grid: &[DVector<f64>],
    ds: &SurvivalDataset,
) -> Result<Vec<DVector<f64>>> {
    (0..ds.n())
        .map(|i| grid.interpolate(beta_grid, &ds.w_row(i)))
        .collect()
}

/// Global kernel fit: joint solve on the grid, `α̃` refit and `Λ̂`.
pub fn fit_varying_coefficient(
    ds: &SurvivalDataset,
    grid: &EstimationGrid,
    kernel: &KernelWeighting,
    options: &FitOptions,
) -> Result<VaryingCoefficientFit> {
    let sys = assemble_global_system(ds, grid, kernel)?;
    let sol = solve_global(&sys, options.ridge)?;
    if sol
        .beta_grid
        .iter()
        .any(|b| b.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::SingularSystem {
            condition: sol.condition,
            grid_points: Vec::new(),
        });
    }
    let at_subjects = beta_at_subjects(grid, &sol.beta_grid, ds)?;
    let alpha_refit = refit_alpha(ds, &at_subjects)?;
    let cumhaz = estimate_cumhaz(ds, &at_subjects, &alpha_refit)?;
    Ok(VaryingCoefficientFit {
        grid: grid.clone(),
        kernel: kernel.clone(),
        beta_grid: sol.beta_grid,
        alpha_joint: sol.alpha_joint,
        alpha_refit,
        cumhaz,
        system_condition: sol.condition,
        warnings: sys.warnings,
    })
}

/// `β̂(Wᵢ)` for a batch of modifier values, in parallel.
pub fn beta_at_many<S: CoefficientSurface + Sync>(
    fit: &S,
    ws: &[Vec<f64>],
) -> Result<Vec<DVector<f64>>> {
    ws.par_iter().map(|w| fit.beta_at(w)).collect()
}
