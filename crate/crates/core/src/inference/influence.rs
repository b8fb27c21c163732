use log::warn;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::estimators::VaryingCoefficientFit;
use crate::grid::EstimationGrid;
use crate::kernel::KernelWeighting;
use crate::linalg::{diag_scale, inverse_psd};
use crate::rng::stream_rng;
use crate::stepfun::safe_ratio;

/// One vector of standard normal multipliers `ψ₁, …, ψₙ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationDraw {
    pub psi: Vec<f64>,
    pub seed: u64,
}

impl PerturbationDraw {
    /// Draw number `index` of the stream `stream` under `seed`.
    pub fn generate(n: usize, seed: u64, stream: u64, index: u64) -> Self {
        let mut rng = stream_rng(seed, stream, index);
        let psi = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        Self { psi, seed }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            psi: vec![0.0; n],
            seed: 0,
        }
    }
}

/// Quantities shared by every evaluation point: grid-summed kernel weights
/// `ωᵢ = Σₗ K_H(Wᵢ − wₗ)`, their risk sums, `Z̄(t)`, and the inverse of the
/// unscaled `V_αα`.
#[derive(Debug, Clone)]
pub struct InfluenceContext<'a> {
    ds: &'a SurvivalDataset,
    kernel: KernelWeighting,
    omega: Vec<f64>,
    mass: Vec<f64>,
    zbar: Vec<DVector<f64>>,
    lens: Vec<f64>,
    vaa_inv: DMatrix<f64>,
}

impl<'a> InfluenceContext<'a> {
    pub fn new(
        ds: &'a SurvivalDataset,
        grid: &EstimationGrid,
        kernel: &KernelWeighting,
    ) -> Result<Self> {
        let kmat = kernel.weight_matrix(ds, &grid.points())?;
        let omega = (0..ds.n()).map(|i| kmat.row(i).sum()).collect();
        Self::from_weights(ds, kernel.clone(), omega)
    }

    pub fn for_fit(ds: &'a SurvivalDataset, fit: &VaryingCoefficientFit) -> Result<Self> {
        Self::new(ds, &fit.grid, &fit.kernel)
    }

    /// Context with explicit subject weights `ωᵢ`.
    pub fn from_weights(
        ds: &'a SurvivalDataset,
        kernel: KernelWeighting,
        omega: Vec<f64>,
    ) -> Result<Self> {
        let r = ds.r();
        let tl = ds.timeline();
        let lens = tl.interval_lengths(ds.tau());
        let mass = tl.risk_sums(0.0, |i| omega[i]);
        let zsum = tl.risk_sums(DVector::zeros(r), |i| ds.z_row(i) * omega[i]);
        let zbar: Vec<DVector<f64>> = zsum
            .iter()
            .zip(&mass)
            .enumerate()
            .map(|(d, (s, &m))| {
                safe_ratio(s, m).ok_or(Error::DivisionByNonzeroOverZero(tl.times()[d]))
            })
            .collect::<Result<_>>()?;
        let mut second = DMatrix::zeros(r, r);
        for i in 0..ds.n() {
            let z = ds.z_row(i);
            second += &z * z.transpose() * (omega[i] * ds.exposure(i));
        }
        let mut vaa = second.clone();
        for d in 0..tl.len() {
            if lens[d] > 0.0 {
                vaa -= &zbar[d] * zbar[d].transpose() * (lens[d] * mass[d]);
            }
        }
        let vaa_inv = inverse_psd(&vaa, diag_scale(&second)).ok_or_else(|| {
            Error::SingularDenominator("constant-effect block of the joint system".into())
        })?;
        Ok(Self {
            ds,
            kernel,
            omega,
            mass,
            zbar,
            lens,
            vaa_inv,
        })
    }

    pub fn dataset(&self) -> &SurvivalDataset {
        self.ds
    }

    /// Influence vectors at `w` under the context's kernel.
    pub fn at(&self, w: &[f64]) -> Result<InfluenceBasis> {
        let k = self.kernel.weights_at(self.ds, w)?;
        self.at_with_weights(w, &k)
    }

    /// Influence vectors at `w` given the local weights `K_H(Wᵢ − w)`.
    pub fn at_with_weights(&self, w: &[f64], k: &[f64]) -> Result<InfluenceBasis> {
        let ds = self.ds;
        let (n, p, r) = (ds.n(), ds.p(), ds.r());
        let nf = n as f64;
        let tl = ds.timeline();

        let mut dmat = DMatrix::zeros(p, p);
        let mut cross = DMatrix::zeros(p, r);
        for i in 0..n {
            if k[i] == 0.0 {
                continue;
            }
            let x = ds.x_row(i);
            let e = ds.exposure(i) * k[i];
            dmat += &x * x.transpose() * e;
            if r > 0 {
                cross += &x * ds.z_row(i).transpose() * e;
            }
        }
        dmat /= nf;
        let d_inv = inverse_psd(&dmat, diag_scale(&dmat))
            .filter(|_| dmat.iter().any(|v| *v != 0.0))
            .ok_or_else(|| Error::SingularD(w.to_vec()))?;

        let kx = tl.risk_sums(DVector::zeros(p), |i| ds.x_row(i) * k[i]);
        let xbar: Vec<DVector<f64>> = kx
            .iter()
            .zip(&self.mass)
            .enumerate()
            .map(|(d, (s, &m))| {
                safe_ratio(s, m).ok_or(Error::DivisionByNonzeroOverZero(tl.times()[d]))
            })
            .collect::<Result<_>>()?;
        let projection = if r > 0 {
            for d in 0..tl.len() {
                if self.lens[d] > 0.0 {
                    cross -= &kx[d] * self.zbar[d].transpose() * self.lens[d];
                }
            }
            &cross * &self.vaa_inv
        } else {
            DMatrix::zeros(p, 0)
        };

        let mut u = DMatrix::zeros(p, n);
        let mut any_event = false;
        for i in 0..n {
            if !ds.counts_event(i) {
                continue;
            }
            any_event = true;
            let d = tl.slot(i);
            let mut eta = ds.x_row(i) * k[i] - &xbar[d] * self.omega[i];
            if r > 0 {
                eta -= &projection * ((ds.z_row(i) - &self.zbar[d]) * self.omega[i]);
            }
            u.set_column(i, &(&d_inv * eta / nf));
        }
        if !any_event {
            warn!("no events: perturbation and sandwich terms vanish");
        }
        Ok(InfluenceBasis {
            w: w.to_vec(),
            d: dmat,
            u,
        })
    }
}

/// Per-subject terms `uᵢ = Dₙ(w)⁻¹ ηᵢ(w) / n` of the linear expansion of
/// `β̂(w)`; `ηᵢ` is the integrand of the perturbed process evaluated at `Tᵢ`
/// (zero unless subject `i` has a counted event).
#[derive(Debug, Clone)]
pub struct InfluenceBasis {
    pub w: Vec<f64>,
    /// `Dₙ(w) = n⁻¹ Σᵢ K_H(Wᵢ − w) ∫Yᵢ dt XᵢXᵢᵀ`
    pub d: DMatrix<f64>,
    /// `p × n`, column `i` is `uᵢ`.
    pub u: DMatrix<f64>,
}

impl InfluenceBasis {
    /// `n⁻² Dₙ⁻¹ [Σᵢ ηᵢηᵢᵀ] Dₙ⁻¹`.
    pub fn sandwich(&self) -> DMatrix<f64> {
        let s = &self.u * self.u.transpose();
        (&s + s.transpose()) * 0.5
    }

    /// `Dₙ(w)⁻¹ M̃ₙ(w)` for the given multipliers.
    pub fn perturb(&self, psi: &[f64]) -> Result<DVector<f64>> {
        if psi.len() != self.u.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.u.ncols(),
                found: psi.len(),
            });
        }
        Ok(&self.u * DVector::from_column_slice(psi))
    }

    pub fn standard_errors(&self) -> DVector<f64> {
        self.sandwich().diagonal().map(|v| v.max(0.0).sqrt())
    }
}

/// Sandwich covariance of `β̂(w)` for a global fit.
pub fn sandwich_variance(
    ds: &SurvivalDataset,
    fit: &VaryingCoefficientFit,
    w: &[f64],
) -> Result<DMatrix<f64>> {
    Ok(InfluenceContext::for_fit(ds, fit)?.at(w)?.sandwich())
}

/// One perturbation `Dₙ(w)⁻¹ M̃ₙ(w)` of `β̂(w)`.
pub fn perturb_beta(
    ds: &SurvivalDataset,
    fit: &VaryingCoefficientFit,
    w: &[f64],
    draw: &PerturbationDraw,
) -> Result<DVector<f64>> {
    InfluenceContext::for_fit(ds, fit)?
        .at(w)?
        .perturb(&draw.psi)
}
