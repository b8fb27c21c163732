//! Global kernel estimator: one joint linear system over all grid points.
//!
//! For grid nodes `w₁, …, w_m` with `Kᵢₖ = K_H(Wᵢ − wₖ)` and `ωᵢ = Σⱼ Kᵢⱼ`:
//!
//! ```text
//! X̄(t, wₖ)  = Σᵢ Kᵢₖ Yᵢ(t) Xᵢ / Σᵢ ωᵢ Yᵢ(t)
//! Z̄(t)      = Σᵢ ωᵢ Yᵢ(t) Zᵢ / Σᵢ ωᵢ Yᵢ(t)
//! b(wₖ)     = (nm)⁻¹ Σᵢ ∫ {Kᵢₖ Xᵢ − ωᵢ X̄(t, wₖ)} dNᵢ
//! V(wₖ,wₗ)  = (nm)⁻¹ [ I(k=l) Σᵢ Kᵢₖ ∫Yᵢ dt XᵢXᵢᵀ − ∫ Σᵢ ωᵢYᵢ X̄(t,wₖ) X̄(t,wₗ)ᵀ dt ]
//! b_α       = (nm)⁻¹ Σᵢ ∫ ωᵢ {Zᵢ − Z̄(t)} dNᵢ
//! V_αα      = (nm)⁻¹ Σᵢ ∫ ωᵢ Yᵢ {Zᵢ − Z̄(t)}⊗² dt
//! V_βα(wₖ)  = (nm)⁻¹ Σᵢ ∫ Kᵢₖ Yᵢ Xᵢ {Zᵢ − Z̄(t)}ᵀ dt
//! ```
//!
//! All time integrals are finite sums over the distinct observed times.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::grid::EstimationGrid;
use crate::kernel::KernelWeighting;
use crate::linalg::{Spectrum, CONDITION_LIMIT};
use crate::stepfun::safe_ratio;

/// The symmetric system of order `mp + r` and its right-hand side.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub nodes: Vec<Vec<f64>>,
    pub p: usize,
    pub r: usize,
    /// The `I(wₖ = wₗ)` term of each diagonal `V(wₖ, wₖ)` block.
    pub diagonal_terms: Vec<DMatrix<f64>>,
    pub warnings: Vec<String>,
}

impl AssembledSystem {
    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    pub fn order(&self) -> usize {
        self.m() * self.p + self.r
    }

    /// Block `V(wₖ, wₗ)`.
    pub fn v_block(&self, k: usize, l: usize) -> DMatrix<f64> {
        let p = self.p;
        self.matrix.view((k * p, l * p), (p, p)).into_owned()
    }

    /// `‖M − Mᵀ‖∞ / ‖M‖∞`.
    pub fn asymmetry(&self) -> f64 {
        let diff = (&self.matrix - self.matrix.transpose()).amax();
        let size = self.matrix.amax();
        if size == 0.0 {
            0.0
        } else {
            diff / size
        }
    }
}

/// Assembles the joint system on `grid`.
pub fn assemble_global_system(
    ds: &SurvivalDataset,
    grid: &EstimationGrid,
    kernel: &KernelWeighting,
) -> Result<AssembledSystem> {
    if grid.dim() != ds.q() {
        return Err(Error::DimensionMismatch {
            expected: ds.q(),
            found: grid.dim(),
        });
    }
    let mut sys = assemble_at_points(ds, &grid.points(), kernel)?;
    sys.warnings.extend(sparse_cell_warnings(ds, grid));
    Ok(sys)
}

/// Assembly on an arbitrary node list; duplicate nodes are allowed here and
/// produce a singular system.
pub fn assemble_at_points(
    ds: &SurvivalDataset,
    nodes: &[Vec<f64>],
    kernel: &KernelWeighting,
) -> Result<AssembledSystem> {
    let (n, p, r, m) = (ds.n(), ds.p(), ds.r(), nodes.len());
    if m == 0 {
        return Err(Error::InvalidGrid("no grid points".into()));
    }
    if ds.n_counted_events() == 0 {
        return Err(Error::NoEvents);
    }
    let kmat = kernel.weight_matrix(ds, nodes)?;
    let omega: Vec<f64> = (0..n).map(|i| kmat.row(i).sum()).collect();
    let tl = ds.timeline();
    let lens = tl.interval_lengths(ds.tau());
    let times = tl.times();

    // risk sums: S(t) = Σ ωY, A(t) = Σ Y X Kᵀ (p × m), B(t) = Σ ωY Z
    let mass = tl.risk_sums(0.0, |i| omega[i]);
    let xk = tl.risk_sums(DMatrix::zeros(p, m), |i| ds.x_row(i) * kmat.row(i));
    let zw = tl.risk_sums(DVector::zeros(r), |i| ds.z_row(i) * omega[i]);
    let xbar: Vec<DMatrix<f64>> = xk
        .iter()
        .zip(&mass)
        .enumerate()
        .map(|(d, (a, &s))| safe_ratio(a, s).ok_or(Error::DivisionByNonzeroOverZero(times[d])))
        .collect::<Result<_>>()?;
    let zbar: Vec<DVector<f64>> = zw
        .iter()
        .zip(&mass)
        .enumerate()
        .map(|(d, (b, &s))| safe_ratio(b, s).ok_or(Error::DivisionByNonzeroOverZero(times[d])))
        .collect::<Result<_>>()?;
    let active: Vec<usize> = (0..tl.len())
        .filter(|&d| lens[d] > 0.0 && mass[d] > 0.0)
        .collect();

    // diagonal I(k = l) terms and the X–Z product moments
    let mut diagonal_terms = vec![DMatrix::zeros(p, p); m];
    let mut xz_moment = vec![DMatrix::zeros(p, r); m];
    let mut zz = DMatrix::zeros(r, r);
    let mut rhs = DVector::zeros(m * p + r);
    for i in 0..n {
        let x = ds.x_row(i);
        let z = ds.z_row(i);
        let e = ds.exposure(i);
        let xx = &x * x.transpose() * e;
        let xz = &x * z.transpose() * e;
        for k in 0..m {
            let kik = kmat[(i, k)];
            if kik != 0.0 {
                diagonal_terms[k] += &xx * kik;
                xz_moment[k] += &xz * kik;
            }
        }
        zz += &z * z.transpose() * (omega[i] * e);
        if ds.counts_event(i) {
            let d = tl.slot(i);
            for k in 0..m {
                let contrib = &x * kmat[(i, k)] - xbar[d].column(k) * omega[i];
                let mut blk = rhs.rows_mut(k * p, p);
                blk += contrib;
            }
            let mut blk = rhs.rows_mut(m * p, r);
            blk += (&z - &zbar[d]) * omega[i];
        }
    }

    // row-blocks of the β part in parallel; each block sums over time in a fixed order
    let beta_rows: Vec<(DMatrix<f64>, DMatrix<f64>)> = (0..m)
        .into_par_iter()
        .map(|k| {
            let mut row = DMatrix::zeros(p, m * p);
            let mut cross = xz_moment[k].clone();
            for &d in &active {
                let c = lens[d] * mass[d];
                let xk = xbar[d].column(k);
                for l in 0..m {
                    let mut blk = row.view_mut((0, l * p), (p, p));
                    blk -= xk * xbar[d].column(l).transpose() * c;
                }
                if r > 0 {
                    cross -= xk * zbar[d].transpose() * c;
                }
            }
            // I(wₖ = wₗ) compares node values, so duplicated nodes share the term
            for l in 0..m {
                if nodes[l] == nodes[k] {
                    let mut blk = row.view_mut((0, l * p), (p, p));
                    blk += &diagonal_terms[k];
                }
            }
            (row, cross)
        })
        .collect();
    for &d in &active {
        zz -= &zbar[d] * zbar[d].transpose() * (lens[d] * mass[d]);
    }

    let order = m * p + r;
    let mut matrix = DMatrix::zeros(order, order);
    for (k, (row, cross)) in beta_rows.iter().enumerate() {
        matrix.view_mut((k * p, 0), (p, m * p)).copy_from(row);
        matrix.view_mut((k * p, m * p), (p, r)).copy_from(cross);
        matrix
            .view_mut((m * p, k * p), (r, p))
            .copy_from(&cross.transpose());
    }
    matrix.view_mut((m * p, m * p), (r, r)).copy_from(&zz);

    let scale = 1.0 / (n as f64 * m as f64);
    matrix *= scale;
    rhs *= scale;
    for t in &mut diagonal_terms {
        *t *= scale;
    }
    Ok(AssembledSystem {
        matrix,
        rhs,
        nodes: nodes.to_vec(),
        p,
        r,
        diagonal_terms,
        warnings: Vec::new(),
    })
}

/// Flags adjacent grid nodes with (almost) no observed `W` between them, the
/// usual symptom of a grid too dense for the bandwidth.
fn sparse_cell_warnings(ds: &SurvivalDataset, grid: &EstimationGrid) -> Vec<String> {
    let n = ds.n() as f64;
    let mut out = Vec::new();
    for (j, axis) in grid.axes().iter().enumerate() {
        let col = ds.w().column(j);
        for pair in axis.windows(2) {
            let inside = col
                .iter()
                .filter(|&&v| v >= pair[0] && v <= pair[1])
                .count() as f64;
            if inside / n < 1e-3 {
                let msg = format!(
                    "axis {j}: no data between grid nodes {} and {}; grid may be too dense",
                    pair[0], pair[1]
                );
                warn!("{msg}");
                out.push(msg);
            }
        }
    }
    out
}

/// Solution of the joint system.
#[derive(Debug, Clone)]
pub struct GlobalSolution {
    pub beta_grid: Vec<DVector<f64>>,
    pub alpha_joint: DVector<f64>,
    pub condition: f64,
}

/// Solves the assembled system, optionally adding `ridge · I`.
pub fn solve_global(sys: &AssembledSystem, ridge: f64) -> Result<GlobalSolution> {
    let mut matrix = sys.matrix.clone();
    if ridge > 0.0 {
        for k in 0..matrix.nrows() {
            matrix[(k, k)] += ridge;
        }
    }
    let spec = Spectrum::of(&matrix);
    let condition = spec.condition();
    let singular = |condition: f64| {
        let p = sys.p;
        let dir = &spec.weakest_direction;
        let norms: Vec<f64> = (0..sys.m()).map(|k| dir.rows(k * p, p).norm()).collect();
        let top = norms.iter().copied().fold(0.0, f64::max);
        let grid_points = (0..sys.m())
            .filter(|&k| norms[k] >= 0.5 * top && top > 0.0)
            .collect();
        Error::SingularSystem {
            condition,
            grid_points,
        }
    };
    if !(condition < CONDITION_LIMIT) {
        return Err(singular(condition));
    }
    let sol = matrix
        .lu()
        .solve(&sys.rhs)
        .ok_or_else(|| singular(f64::INFINITY))?;
    let p = sys.p;
    Ok(GlobalSolution {
        beta_grid: (0..sys.m())
            .map(|k| sol.rows(k * p, p).into_owned())
            .collect(),
        alpha_joint: sol.rows(sys.m() * p, sys.r).into_owned(),
        condition,
    })
}
