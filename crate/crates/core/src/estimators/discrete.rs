use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::linalg::{diag_scale, solve_psd};

/// Varying coefficients for a modifier taking finitely many values.
#[derive(Debug, Clone)]
pub struct DiscreteBlockFit {
    pub levels: Vec<Vec<f64>>,
    pub beta: Vec<DVector<f64>>,
    pub alpha: DVector<f64>,
    pub warnings: Vec<String>,
}

/// Distinct rows of `W`, sorted lexicographically.
pub fn distinct_levels(ds: &SurvivalDataset) -> Vec<Vec<f64>> {
    let mut levels: Vec<Vec<f64>> = (0..ds.n()).map(|i| ds.w_row(i)).collect();
    levels.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    levels.dedup();
    levels
}

/// Block estimator for discrete `W`: the constant-coefficient estimator on
/// `B = (I(W = w₁)Xᵀ, …, I(W = w_m)Xᵀ)ᵀ`, written group by group. Any `Z`
/// block enters with a constant effect.
///
/// `levels` defaults to the distinct observed values of `W`.
pub fn discrete_block_estimate(
    ds: &SurvivalDataset,
    levels: Option<Vec<Vec<f64>>>,
) -> Result<DiscreteBlockFit> {
    let levels = levels.unwrap_or_else(|| distinct_levels(ds));
    let (n, p, r, m) = (ds.n(), ds.p(), ds.r(), levels.len());
    if ds.n_counted_events() == 0 {
        return Err(Error::NoEvents);
    }
    let group: Vec<Option<usize>> = (0..n)
        .map(|i| {
            let w = ds.w_row(i);
            levels.iter().position(|l| *l == w)
        })
        .collect();

    let tl = ds.timeline();
    let lens = tl.interval_lengths(ds.tau());
    let nf = n as f64;
    let big = m * p + r;

    // group risk sums of X (stacked m·p) and Z, and the total risk set
    let at_risk: Vec<f64> = tl.at_risk().iter().map(|&y| y as f64).collect();
    let xsum = tl.risk_sums(DVector::zeros(m * p), |i| {
        let mut v = DVector::zeros(m * p);
        if let Some(k) = group[i] {
            v.rows_mut(k * p, p).copy_from(&ds.x_row(i));
        }
        v
    });
    let zsum = tl.risk_sums(DVector::zeros(r), |i| ds.z_row(i));
    let xbar: Vec<DVector<f64>> = xsum.iter().zip(&at_risk).map(|(s, y)| s / *y).collect();
    let zbar: Vec<DVector<f64>> = zsum.iter().zip(&at_risk).map(|(s, y)| s / *y).collect();

    let mut vmat = DMatrix::zeros(big, big);
    let mut rhs = DVector::zeros(big);
    let mut events_per_group = vec![0usize; m];
    for i in 0..n {
        let x = ds.x_row(i);
        let z = ds.z_row(i);
        let e = ds.exposure(i);
        if let Some(k) = group[i] {
            let mut blk = vmat.view_mut((k * p, k * p), (p, p));
            blk += &x * x.transpose() * e;
            let mut cross = vmat.view_mut((k * p, m * p), (p, r));
            cross += &x * z.transpose() * e;
        }
        let mut zz = vmat.view_mut((m * p, m * p), (r, r));
        zz += &z * z.transpose() * e;
        if ds.counts_event(i) {
            let d = tl.slot(i);
            if let Some(k) = group[i] {
                events_per_group[k] += 1;
                let mut b = rhs.rows_mut(k * p, p);
                b += &x;
            }
            let mut xb = rhs.rows_mut(0, m * p);
            xb -= &xbar[d];
            let mut zb = rhs.rows_mut(m * p, r);
            zb += &z - &zbar[d];
        }
    }
    let scale = diag_scale(&vmat);
    for d in 0..tl.len() {
        if lens[d] == 0.0 {
            continue;
        }
        let c = lens[d] * at_risk[d];
        let mut stacked = DVector::zeros(big);
        stacked.rows_mut(0, m * p).copy_from(&xbar[d]);
        stacked.rows_mut(m * p, r).copy_from(&zbar[d]);
        vmat -= &stacked * stacked.transpose() * c;
    }
    // Z–X cross blocks live in the upper triangle; mirror them
    for row in 0..big {
        for col in 0..row {
            if col < m * p && row >= m * p {
                vmat[(row, col)] = vmat[(col, row)];
            }
        }
    }
    vmat /= nf;
    rhs /= nf;

    let mut warnings = Vec::new();
    for (k, &count) in events_per_group.iter().enumerate() {
        if count == 0 {
            let msg = format!("group {k} (W = {:?}) has no events", levels[k]);
            warn!("{msg}");
            warnings.push(msg);
        }
    }
    let sol = solve_psd(&vmat, &rhs, scale / nf).ok_or_else(|| {
        Error::SingularDenominator("block matrix is singular (empty or degenerate group)".into())
    })?;
    let beta = (0..m).map(|k| sol.rows(k * p, p).into_owned()).collect();
    let alpha = sol.rows(m * p, r).into_owned();
    Ok(DiscreteBlockFit {
        levels,
        beta,
        alpha,
        warnings,
    })
}

/// Expanded covariate `B` (with `Z` appended) for the given levels.
pub fn expanded_covariates(ds: &SurvivalDataset, levels: &[Vec<f64>]) -> DMatrix<f64> {
    let (n, p, r, m) = (ds.n(), ds.p(), ds.r(), levels.len());
    let mut b = DMatrix::zeros(n, m * p + r);
    for i in 0..n {
        let w = ds.w_row(i);
        if let Some(k) = levels.iter().position(|l| *l == w) {
            for j in 0..p {
                b[(i, k * p + j)] = ds.x()[(i, j)];
            }
        }
        for j in 0..r {
            b[(i, m * p + j)] = ds.z()[(i, j)];
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SurvivalRecord;
    use crate::estimators::lin_ying::{lin_ying, lin_ying_with, Covariates};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_discrete(seed: u64, n: usize, groups: usize, r: usize) -> SurvivalDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recs = (0..n)
            .map(|_| SurvivalRecord {
                time: rng.random_range(0.1..3.0),
                status: rng.random_bool(0.7),
                w: vec![rng.random_range(0..groups) as f64],
                x: vec![rng.random(), rng.random()],
                z: (0..r).map(|_| rng.random()).collect(),
            })
            .collect();
        SurvivalDataset::new(recs).unwrap()
    }

    #[test]
    fn matches_expanded_lin_ying() {
        for seed in 0..10 {
            for r in [0, 1] {
                let ds = random_discrete(seed, 100, 3, r);
                let fit = discrete_block_estimate(&ds, None).unwrap();
                let oracle = lin_ying_with(&ds, &expanded_covariates(&ds, &fit.levels))
                    .unwrap()
                    .coef;
                for (k, b) in fit.beta.iter().enumerate() {
                    for j in 0..2 {
                        assert!((b[j] - oracle[k * 2 + j]).abs() < 1e-10);
                    }
                }
                for j in 0..r {
                    assert!((fit.alpha[j] - oracle[6 + j]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn single_level_is_lin_ying() {
        let ds = random_discrete(3, 60, 1, 0);
        let fit = discrete_block_estimate(&ds, None).unwrap();
        let ly = lin_ying(&ds, Covariates::X).unwrap();
        assert!((&fit.beta[0] - &ly).amax() < 1e-10);
    }

    #[test]
    fn empty_group_is_singular() {
        let ds = random_discrete(5, 50, 1, 0);
        let levels = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            discrete_block_estimate(&ds, Some(levels)),
            Err(Error::SingularDenominator(_))
        ));
    }
}
