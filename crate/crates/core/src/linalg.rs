//! Dense symmetric solves with explicit singularity checks.

use nalgebra::{DMatrix, DVector};

/// Smallest eigenvalue accepted, relative to the reference scale.
pub(crate) const RELATIVE_PIVOT_FLOOR: f64 = 1e-11;

/// Condition number beyond which the assembled global system is rejected.
pub const CONDITION_LIMIT: f64 = 1e13;

/// Spectral summary of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub min_abs: f64,
    pub max_abs: f64,
    /// Eigenvector of the eigenvalue with the smallest magnitude.
    pub weakest_direction: DVector<f64>,
}

impl Spectrum {
    pub fn of(mat: &DMatrix<f64>) -> Self {
        let eig = mat.clone().symmetric_eigen();
        let (mut lo, mut hi, mut at) = (f64::INFINITY, 0.0f64, 0);
        for (k, v) in eig.eigenvalues.iter().enumerate() {
            let a = v.abs();
            if a < lo {
                lo = a;
                at = k;
            }
            hi = hi.max(a);
        }
        Self {
            min_abs: lo,
            max_abs: hi,
            weakest_direction: eig.eigenvectors.column(at).into_owned(),
        }
    }

    pub fn condition(&self) -> f64 {
        if self.min_abs == 0.0 {
            f64::INFINITY
        } else {
            self.max_abs / self.min_abs
        }
    }
}

/// Solves `mat · x = rhs` for a symmetric positive semidefinite `mat`,
/// returning `None` when its smallest eigenvalue falls below
/// `RELATIVE_PIVOT_FLOOR * scale` (`scale` is the magnitude of the
/// uncentered moments the matrix was built from).
pub(crate) fn solve_psd(
    mat: &DMatrix<f64>,
    rhs: &DVector<f64>,
    scale: f64,
) -> Option<DVector<f64>> {
    if mat.nrows() == 0 {
        return Some(DVector::zeros(0));
    }
    let spec = Spectrum::of(mat);
    if !(spec.min_abs > RELATIVE_PIVOT_FLOOR * scale) || !spec.min_abs.is_finite() {
        return None;
    }
    mat.clone().lu().solve(rhs)
}

/// Inverse of a symmetric positive semidefinite matrix, same singularity rule
/// as [`solve_psd`].
pub(crate) fn inverse_psd(mat: &DMatrix<f64>, scale: f64) -> Option<DMatrix<f64>> {
    if mat.nrows() == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let spec = Spectrum::of(mat);
    if !(spec.min_abs > RELATIVE_PIVOT_FLOOR * scale) || !spec.min_abs.is_finite() {
        return None;
    }
    mat.clone().try_inverse()
}

/// Largest absolute diagonal entry, used as a reference scale.
pub(crate) fn diag_scale(mat: &DMatrix<f64>) -> f64 {
    mat.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_identity() {
        let m = DMatrix::<f64>::identity(3, 3);
        let b = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert_eq!(solve_psd(&m, &b, 1.0).unwrap(), b);
        assert_eq!(Spectrum::of(&m).condition(), 1.0);
    }

    #[test]
    fn rejects_rank_deficient() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        assert!(solve_psd(&m, &b, 1.0).is_none());
        assert!(inverse_psd(&m, 1.0).is_none());
        assert!(Spectrum::of(&m).condition() > 1e15);
    }
}
