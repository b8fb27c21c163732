//! Cartesian estimation grids over the support of `W` and multilinear
//! interpolation between grid nodes.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Quantile,
    Even,
    Explicit,
}

/// Cartesian product of `q` strictly increasing axes.
///
/// Points are enumerated with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationGrid {
    axes: Vec<Vec<f64>>,
    kind: GridKind,
}

impl EstimationGrid {
    pub fn from_axes(axes: Vec<Vec<f64>>, kind: GridKind) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("no axes".into()));
        }
        for (j, axis) in axes.iter().enumerate() {
            if axis.is_empty() {
                return Err(Error::InvalidGrid(format!("axis {j} is empty")));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidGrid(format!(
                    "axis {j} has non-finite coordinates"
                )));
            }
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidGrid(format!(
                    "axis {j} must be strictly increasing"
                )));
            }
        }
        Ok(Self { axes, kind })
    }

    /// Evenly spaced axes over explicit bounds.
    pub fn even(bounds: &[(f64, f64)], sizes: &[usize]) -> Result<Self> {
        if bounds.len() != sizes.len() {
            return Err(Error::DimensionMismatch {
                expected: bounds.len(),
                found: sizes.len(),
            });
        }
        let axes = bounds
            .iter()
            .zip(sizes)
            .enumerate()
            .map(|(j, (&(lo, hi), &k))| {
                if k < 2 {
                    return Err(Error::InvalidGrid(format!(
                        "axis {j} needs at least 2 points"
                    )));
                }
                if !(hi > lo) {
                    return Err(Error::DegenerateColumn(j));
                }
                Ok(even_axis(lo, hi, k))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_axes(axes, GridKind::Even)
    }

    /// Explicit grid from a list of points, which must form a full
    /// Cartesian product.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidGrid("no points".into()));
        };
        let q = first.len();
        if q == 0 || points.iter().any(|p| p.len() != q) {
            return Err(Error::InvalidGrid(
                "points have inconsistent dimension".into(),
            ));
        }
        let axes: Vec<Vec<f64>> = (0..q)
            .map(|j| {
                let mut a: Vec<f64> = points.iter().map(|p| p[j]).collect();
                a.sort_by(f64::total_cmp);
                a.dedup();
                a
            })
            .collect();
        let grid = Self::from_axes(axes, GridKind::Explicit)?;
        let mut given: Vec<&Vec<f64>> = points.iter().collect();
        given.sort_by(|a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        given.dedup();
        if given.len() != points.len() || grid.len() != points.len() {
            return Err(Error::InvalidGrid(
                "explicit points must form a Cartesian product without duplicates".into(),
            ));
        }
        Ok(grid)
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Total number of points `m`.
    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dim()];
        for j in (0..self.dim().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * self.axes[j + 1].len();
        }
        strides
    }

    /// Flat index of the node with per-axis indices `idx`.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.strides()).map(|(i, s)| i * s).sum()
    }

    pub fn point(&self, k: usize) -> Vec<f64> {
        let mut rest = k;
        self.strides()
            .iter()
            .zip(&self.axes)
            .map(|(s, axis)| {
                let i = rest / s;
                rest %= s;
                axis[i]
            })
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Sparse multilinear weights `(node, weight)` for a query point, after
    /// clamping it into the grid's bounding box. Weights are nonnegative and
    /// sum to one.
    pub fn interpolation_weights(&self, w: &[f64]) -> Result<Vec<(usize, f64)>> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: w.len(),
            });
        }
        // per axis: (lower index, fraction toward upper)
        let cells: Vec<(usize, f64)> = self
            .axes
            .iter()
            .zip(w)
            .map(|(axis, &v)| locate(axis, v))
            .collect();
        let strides = self.strides();
        let mut out = Vec::with_capacity(1 << self.dim());
        for corner in 0..(1usize << self.dim()) {
            let mut weight = 1.0;
            let mut flat = 0;
            let mut skip = false;
            for (j, &(lo, frac)) in cells.iter().enumerate() {
                let upper = corner >> j & 1 == 1;
                let f = if upper { frac } else { 1.0 - frac };
                if upper && lo + 1 >= self.axes[j].len() {
                    skip = true;
                    break;
                }
                weight *= f;
                flat += (lo + usize::from(upper)) * strides[j];
            }
            if !skip && weight > 0.0 {
                out.push((flat, weight));
            }
        }
        if out.is_empty() {
            // exact hit on an upper boundary in every axis
            let flat = cells.iter().zip(&strides).map(|(&(lo, _), s)| lo * s).sum();
            out.push((flat, 1.0));
        }
        Ok(out)
    }

    /// Multilinear interpolation of per-node vectors at `w` (clamped to the
    /// grid's bounding box).
    pub fn interpolate(&self, values: &[DVector<f64>], w: &[f64]) -> Result<DVector<f64>> {
        self.check_values(values)?;
        let weights = self.interpolation_weights(w)?;
        let mut out = DVector::zeros(values[0].len());
        for (k, wt) in weights {
            out.axpy(wt, &values[k], 1.0);
        }
        Ok(out)
    }

    /// Value at the nearest node at or below `w` in every axis
    /// (piecewise-constant extension).
    pub fn interpolate_lower(&self, values: &[DVector<f64>], w: &[f64]) -> Result<DVector<f64>> {
        self.check_values(values)?;
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: w.len(),
            });
        }
        let idx: Vec<usize> = self
            .axes
            .iter()
            .zip(w)
            .map(|(axis, &v)| axis.partition_point(|&a| a <= v).saturating_sub(1))
            .collect();
        Ok(values[self.flat_index(&idx)].clone())
    }

    fn check_values(&self, values: &[DVector<f64>]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::IncompleteValues {
                expected: self.len(),
                found: values.len(),
            });
        }
        Ok(())
    }
}

/// Lower cell index and fractional position, clamped to the axis range.
fn locate(axis: &[f64], v: f64) -> (usize, f64) {
    let last = axis.len() - 1;
    if last == 0 || v <= axis[0] {
        return (0, 0.0);
    }
    if v >= axis[last] {
        return (last, 0.0);
    }
    let hi = axis.partition_point(|&a| a <= v);
    let lo = hi - 1;
    (lo, (v - axis[lo]) / (axis[hi] - axis[lo]))
}

fn even_axis(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    let step = (hi - lo) / (k as f64 - 1.0);
    let mut axis: Vec<f64> = (0..k).map(|i| lo + step * i as f64).collect();
    axis[k - 1] = hi;
    axis
}

/// Empirical quantile by inverse ECDF: order statistic `⌈p·n⌉` (1-based).
fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = (p * n as f64 - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    sorted[rank - 1]
}

/// Builds a quantile or evenly spaced grid from the observed `W`.
///
/// Quantile axes sit at probabilities `(k − 0.5)/size`; repeated quantiles
/// (heavily tied data) are merged, so an axis may come out shorter.
pub fn build_grid(
    ds: &SurvivalDataset,
    kind: GridKind,
    per_axis_size: &[usize],
) -> Result<EstimationGrid> {
    let q = ds.q();
    let sizes: Vec<usize> = match per_axis_size.len() {
        1 => vec![per_axis_size[0]; q],
        len if len == q => per_axis_size.to_vec(),
        len => {
            return Err(Error::DimensionMismatch {
                expected: q,
                found: len,
            })
        }
    };
    if let Some(j) = sizes.iter().position(|&s| s < 2) {
        return Err(Error::InvalidGrid(format!(
            "axis {j} needs at least 2 points"
        )));
    }
    let mut axes = Vec::with_capacity(q);
    for (j, &size) in sizes.iter().enumerate() {
        let mut col: Vec<f64> = ds.w().column(j).iter().copied().collect();
        col.sort_by(f64::total_cmp);
        let (lo, hi) = (col[0], col[col.len() - 1]);
        if lo == hi {
            return Err(Error::DegenerateColumn(j));
        }
        let axis = match kind {
            GridKind::Even => even_axis(lo, hi, size),
            GridKind::Quantile => {
                let mut a: Vec<f64> = (1..=size)
                    .map(|k| empirical_quantile(&col, (k as f64 - 0.5) / size as f64))
                    .collect();
                a.dedup();
                a
            }
            GridKind::Explicit => {
                return Err(Error::InvalidGrid(
                    "explicit grids are built from points, not data".into(),
                ))
            }
        };
        axes.push(axis);
    }
    EstimationGrid::from_axes(axes, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SurvivalRecord;
    use proptest::prelude::*;

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
    fn even_axis_on_unit_interval() {
        let ds = ds_with_w(&[vec![0.0], vec![0.3], vec![1.0]]);
        let g = build_grid(&ds, GridKind::Even, &[5]).unwrap();
        assert_eq!(g.axes()[0], vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn quantile_axis() {
        let ds = ds_with_w(&[vec![3.0], vec![1.0], vec![5.0], vec![2.0], vec![4.0]]);
        let g = build_grid(&ds, GridKind::Quantile, &[5]).unwrap();
        assert_eq!(g.axes()[0], vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn two_dimensional_grid_size() {
        let ds = ds_with_w(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![0.5, 0.2]]);
        let g = build_grid(&ds, GridKind::Even, &[5, 5]).unwrap();
        assert_eq!(g.len(), 25);
        assert_eq!(g.point(0), vec![0.0, 0.0]);
        assert_eq!(g.point(1), vec![0.0, 0.25]);
        assert_eq!(g.point(24), vec![1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_sizes_and_constant_axes() {
        let ds = ds_with_w(&[vec![0.0], vec![1.0]]);
        assert!(matches!(
            build_grid(&ds, GridKind::Even, &[1]),
            Err(Error::InvalidGrid(_))
        ));
        let flat = ds_with_w(&[vec![2.0], vec![2.0]]);
        assert!(matches!(
            build_grid(&flat, GridKind::Even, &[3]),
            Err(Error::DegenerateColumn(0))
        ));
    }

    #[test]
    fn explicit_points_must_be_cartesian() {
        let ok = EstimationGrid::from_points(&[
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ]);
        assert_eq!(ok.unwrap().len(), 4);
        let bad = EstimationGrid::from_points(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
        assert!(bad.is_err());
        let dup = EstimationGrid::from_points(&[vec![0.0], vec![0.0], vec![1.0]]);
        assert!(dup.is_err());
    }

    #[test]
    fn interpolation_basics() {
        let g = EstimationGrid::from_axes(vec![vec![0.0, 1.0]], GridKind::Explicit).unwrap();
        let vals = vec![DVector::from_element(1, 0.0), DVector::from_element(1, 2.0)];
        assert_eq!(g.interpolate(&vals, &[0.5]).unwrap()[0], 1.0);
        assert_eq!(g.interpolate(&vals, &[1.0]).unwrap()[0], 2.0);
        assert_eq!(g.interpolate(&vals, &[1.4]).unwrap()[0], 2.0);
        assert_eq!(g.interpolate(&vals, &[-3.0]).unwrap()[0], 0.0);
        assert!(matches!(
            g.interpolate(&vals[..1], &[0.5]),
            Err(Error::IncompleteValues { .. })
        ));
        assert_eq!(g.interpolate_lower(&vals, &[0.99]).unwrap()[0], 0.0);
        assert_eq!(g.interpolate_lower(&vals, &[1.0]).unwrap()[0], 2.0);
    }

    fn arb_grid() -> impl Strategy<Value = EstimationGrid> {
        prop::collection::vec(prop::collection::vec(0.05f64..1.0, 1..4), 1..4).prop_map(|gaps| {
            let axes = gaps
                .into_iter()
                .map(|g| {
                    let mut a = vec![-0.5];
                    for d in g {
                        let last = *a.last().unwrap();
                        a.push(last + d);
                    }
                    a
                })
                .collect();
            EstimationGrid::from_axes(axes, GridKind::Explicit).unwrap()
        })
    }

    proptest! {
        #[test]
        fn reproduces_multilinear_functions(g in arb_grid(), coefs in prop::collection::vec(-2.0f64..2.0, 16), seeds in prop::collection::vec(0.0f64..1.0, 100 * 3)) {
            let q = g.dim();
            // f(w) = c0 + Σ cj wj + c' w0 w_{q-1}: multilinear when q ≥ 2
            let f = |w: &[f64]| {
                let mut v = coefs[0];
                for j in 0..q { v += coefs[1 + j] * w[j]; }
                if q >= 2 { v += coefs[8] * w[0] * w[q - 1]; }
                v
            };
            let vals: Vec<DVector<f64>> = g.points().iter().map(|p| DVector::from_element(1, f(p))).collect();
            for k in 0..100 {
                let w: Vec<f64> = (0..q).map(|j| {
                    let axis = &g.axes()[j];
                    axis[0] + seeds[3 * k + j] * (axis[axis.len() - 1] - axis[0])
                }).collect();
                let got = g.interpolate(&vals, &w).unwrap()[0];
                prop_assert!((got - f(&w)).abs() < 1e-12);
            }
        }

        #[test]
        fn interpolation_is_convex(g in arb_grid(), vals in prop::collection::vec(-5.0f64..5.0, 64), w in prop::collection::vec(-2.0f64..3.0, 3)) {
            let values: Vec<DVector<f64>> = (0..g.len()).map(|k| DVector::from_element(1, vals[k])).collect();
            let w = &w[..g.dim()];
            let weights = g.interpolation_weights(w).unwrap();
            let total: f64 = weights.iter().map(|(_, x)| x).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            let lo = weights.iter().map(|(k, _)| vals[*k]).fold(f64::INFINITY, f64::min);
            let hi = weights.iter().map(|(k, _)| vals[*k]).fold(f64::NEG_INFINITY, f64::max);
            let got = g.interpolate(&values, w).unwrap()[0];
            prop_assert!(got >= lo - 1e-12 && got <= hi + 1e-12);
            // nodes reproduce exactly
            for k in 0..g.len() {
                prop_assert_eq!(g.interpolate(&values, &g.point(k)).unwrap()[0], vals[k]);
            }
        }

        #[test]
        fn even_endpoints_match_data(ws in prop::collection::vec(-10.0f64..10.0, 3..30), size in 2usize..12) {
            let rows: Vec<Vec<f64>> = ws.iter().map(|v| vec![*v]).collect();
            let ds = ds_with_w(&rows);
            if let Ok(g) = build_grid(&ds, GridKind::Even, &[size]) {
                let lo = ws.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = ws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(g.axes()[0][0], lo);
                prop_assert_eq!(*g.axes()[0].last().unwrap(), hi);
                prop_assert_eq!(g.len(), size);
            }
        }
    }
}
