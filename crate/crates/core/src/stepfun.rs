//! Exact calculus for right-continuous piecewise-constant functions of time.
//!
//! Covariates are time-independent, so every risk-set average changes value
//! only at observed times. Integrals against `dt` are finite sums of
//! `value * interval length`, and integrals against a counting process are
//! evaluations at the event time.

use nalgebra::{DMatrix, DVector};

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};

/// Values a [`StepFunction`] may carry: scalars, vectors, or matrices.
pub trait StepValue: Clone {
    /// Adds `scale * other` in place.
    fn add_scaled(&mut self, other: &Self, scale: f64);
    fn scaled(&self, scale: f64) -> Self;
    /// A zero of the same shape.
    fn zero_like(&self) -> Self {
        self.scaled(0.0)
    }
    fn is_zero(&self) -> bool;
}

impl StepValue for f64 {
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        *self += scale * other;
    }
    fn scaled(&self, scale: f64) -> Self {
        self * scale
    }
    fn zero_like(&self) -> Self {
        0.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

impl StepValue for DVector<f64> {
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        self.axpy(scale, other, 1.0);
    }
    fn scaled(&self, scale: f64) -> Self {
        self * scale
    }
    fn zero_like(&self) -> Self {
        DVector::zeros(self.len())
    }
    fn is_zero(&self) -> bool {
        self.iter().all(|v| *v == 0.0)
    }
}

impl StepValue for DMatrix<f64> {
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        *self += other * scale;
    }
    fn scaled(&self, scale: f64) -> Self {
        self * scale
    }
    fn zero_like(&self) -> Self {
        DMatrix::zeros(self.nrows(), self.ncols())
    }
    fn is_zero(&self) -> bool {
        self.iter().all(|v| *v == 0.0)
    }
}

/// A right-continuous step function on `[0, ∞)`.
///
/// `values[j]` holds on `[breakpoints[j], breakpoints[j + 1])`; the last
/// value extends to infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction<V> {
    breakpoints: Vec<f64>,
    values: Vec<V>,
}

impl<V: StepValue> StepFunction<V> {
    pub fn new(breakpoints: Vec<f64>, values: Vec<V>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints[0] != 0.0 {
            return Err(Error::InvalidArgument(
                "step function breakpoints must start at 0".into(),
            ));
        }
        if breakpoints.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: breakpoints.len(),
                found: values.len(),
            });
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || breakpoints.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidArgument(
                "step function breakpoints must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    pub fn constant(value: V) -> Self {
        Self {
            breakpoints: vec![0.0],
            values: vec![value],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    fn interval_of(&self, t: f64) -> usize {
        // last j with breakpoints[j] <= t
        self.breakpoints
            .partition_point(|&b| b <= t)
            .saturating_sub(1)
    }

    /// Value at `t` (right-continuous).
    pub fn eval(&self, t: f64) -> &V {
        &self.values[self.interval_of(t.max(0.0))]
    }

    /// Value just before `t`; at `t = 0` this is the first value.
    pub fn left_limit(&self, t: f64) -> &V {
        let j = self
            .breakpoints
            .partition_point(|&b| b < t)
            .saturating_sub(1);
        &self.values[j]
    }

    /// `∫₀^upper f(t) dt`, exactly.
    pub fn integrate(&self, upper: f64) -> Result<V> {
        if upper < 0.0 || upper.is_nan() {
            return Err(Error::NegativeUpper(upper));
        }
        let mut acc = self.values[0].zero_like();
        for (j, value) in self.values.iter().enumerate() {
            let start = self.breakpoints[j];
            if start >= upper {
                break;
            }
            let end = self
                .breakpoints
                .get(j + 1)
                .copied()
                .unwrap_or(f64::INFINITY)
                .min(upper);
            acc.add_scaled(value, end - start);
        }
        Ok(acc)
    }

    /// `∫_a^b f(t) dt` as a difference of integrals from the origin.
    pub fn integrate_between(&self, a: f64, b: f64) -> Result<V> {
        let mut hi = self.integrate(b)?;
        let lo = self.integrate(a)?;
        hi.add_scaled(&lo, -1.0);
        Ok(hi)
    }

    pub fn map<U: StepValue>(&self, f: impl Fn(&V) -> U) -> StepFunction<U> {
        StepFunction {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(f).collect(),
        }
    }
}

fn merged_breakpoints<'a>(sets: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut all: Vec<f64> = sets.flat_map(|s| s.iter().copied()).collect();
    all.sort_by(|a, b| a.total_cmp(b));
    all.dedup();
    all
}

/// Applies `op` interval-wise over the merged breakpoints of `fs`.
pub fn pointwise_combine<V, U>(
    fs: &[&StepFunction<V>],
    op: impl Fn(&[&V]) -> Result<U>,
) -> Result<StepFunction<U>>
where
    V: StepValue,
    U: StepValue,
{
    if fs.is_empty() {
        return Err(Error::InvalidArgument("no operands to combine".into()));
    }
    let breakpoints = merged_breakpoints(fs.iter().map(|f| f.breakpoints()));
    let mut values = Vec::with_capacity(breakpoints.len());
    for &b in &breakpoints {
        let operands: Vec<&V> = fs.iter().map(|f| f.eval(b)).collect();
        values.push(op(&operands)?);
    }
    Ok(StepFunction {
        breakpoints,
        values,
    })
}

/// Numerator over a scalar denominator with the `0/0 = 0` convention.
pub fn ratio<V: StepValue>(
    numerator: &StepFunction<V>,
    denominator: &StepFunction<f64>,
) -> Result<StepFunction<V>> {
    let breakpoints =
        merged_breakpoints([numerator.breakpoints(), denominator.breakpoints()].into_iter());
    let mut values = Vec::with_capacity(breakpoints.len());
    for &b in &breakpoints {
        let num = numerator.eval(b);
        let den = *denominator.eval(b);
        values.push(safe_ratio(num, den).ok_or(Error::DivisionByNonzeroOverZero(b))?);
    }
    Ok(StepFunction {
        breakpoints,
        values,
    })
}

/// `num / den` with `0/0 = 0`; `None` when only the denominator vanishes.
pub fn safe_ratio<V: StepValue>(num: &V, den: f64) -> Option<V> {
    if den == 0.0 {
        num.is_zero().then(|| num.zero_like())
    } else {
        Some(num.scaled(1.0 / den))
    }
}

/// `∫₀^τ g(t) dNᵢ(t)`: `g(Tᵢ)` for an event at or before τ, zero otherwise.
pub fn counting_integral<V: StepValue>(g: impl Fn(f64) -> V, ds: &SurvivalDataset, i: usize) -> V {
    let t = ds.time(i);
    let value = g(t);
    if ds.counts_event(i) {
        value
    } else {
        value.zero_like()
    }
}
