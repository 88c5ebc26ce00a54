//! Discrete Lipschitz constraint, its lower/upper projections, and the index
//! intervals where a constrained damage solve is still needed.
//!
//! With slope `s = h_e / ℓ` the projections of a field `d̄` are
//!
//! ```text
//! lower(i) = min_j ( d̄_j + |i - j| s )      (inf-convolution with the cone)
//! upper(i) = max_j ( d̄_j - |i - j| s )      (sup-convolution)
//! ```
//!
//! Both are computed with one forward and one backward sweep. The sweeps
//! carry the index of the current best candidate and re-evaluate
//! `d̄_j + k s` from scratch, so the result is bit-identical to the
//! quadratic definition rather than an accumulation of repeated `+ s`.

use crate::scalar::Scalar;

/// Absolute tolerance under which the two projections are considered equal.
pub const EQUALITY_TOLERANCE: f64 = 1e-9;

/// Inclusive range of element indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElementRange {
    pub start: usize,
    pub end: usize,
}

impl ElementRange {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i <= self.end
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

/// True iff neighbouring values differ by at most `slope + tol`.
pub fn is_lipschitz<T: Scalar>(d: &[T], slope: T, tol: T) -> bool {
    d.windows(2).all(|w| (w[0] - w[1]).abs() <= slope + tol)
}

/// Largest neighbour jump in excess of `slope` (0 when the field is feasible).
pub fn lipschitz_violation<T: Scalar>(d: &[T], slope: T) -> T {
    d.windows(2)
        .map(|w| (w[0] - w[1]).abs() - slope)
        .fold(T::zero(), T::max)
}

#[inline]
fn cone<T: Scalar>(value: T, distance: usize, slope: T) -> T {
    value + T::from_usize_lossy(distance) * slope
}

/// Lower projection `min_j (d̄_j + |i-j| s)`.
pub fn project_lower<T: Scalar>(dbar: &[T], slope: T) -> Vec<T> {
    let mut out = vec![T::zero(); dbar.len()];
    project_lower_into(dbar, slope, &mut out);
    out
}

pub fn project_lower_into<T: Scalar>(dbar: &[T], slope: T, out: &mut [T]) {
    let n = dbar.len();
    if n == 0 {
        return;
    }
    let mut best = 0;
    for i in 0..n {
        let carried = cone(dbar[best], i - best, slope);
        if dbar[i] <= carried {
            best = i;
            out[i] = dbar[i];
        } else {
            out[i] = carried;
        }
    }
    best = n - 1;
    for i in (0..n).rev() {
        let carried = cone(dbar[best], best - i, slope);
        if dbar[i] <= carried {
            best = i;
        } else if carried < out[i] {
            out[i] = carried;
        }
    }
}

/// Upper projection `max_j (d̄_j - |i-j| s)`.
pub fn project_upper<T: Scalar>(dbar: &[T], slope: T) -> Vec<T> {
    let mut out = vec![T::zero(); dbar.len()];
    project_upper_into(dbar, slope, &mut out);
    out
}

pub fn project_upper_into<T: Scalar>(dbar: &[T], slope: T, out: &mut [T]) {
    let n = dbar.len();
    if n == 0 {
        return;
    }
    let neg = -slope;
    let mut best = 0;
    for i in 0..n {
        let carried = cone(dbar[best], i - best, neg);
        if dbar[i] >= carried {
            best = i;
            out[i] = dbar[i];
        } else {
            out[i] = carried;
        }
    }
    best = n - 1;
    for i in (0..n).rev() {
        let carried = cone(dbar[best], best - i, neg);
        if dbar[i] >= carried {
            best = i;
        } else if carried > out[i] {
            out[i] = carried;
        }
    }
}

/// Maximal runs where `upper - lower > eq_tol`, padded by one guard element
/// on each side. Padded runs that overlap or touch are merged, so the result
/// is sorted and separated by at least one untouched element.
pub fn active_intervals<T: Scalar>(lower: &[T], upper: &[T], eq_tol: T) -> Vec<ElementRange> {
    let mut out = Vec::new();
    active_intervals_into(lower, upper, eq_tol, &mut out);
    out
}

pub fn active_intervals_into<T: Scalar>(lower: &[T], upper: &[T], eq_tol: T, out: &mut Vec<ElementRange>) {
    debug_assert_eq!(lower.len(), upper.len());
    out.clear();
    let n = lower.len();
    let mut i = 0;
    while i < n {
        if upper[i] - lower[i] > eq_tol {
            let start = i;
            while i < n && upper[i] - lower[i] > eq_tol {
                i += 1;
            }
            let padded = ElementRange {
                start: start.saturating_sub(1),
                end: i.min(n - 1),
            };
            match out.last_mut() {
                Some(prev) if padded.start <= prev.end + 1 => prev.end = padded.end,
                _ => out.push(padded),
            }
        } else {
            i += 1;
        }
    }
}

/// Both projections of a predicted field and the intervals where they differ.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionBounds<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub intervals: Vec<ElementRange>,
}

impl<T: Scalar> ProjectionBounds<T> {
    pub fn compute(dbar: &[T], slope: T, eq_tol: T) -> Self {
        let lower = project_lower(dbar, slope);
        let upper = project_upper(dbar, slope);
        let intervals = active_intervals(&lower, &upper, eq_tol);
        Self {
            lower,
            upper,
            intervals,
        }
    }
}
