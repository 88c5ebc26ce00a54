//! Damage half of the staggered scheme: unconstrained local prediction,
//! Lipschitz-constrained minimization on the active intervals, and their
//! composition into one damage update.

use crate::error::{Error, Result};
use crate::lip_projection::{
    active_intervals_into, project_lower_into, project_upper_into, ElementRange, EQUALITY_TOLERANCE,
};
use crate::material::{degradation, MaterialModel, ModelVariant};
use crate::mesh::Mesh1D;
use crate::scalar::Scalar;

const ROOT_MAX_ITER: usize = 200;

/// Stationarity tolerance of the constrained solve, in units of `Y_c h_e`.
pub const CONSTRAINED_TOLERANCE: f64 = 1e-14;

fn root_tolerance<T: Scalar>() -> T {
    T::epsilon() * T::lit(4.0)
}

/// Root of a nondecreasing function on `(lo, hi)` with `f(lo) < 0 <= f(hi)`.
///
/// `f` returns the value and its derivative. Newton steps are taken when they
/// stay inside the bracket and the bracket keeps halving at least every
/// second iteration; otherwise the step is a bisection.
fn bracketed_root<T: Scalar>(
    mut f: impl FnMut(T) -> (T, T),
    mut lo: T,
    mut hi: T,
    gtol: T,
) -> std::result::Result<T, (usize, T)> {
    let half = T::lit(0.5);
    let xtol = root_tolerance::<T>();
    let mut x = lo + (hi - lo) * half;
    let mut widths = [hi - lo, hi - lo];
    let mut last_residual = T::infinity();
    for it in 0..ROOT_MAX_ITER {
        let (v, dv) = f(x);
        last_residual = v.abs();
        if v.abs() <= gtol {
            return Ok(x);
        }
        if v < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let width = hi - lo;
        if width <= xtol {
            return Ok(lo + width * half);
        }
        let newton = if dv > T::zero() && dv.is_finite() {
            x - v / dv
        } else {
            T::nan()
        };
        let stalled = width > half * widths[it % 2];
        widths[it % 2] = width;
        let next = if newton > lo && newton < hi && !stalled {
            newton
        } else {
            lo + width * half
        };
        if (next - x).abs() <= xtol {
            return Ok(next);
        }
        x = next;
    }
    Err((ROOT_MAX_ITER, last_residual))
}

/// Minimizer over `[d_prev, 1]` of `½ g(d) E ε² + Y_c h(d)`.
///
/// The first-order condition `(1-d) E ε² = Y_c H(d)` is solved in the form
/// `Y_c H(d)/(1-d) - E ε² = 0`, whose left side increases with `d`.
pub fn predict_local<T: Scalar>(strain: T, d_prev: T, modulus: T, material: &MaterialModel<T>) -> T {
    let drive = modulus * strain * strain;
    if drive == T::zero() || d_prev >= T::one() {
        return d_prev;
    }
    let yc = material.yc();
    let law = &material.softening;
    if yc * law.growth_ratio(d_prev) >= drive {
        return d_prev;
    }
    if yc * law.growth_ratio(T::one()) <= drive {
        return T::one();
    }
    let residual = |d: T| (yc * law.growth_ratio(d) - drive, yc * law.growth_ratio_derivative(d));
    // the bracket always shrinks, so the only failure mode is the iteration
    // cap; the midpoint is then still within the bracket width of the root
    match bracketed_root(residual, d_prev, T::one(), T::zero()) {
        Ok(d) => d.max(d_prev).min(T::one()),
        Err(_) => d_prev,
    }
}

/// Lipschitz-constrained damage minimization on one active interval.
#[derive(Debug, Clone)]
pub struct DamageSubproblem<'a, T> {
    pub material: &'a MaterialModel<T>,
    pub element_size: T,
    /// Maximal jump between neighbours, `h_e / ℓ`.
    pub slope: T,
    pub strains: Vec<T>,
    pub moduli: Vec<T>,
    /// `max(d_n, lower projection)` per element.
    pub lower: Vec<T>,
    /// `min(1, upper projection)` per element.
    pub upper: Vec<T>,
    /// Damage of the element just before the interval, if any.
    pub left_fixed: Option<T>,
    /// Damage of the element just after the interval, if any.
    pub right_fixed: Option<T>,
}

impl<'a, T: Scalar> DamageSubproblem<'a, T> {
    pub fn len(&self) -> usize {
        self.strains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strains.is_empty()
    }

    /// `Σ_e h_e [φ(ε_e, d_e) + Y_c h(d_e)]` (per unit cross-section).
    pub fn objective(&self, d: &[T]) -> T {
        let half = T::lit(0.5);
        let yc = self.material.yc();
        d.iter().enumerate().fold(T::zero(), |acc, (i, &di)| {
            let eps = self.strains[i];
            acc + half * degradation(di) * self.moduli[i] * eps * eps + yc * self.material.softening.h(di)
        }) * self.element_size
    }

    /// First and second derivative of element `i`'s objective, scaled by `1/(Y_c h_e)`.
    #[inline]
    fn scaled_slope(&self, i: usize, d: T) -> (T, T) {
        let law = &self.material.softening;
        let drive = self.moduli[i] * self.strains[i] * self.strains[i] / self.material.yc();
        (-(T::one() - d) * drive + law.dh(d), drive + law.d2h(d))
    }

    /// Checks that every unknown lies inside its box and every neighbour
    /// pair (including the fixed boundary values) respects the slope, up to `tol`.
    pub fn is_feasible(&self, d: &[T], tol: T) -> bool {
        let n = self.len();
        if d.len() != n {
            return false;
        }
        let boxed = (0..n).all(|i| d[i] >= self.lower[i] - tol && d[i] <= self.upper[i] + tol);
        let chained = d.windows(2).all(|w| (w[0] - w[1]).abs() <= self.slope + tol);
        let left = match (self.left_fixed, d.first()) {
            (Some(f), Some(&x)) => (x - f).abs() <= self.slope + tol,
            _ => true,
        };
        let right = match (self.right_fixed, d.last()) {
            (Some(f), Some(&x)) => (x - f).abs() <= self.slope + tol,
            _ => true,
        };
        boxed && chained && left && right
    }
}

/// Exact minimizer of a [`DamageSubproblem`].
///
/// Dynamic programming along the chain: `J_k(y)` is the optimal cost of the
/// first `k` unknowns with `d_k = y`. Because each element objective is
/// convex, minimizing `J_k` over the window `|x - y| <= s` only clamps the
/// unconstrained minimizer `x*_k`, so the derivative `J'_{k+1}(y)` is
/// `f'_{k+1}(y)` plus `J'_k(y ± s)` (or 0 when `x*_k` lies in the window).
/// Each `x*_k` is found by a safeguarded Newton search on `J'_k`, and the
/// solution is recovered backwards by clamping `x*_k` to the window of
/// `d_{k+1}`.
///
/// `tol` is the stationarity tolerance in units of `Y_c h_e`.
pub fn solve_constrained<T: Scalar>(problem: &DamageSubproblem<'_, T>, tol: T) -> Result<Vec<T>> {
    let n = problem.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let s = problem.slope;
    let slack = T::lit(1e-10);
    let mut lo_dom = Vec::with_capacity(n);
    let mut hi_dom = Vec::with_capacity(n);
    for i in 0..n {
        let (mut lo, mut hi) = (problem.lower[i], problem.upper[i]);
        if lo > hi + slack {
            return Err(Error::Projection {
                element: i,
                lower: lo.to_f64_lossy(),
                upper: hi.to_f64_lossy(),
            });
        }
        if i == 0 {
            if let Some(f) = problem.left_fixed {
                lo = lo.max(f - s);
                hi = hi.min(f + s);
            }
        } else {
            lo = lo.max(lo_dom[i - 1] - s);
            hi = hi.min(hi_dom[i - 1] + s);
        }
        if i == n - 1 {
            if let Some(f) = problem.right_fixed {
                lo = lo.max(f - s);
                hi = hi.min(f + s);
            }
        }
        if lo > hi {
            if lo > hi + slack {
                return Err(Error::Projection {
                    element: i,
                    lower: lo.to_f64_lossy(),
                    upper: hi.to_f64_lossy(),
                });
            }
            let mid = (lo + hi) * T::lit(0.5);
            lo = mid;
            hi = mid;
        }
        lo_dom.push(lo);
        hi_dom.push(hi);
    }

    let mut xstar: Vec<T> = Vec::with_capacity(n);
    let gtol = tol;
    for k in 0..n {
        let (lo, hi) = (lo_dom[k], hi_dom[k]);
        if hi <= lo {
            xstar.push(lo);
            continue;
        }
        let slope_at = |x: T| chain_slope(problem, &xstar, &lo_dom, &hi_dom, k, x);
        let (g_lo, _) = slope_at(lo);
        if g_lo >= T::zero() {
            xstar.push(lo);
            continue;
        }
        let (g_hi, _) = slope_at(hi);
        if g_hi <= T::zero() {
            xstar.push(hi);
            continue;
        }
        match bracketed_root(slope_at, lo, hi, gtol) {
            Ok(x) => xstar.push(x),
            Err((iterations, residual)) => {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: residual.to_f64_lossy(),
                })
            }
        }
    }

    let mut d = vec![T::zero(); n];
    d[n - 1] = xstar[n - 1];
    for k in (0..n - 1).rev() {
        let lo = lo_dom[k].max(d[k + 1] - s);
        let hi = hi_dom[k].min(d[k + 1] + s);
        d[k] = if hi < lo {
            // only reachable through rounding of the window bounds
            (lo + hi) * T::lit(0.5)
        } else {
            xstar[k].max(lo).min(hi)
        };
    }
    for (i, v) in d.iter_mut().enumerate() {
        *v = v.min(problem.upper[i]).max(problem.lower[i]);
    }
    Ok(d)
}

/// `J'_k(x)` and `J''_k(x)` in scaled units.
fn chain_slope<T: Scalar>(
    problem: &DamageSubproblem<'_, T>,
    xstar: &[T],
    lo_dom: &[T],
    hi_dom: &[T],
    k: usize,
    x: T,
) -> (T, T) {
    let s = problem.slope;
    let (mut g, mut g2) = (T::zero(), T::zero());
    let (mut k, mut x) = (k, x);
    loop {
        let (a, b) = problem.scaled_slope(k, x);
        g = g + a;
        g2 = g2 + b;
        if k == 0 {
            break;
        }
        // shifted points leave the previous domain only by rounding
        let prev = xstar[k - 1];
        let up = (x + s).max(lo_dom[k - 1]);
        let down = (x - s).min(hi_dom[k - 1]);
        if up < prev {
            x = up;
        } else if down > prev {
            x = down;
        } else {
            break;
        }
        k -= 1;
    }
    (g, g2)
}

/// Summary of one damage update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DamageStepInfo {
    /// Whether any element's prediction exceeded its previous damage.
    pub grew: bool,
    /// Number of constrained subproblems solved.
    pub intervals: usize,
    /// Elements inside active intervals.
    pub active_elements: usize,
}

/// Scratch buffers for repeated damage updates on the same mesh.
#[derive(Debug, Clone, Default)]
pub struct DamageUpdater<T> {
    strains: Vec<T>,
    predicted: Vec<T>,
    lower: Vec<T>,
    upper: Vec<T>,
    intervals: Vec<ElementRange>,
}

impl<T: Scalar> DamageUpdater<T> {
    pub fn new() -> Self {
        Self {
            strains: Vec::new(),
            predicted: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            intervals: Vec::new(),
        }
    }

    /// Damage update for displacements `u`, writing the new field and the
    /// active-constraint mask.
    #[allow(clippy::too_many_arguments)]
    pub fn update(
        &mut self,
        u: &[T],
        d_prev: &[T],
        mesh: &Mesh1D<T>,
        material: &MaterialModel<T>,
        moduli: &[T],
        out: &mut [T],
        mask: &mut [bool],
    ) -> Result<DamageStepInfo> {
        let ne = mesh.element_count();
        self.strains.resize(ne, T::zero());
        mesh.strains_into(u, &mut self.strains);
        let mut info = DamageStepInfo::default();
        for e in 0..ne {
            let d = predict_local(self.strains[e], d_prev[e], moduli[e], material);
            info.grew |= d > d_prev[e];
            out[e] = d;
        }
        mask.iter_mut().for_each(|m| *m = false);
        if material.variant == ModelVariant::Czm || !info.grew {
            return Ok(info);
        }

        let slope = mesh.lipschitz_slope(material.properties.regularization_length);
        self.predicted.clear();
        self.predicted.extend_from_slice(out);
        self.lower.resize(ne, T::zero());
        self.upper.resize(ne, T::zero());
        project_lower_into(&self.predicted, slope, &mut self.lower);
        project_upper_into(&self.predicted, slope, &mut self.upper);
        active_intervals_into(
            &self.lower,
            &self.upper,
            T::lit(EQUALITY_TOLERANCE),
            &mut self.intervals,
        );
        info.intervals = self.intervals.len();

        for range in &self.intervals {
            let (a, b) = (range.start, range.end);
            let problem = DamageSubproblem {
                material,
                element_size: mesh.element_size(),
                slope,
                strains: self.strains[a..=b].to_vec(),
                moduli: moduli[a..=b].to_vec(),
                lower: (a..=b).map(|i| d_prev[i].max(self.lower[i])).collect(),
                upper: (a..=b).map(|i| self.upper[i].min(T::one())).collect(),
                left_fixed: (a > 0).then(|| self.predicted[a - 1]),
                right_fixed: (b + 1 < ne).then(|| self.predicted[b + 1]),
            };
            let solved = solve_constrained(&problem, T::lit(CONSTRAINED_TOLERANCE))?;
            out[a..=b].copy_from_slice(&solved);
            mask[a..=b].iter_mut().for_each(|m| *m = true);
            info.active_elements += range.len();
        }
        Ok(info)
    }
}

/// Result of [`damage_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct DamageStepOutput<T> {
    pub damage: Vec<T>,
    /// Elements that were part of a constrained solve.
    pub active: Vec<bool>,
    pub info: DamageStepInfo,
}

/// One-shot damage update (allocating convenience wrapper around [`DamageUpdater`]).
pub fn damage_step<T: Scalar>(
    u: &[T],
    d_prev: &[T],
    mesh: &Mesh1D<T>,
    material: &MaterialModel<T>,
    moduli: &[T],
) -> Result<DamageStepOutput<T>> {
    let ne = mesh.element_count();
    let mut damage = vec![T::zero(); ne];
    let mut active = vec![false; ne];
    let info = DamageUpdater::new().update(u, d_prev, mesh, material, moduli, &mut damage, &mut active)?;
    Ok(DamageStepOutput { damage, active, info })
}
