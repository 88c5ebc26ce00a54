//! Mass and stiffness operators of linear bar elements, stored in banded form.

use crate::error::{Error, Result};
use crate::material::degradation;
use crate::mesh::Mesh1D;
use crate::scalar::Scalar;

/// Symmetric tridiagonal matrix: `diag` has `n` entries, `off` has `n - 1`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymTridiagonal<T> {
    pub diag: Vec<T>,
    pub off: Vec<T>,
}

impl<T: Scalar> SymTridiagonal<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![T::zero(); n],
            off: vec![T::zero(); n.saturating_sub(1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        m.diag.iter_mut().for_each(|d| *d = T::one());
        m
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> T {
        match i.abs_diff(j) {
            0 => self.diag[i],
            1 => self.off[i.min(j)],
            _ => T::zero(),
        }
    }

    pub fn mul_vec_into(&self, x: &[T], out: &mut [T]) {
        let n = self.len();
        debug_assert!(x.len() == n && out.len() == n);
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc = acc + self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc = acc + self.off[i] * x[i + 1];
            }
            out[i] = acc;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.len()];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, other: &Self, scale: T) -> Self {
        Self {
            diag: self
                .diag
                .iter()
                .zip(&other.diag)
                .map(|(&a, &b)| a + scale * b)
                .collect(),
            off: self.off.iter().zip(&other.off).map(|(&a, &b)| a + scale * b).collect(),
        }
    }

    /// Solves `self · x = rhs` in place with an `LDLᵀ` factorization.
    ///
    /// Fails on a non-positive pivot, i.e. when the matrix is not SPD.
    pub fn solve_spd_in_place(&self, rhs: &mut [T], scratch: &mut Vec<T>) -> Result<()> {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        if n == 0 {
            return Ok(());
        }
        scratch.clear();
        scratch.resize(n, T::zero());
        // scratch[i] holds the pivot d_i; l_i = off[i-1] / d_{i-1}
        let mut pivot = self.diag[0];
        for i in 0..n {
            if i > 0 {
                let l = self.off[i - 1] / scratch[i - 1];
                pivot = self.diag[i] - l * self.off[i - 1];
                rhs[i] = rhs[i] - l * rhs[i - 1];
            }
            if !(pivot > T::zero()) || !pivot.is_finite() {
                return Err(Error::Numerical {
                    step: 0,
                    what: format!("non-positive pivot {pivot} at row {i}: operator is not SPD"),
                });
            }
            scratch[i] = pivot;
        }
        rhs[n - 1] = rhs[n - 1] / scratch[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.off[i] * rhs[i + 1]) / scratch[i];
        }
        Ok(())
    }

    /// Principal sub-block of rows/columns `range`.
    fn sub_block(&self, start: usize, end: usize) -> Self {
        Self {
            diag: self.diag[start..end].to_vec(),
            off: self.off[start..end.saturating_sub(1).max(start)].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassVariant {
    Lumped,
    Consistent,
}

/// Mass matrix per unit cross-section.
#[derive(Debug, Clone, PartialEq)]
pub enum MassOperator<T> {
    Lumped(Vec<T>),
    Consistent(SymTridiagonal<T>),
}

impl<T: Scalar> MassOperator<T> {
    pub fn variant(&self) -> MassVariant {
        match self {
            Self::Lumped(_) => MassVariant::Lumped,
            Self::Consistent(_) => MassVariant::Consistent,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Lumped(d) => d.len(),
            Self::Consistent(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sum of all matrix entries.
    pub fn total(&self) -> T {
        match self {
            Self::Lumped(d) => d.iter().fold(T::zero(), |a, &b| a + b),
            Self::Consistent(m) => {
                let two = T::lit(2.0);
                m.diag.iter().fold(T::zero(), |a, &b| a + b) + two * m.off.iter().fold(T::zero(), |a, &b| a + b)
            }
        }
    }

    pub fn mul_vec_into(&self, x: &[T], out: &mut [T]) {
        match self {
            Self::Lumped(d) => {
                for ((o, &m), &v) in out.iter_mut().zip(d).zip(x) {
                    *o = m * v;
                }
            }
            Self::Consistent(m) => m.mul_vec_into(x, out),
        }
    }

    /// As a tridiagonal matrix (lumped mass has a zero off-diagonal).
    pub fn to_tridiagonal(&self) -> SymTridiagonal<T> {
        match self {
            Self::Lumped(d) => SymTridiagonal {
                diag: d.clone(),
                off: vec![T::zero(); d.len().saturating_sub(1)],
            },
            Self::Consistent(m) => m.clone(),
        }
    }

    /// Row `row` of `M · x`.
    pub fn row_dot(&self, row: usize, x: &[T]) -> T {
        match self {
            Self::Lumped(d) => d[row] * x[row],
            Self::Consistent(m) => {
                let mut acc = m.diag[row] * x[row];
                if row > 0 {
                    acc = acc + m.off[row - 1] * x[row - 1];
                }
                if row + 1 < m.len() {
                    acc = acc + m.off[row] * x[row + 1];
                }
                acc
            }
        }
    }
}

/// `M_ij = ∫ ρ N_i N_j dx`, consistent or row-sum lumped.
pub fn assemble_mass<T: Scalar>(mesh: &Mesh1D<T>, density: T, variant: MassVariant) -> MassOperator<T> {
    let n = mesh.node_count();
    let m_e = density * mesh.element_size();
    match variant {
        MassVariant::Lumped => {
            let half = m_e * T::lit(0.5);
            let mut d = vec![m_e; n];
            d[0] = half;
            d[n - 1] = half;
            MassOperator::Lumped(d)
        }
        MassVariant::Consistent => {
            let third = m_e / T::lit(3.0);
            let sixth = m_e / T::lit(6.0);
            let mut m = SymTridiagonal::zeros(n);
            for e in 0..mesh.element_count() {
                m.diag[e] = m.diag[e] + third;
                m.diag[e + 1] = m.diag[e + 1] + third;
                m.off[e] = sixth;
            }
            MassOperator::Consistent(m)
        }
    }
}

/// `K(d)` with element stiffness `E_e g(d_e) / h_e · [[1, -1], [-1, 1]]`.
pub fn assemble_stiffness<T: Scalar>(mesh: &Mesh1D<T>, moduli: &[T], damage: &[T]) -> SymTridiagonal<T> {
    let mut k = SymTridiagonal::zeros(mesh.node_count());
    assemble_stiffness_into(mesh, moduli, damage, &mut k);
    k
}

pub fn assemble_stiffness_into<T: Scalar>(mesh: &Mesh1D<T>, moduli: &[T], damage: &[T], k: &mut SymTridiagonal<T>) {
    debug_assert_eq!(moduli.len(), mesh.element_count());
    debug_assert_eq!(damage.len(), mesh.element_count());
    k.diag.iter_mut().for_each(|v| *v = T::zero());
    let inv_h = T::one() / mesh.element_size();
    for (e, (&modulus, &d)) in moduli.iter().zip(damage).enumerate() {
        let ke = modulus * degradation(d) * inv_h;
        k.diag[e] = k.diag[e] + ke;
        k.diag[e + 1] = k.diag[e + 1] + ke;
        k.off[e] = -ke;
    }
}

/// Nodal internal force `K(d) · U` without assembling `K`.
pub fn internal_force_into<T: Scalar>(mesh: &Mesh1D<T>, moduli: &[T], damage: &[T], u: &[T], out: &mut [T]) {
    debug_assert_eq!(out.len(), mesh.node_count());
    out.iter_mut().for_each(|v| *v = T::zero());
    let inv_h = T::one() / mesh.element_size();
    for e in 0..mesh.element_count() {
        // axial force per unit area, σ_e = E_e g(d_e) ε_e
        let sigma = moduli[e] * degradation(damage[e]) * (u[e + 1] - u[e]) * inv_h;
        out[e] = out[e] - sigma;
        out[e + 1] = out[e + 1] + sigma;
    }
}

/// Solves `lhs · x = rhs` with prescribed values at the Dirichlet DOFs.
///
/// Prescribed DOFs are eliminated: their columns move to the right-hand side
/// and the remaining free blocks are solved with an `LDLᵀ` factorization.
pub fn solve_dynamic_system<T: Scalar>(lhs: &SymTridiagonal<T>, rhs: &[T], dirichlet: &[(usize, T)]) -> Result<Vec<T>> {
    let n = lhs.len();
    if rhs.len() != n {
        return Err(Error::OutOfBounds {
            index: rhs.len(),
            len: n,
        });
    }
    let mut fixed = vec![None; n];
    for &(i, v) in dirichlet {
        if i >= n {
            return Err(Error::OutOfBounds { index: i, len: n });
        }
        fixed[i] = Some(v);
    }
    let mut b = rhs.to_vec();
    for i in 0..n {
        if fixed[i].is_some() {
            continue;
        }
        if i > 0 {
            if let Some(v) = fixed[i - 1] {
                b[i] = b[i] - lhs.off[i - 1] * v;
            }
        }
        if i + 1 < n {
            if let Some(v) = fixed[i + 1] {
                b[i] = b[i] - lhs.off[i] * v;
            }
        }
    }
    let mut x = vec![T::zero(); n];
    let mut scratch = Vec::new();
    let mut start = 0;
    while start < n {
        if let Some(v) = fixed[start] {
            x[start] = v;
            start += 1;
            continue;
        }
        let mut end = start;
        while end < n && fixed[end].is_none() {
            end += 1;
        }
        let block = lhs.sub_block(start, end);
        let seg = &mut b[start..end];
        block.solve_spd_in_place(seg, &mut scratch)?;
        x[start..end].copy_from_slice(seg);
        start = end;
    }
    Ok(x)
}

/// Reusable solver for the common case of prescribed first and last DOFs.
#[derive(Debug, Default, Clone)]
pub struct EndpointSolver<T> {
    interior: SymTridiagonal<T>,
    rhs: Vec<T>,
    scratch: Vec<T>,
}

impl<T: Scalar> EndpointSolver<T> {
    pub fn new() -> Self {
        Self {
            interior: SymTridiagonal {
                diag: Vec::new(),
                off: Vec::new(),
            },
            rhs: Vec::new(),
            scratch: Vec::new(),
        }
    }

    /// Solves `lhs · x = rhs` with `x[0] = first`, `x[n-1] = last`, writing into `x`.
    pub fn solve(&mut self, lhs: &SymTridiagonal<T>, rhs: &[T], first: T, last: T, x: &mut [T]) -> Result<()> {
        let n = lhs.len();
        x[0] = first;
        x[n - 1] = last;
        if n <= 2 {
            return Ok(());
        }
        let m = n - 2;
        self.interior.diag.clear();
        self.interior.diag.extend_from_slice(&lhs.diag[1..n - 1]);
        self.interior.off.clear();
        self.interior.off.extend_from_slice(&lhs.off[1..n - 2]);
        self.rhs.clear();
        self.rhs.extend_from_slice(&rhs[1..n - 1]);
        self.rhs[0] = self.rhs[0] - lhs.off[0] * first;
        self.rhs[m - 1] = self.rhs[m - 1] - lhs.off[n - 2] * last;
        self.interior.solve_spd_in_place(&mut self.rhs, &mut self.scratch)?;
        x[1..n - 1].copy_from_slice(&self.rhs);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn consistent_single_element() {
        let mesh = Mesh1D::<f64>::uniform(1.0, 1).unwrap();
        let m = assemble_mass(&mesh, 6.0, MassVariant::Consistent);
        let MassOperator::Consistent(t) = m else { panic!() };
        assert_eq!(t.diag, vec![2.0, 2.0]);
        assert_eq!(t.off, vec![1.0]);
    }

    #[test]
    fn lumped_entries_and_total() {
        let mesh = Mesh1D::<f64>::uniform(2e-3, 10).unwrap();
        let rho = 3.9e3;
        let lumped = assemble_mass(&mesh, rho, MassVariant::Lumped);
        let MassOperator::Lumped(d) = &lumped else { panic!() };
        let h = mesh.element_size();
        assert!((d[0] - rho * h / 2.0).abs() < 1e-18);
        assert!((d[5] - rho * h).abs() < 1e-18);
        let consistent = assemble_mass(&mesh, rho, MassVariant::Consistent);
        for m in [lumped, consistent] {
            assert!((m.total() - rho * 2e-3).abs() < 1e-12 * rho * 2e-3);
        }
    }

    #[test]
    fn stiffness_properties() {
        let mesh = Mesh1D::<f64>::uniform(1.0, 4).unwrap();
        let e = vec![2.0; 4];
        let k = assemble_stiffness(&mesh, &e, &[0.0; 4]);
        assert_eq!(k.diag, vec![8.0, 16.0, 16.0, 16.0, 8.0]);
        assert_eq!(k.off, vec![-8.0; 4]);
        // row sums vanish
        for i in 0..5 {
            let s: f64 = (0..5).map(|j| k.get(i, j)).sum();
            assert_eq!(s, 0.0);
            for j in 0..5 {
                assert_eq!(k.get(i, j), k.get(j, i));
            }
        }
        // broken element decouples the chain
        let k = assemble_stiffness(&mesh, &e, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(k.off[1], 0.0);
        // affine field: zero interior residual
        let k = assemble_stiffness(&mesh, &e, &[0.3; 4]);
        let u: Vec<f64> = mesh.nodes().iter().map(|x| 0.1 + 2.0 * x).collect();
        let f = k.mul_vec(&u);
        for v in &f[1..4] {
            assert!(v.abs() < 1e-12);
        }
        let mut g = vec![0.0; 5];
        internal_force_into(&mesh, &e, &[0.3; 4], &u, &mut g);
        for (a, b) in f.iter().zip(&g) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_solve() {
        let id = SymTridiagonal::identity(5);
        let rhs = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        assert_eq!(solve_dynamic_system(&id, &rhs, &[]).unwrap(), rhs);
    }

    #[test]
    fn mass_cancellation() {
        let mesh = Mesh1D::<f64>::uniform(1.0, 2).unwrap();
        let m = assemble_mass(&mesh, 5.0, MassVariant::Consistent).to_tridiagonal();
        let k = SymTridiagonal::zeros(3);
        let lhs = m.add_scaled(&k, 0.25 * 1e-4);
        let up = vec![0.0, 0.4, 0.9];
        let rhs = m.mul_vec(&up);
        let u = solve_dynamic_system(&lhs, &rhs, &[(0, 0.0), (2, 0.9)]).unwrap();
        for (a, b) in u.iter().zip(&up) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn random_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = 1000;
            let off: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let diag: Vec<f64> = (0..n)
                .map(|i| {
                    let l = if i > 0 { off[i - 1].abs() } else { 0.0 };
                    let r = if i + 1 < n { off[i].abs() } else { 0.0 };
                    l + r + rng.gen_range(1e-3..1.0)
                })
                .collect();
            let a = SymTridiagonal { diag, off };
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = solve_dynamic_system(&a, &rhs, &[]).unwrap();
            let r = a.mul_vec(&x);
            let res = r.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(res / scale < 1e-12, "{}", res / scale);
        }
    }

    #[test]
    fn dirichlet_values_exact_and_endpoint_solver_agrees() {
        let mesh = Mesh1D::<f64>::uniform(1.0, 6).unwrap();
        let m = assemble_mass(&mesh, 2.0, MassVariant::Consistent).to_tridiagonal();
        let k = assemble_stiffness(&mesh, &[3.0; 6], &[0.0, 0.2, 1.0, 0.4, 0.0, 0.1]);
        let lhs = m.add_scaled(&k, 0.01);
        let rhs = vec![0.3, 0.1, -0.2, 0.5, 0.0, 0.2, 0.9];
        let x = solve_dynamic_system(&lhs, &rhs, &[(0, 0.0), (6, 0.123)]).unwrap();
        assert_eq!(x[0], 0.0);
        assert_eq!(x[6], 0.123);
        let mut y = vec![0.0; 7];
        EndpointSolver::new().solve(&lhs, &rhs, 0.0, 0.123, &mut y).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = SymTridiagonal {
            diag: vec![1.0, -1.0],
            off: vec![0.0],
        };
        assert!(matches!(
            solve_dynamic_system(&a, &[1.0, 1.0], &[]),
            Err(Error::Numerical { .. })
        ));
    }
}
