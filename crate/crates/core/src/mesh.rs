//! Uniform 1D mesh: displacements live at nodes, damage at element centroids.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D<T> {
    length: T,
    element_size: T,
    nodes: Vec<T>,
    centroids: Vec<T>,
}

impl<T: Scalar> Mesh1D<T> {
    /// Builds `element_count` equal linear elements on `[0, length]`.
    pub fn uniform(length: T, element_count: usize) -> Result<Self> {
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "bar length must be positive, got {length}"
            )));
        }
        if element_count == 0 {
            return Err(Error::InvalidConfig("element count must be at least 1".into()));
        }
        let n = T::from_usize_lossy(element_count);
        let element_size = length / n;
        let mut nodes: Vec<T> = (0..=element_count)
            .map(|i| length * T::from_usize_lossy(i) / n)
            .collect();
        nodes[element_count] = length;
        let half = T::lit(0.5);
        let centroids = nodes.windows(2).map(|w| (w[0] + w[1]) * half).collect();
        Ok(Self {
            length,
            element_size,
            nodes,
            centroids,
        })
    }

    /// Mesh whose element size is as close as possible to `target_size`.
    pub fn with_element_size(length: T, target_size: T) -> Result<Self> {
        if !(target_size > T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "element size must be positive, got {target_size}"
            )));
        }
        let count = (length / target_size).round().to_usize().unwrap_or(0).max(1);
        Self::uniform(length, count)
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn element_count(&self) -> usize {
        self.centroids.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_size(&self) -> T {
        self.element_size
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn centroids(&self) -> &[T] {
        &self.centroids
    }

    /// Per-element bound on the damage jump between neighbours, `h_e / ℓ`.
    pub fn lipschitz_slope(&self, regularization_length: T) -> T {
        self.element_size / regularization_length
    }

    /// Strain of element `e` for nodal displacements `u`.
    pub fn element_strain(&self, u: &[T], e: usize) -> Result<T> {
        if u.len() != self.node_count() {
            return Err(Error::OutOfBounds {
                index: u.len(),
                len: self.node_count(),
            });
        }
        if e >= self.element_count() {
            return Err(Error::OutOfBounds {
                index: e,
                len: self.element_count(),
            });
        }
        Ok((u[e + 1] - u[e]) / self.element_size)
    }

    /// Writes every element strain into `out`.
    pub fn strains_into(&self, u: &[T], out: &mut [T]) {
        debug_assert_eq!(u.len(), self.node_count());
        debug_assert_eq!(out.len(), self.element_count());
        let inv_h = T::one() / self.element_size;
        for (s, w) in out.iter_mut().zip(u.windows(2)) {
            *s = (w[1] - w[0]) * inv_h;
        }
    }

    pub fn strains(&self, u: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.element_count()];
        self.strains_into(u, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_elements() {
        let m = Mesh1D::<f64>::uniform(2e-3, 2).unwrap();
        assert_eq!(m.nodes(), &[0.0, 1e-3, 2e-3]);
        assert_eq!(m.centroids(), &[0.5e-3, 1.5e-3]);
        assert_eq!(m.element_size(), 1e-3);
    }

    #[test]
    fn single_element() {
        let m = Mesh1D::<f64>::uniform(1.0, 1).unwrap();
        assert_eq!(m.element_count(), 1);
        assert_eq!(m.element_size(), 1.0);
    }

    #[test]
    fn tenth_of_regularization_length() {
        let ell = 2.21e-6_f64;
        let m = Mesh1D::with_element_size(2e-3, ell / 10.0).unwrap();
        assert_eq!(m.element_count(), 9050);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Mesh1D::<f64>::uniform(0.0, 4).is_err());
        assert!(Mesh1D::<f64>::uniform(-1.0, 4).is_err());
        assert!(Mesh1D::<f64>::uniform(1.0, 0).is_err());
    }

    #[test]
    fn node_layout() {
        let m = Mesh1D::<f64>::uniform(2e-3_f64, 777).unwrap();
        assert_eq!(m.nodes()[0], 0.0);
        assert_eq!(*m.nodes().last().unwrap(), 2e-3);
        assert!(m.nodes().windows(2).all(|w| w[1] > w[0]));
        let total: f64 = m.nodes().windows(2).map(|w| w[1] - w[0]).sum();
        assert!((total - 2e-3).abs() <= 1e-12 * 2e-3);
        for (e, c) in m.centroids().iter().enumerate() {
            assert_eq!(*c, 0.5 * (m.nodes()[e] + m.nodes()[e + 1]));
        }
    }

    #[test]
    fn strain_cases() {
        let m = Mesh1D::<f64>::uniform(1e-3, 1).unwrap();
        assert!((m.element_strain(&[0.0, 1e-6], 0).unwrap() - 1e-3).abs() < 1e-18);
        assert!(m.element_strain(&[0.0, 1e-6], 1).is_err());

        let m = Mesh1D::<f64>::uniform(2e-3, 10).unwrap();
        let u = vec![3.5e-7; 11];
        assert!(m.strains(&u).iter().all(|&s| s == 0.0));
    }

    #[test]
    fn patch_test() {
        let m = Mesh1D::<f64>::uniform(2e-3_f64, 50).unwrap();
        let (rate, t) = (1e5, 1.3e-8);
        let u: Vec<f64> = m.nodes().iter().map(|&x| rate * t * x + 4e-9).collect();
        for s in m.strains(&u) {
            assert!((s - rate * t).abs() <= 1e-9 * rate * t);
        }
    }
}
