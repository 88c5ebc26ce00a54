//! Energies, fragment statistics and damage snapshots.

use crate::dynamics::DynamicState;
use crate::fem_ops::MassOperator;
use crate::material::{energy_density, stress, MaterialModel};
use crate::mesh::Mesh1D;
use crate::scalar::Scalar;

/// Threshold above which an element counts as broken.
pub const CRACK_THRESHOLD: f64 = 0.98;

/// Energy bookkeeping at one instant, in joules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord<T> {
    pub time: T,
    pub dissipated: T,
    pub strain: T,
    pub kinetic: T,
    pub work: T,
    pub active_elements: usize,
}

impl<T: Scalar> EnergyRecord<T> {
    /// `W_ext + E_kin(0) - E_kin - E_strain - D`.
    pub fn balance_residual(&self, initial_kinetic: T) -> T {
        self.work + initial_kinetic - self.kinetic - self.strain - self.dissipated
    }
}

/// `D = A Σ_e h_e Y_c h(d_e)`.
pub fn dissipated_energy<T: Scalar>(d: &[T], mesh: &Mesh1D<T>, material: &MaterialModel<T>, area: T) -> T {
    let sum = d.iter().fold(T::zero(), |acc, &de| acc + material.softening.h(de));
    area * mesh.element_size() * material.yc() * sum
}

/// `½ A Vᵀ M V`.
pub fn kinetic_energy<T: Scalar>(v: &[T], mass: &MassOperator<T>, area: T) -> T {
    let mut sum = T::zero();
    for i in 0..v.len() {
        sum = sum + v[i] * mass.row_dot(i, v);
    }
    T::lit(0.5) * area * sum
}

/// `A Σ_e h_e φ(ε_e, d_e)`.
pub fn strain_energy<T: Scalar>(u: &[T], d: &[T], moduli: &[T], mesh: &Mesh1D<T>, area: T) -> T {
    let h = mesh.element_size();
    let mut sum = T::zero();
    for e in 0..mesh.element_count() {
        let eps = (u[e + 1] - u[e]) / h;
        sum = sum + energy_density(eps, d[e], moduli[e]);
    }
    area * h * sum
}

/// Force transmitted through the last element, `A E_e g(d_e) ε_e`.
pub fn reaction_force<T: Scalar>(u: &[T], d: &[T], moduli: &[T], mesh: &Mesh1D<T>, area: T) -> T {
    let e = mesh.element_count() - 1;
    let eps = (u[e + 1] - u[e]) / mesh.element_size();
    area * stress(eps, d[e], moduli[e])
}

/// Trapezoidal accumulation of the work done by the loaded end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkAccumulator<T> {
    pub work: T,
    force: T,
    displacement: T,
}

impl<T: Scalar> WorkAccumulator<T> {
    pub fn new(force: T, displacement: T) -> Self {
        Self {
            work: T::zero(),
            force,
            displacement,
        }
    }

    pub fn advance(&mut self, force: T, displacement: T) -> T {
        self.work = self.work + T::lit(0.5) * (self.force + force) * (displacement - self.displacement);
        self.force = force;
        self.displacement = displacement;
        self.work
    }
}

/// Kinetic and strain energy of `state` plus the external-work increment
/// since the previous call on `work`.
pub fn kinetic_strain_work<T: Scalar>(
    state: &DynamicState<T>,
    mesh: &Mesh1D<T>,
    mass: &MassOperator<T>,
    moduli: &[T],
    area: T,
    work: &mut WorkAccumulator<T>,
) -> (T, T, T) {
    let kinetic = kinetic_energy(&state.v, mass, area);
    let strain = strain_energy(&state.u, &state.damage, moduli, mesh, area);
    let before = work.work;
    let force = reaction_force(&state.u, &state.damage, moduli, mesh, area);
    let after = work.advance(force, state.u[state.u.len() - 1]);
    (kinetic, strain, after - before)
}

/// Crack positions and mean spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentStats<T> {
    pub crack_positions: Vec<T>,
    /// Mean crack-to-crack distance; the bar length when fewer than two cracks.
    pub mean_fragment_size: T,
}

impl<T: Scalar> FragmentStats<T> {
    pub fn crack_count(&self) -> usize {
        self.crack_positions.len()
    }

    pub fn unbroken(&self) -> bool {
        self.crack_positions.len() < 2
    }
}

/// Maximal runs of consecutive elements satisfying `pred`, inclusive bounds.
fn runs<T: Copy>(d: &[T], mut pred: impl FnMut(T) -> bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &x) in d.iter().enumerate() {
        match (pred(x), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, d.len() - 1));
    }
    out
}

/// Each maximal run of elements with `d > threshold` is one crack located at
/// the damage-weighted centroid of the run.
pub fn fragment_stats<T: Scalar>(d: &[T], mesh: &Mesh1D<T>, threshold: T) -> FragmentStats<T> {
    let x = mesh.centroids();
    let crack_positions: Vec<T> = runs(d, |v| v > threshold)
        .into_iter()
        .map(|(a, b)| {
            let (mut w, mut wk) = (T::zero(), T::zero());
            for i in a..=b {
                w = w + d[i];
                wk = wk + d[i] * T::from_usize_lossy(i - a);
            }
            x[a] + mesh.element_size() * wk / w
        })
        .collect();
    let mean_fragment_size = if crack_positions.len() >= 2 {
        let n = crack_positions.len();
        (crack_positions[n - 1] - crack_positions[0]) / T::from_usize_lossy(n - 1)
    } else {
        mesh.length()
    };
    FragmentStats {
        crack_positions,
        mean_fragment_size,
    }
}

/// A contiguous region where damage exceeds a support threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DamageZone<T> {
    pub first_element: usize,
    pub last_element: usize,
    pub width: T,
    pub peak: T,
}

/// Maximal runs with `d > support_threshold`, with width `count · h_e`.
pub fn damage_zones<T: Scalar>(d: &[T], mesh: &Mesh1D<T>, support_threshold: T) -> Vec<DamageZone<T>> {
    runs(d, |v| v > support_threshold)
        .into_iter()
        .map(|(a, b)| DamageZone {
            first_element: a,
            last_element: b,
            width: T::from_usize_lossy(b - a + 1) * mesh.element_size(),
            peak: d[a..=b].iter().fold(T::zero(), |m, &v| m.max(v)),
        })
        .collect()
}

/// Damage profile at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub time: T,
    pub centroids: Vec<T>,
    pub damage: Vec<T>,
    pub active: Vec<bool>,
}

pub fn snapshot<T: Scalar>(state: &DynamicState<T>, mesh: &Mesh1D<T>, active: &[bool]) -> Snapshot<T> {
    Snapshot {
        time: state.time,
        centroids: mesh.centroids().to_vec(),
        damage: state.damage.clone(),
        active: active.to_vec(),
    }
}
