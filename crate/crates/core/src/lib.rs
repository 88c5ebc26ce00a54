//! One-dimensional dynamic fragmentation of a brittle bar.
//!
//! A bar stretched at a constant strain rate is discretized with linear
//! elements (displacements at nodes, damage at centroids) and integrated in
//! time with Newmark schemes. Damage follows either a Lipschitz-regularized
//! softening model, where the damage field may not vary faster than `1/ℓ`,
//! or a local crack-band model calibrated to a linear cohesive law.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the experiment harness uses.

pub mod damage_update;
pub mod dynamics;
pub mod error;
pub mod fem_ops;
pub mod lip_projection;
pub mod material;
pub mod mesh;
pub mod observables;
pub mod scalar;

pub use error::{Error, Result};
pub use material::ModelVariant;
pub use scalar::Scalar;

pub type Mesh = mesh::Mesh1D<f64>;
pub type Material = material::MaterialModel<f64>;
pub type MaterialProperties = material::MaterialProperties<f64>;
pub type ModulusField = material::ModulusField<f64>;
pub type MassOperator = fem_ops::MassOperator<f64>;
pub type SymTridiagonal = fem_ops::SymTridiagonal<f64>;
pub type ProjectionBounds = lip_projection::ProjectionBounds<f64>;
pub type DynamicState = dynamics::DynamicState<f64>;
pub type NewmarkScheme = dynamics::NewmarkScheme<f64>;
pub type Simulation = dynamics::Simulation<f64>;
pub type EnergyRecord = observables::EnergyRecord<f64>;
pub type FragmentStats = observables::FragmentStats<f64>;
pub type Snapshot = observables::Snapshot<f64>;
