//! Constitutive laws: degradation, softening primitives for the Lipschitz
//! regularized model and the crack-band model, derived parameters, and the
//! random Young's modulus field.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::Mesh1D;
use crate::scalar::Scalar;

const DAMAGE_SLACK: f64 = 1e-12;

/// Degradation `g(d) = (1 - d)^2`.
#[inline]
pub fn degradation<T: Scalar>(d: T) -> T {
    let s = T::one() - d;
    s * s
}

/// `g'(d) = -2 (1 - d)`.
#[inline]
pub fn degradation_derivative<T: Scalar>(d: T) -> T {
    -(T::one() + T::one()) * (T::one() - d)
}

/// Domain-checked degradation returning `(g, g')`.
pub fn degradation_checked<T: Scalar>(d: T) -> Result<(T, T)> {
    let slack = T::lit(DAMAGE_SLACK);
    if !(d >= -slack && d <= T::one() + slack) {
        return Err(Error::DamageDomain {
            value: d.to_f64_lossy(),
        });
    }
    Ok((degradation(d), degradation_derivative(d)))
}

/// Which softening law the run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelVariant {
    /// Regularized model with the Lipschitz constraint on damage.
    LipField,
    /// Local crack-band model equivalent to a linear cohesive law.
    Czm,
}

/// Largest λ for which the Lip-field `h` is convex on [0, 1]; `h''(1) = 6(λ-1)(3λ-1)/λ^4`.
pub const LIP_LAMBDA_MAX: f64 = 1.0 / 3.0;

/// Softening primitive `h` with its analytical derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SofteningLaw<T> {
    /// `h(d) = (2d - d^2) / (1 - d + λ d^2)^2`.
    LipField { lambda: T },
    /// `h(d) = 1/(1-λc) * (1/((1-λc) g(d) + λc) - 1)`.
    Czm { lambda_c: T },
}

impl<T: Scalar> SofteningLaw<T> {
    pub fn lip_field(lambda: T) -> Result<Self> {
        if !(lambda > T::zero() && lambda <= T::lit(LIP_LAMBDA_MAX)) {
            return Err(Error::InvalidConfig(format!(
                "lambda = {lambda} must lie in (0, 1/3] for a convex softening primitive"
            )));
        }
        Ok(Self::LipField { lambda })
    }

    pub fn czm(lambda_c: T) -> Result<Self> {
        if !(lambda_c > T::zero() && lambda_c < T::one()) {
            return Err(Error::InvalidConfig(format!(
                "lambda_c = {lambda_c} must lie in (0, 1); the element size is incompatible \
                 with the crack-band equivalence"
            )));
        }
        Ok(Self::Czm { lambda_c })
    }

    /// Primitive `h(d)`.
    pub fn h(&self, d: T) -> T {
        match *self {
            Self::LipField { lambda } => {
                let q = T::one() - d + lambda * d * d;
                (d * (T::lit(2.0) - d)) / (q * q)
            }
            Self::Czm { lambda_c } => {
                let a = T::one() - lambda_c;
                (T::one() / (a * degradation(d) + lambda_c) - T::one()) / a
            }
        }
    }

    /// Softening function `H = h'`.
    pub fn dh(&self, d: T) -> T {
        let two = T::lit(2.0);
        match *self {
            Self::LipField { lambda } => {
                let n = d * (two - d);
                let dn = two * (T::one() - d);
                let q = T::one() - d + lambda * d * d;
                let dq = two * lambda * d - T::one();
                (dn * q - two * n * dq) / (q * q * q)
            }
            Self::Czm { lambda_c } => {
                let den = (T::one() - lambda_c) * degradation(d) + lambda_c;
                -degradation_derivative(d) / (den * den)
            }
        }
    }

    /// `H' = h''`.
    pub fn d2h(&self, d: T) -> T {
        let two = T::lit(2.0);
        match *self {
            Self::LipField { lambda } => {
                let n = d * (two - d);
                let dn = two * (T::one() - d);
                let q = T::one() - d + lambda * d * d;
                let dq = two * lambda * d - T::one();
                let p = dn * q - two * n * dq;
                let dp = -two * q - dn * dq - T::lit(4.0) * lambda * n;
                (dp * q - T::lit(3.0) * p * dq) / (q * q * q * q)
            }
            Self::Czm { lambda_c } => {
                let a = T::one() - lambda_c;
                let s = T::one() - d;
                let den = a * s * s + lambda_c;
                -two / (den * den) + T::lit(8.0) * a * s * s / (den * den * den)
            }
        }
    }

    /// `H(d) / (1 - d)`, the threshold on `E ε²` for damage growth at `d`,
    /// in units of `Y_c`. Increasing on `[0, 1]`.
    pub fn growth_ratio(&self, d: T) -> T {
        match *self {
            Self::LipField { .. } => {
                if d >= T::one() {
                    T::infinity()
                } else {
                    self.dh(d) / (T::one() - d)
                }
            }
            Self::Czm { lambda_c } => {
                let den = (T::one() - lambda_c) * degradation(d) + lambda_c;
                T::lit(2.0) / (den * den)
            }
        }
    }

    /// Derivative of [`growth_ratio`](Self::growth_ratio).
    pub fn growth_ratio_derivative(&self, d: T) -> T {
        match *self {
            Self::LipField { .. } => {
                if d >= T::one() {
                    T::infinity()
                } else {
                    let s = T::one() - d;
                    (self.d2h(d) * s + self.dh(d)) / (s * s)
                }
            }
            Self::Czm { lambda_c } => {
                let a = T::one() - lambda_c;
                let den = a * degradation(d) + lambda_c;
                // d/dd 2/den^2 with den' = a g'(d)
                -T::lit(4.0) * a * degradation_derivative(d) / (den * den * den)
            }
        }
    }

    /// Value of `h` at full damage.
    pub fn h_full(&self) -> T {
        match *self {
            Self::LipField { lambda } => T::one() / (lambda * lambda),
            Self::Czm { lambda_c } => T::one() / lambda_c,
        }
    }
}

/// Input material constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialProperties<T> {
    /// kg/m³
    pub density: T,
    /// Mean Young's modulus, Pa.
    pub young_modulus: T,
    /// Fracture toughness G_c, N/m.
    pub toughness: T,
    /// Critical tensile stress, Pa.
    pub critical_stress: T,
    /// Lipschitz regularization length ℓ, m.
    pub regularization_length: T,
}

impl MaterialProperties<f64> {
    /// Dense alumina bar used throughout the fragmentation benchmark.
    pub fn alumina() -> Self {
        Self {
            density: 3.9e3,
            young_modulus: 610e9,
            toughness: 83.13,
            critical_stress: 1.0e9,
            regularization_length: 2.21e-6,
        }
    }
}

/// Parameters derived from the material constants and the element size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParameters<T> {
    /// Critical energy release rate `Y_c = σ_c² / (2E)`, Pa.
    pub critical_energy_release_rate: T,
    /// `λ = 2 Y_c ℓ / G_c`.
    pub lambda: T,
    /// `λ_c = σ_c h_e / (E w_c)`.
    pub lambda_c: T,
    /// Critical opening of the linear cohesive law `w_c = 2 G_c / σ_c`, m.
    pub critical_opening: T,
}

pub fn derive_parameters<T: Scalar>(
    young_modulus: T,
    critical_stress: T,
    toughness: T,
    regularization_length: T,
    element_size: T,
) -> Result<DerivedParameters<T>> {
    for (name, v) in [
        ("young_modulus", young_modulus),
        ("critical_stress", critical_stress),
        ("toughness", toughness),
        ("regularization_length", regularization_length),
        ("element_size", element_size),
    ] {
        if !(v > T::zero() && v.is_finite()) {
            return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
        }
    }
    let two = T::lit(2.0);
    let yc = critical_stress * critical_stress / (two * young_modulus);
    let lambda = two * yc * regularization_length / toughness;
    let wc = two * toughness / critical_stress;
    let lambda_c = critical_stress * element_size / (young_modulus * wc);
    if lambda > T::lit(LIP_LAMBDA_MAX) {
        return Err(Error::InvalidConfig(format!(
            "lambda = 2 Yc l / Gc = {lambda} exceeds 1/3; the softening primitive is not convex \
             (reduce the regularization length)"
        )));
    }
    if lambda_c >= T::one() {
        return Err(Error::InvalidConfig(format!(
            "lambda_c = sigma_c h_e / (E w_c) = {lambda_c} is not below 1; the element size {element_size} \
             is too large for the crack-band model (need h_e < {})",
            young_modulus * wc / critical_stress
        )));
    }
    Ok(DerivedParameters {
        critical_energy_release_rate: yc,
        lambda,
        lambda_c,
        critical_opening: wc,
    })
}

/// Complete constitutive description for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialModel<T> {
    pub properties: MaterialProperties<T>,
    pub derived: DerivedParameters<T>,
    pub variant: ModelVariant,
    pub softening: SofteningLaw<T>,
}

impl<T: Scalar> MaterialModel<T> {
    pub fn new(properties: MaterialProperties<T>, variant: ModelVariant, element_size: T) -> Result<Self> {
        if !(properties.density > T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "density must be positive, got {}",
                properties.density
            )));
        }
        let derived = derive_parameters(
            properties.young_modulus,
            properties.critical_stress,
            properties.toughness,
            properties.regularization_length,
            element_size,
        )?;
        let softening = match variant {
            ModelVariant::LipField => SofteningLaw::lip_field(derived.lambda)?,
            ModelVariant::Czm => SofteningLaw::czm(derived.lambda_c)?,
        };
        Ok(Self {
            properties,
            derived,
            variant,
            softening,
        })
    }

    #[inline]
    pub fn yc(&self) -> T {
        self.derived.critical_energy_release_rate
    }

    /// Elastic wave speed from the mean modulus.
    pub fn wave_speed(&self) -> T {
        (self.properties.young_modulus / self.properties.density).sqrt()
    }
}

/// `σ = E g(d) ε`.
#[inline]
pub fn stress<T: Scalar>(strain: T, d: T, modulus: T) -> T {
    modulus * degradation(d) * strain
}

/// `φ = ½ g(d) E ε²`.
#[inline]
pub fn energy_density<T: Scalar>(strain: T, d: T, modulus: T) -> T {
    T::lit(0.5) * degradation(d) * modulus * strain * strain
}

/// Per-element Young's modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulusField<T> {
    values: Vec<T>,
    /// Generator seed, `None` for deterministic fields.
    pub seed: Option<u64>,
    /// Weibull shape `m` (0 when deterministic).
    pub shape: T,
    /// Coefficient of variation (0 when deterministic).
    pub cv: T,
    pub e_min: T,
    pub e_0: T,
}

/// Weibull offset and scale giving mean `mean` and coefficient of variation `cv`.
pub fn weibull_offset_scale(mean: f64, cv: f64, shape: f64) -> (f64, f64) {
    if shape == 2.0 {
        // Rayleigh case, constants as tabulated for m = 2.
        (mean * (1.0 - 1.913_058_4 * cv), 2.158_655_2 * mean * cv)
    } else {
        use statrs::function::gamma::gamma;
        let k1 = gamma(1.0 + 1.0 / shape);
        let k2 = (gamma(1.0 + 2.0 / shape) - k1 * k1).sqrt();
        let e0 = mean * cv / k2;
        (mean - e0 * k1, e0)
    }
}

/// `E(r) = E_0 (-ln r)^{1/m} + E_min`.
#[inline]
pub fn weibull_modulus(r: f64, e_0: f64, e_min: f64, shape: f64) -> f64 {
    e_0 * (-r.ln()).powf(1.0 / shape) + e_min
}

impl<T: Scalar> ModulusField<T> {
    /// Every element at the mean modulus.
    pub fn uniform(element_count: usize, modulus: T) -> Self {
        Self {
            values: vec![modulus; element_count],
            seed: None,
            shape: T::zero(),
            cv: T::zero(),
            e_min: modulus,
            e_0: T::zero(),
        }
    }

    /// Independent Weibull draw per element.
    ///
    /// The generator is ChaCha8 seeded through `SeedableRng::seed_from_u64`,
    /// which is portable across platforms; `r` is drawn from the open interval
    /// (0, 1), so `-ln r` is always finite.
    pub fn sample(seed: u64, mesh: &Mesh1D<T>, mean: T, cv: T, shape: T) -> Result<Self> {
        let (mean_f, cv_f, shape_f) = (mean.to_f64_lossy(), cv.to_f64_lossy(), shape.to_f64_lossy());
        if !(cv_f > 0.0 && cv_f < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "coefficient of variation must lie in (0, 0.5), got {cv_f}"
            )));
        }
        if !(shape_f > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "Weibull shape must be positive, got {shape_f}"
            )));
        }
        if !(mean_f > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "mean modulus must be positive, got {mean_f}"
            )));
        }
        let (e_min, e_0) = weibull_offset_scale(mean_f, cv_f, shape_f);
        if !(e_min > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "minimum modulus {e_min} is not positive for cv = {cv_f}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..mesh.element_count())
            .map(|_| {
                let r = loop {
                    let r: f64 = rng.sample(Open01);
                    if r > 0.0 {
                        break r;
                    }
                };
                T::lit(weibull_modulus(r, e_0, e_min, shape_f))
            })
            .collect();
        Ok(Self {
            values,
            seed: Some(seed),
            shape,
            cv,
            e_min: T::lit(e_min),
            e_0: T::lit(e_0),
        })
    }

    /// Multiplies the modulus of one element by `factor`.
    pub fn with_scaled_element(mut self, element: usize, factor: T) -> Result<Self> {
        let len = self.values.len();
        let v = self
            .values
            .get_mut(element)
            .ok_or(Error::OutOfBounds { index: element, len })?;
        *v = *v * factor;
        if *v < self.e_min {
            self.e_min = *v;
        }
        Ok(self)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }
}
