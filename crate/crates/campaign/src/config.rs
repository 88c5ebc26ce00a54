//! Run configuration: TOML document, defaults, overrides, validation and hashing.

use std::path::{Path, PathBuf};

use lipfrag_core::material::MaterialModel;
use lipfrag_core::mesh::Mesh1D;
use lipfrag_core::MaterialProperties;
use lipfrag_core::ModelVariant;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CampaignError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    /// Bar length, m.
    pub length: f64,
    /// Cross-section, m².
    pub area: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            length: 2e-3,
            area: 2e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialInputs {
    pub density: f64,
    pub young_modulus: f64,
    pub toughness: f64,
    pub critical_stress: f64,
    pub regularization_length: f64,
}

impl Default for MaterialInputs {
    fn default() -> Self {
        let p = MaterialProperties::alumina();
        Self {
            density: p.density,
            young_modulus: p.young_modulus,
            toughness: p.toughness,
            critical_stress: p.critical_stress,
            regularization_length: p.regularization_length,
        }
    }
}

impl MaterialInputs {
    pub fn properties(&self) -> MaterialProperties {
        MaterialProperties {
            density: self.density,
            young_modulus: self.young_modulus,
            toughness: self.toughness,
            critical_stress: self.critical_stress,
            regularization_length: self.regularization_length,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    LipField,
    Czm,
}

impl Variant {
    pub fn model(self) -> ModelVariant {
        match self {
            Variant::LipField => ModelVariant::LipField,
            Variant::Czm => ModelVariant::Czm,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::LipField => "lip-field",
            Variant::Czm => "czm",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = CampaignError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lip-field" | "lipfield" | "lip" => Ok(Variant::LipField),
            "czm" => Ok(Variant::Czm),
            _ => Err(CampaignError::Validation(format!("unknown model variant '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::LipField,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Explicit,
    Implicit,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Explicit => "explicit",
            SchemeKind::Implicit => "implicit",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = CampaignError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "explicit" => Ok(SchemeKind::Explicit),
            "implicit" => Ok(SchemeKind::Implicit),
            _ => Err(CampaignError::Validation(format!("unknown scheme '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    /// Fraction of the critical time step `h_e / c`.
    pub cfl: f64,
    pub tol_u: f64,
    pub tol_d: f64,
    pub max_iterations: usize,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            kind: SchemeKind::Explicit,
            cfl: 0.99,
            tol_u: 1e-6,
            tol_d: 1e-6,
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Loading {
    /// Imposed strain rate, 1/s.
    pub strain_rate: f64,
}

impl Default for Loading {
    fn default() -> Self {
        Self { strain_rate: 1e5 }
    }
}

/// Either `h_e = ℓ / ell_ratio` or an explicit element count; exactly one is set.
/// A missing `[mesh]` table means `ell_ratio = 10`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(default)]
    pub ell_ratio: Option<f64>,
    #[serde(default)]
    pub elements: Option<usize>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            ell_ratio: Some(10.0),
            elements: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakElement {
    /// Element index; the middle element when absent.
    pub index: Option<usize>,
    /// Multiplier applied to that element's modulus.
    pub factor: f64,
}

impl Default for WeakElement {
    fn default() -> Self {
        Self {
            index: None,
            factor: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stochastic {
    /// Coefficient of variation of the modulus; 0 gives a uniform field.
    pub cv: f64,
    /// Weibull shape.
    pub shape: f64,
    pub seeds: Vec<u64>,
    pub weak_element: Option<WeakElement>,
}

impl Default for Stochastic {
    fn default() -> Self {
        Self {
            cv: 0.01,
            shape: 2.0,
            seeds: (1..=20).collect(),
            weak_element: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stopping {
    /// Final time, s. Without it the run ends on the plateau rule or the step cap.
    pub t_max: Option<f64>,
    /// Steps without dissipation growth that end the run, counted once an element has cracked.
    pub plateau_window: u64,
    /// Relative growth of D below which a step counts as no growth.
    pub plateau_tolerance: f64,
    pub max_steps: u64,
}

impl Default for Stopping {
    fn default() -> Self {
        Self {
            t_max: None,
            plateau_window: 500,
            plateau_tolerance: 1e-5,
            max_steps: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    /// Run directory; nothing is written when absent.
    pub directory: Option<PathBuf>,
    /// Energy record every `energy_stride` steps (the last step is always kept).
    pub energy_stride: u64,
    /// Snapshot every `snapshot_stride` steps; 0 disables strided snapshots.
    pub snapshot_stride: u64,
    /// Additional snapshot instants, s.
    pub snapshot_times: Vec<f64>,
    pub crack_threshold: f64,
    /// Concurrent ensemble members; all cores when absent.
    pub workers: Option<usize>,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            directory: None,
            energy_stride: 10,
            snapshot_stride: 0,
            snapshot_times: Vec::new(),
            crack_threshold: 0.98,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisKind {
    MeshRatio,
    StrainRate,
    VariantScheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: AxisKind,
    /// Values for the numeric axes.
    pub values: Vec<f64>,
    /// `variant/scheme` pairs for the variant-scheme axis, e.g. `"czm/implicit"`.
    pub cases: Vec<String>,
    /// Optional CSV of literature points (rate, D, fragment size, source).
    pub reference: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: AxisKind::StrainRate,
            values: Vec::new(),
            cases: Vec::new(),
            reference: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub material: MaterialInputs,
    pub model: ModelConfig,
    pub scheme: SchemeConfig,
    pub loading: Loading,
    pub mesh: MeshConfig,
    pub stochastic: Stochastic,
    pub stopping: Stopping,
    pub output: Output,
    pub sweep: Option<SweepConfig>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub variant: Option<Variant>,
    pub scheme: Option<SchemeKind>,
    pub strain_rate: Option<f64>,
    pub ell_ratio: Option<f64>,
    pub elements: Option<usize>,
    pub cv: Option<f64>,
    pub seeds: Option<Vec<u64>>,
    pub t_max: Option<f64>,
    pub max_steps: Option<u64>,
    pub output: Option<PathBuf>,
    pub workers: Option<usize>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CampaignError::Validation(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CampaignError::Validation(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Defaults, then `path` if given, then `overrides`.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| CampaignError::Validation(format!("config: {e}")))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.variant {
            self.model.variant = v;
        }
        if let Some(s) = o.scheme {
            self.scheme.kind = s;
        }
        if let Some(r) = o.strain_rate {
            self.loading.strain_rate = r;
        }
        if let Some(k) = o.ell_ratio {
            self.mesh = MeshConfig {
                ell_ratio: Some(k),
                elements: None,
            };
        }
        if let Some(n) = o.elements {
            self.mesh = MeshConfig {
                ell_ratio: None,
                elements: Some(n),
            };
        }
        if let Some(cv) = o.cv {
            self.stochastic.cv = cv;
        }
        if let Some(s) = &o.seeds {
            self.stochastic.seeds = s.clone();
        }
        if let Some(t) = o.t_max {
            self.stopping.t_max = Some(t);
        }
        if let Some(n) = o.max_steps {
            self.stopping.max_steps = n;
        }
        if let Some(p) = &o.output {
            self.output.directory = Some(p.clone());
        }
        if let Some(w) = o.workers {
            self.output.workers = Some(w);
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn mesh(&self) -> Result<Mesh1D<f64>> {
        let mesh = match (self.mesh.ell_ratio, self.mesh.elements) {
            (Some(k), None) => {
                positive("mesh.ell_ratio", k)?;
                Mesh1D::with_element_size(self.geometry.length, self.material.regularization_length / k)
            }
            (None, Some(n)) => Mesh1D::uniform(self.geometry.length, n),
            _ => {
                return Err(CampaignError::Validation(
                    "set exactly one of mesh.ell_ratio and mesh.elements".into(),
                ))
            }
        };
        mesh.map_err(|e| CampaignError::Validation(e.to_string()))
    }

    pub fn material_model(&self, mesh: &Mesh1D<f64>) -> Result<MaterialModel<f64>> {
        MaterialModel::new(
            self.material.properties(),
            self.model.variant.model(),
            mesh.element_size(),
        )
        .map_err(|e| CampaignError::Validation(e.to_string()))
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        positive("geometry.length", self.geometry.length)?;
        positive("geometry.area", self.geometry.area)?;
        let m = &self.material;
        positive("material.density", m.density)?;
        positive("material.young_modulus", m.young_modulus)?;
        positive("material.toughness", m.toughness)?;
        positive("material.critical_stress", m.critical_stress)?;
        positive("material.regularization_length", m.regularization_length)?;
        positive("loading.strain_rate", self.loading.strain_rate)?;
        positive("scheme.cfl", self.scheme.cfl)?;
        if self.scheme.kind == SchemeKind::Explicit && self.scheme.cfl > 1.0 {
            return Err(CampaignError::Validation(format!(
                "scheme.cfl = {} exceeds the explicit stability limit of 1",
                self.scheme.cfl
            )));
        }
        positive("scheme.tol_u", self.scheme.tol_u)?;
        positive("scheme.tol_d", self.scheme.tol_d)?;
        if self.scheme.max_iterations == 0 {
            return Err(CampaignError::Validation(
                "scheme.max_iterations must be at least 1".into(),
            ));
        }
        let s = &self.stochastic;
        if !(0.0..0.5).contains(&s.cv) {
            return Err(CampaignError::Validation(format!(
                "stochastic.cv must be in [0, 0.5), got {}",
                s.cv
            )));
        }
        positive("stochastic.shape", s.shape)?;
        let mesh = self.mesh()?;
        self.material_model(&mesh)?;
        if let Some(w) = &s.weak_element {
            positive("stochastic.weak_element.factor", w.factor)?;
            if let Some(i) = w.index {
                if i >= mesh.element_count() {
                    return Err(CampaignError::Validation(format!(
                        "weak element {i} outside 0..{}",
                        mesh.element_count()
                    )));
                }
            }
        }
        if let Some(t) = self.stopping.t_max {
            positive("stopping.t_max", t)?;
        }
        positive("stopping.plateau_tolerance", self.stopping.plateau_tolerance)?;
        if self.stopping.plateau_window == 0 || self.stopping.max_steps == 0 {
            return Err(CampaignError::Validation(
                "stopping.plateau_window and stopping.max_steps must be at least 1".into(),
            ));
        }
        if self.output.energy_stride == 0 {
            return Err(CampaignError::Validation(
                "output.energy_stride must be at least 1".into(),
            ));
        }
        let th = self.output.crack_threshold;
        if !(th > 0.0 && th < 1.0) {
            return Err(CampaignError::Validation(format!(
                "output.crack_threshold must be in (0, 1), got {th}"
            )));
        }
        if self.output.workers == Some(0) {
            return Err(CampaignError::Validation("output.workers must be at least 1".into()));
        }
        Ok(())
    }
}
