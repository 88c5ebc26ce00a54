//! Ensembles over seeds and sweeps over one configuration axis.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AxisKind, RunConfig, SchemeKind, SweepConfig, Variant};
use crate::error::{CampaignError, Result};
use crate::io::{self, fmt_f64, ReferencePoint};
use crate::run::{run_single, RunResult};

/// Environment variable overriding the configured worker count.
pub const WORKERS_ENV: &str = "LIPFRAG_WORKERS";

/// Worker count: environment, then config, then all cores.
pub fn worker_count(cfg: &RunConfig) -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .or(cfg.output.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub seed: u64,
    pub outcome: std::result::Result<RunResult, String>,
}

/// Sample mean and standard deviation (n - 1 denominator, 0 for one sample).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub completed: usize,
    pub failed: usize,
    pub partial: bool,
    #[serde(rename = "dissipated_mean_J")]
    pub dissipated_mean: f64,
    #[serde(rename = "dissipated_std_J")]
    pub dissipated_std: f64,
    #[serde(rename = "fragment_size_mean_m")]
    pub fragment_size_mean: f64,
    #[serde(rename = "fragment_size_std_m")]
    pub fragment_size_std: f64,
    pub crack_count_mean: f64,
}

impl Aggregate {
    /// Reduction over the members in ascending seed order, so the result does
    /// not depend on the order seeds were given or finished in.
    pub fn from_members(members: &[EnsembleMember]) -> Self {
        let mut done: Vec<&RunResult> = members.iter().filter_map(|m| m.outcome.as_ref().ok()).collect();
        done.sort_by_key(|r| r.seed);
        let failed = members.len() - done.len();
        let d: Vec<f64> = done.iter().map(|r| r.final_energy.dissipated).collect();
        let s: Vec<f64> = done.iter().map(|r| r.fragments.mean_fragment_size).collect();
        let c: Vec<f64> = done.iter().map(|r| r.fragments.crack_count() as f64).collect();
        let (dm, ds) = mean_std(&d);
        let (sm, ss) = mean_std(&s);
        Self {
            completed: done.len(),
            failed,
            partial: failed > 0,
            dissipated_mean: dm,
            dissipated_std: ds,
            fragment_size_mean: sm,
            fragment_size_std: ss,
            crack_count_mean: mean_std(&c).0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub config_hash: String,
    pub members: Vec<EnsembleMember>,
    pub aggregate: Aggregate,
}

#[derive(Serialize)]
struct EnsembleSummary<'a> {
    config_hash: &'a str,
    seeds: Vec<u64>,
    aggregate: &'a Aggregate,
    failures: Vec<(u64, &'a str)>,
}

/// Runs every seed, each in its own `seed_<n>` subdirectory when an output
/// directory is configured. Failed members are kept with their error.
pub fn run_ensemble(cfg: &RunConfig, seeds: &[u64]) -> Result<EnsembleResult> {
    if seeds.is_empty() {
        return Err(CampaignError::Validation("an ensemble needs at least one seed".into()));
    }
    cfg.validate()?;
    let base = cfg.output.directory.clone();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(cfg))
        .build()
        .map_err(|e| CampaignError::Validation(format!("thread pool: {e}")))?;
    let members: Vec<EnsembleMember> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let mut member_cfg = cfg.clone();
                member_cfg.output.directory = base.as_ref().map(|b| b.join(format!("seed_{seed}")));
                // members keep the ensemble's hash so their files can be matched up
                let outcome = run_single(&member_cfg, seed)
                    .map(|mut r| {
                        r.config_hash = cfg.hash();
                        r
                    })
                    .map_err(|e| e.to_string());
                EnsembleMember { seed, outcome }
            })
            .collect()
    });
    let aggregate = Aggregate::from_members(&members);
    let hash = cfg.hash();
    if let Some(b) = &base {
        let summary = EnsembleSummary {
            config_hash: &hash,
            seeds: seeds.to_vec(),
            aggregate: &aggregate,
            failures: members
                .iter()
                .filter_map(|m| m.outcome.as_ref().err().map(|e| (m.seed, e.as_str())))
                .collect(),
        };
        io::write_json(&b.join("ensemble.json"), &summary)?;
    }
    Ok(EnsembleResult {
        config_hash: hash,
        members,
        aggregate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    MeshRatio(Vec<f64>),
    StrainRate(Vec<f64>),
    VariantScheme(Vec<(Variant, SchemeKind)>),
}

impl SweepAxis {
    pub fn from_config(s: &SweepConfig) -> Result<Self> {
        let axis = match s.axis {
            AxisKind::MeshRatio => SweepAxis::MeshRatio(s.values.clone()),
            AxisKind::StrainRate => SweepAxis::StrainRate(s.values.clone()),
            AxisKind::VariantScheme => {
                SweepAxis::VariantScheme(s.cases.iter().map(|c| parse_case(c)).collect::<Result<Vec<_>>>()?)
            }
        };
        if axis.is_empty() {
            return Err(CampaignError::Validation("sweep axis has no values".into()));
        }
        Ok(axis)
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::MeshRatio(_) => "mesh-ratio",
            SweepAxis::StrainRate(_) => "strain-rate",
            SweepAxis::VariantScheme(_) => "variant-scheme",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SweepAxis::MeshRatio(v) | SweepAxis::StrainRate(v) => v.len(),
            SweepAxis::VariantScheme(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Label and configuration of cell `i`.
    fn cell(&self, base: &RunConfig, i: usize) -> (String, RunConfig) {
        let mut cfg = base.clone();
        let label = match self {
            SweepAxis::MeshRatio(v) => {
                cfg.mesh.ell_ratio = Some(v[i]);
                cfg.mesh.elements = None;
                fmt_f64(v[i])
            }
            SweepAxis::StrainRate(v) => {
                cfg.loading.strain_rate = v[i];
                fmt_f64(v[i])
            }
            SweepAxis::VariantScheme(v) => {
                cfg.model.variant = v[i].0;
                cfg.scheme.kind = v[i].1;
                format!("{}/{}", v[i].0.name(), v[i].1.name())
            }
        };
        (label, cfg)
    }
}

/// Parses `variant/scheme`, e.g. `lip-field/implicit`.
pub fn parse_case(s: &str) -> Result<(Variant, SchemeKind)> {
    let (v, k) = s
        .split_once('/')
        .ok_or_else(|| CampaignError::Validation(format!("expected variant/scheme, got '{s}'")))?;
    Ok((v.parse()?, k.parse()?))
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub axis: String,
    pub value: String,
    pub source: String,
    pub aggregate: Option<Aggregate>,
    pub reference: Option<ReferencePoint>,
    pub error: Option<String>,
}

impl SweepRow {
    fn to_record(&self) -> Vec<String> {
        let mut r = vec![self.axis.clone(), self.value.clone(), self.source.clone()];
        match (&self.aggregate, &self.reference) {
            (Some(a), _) => r.extend([
                a.completed.to_string(),
                a.failed.to_string(),
                fmt_f64(a.dissipated_mean),
                fmt_f64(a.dissipated_std),
                fmt_f64(a.fragment_size_mean),
                fmt_f64(a.fragment_size_std),
                fmt_f64(a.crack_count_mean),
            ]),
            (None, Some(p)) => r.extend([
                "0".into(),
                "0".into(),
                fmt_f64(p.dissipated),
                String::new(),
                fmt_f64(p.fragment_size),
                String::new(),
                String::new(),
            ]),
            (None, None) => r.extend(std::iter::repeat_n(String::new(), 7)),
        }
        r.push(self.error.clone().unwrap_or_default());
        r
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config_hash: String,
    pub rows: Vec<SweepRow>,
    pub ensembles: Vec<Option<EnsembleResult>>,
    pub table_file: Option<PathBuf>,
}

/// One ensemble per axis value. Invalid or failing cells become rows with an
/// error and the sweep moves on. Reference points are appended as rows with
/// their own source label.
pub fn run_sweep(
    base: &RunConfig,
    axis: &SweepAxis,
    seeds: &[u64],
    reference: &[ReferencePoint],
) -> Result<SweepResult> {
    if axis.is_empty() {
        return Err(CampaignError::Validation("sweep axis has no values".into()));
    }
    let hash = base.hash();
    let root = base.output.directory.clone();
    let mut rows = Vec::new();
    let mut ensembles = Vec::new();
    for i in 0..axis.len() {
        let (label, mut cfg) = axis.cell(base, i);
        cfg.output.directory = root.as_ref().map(|r| r.join(format!("cell_{i}")));
        let outcome = cfg.validate().and_then(|_| run_ensemble(&cfg, seeds));
        let (aggregate, error, ens) = match outcome {
            Ok(e) => {
                let err = e
                    .aggregate
                    .partial
                    .then(|| format!("{} of {} runs failed", e.aggregate.failed, seeds.len()));
                (Some(e.aggregate.clone()), err, Some(e))
            }
            Err(e) => {
                log::warn!("sweep cell {label}: {e}");
                (None, Some(e.to_string()), None)
            }
        };
        rows.push(SweepRow {
            axis: axis.name().into(),
            value: label,
            source: "simulation".into(),
            aggregate,
            reference: None,
            error,
        });
        ensembles.push(ens);
    }
    for p in reference {
        rows.push(SweepRow {
            axis: "strain-rate".into(),
            value: fmt_f64(p.rate),
            source: p.source.clone(),
            aggregate: None,
            reference: Some(p.clone()),
            error: None,
        });
    }
    let table_file = match &root {
        Some(r) => Some(write_table(r, &rows, &hash)?),
        None => None,
    };
    Ok(SweepResult {
        config_hash: hash,
        rows,
        ensembles,
        table_file,
    })
}

fn write_table(root: &Path, rows: &[SweepRow], hash: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(root)?;
    let path = root.join("table.csv");
    let records: Vec<Vec<String>> = rows.iter().map(SweepRow::to_record).collect();
    io::write_table_csv(&path, &records, hash)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_cases() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(mean_std(&[]).0.is_nan());
    }

    #[test]
    fn cases_parse() {
        assert_eq!(
            parse_case("czm/implicit").unwrap(),
            (Variant::Czm, SchemeKind::Implicit)
        );
        assert_eq!(
            parse_case("lip-field/explicit").unwrap(),
            (Variant::LipField, SchemeKind::Explicit)
        );
        assert!(parse_case("czm").is_err());
        assert!(parse_case("foo/explicit").is_err());
    }
}
