//! Single runs: build the simulation from a config, step it to the stopping
//! rule, monitor invariants and collect observables.

use std::path::{Path, PathBuf};

use lipfrag_core::dynamics::{stable_time_step, NewmarkScheme, Simulation};
use lipfrag_core::fem_ops::{assemble_mass, MassOperator, MassVariant};
use lipfrag_core::lip_projection::lipschitz_violation;
use lipfrag_core::observables::{
    dissipated_energy, fragment_stats, kinetic_energy, reaction_force, snapshot, strain_energy, WorkAccumulator,
};
use lipfrag_core::ModulusField;
use lipfrag_core::{EnergyRecord, FragmentStats, Snapshot};
use serde::Serialize;

use crate::config::{RunConfig, SchemeKind, Variant};
use crate::error::{CampaignError, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Plateau,
    TimeLimit,
    StepLimit,
}

/// Violation counts gathered after every accepted step.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InvariantReport {
    pub checked_steps: u64,
    /// Elements whose damage decreased.
    pub irreversibility_violations: u64,
    /// Largest excess of `|d_i - d_{i+1}|` over `h_e / ℓ` (Lip-field runs only).
    pub max_lipschitz_violation: f64,
    /// Steps where an end displacement differed from its prescribed value.
    pub dirichlet_violations: u64,
    /// Steps where the dissipated energy decreased.
    pub dissipation_decreases: u64,
    pub non_finite_energies: u64,
}

impl InvariantReport {
    pub fn clean(&self, lipschitz_tolerance: f64) -> bool {
        self.irreversibility_violations == 0
            && self.max_lipschitz_violation <= lipschitz_tolerance
            && self.dirichlet_violations == 0
            && self.dissipation_decreases == 0
            && self.non_finite_energies == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergySummary {
    #[serde(rename = "time_s")]
    pub time: f64,
    #[serde(rename = "dissipated_J")]
    pub dissipated: f64,
    #[serde(rename = "strain_J")]
    pub strain: f64,
    #[serde(rename = "kinetic_J")]
    pub kinetic: f64,
    #[serde(rename = "work_J")]
    pub work: f64,
    pub active_elements: usize,
}

impl From<&EnergyRecord> for EnergySummary {
    fn from(r: &EnergyRecord) -> Self {
        Self {
            time: r.time,
            dissipated: r.dissipated,
            strain: r.strain,
            kinetic: r.kinetic,
            work: r.work,
            active_elements: r.active_elements,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FragmentSummary {
    pub crack_count: usize,
    #[serde(rename = "crack_positions_m")]
    pub crack_positions: Vec<f64>,
    #[serde(rename = "mean_fragment_size_m")]
    pub mean_fragment_size: f64,
    pub unbroken: bool,
    /// The mean spans crack-to-crack distances only; bar-end segments are left out.
    pub end_segments_excluded: bool,
    pub threshold: f64,
}

/// Contents of `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub seed: u64,
    pub status: &'static str,
    pub variant: &'static str,
    pub scheme: &'static str,
    pub strain_rate: f64,
    pub elements: usize,
    #[serde(rename = "element_size_m")]
    pub element_size: f64,
    #[serde(rename = "time_step_s")]
    pub time_step: f64,
    pub steps: u64,
    pub stop_reason: Option<StopReason>,
    #[serde(rename = "initiation_time_s")]
    pub initiation_time: Option<f64>,
    pub final_energy: Option<EnergySummary>,
    pub fragments: Option<FragmentSummary>,
    pub nonconverged_steps: u64,
    pub max_staggered_iterations: usize,
    pub invariants: InvariantReport,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    pub energy_file: Option<PathBuf>,
    pub snapshot_file: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config_hash: String,
    pub seed: u64,
    pub final_energy: EnergyRecord,
    pub fragments: FragmentStats,
    pub energy: Vec<EnergyRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_damage: Vec<f64>,
    pub initial_kinetic: f64,
    pub initiation_time: Option<f64>,
    pub stop_reason: StopReason,
    pub steps: u64,
    pub time_step: f64,
    pub nonconverged_steps: u64,
    pub invariants: InvariantReport,
    pub warnings: Vec<String>,
    pub summary: RunSummary,
}

/// Modulus field for `seed`: Weibull when `cv > 0`, uniform otherwise, then
/// the optional weakened element.
pub fn modulus_field(cfg: &RunConfig, mesh: &lipfrag_core::Mesh, seed: u64) -> Result<ModulusField> {
    let s = &cfg.stochastic;
    let mean = cfg.material.young_modulus;
    let mut field = if s.cv > 0.0 {
        ModulusField::sample(seed, mesh, mean, s.cv, s.shape)?
    } else {
        ModulusField::uniform(mesh.element_count(), mean)
    };
    if let Some(w) = &s.weak_element {
        let idx = w.index.unwrap_or(mesh.element_count() / 2);
        field = field.with_scaled_element(idx, w.factor)?;
    }
    Ok(field)
}

/// Simulation for `(cfg, seed)`. The time step uses the wave speed of the
/// stiffest element.
pub fn build_simulation(cfg: &RunConfig, seed: u64) -> Result<Simulation<f64>> {
    cfg.validate()?;
    let mesh = cfg.mesh()?;
    let material = cfg.material_model(&mesh)?;
    let field = modulus_field(cfg, &mesh, seed)?;
    let c = (field.max() / cfg.material.density).sqrt();
    let dt = stable_time_step(&mesh, c, cfg.scheme.cfl);
    let scheme = match cfg.scheme.kind {
        SchemeKind::Explicit => NewmarkScheme::explicit(dt),
        SchemeKind::Implicit => NewmarkScheme::implicit(dt),
    };
    let mut sim = Simulation::new(mesh, material, field, scheme, cfg.loading.strain_rate)?;
    sim.control.tol_u = cfg.scheme.tol_u;
    sim.control.tol_d = cfg.scheme.tol_d;
    sim.control.max_iterations = cfg.scheme.max_iterations;
    Ok(sim)
}

struct Monitor {
    report: InvariantReport,
    prev_damage: Vec<f64>,
    prev_dissipated: f64,
    slope: Option<f64>,
}

impl Monitor {
    fn check(&mut self, sim: &Simulation<f64>, state: &lipfrag_core::DynamicState, dissipated: f64) {
        let r = &mut self.report;
        r.checked_steps += 1;
        r.irreversibility_violations += state
            .damage
            .iter()
            .zip(&self.prev_damage)
            .filter(|(new, old)| new < old)
            .count() as u64;
        self.prev_damage.copy_from_slice(&state.damage);
        if let Some(s) = self.slope {
            r.max_lipschitz_violation = r.max_lipschitz_violation.max(lipschitz_violation(&state.damage, s));
        }
        let last = state.u.len() - 1;
        if state.u[0] != 0.0 || state.u[last] != sim.end_displacement(state.time) {
            r.dirichlet_violations += 1;
        }
        if dissipated < self.prev_dissipated {
            r.dissipation_decreases += 1;
        }
        self.prev_dissipated = dissipated;
    }
}

fn energy_record(
    sim: &Simulation<f64>,
    state: &lipfrag_core::DynamicState,
    mass: &MassOperator<f64>,
    area: f64,
    dissipated: f64,
    work: f64,
) -> EnergyRecord {
    EnergyRecord {
        time: state.time,
        dissipated,
        strain: strain_energy(&state.u, &state.damage, sim.moduli().values(), sim.mesh(), area),
        kinetic: kinetic_energy(&state.v, mass, area),
        work,
        active_elements: state.active.iter().filter(|&&a| a).count(),
    }
}

/// Runs `(cfg, seed)` to completion. With an output directory configured the
/// run writes `energy.csv`, `snapshots.csv` and `result.json` there; a
/// solver failure still writes `result.json` with the diagnostic.
pub fn run_single(cfg: &RunConfig, seed: u64) -> Result<RunResult> {
    let hash = cfg.hash();
    let mut sim = build_simulation(cfg, seed)?;
    let area = cfg.geometry.area;
    let mesh = sim.mesh().clone();
    let material = *sim.material();
    // energies are always reported with the consistent mass
    let mass = assemble_mass(&mesh, cfg.material.density, MassVariant::Consistent);
    let mut state = sim.initial_state();
    let initial_kinetic = kinetic_energy(&state.v, &mass, area);

    let mut summary = RunSummary {
        config_hash: hash.clone(),
        seed,
        status: "running",
        variant: cfg.model.variant.name(),
        scheme: cfg.scheme.kind.name(),
        strain_rate: cfg.loading.strain_rate,
        elements: mesh.element_count(),
        element_size: mesh.element_size(),
        time_step: sim.scheme().dt,
        steps: 0,
        stop_reason: None,
        initiation_time: None,
        final_energy: None,
        fragments: None,
        nonconverged_steps: 0,
        max_staggered_iterations: 0,
        invariants: InvariantReport::default(),
        warnings: Vec::new(),
        error: None,
        energy_file: None,
        snapshot_file: None,
    };
    let dir = cfg.output.directory.clone();
    if let Some(d) = &dir {
        std::fs::create_dir_all(d)?;
    }

    let mut monitor = Monitor {
        report: InvariantReport::default(),
        prev_damage: state.damage.clone(),
        prev_dissipated: 0.0,
        slope: (cfg.model.variant == Variant::LipField)
            .then(|| mesh.lipschitz_slope(cfg.material.regularization_length)),
    };
    let mut work = WorkAccumulator::new(
        reaction_force(&state.u, &state.damage, sim.moduli().values(), &mesh, area),
        state.u[state.u.len() - 1],
    );
    let mut energy = vec![energy_record(&sim, &state, &mass, area, 0.0, 0.0)];
    let mut snapshots = Vec::new();
    let mut snapshot_times = cfg.output.snapshot_times.clone();
    snapshot_times.sort_by(f64::total_cmp);
    let mut next_listed = 0;
    if cfg.output.snapshot_stride > 0 {
        snapshots.push(snapshot(&state, &mesh, &state.active));
    }

    let stop = &cfg.stopping;
    let mut anchor = (0.0f64, 0u64);
    let mut initiation_time = None;
    let mut nonconverged = 0u64;
    let mut max_iterations = 0usize;
    let mut warnings = Vec::new();
    let mut dissipated: f64;
    let mut cracked = false;
    let stop_reason = loop {
        let report = match sim.step(&mut state) {
            Ok(r) => r,
            Err(e) => {
                return Err(fail(
                    &mut summary,
                    dir.as_deref(),
                    state.step,
                    &monitor.report,
                    e.to_string(),
                ))
            }
        };
        max_iterations = max_iterations.max(report.iterations);
        if !report.converged {
            nonconverged += 1;
            if nonconverged <= 10 {
                warnings.push(format!(
                    "step {}: staggered loop stopped after {} iterations (err_u {:e}, err_d {:e})",
                    state.step, report.iterations, report.err_u, report.err_d
                ));
            }
        }
        dissipated = dissipated_energy(&state.damage, &mesh, &material, area);
        monitor.check(&sim, &state, dissipated);
        let w = work.advance(
            reaction_force(&state.u, &state.damage, sim.moduli().values(), &mesh, area),
            state.u[state.u.len() - 1],
        );
        if initiation_time.is_none() && dissipated > 0.0 {
            initiation_time = Some(state.time);
        }
        // damage can stall below the crack threshold while the bar is still loading
        cracked = cracked || state.damage.iter().any(|&d| d >= cfg.output.crack_threshold);

        if dissipated > anchor.0 * (1.0 + stop.plateau_tolerance) {
            anchor = (dissipated, state.step);
        }
        let reason = if cracked && state.step - anchor.1 >= stop.plateau_window {
            Some(StopReason::Plateau)
        } else if stop.t_max.is_some_and(|t| state.time >= t) {
            Some(StopReason::TimeLimit)
        } else if state.step >= stop.max_steps {
            Some(StopReason::StepLimit)
        } else {
            None
        };

        if state.step % cfg.output.energy_stride == 0 || reason.is_some() {
            let rec = energy_record(&sim, &state, &mass, area, dissipated, w);
            if !(rec.strain.is_finite() && rec.kinetic.is_finite() && rec.work.is_finite() && dissipated.is_finite()) {
                monitor.report.non_finite_energies += 1;
                let msg = format!("non-finite energy at step {} (t = {:e} s)", state.step, state.time);
                return Err(fail(&mut summary, dir.as_deref(), state.step, &monitor.report, msg));
            }
            energy.push(rec);
        }
        let mut take = cfg.output.snapshot_stride > 0 && state.step % cfg.output.snapshot_stride == 0;
        while next_listed < snapshot_times.len() && state.time >= snapshot_times[next_listed] {
            take = true;
            next_listed += 1;
        }
        if take || reason.is_some() {
            snapshots.push(snapshot(&state, &mesh, &state.active));
        }
        if state.step % 10_000 == 0 {
            log::debug!("seed {seed}: step {} t {:e} D {:e}", state.step, state.time, dissipated);
        }
        if let Some(r) = reason {
            break r;
        }
    };
    if nonconverged > 10 {
        warnings.push(format!("{nonconverged} steps in total hit the staggered iteration cap"));
    }
    if stop_reason == StopReason::StepLimit {
        warnings.push(format!(
            "stopped at the step cap ({}) before the plateau rule",
            stop.max_steps
        ));
    }

    let fragments = fragment_stats(&state.damage, &mesh, cfg.output.crack_threshold);
    let final_energy = *energy.last().expect("at least the initial record");
    summary.status = "completed";
    summary.steps = state.step;
    summary.stop_reason = Some(stop_reason);
    summary.initiation_time = initiation_time;
    summary.final_energy = Some(EnergySummary::from(&final_energy));
    summary.fragments = Some(FragmentSummary {
        crack_count: fragments.crack_count(),
        crack_positions: fragments.crack_positions.clone(),
        mean_fragment_size: fragments.mean_fragment_size,
        unbroken: fragments.unbroken(),
        end_segments_excluded: true,
        threshold: cfg.output.crack_threshold,
    });
    summary.nonconverged_steps = nonconverged;
    summary.max_staggered_iterations = max_iterations;
    summary.invariants = monitor.report.clone();
    summary.warnings = warnings.clone();
    if let Some(d) = &dir {
        write_outputs(d, &mut summary, &energy, &snapshots, &hash, seed)?;
    }
    log::info!(
        "seed {seed}: {} steps, D = {:e} J, {} cracks",
        state.step,
        dissipated,
        fragments.crack_count()
    );

    Ok(RunResult {
        config_hash: hash,
        seed,
        final_energy,
        fragments,
        energy,
        snapshots,
        final_damage: state.damage,
        initial_kinetic,
        initiation_time,
        stop_reason,
        steps: summary.steps,
        time_step: summary.time_step,
        nonconverged_steps: nonconverged,
        invariants: monitor.report,
        warnings,
        summary,
    })
}

/// Records a failed run in `result.json` (when there is a run directory).
fn fail(
    summary: &mut RunSummary,
    dir: Option<&Path>,
    step: u64,
    report: &InvariantReport,
    msg: String,
) -> CampaignError {
    summary.status = "failed";
    summary.steps = step;
    summary.error = Some(msg.clone());
    summary.invariants = report.clone();
    if let Some(d) = dir {
        if let Err(e) = io::write_json(&d.join("result.json"), summary) {
            log::error!("could not write result.json: {e}");
        }
    }
    log::error!("seed {}: {msg}", summary.seed);
    CampaignError::Numerical(msg)
}

fn write_outputs(
    dir: &Path,
    summary: &mut RunSummary,
    energy: &[EnergyRecord],
    snapshots: &[Snapshot],
    hash: &str,
    seed: u64,
) -> Result<()> {
    let energy_path = dir.join("energy.csv");
    io::write_energy_csv(&energy_path, energy, hash, seed)?;
    summary.energy_file = Some(PathBuf::from("energy.csv"));
    let snap_path = dir.join("snapshots.csv");
    io::write_snapshots_csv(&snap_path, snapshots, hash, seed)?;
    summary.snapshot_file = Some(PathBuf::from("snapshots.csv"));
    io::write_json(&dir.join("result.json"), summary)
}
