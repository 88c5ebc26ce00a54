//! Newmark time integration: central-difference explicit steps with a lumped
//! mass, and implicit trapezoidal steps with a staggered displacement/damage
//! loop on the consistent mass.

use crate::damage_update::{DamageStepInfo, DamageUpdater};
use crate::error::{Error, Result};
use crate::fem_ops::{
    assemble_mass, assemble_stiffness_into, internal_force_into, EndpointSolver, MassOperator, MassVariant,
    SymTridiagonal,
};
use crate::material::{MaterialModel, ModulusField};
use crate::mesh::Mesh1D;
use crate::scalar::{max_abs_diff, Scalar};

/// Newmark parameters and time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewmarkScheme<T> {
    pub beta: T,
    pub gamma: T,
    pub dt: T,
    pub mass: MassVariant,
}

impl<T: Scalar> NewmarkScheme<T> {
    /// Central difference: `β = 0`, `γ = 1/2`, lumped mass.
    pub fn explicit(dt: T) -> Self {
        Self {
            beta: T::zero(),
            gamma: T::lit(0.5),
            dt,
            mass: MassVariant::Lumped,
        }
    }

    /// Trapezoidal rule: `β = 1/4`, `γ = 1/2`, consistent mass.
    pub fn implicit(dt: T) -> Self {
        Self {
            beta: T::lit(0.25),
            gamma: T::lit(0.5),
            dt,
            mass: MassVariant::Consistent,
        }
    }

    pub fn is_explicit(&self) -> bool {
        self.beta == T::zero()
    }
}

/// `Δt = cfl · h_e / c`.
pub fn stable_time_step<T: Scalar>(mesh: &Mesh1D<T>, wave_speed: T, cfl: T) -> T {
    cfl * mesh.element_size() / wave_speed
}

/// Stopping rule and error guards of the implicit staggered loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaggeredControl<T> {
    pub max_iterations: usize,
    pub tol_u: T,
    pub tol_d: T,
    /// Absolute floor on the displacement error denominator, m.
    pub floor_u: T,
    /// Absolute floor on the damage error denominator.
    pub floor_d: T,
}

impl<T: Scalar> StaggeredControl<T> {
    pub fn for_length(length: T) -> Self {
        Self {
            max_iterations: 100,
            tol_u: T::lit(1e-6),
            tol_d: T::lit(1e-6),
            floor_u: T::lit(1e-14) * length,
            floor_d: T::lit(1e-14),
        }
    }
}

/// Nodal kinematics and element damage at `t_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicState<T> {
    pub time: T,
    pub step: u64,
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub a: Vec<T>,
    pub damage: Vec<T>,
    /// Elements inside an active Lipschitz interval during the last update.
    pub active: Vec<bool>,
}

/// Bar at rest in displacement with the uniform stretching velocity `ε̇₀ x`.
pub fn initialize<T: Scalar>(mesh: &Mesh1D<T>, strain_rate: T) -> DynamicState<T> {
    let nn = mesh.node_count();
    let ne = mesh.element_count();
    DynamicState {
        time: T::zero(),
        step: 0,
        u: vec![T::zero(); nn],
        v: mesh.nodes().iter().map(|&x| strain_rate * x).collect(),
        a: vec![T::zero(); nn],
        damage: vec![T::zero(); ne],
        active: vec![false; ne],
    }
}

/// Newmark predictors `U_p = U + Δt V + Δt²/2 (1-2β) A`, `V_p = V + (1-γ) Δt A`.
pub fn predict<T: Scalar>(state: &DynamicState<T>, scheme: &NewmarkScheme<T>) -> (Vec<T>, Vec<T>) {
    let mut up = vec![T::zero(); state.u.len()];
    let mut vp = vec![T::zero(); state.u.len()];
    predict_into(state, scheme, &mut up, &mut vp);
    (up, vp)
}

fn predict_into<T: Scalar>(state: &DynamicState<T>, scheme: &NewmarkScheme<T>, up: &mut [T], vp: &mut [T]) {
    let dt = scheme.dt;
    let cu = dt * dt * T::lit(0.5) * (T::one() - T::lit(2.0) * scheme.beta);
    let cv = (T::one() - scheme.gamma) * dt;
    for i in 0..state.u.len() {
        up[i] = state.u[i] + dt * state.v[i] + cu * state.a[i];
        vp[i] = state.v[i] + cv * state.a[i];
    }
}

/// Relative changes between staggered iterates, as ratios of infinity norms
/// with absolute floors on the denominators.
#[allow(clippy::too_many_arguments)]
pub fn staggered_errors<T: Scalar>(
    u_next: &[T],
    u_curr: &[T],
    u_n: &[T],
    d_next: &[T],
    d_curr: &[T],
    d_n: &[T],
    floor_u: T,
    floor_d: T,
) -> (T, T) {
    let err_u = max_abs_diff(u_next, u_curr) / max_abs_diff(u_next, u_n).max(floor_u);
    let err_d = max_abs_diff(d_next, d_curr) / max_abs_diff(d_next, d_n).max(floor_d);
    (err_u, err_d)
}

/// Outcome of one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport<T> {
    /// Staggered iterations (1 for explicit steps).
    pub iterations: usize,
    pub err_u: T,
    pub err_d: T,
    /// False when the implicit loop hit its iteration cap.
    pub converged: bool,
    pub damage: DamageStepInfo,
}

/// One simulation instance: operators, loading and scratch space.
#[derive(Debug, Clone)]
pub struct Simulation<T> {
    mesh: Mesh1D<T>,
    material: MaterialModel<T>,
    moduli: ModulusField<T>,
    scheme: NewmarkScheme<T>,
    strain_rate: T,
    mass: MassOperator<T>,
    pub control: StaggeredControl<T>,
    /// When false the damage field is frozen (purely elastic runs).
    pub damage_enabled: bool,
    updater: DamageUpdater<T>,
    force: Vec<T>,
    up: Vec<T>,
    vp: Vec<T>,
    u_iter: Vec<T>,
    d_iter: Vec<T>,
    d_next: Vec<T>,
    mask: Vec<bool>,
    stiffness: SymTridiagonal<T>,
    lhs: SymTridiagonal<T>,
    rhs: Vec<T>,
    solver: EndpointSolver<T>,
}

impl<T: Scalar> Simulation<T> {
    pub fn new(
        mesh: Mesh1D<T>,
        material: MaterialModel<T>,
        moduli: ModulusField<T>,
        scheme: NewmarkScheme<T>,
        strain_rate: T,
    ) -> Result<Self> {
        if moduli.len() != mesh.element_count() {
            return Err(Error::InvalidConfig(format!(
                "modulus field has {} entries for {} elements",
                moduli.len(),
                mesh.element_count()
            )));
        }
        if !(strain_rate > T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "strain rate must be positive, got {strain_rate}"
            )));
        }
        if !(scheme.dt > T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "time step must be positive, got {}",
                scheme.dt
            )));
        }
        match (scheme.is_explicit(), scheme.mass) {
            (true, MassVariant::Consistent) => {
                return Err(Error::InvalidConfig("explicit steps require the lumped mass".into()))
            }
            (false, _) if scheme.beta < T::zero() => {
                return Err(Error::InvalidConfig("beta must be non-negative".into()))
            }
            _ => {}
        }
        let mass = assemble_mass(&mesh, material.properties.density, scheme.mass);
        let nn = mesh.node_count();
        let ne = mesh.element_count();
        let control = StaggeredControl::for_length(mesh.length());
        Ok(Self {
            mass,
            control,
            damage_enabled: true,
            updater: DamageUpdater::new(),
            force: vec![T::zero(); nn],
            up: vec![T::zero(); nn],
            vp: vec![T::zero(); nn],
            u_iter: vec![T::zero(); nn],
            d_iter: vec![T::zero(); ne],
            d_next: vec![T::zero(); ne],
            mask: vec![false; ne],
            stiffness: SymTridiagonal::zeros(nn),
            lhs: SymTridiagonal::zeros(nn),
            rhs: vec![T::zero(); nn],
            solver: EndpointSolver::new(),
            mesh,
            material,
            moduli,
            scheme,
            strain_rate,
        })
    }

    pub fn mesh(&self) -> &Mesh1D<T> {
        &self.mesh
    }

    pub fn material(&self) -> &MaterialModel<T> {
        &self.material
    }

    pub fn moduli(&self) -> &ModulusField<T> {
        &self.moduli
    }

    pub fn scheme(&self) -> &NewmarkScheme<T> {
        &self.scheme
    }

    pub fn mass(&self) -> &MassOperator<T> {
        &self.mass
    }

    pub fn strain_rate(&self) -> T {
        self.strain_rate
    }

    pub fn initial_state(&self) -> DynamicState<T> {
        initialize(&self.mesh, self.strain_rate)
    }

    /// Prescribed displacement of the loaded end at `time`.
    pub fn end_displacement(&self, time: T) -> T {
        self.strain_rate * self.mesh.length() * time
    }

    /// Advances `state` by one step with the configured scheme.
    pub fn step(&mut self, state: &mut DynamicState<T>) -> Result<StepReport<T>> {
        if self.scheme.is_explicit() {
            self.step_explicit(state)
        } else {
            self.step_implicit(state)
        }
    }

    fn next_time(&self, state: &DynamicState<T>) -> T {
        T::lit((state.step + 1) as f64) * self.scheme.dt
    }

    fn update_damage(&mut self, u: &[T], d_n: &[T]) -> Result<DamageStepInfo> {
        let out = &mut self.d_next;
        if !self.damage_enabled {
            out.copy_from_slice(d_n);
            self.mask.iter_mut().for_each(|m| *m = false);
            return Ok(DamageStepInfo::default());
        }
        self.updater.update(
            u,
            d_n,
            &self.mesh,
            &self.material,
            self.moduli.values(),
            out,
            &mut self.mask,
        )
    }

    /// Central-difference step: displacement from the predictor, then damage,
    /// then acceleration from the lumped mass and the velocity corrector.
    pub fn step_explicit(&mut self, state: &mut DynamicState<T>) -> Result<StepReport<T>> {
        if !self.scheme.is_explicit() {
            return Err(Error::InvalidConfig("explicit step requested with beta > 0".into()));
        }
        if !matches!(self.mass, MassOperator::Lumped(_)) {
            return Err(Error::InvalidConfig("explicit step requires the lumped mass".into()));
        }
        let nn = self.mesh.node_count();
        let t1 = self.next_time(state);
        let dt = self.scheme.dt;
        let half_dt2 = T::lit(0.5) * dt * dt;
        let cv = (T::one() - self.scheme.gamma) * dt;
        for i in 0..nn {
            state.u[i] = state.u[i] + dt * state.v[i] + half_dt2 * state.a[i];
            self.vp[i] = state.v[i] + cv * state.a[i];
        }
        state.u[0] = T::zero();
        state.u[nn - 1] = self.end_displacement(t1);

        let info = if self.damage_enabled {
            let d_n = std::mem::take(&mut state.damage);
            let info = self.update_damage(&state.u, &d_n)?;
            state.damage = d_n;
            std::mem::swap(&mut state.damage, &mut self.d_next);
            info
        } else {
            DamageStepInfo::default()
        };
        state.active.copy_from_slice(&self.mask);

        internal_force_into(
            &self.mesh,
            self.moduli.values(),
            &state.damage,
            &state.u,
            &mut self.force,
        );
        let MassOperator::Lumped(lumped) = &self.mass else {
            unreachable!()
        };
        let gdt = self.scheme.gamma * dt;
        let mut finite = true;
        for i in 0..nn {
            let a = if i == 0 || i == nn - 1 {
                T::zero()
            } else {
                -self.force[i] / lumped[i]
            };
            state.a[i] = a;
            state.v[i] = self.vp[i] + gdt * a;
            finite &= state.u[i].is_finite() && state.v[i].is_finite() && a.is_finite();
        }
        state.time = t1;
        state.step += 1;
        if !finite {
            return Err(Error::Numerical {
                step: state.step,
                what: "non-finite displacement, velocity or acceleration".into(),
            });
        }
        Ok(StepReport {
            iterations: 1,
            err_u: T::zero(),
            err_d: T::zero(),
            converged: true,
            damage: info,
        })
    }

    /// Implicit step: staggered solves of
    /// `(β Δt² K(d^k) + M) U^{k+1} = M U_p` and the damage update until both
    /// relative errors drop below tolerance or the iteration cap is reached.
    pub fn step_implicit(&mut self, state: &mut DynamicState<T>) -> Result<StepReport<T>> {
        let beta = self.scheme.beta;
        if !(beta > T::zero()) {
            return Err(Error::InvalidConfig("implicit step requires beta > 0".into()));
        }
        let nn = self.mesh.node_count();
        let dt = self.scheme.dt;
        let t1 = self.next_time(state);
        predict_into(state, &self.scheme, &mut self.up, &mut self.vp);
        let bdt2 = beta * dt * dt;
        let mass_t = self.mass.to_tridiagonal();
        self.mass.mul_vec_into(&self.up, &mut self.rhs);
        let end = self.end_displacement(t1);

        // iterate k = 0 starts from (U_n, d_n)
        self.u_iter.copy_from_slice(&state.u);
        self.d_iter.copy_from_slice(&state.damage);
        let mut u_next = vec![T::zero(); nn];
        let mut report = StepReport {
            iterations: 0,
            err_u: T::infinity(),
            err_d: T::infinity(),
            converged: false,
            damage: DamageStepInfo::default(),
        };
        let d_n = state.damage.clone();
        while report.iterations < self.control.max_iterations {
            assemble_stiffness_into(&self.mesh, self.moduli.values(), &self.d_iter, &mut self.stiffness);
            for i in 0..nn {
                self.lhs.diag[i] = mass_t.diag[i] + bdt2 * self.stiffness.diag[i];
                if i + 1 < nn {
                    self.lhs.off[i] = mass_t.off[i] + bdt2 * self.stiffness.off[i];
                }
            }
            self.solver
                .solve(&self.lhs, &self.rhs, T::zero(), end, &mut u_next)
                .map_err(|e| match e {
                    Error::Numerical { what, .. } => Error::Numerical {
                        step: state.step + 1,
                        what,
                    },
                    other => other,
                })?;
            report.damage = self.update_damage(&u_next, &d_n)?;
            let (eu, ed) = staggered_errors(
                &u_next,
                &self.u_iter,
                &state.u,
                &self.d_next,
                &self.d_iter,
                &d_n,
                self.control.floor_u,
                self.control.floor_d,
            );
            report.err_u = eu;
            report.err_d = ed;
            report.iterations += 1;
            self.u_iter.copy_from_slice(&u_next);
            self.d_iter.copy_from_slice(&self.d_next);
            if eu <= self.control.tol_u && ed <= self.control.tol_d {
                report.converged = true;
                break;
            }
        }

        let inv_bdt2 = T::one() / bdt2;
        let gdt = self.scheme.gamma * dt;
        let cv = (T::one() - self.scheme.gamma) * dt;
        let mut finite = true;
        for i in 0..nn {
            let a_new = if i == 0 || i == nn - 1 {
                T::zero()
            } else {
                (self.u_iter[i] - self.up[i]) * inv_bdt2
            };
            let v_new = state.v[i] + cv * state.a[i] + gdt * a_new;
            state.u[i] = self.u_iter[i];
            state.a[i] = a_new;
            state.v[i] = v_new;
            finite &= self.u_iter[i].is_finite() && v_new.is_finite() && a_new.is_finite();
        }
        state.damage.copy_from_slice(&self.d_iter);
        state.active.copy_from_slice(&self.mask);
        state.time = t1;
        state.step += 1;
        if !finite {
            return Err(Error::Numerical {
                step: state.step,
                what: "non-finite displacement, velocity or acceleration".into(),
            });
        }
        Ok(report)
    }
}
