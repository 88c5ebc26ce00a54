use lipfrag_core::dynamics::{stable_time_step, NewmarkScheme, Simulation};
use lipfrag_core::fem_ops::{assemble_mass, MassVariant};
use lipfrag_core::lip_projection::is_lipschitz;
use lipfrag_core::material::{MaterialModel, MaterialProperties, ModulusField};
use lipfrag_core::mesh::Mesh1D;
use lipfrag_core::observables::{
    dissipated_energy, fragment_stats, kinetic_energy, reaction_force, strain_energy, WorkAccumulator,
};
use lipfrag_core::ModelVariant;

const AREA: f64 = 2e-7;

fn simulation(
    variant: ModelVariant,
    elements: usize,
    rate: f64,
    explicit: bool,
    field: ModulusField<f64>,
) -> Simulation<f64> {
    let mesh = Mesh1D::uniform(2e-3, elements).unwrap();
    let mat = MaterialModel::new(MaterialProperties::alumina(), variant, mesh.element_size()).unwrap();
    let c = (field.max() / 3.9e3).sqrt();
    let dt = stable_time_step(&mesh, c, 0.99);
    let scheme = if explicit {
        NewmarkScheme::explicit(dt)
    } else {
        NewmarkScheme::implicit(dt)
    };
    Simulation::new(mesh, mat, field, scheme, rate).unwrap()
}

#[test]
fn elastic_energy_balance() {
    let mesh = Mesh1D::uniform(2e-3, 400).unwrap();
    let field = ModulusField::sample(3, &mesh, 610e9, 0.01, 2.0).unwrap();
    for explicit in [true, false] {
        let mut sim = simulation(ModelVariant::Czm, 400, 1e5, explicit, field.clone());
        sim.damage_enabled = false;
        let mass = assemble_mass(sim.mesh(), 3.9e3, MassVariant::Consistent);
        let mut st = sim.initial_state();
        let k0 = kinetic_energy(&st.v, &mass, AREA);
        let mut work = WorkAccumulator::new(0.0, 0.0);
        let mut worst: f64 = 0.0;
        for _ in 0..3000 {
            sim.step(&mut st).unwrap();
            let f = reaction_force(&st.u, &st.damage, sim.moduli().values(), sim.mesh(), AREA);
            let w = work.advance(f, st.u[400]);
            let k = kinetic_energy(&st.v, &mass, AREA);
            let s = strain_energy(&st.u, &st.damage, sim.moduli().values(), sim.mesh(), AREA);
            worst = worst.max((w + k0 - k - s).abs() / w.max(k0));
        }
        assert!(worst <= 1e-3, "explicit={explicit}: {worst}");
    }
}

#[test]
fn czm_initiates_at_critical_stress_time() {
    let field = ModulusField::uniform(500, 610e9);
    let mut sim = simulation(ModelVariant::Czm, 500, 1e5, true, field);
    let mut st = sim.initial_state();
    let mat = *sim.material();
    let t_c = 1e9 / (610e9 * 1e5);
    loop {
        sim.step(&mut st).unwrap();
        if dissipated_energy(&st.damage, sim.mesh(), &mat, AREA) > 0.0 {
            break;
        }
        assert!(st.time < 2.0 * t_c);
    }
    let dt = sim.scheme().dt;
    assert!(st.time >= t_c && st.time <= t_c + dt, "{} vs {t_c}", st.time);
}

#[test]
fn explicit_and_implicit_agree_on_elastic_waves() {
    let mesh = Mesh1D::uniform(2e-3, 300).unwrap();
    let field = ModulusField::sample(9, &mesh, 610e9, 0.01, 2.0).unwrap();
    let mut a = simulation(ModelVariant::Czm, 300, 1e6, true, field.clone());
    let mut b = simulation(ModelVariant::Czm, 300, 1e6, false, field);
    a.damage_enabled = false;
    b.damage_enabled = false;
    let (mut sa, mut sb) = (a.initial_state(), b.initial_state());
    for _ in 0..500 {
        a.step(&mut sa).unwrap();
        b.step(&mut sb).unwrap();
    }
    let scale = sa.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = sa.u.iter().zip(&sb.u).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(diff < 1e-3 * scale, "{diff} {scale}");
}

#[test]
fn lip_field_run_keeps_invariants() {
    let ell: f64 = 2.21e-6;
    let elements = (2e-3f64 / (ell / 5.0)).round() as usize;
    let mesh = Mesh1D::uniform(2e-3, elements).unwrap();
    let field = ModulusField::sample(4, &mesh, 610e9, 0.01, 2.0).unwrap();
    let mut sim = simulation(ModelVariant::LipField, elements, 7.5e6, true, field);
    let slope = sim.mesh().lipschitz_slope(ell);
    let mat = *sim.material();
    let mut st = sim.initial_state();
    let mut prev_d = st.damage.clone();
    let mut prev_dis = 0.0;
    for _ in 0..1500 {
        sim.step(&mut st).unwrap();
        for (i, (a, b)) in st.damage.iter().zip(&prev_d).enumerate() {
            assert!(a >= b, "element {i}: {a:e} < {b:e} diff {:e}", b - a);
        }
        assert!(is_lipschitz(&st.damage, slope, 1e-9));
        let dis = dissipated_energy(&st.damage, sim.mesh(), &mat, AREA);
        assert!(dis >= prev_dis);
        prev_dis = dis;
        prev_d.copy_from_slice(&st.damage);
        assert_eq!(st.u[0], 0.0);
        assert_eq!(st.u[elements], sim.end_displacement(st.time));
    }
    assert!(prev_dis > 0.0);
    assert!(fragment_stats(&st.damage, sim.mesh(), 0.98).crack_count() > 0);
}
