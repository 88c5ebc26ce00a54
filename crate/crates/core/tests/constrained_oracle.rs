//! Constrained damage solve against a lattice dynamic program.
//!
//! All bounds, fixed values and the slope are multiples of a lattice step
//! `δ`, so the optimum over lattice fields differs from the continuous
//! optimum only through interior rounding, `O(f'' δ²)`.

use lipfrag_core::damage_update::{solve_constrained, DamageSubproblem, CONSTRAINED_TOLERANCE};
use lipfrag_core::material::{degradation, MaterialModel, MaterialProperties};
use lipfrag_core::ModelVariant;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LATTICE: i64 = 100_000;
const SLOPE_STEPS: i64 = 10_000;

fn element_cost(m: &MaterialModel<f64>, strain: f64, modulus: f64, d: f64) -> f64 {
    0.5 * degradation(d) * modulus * strain * strain + m.yc() * m.softening.h(d)
}

/// `out[i] = min_{|j-i| <= w} v[j]`.
fn window_min(v: &[f64], w: usize) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![f64::INFINITY; n];
    let mut q: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    for j in 0..n + w {
        if j < n {
            while q.back().is_some_and(|&b| v[b] >= v[j]) {
                q.pop_back();
            }
            q.push_back(j);
        }
        if j >= w {
            let i = j - w;
            while q.front().is_some_and(|&f| f + w < i) {
                q.pop_front();
            }
            if let Some(&f) = q.front() {
                out[i] = v[f];
            }
        }
    }
    out
}

struct Case {
    strains: Vec<f64>,
    moduli: Vec<f64>,
    lower: Vec<i64>,
    upper: Vec<i64>,
    left: Option<i64>,
    right: Option<i64>,
}

fn lattice_minimum(m: &MaterialModel<f64>, c: &Case) -> f64 {
    let n = c.strains.len();
    let pts = (LATTICE + 1) as usize;
    let delta = 1.0 / LATTICE as f64;
    let w = SLOPE_STEPS as usize;
    let mut prev: Vec<f64> = vec![0.0; pts];
    for k in 0..n {
        let reach = if k == 0 {
            match c.left {
                Some(f) => (0..pts)
                    .map(|i| {
                        if (i as i64 - f).abs() <= SLOPE_STEPS {
                            0.0
                        } else {
                            f64::INFINITY
                        }
                    })
                    .collect(),
                None => vec![0.0; pts],
            }
        } else {
            window_min(&prev, w)
        };
        let mut cur = vec![f64::INFINITY; pts];
        for i in c.lower[k]..=c.upper[k] {
            let iu = i as usize;
            if reach[iu].is_finite() {
                cur[iu] = reach[iu] + element_cost(m, c.strains[k], c.moduli[k], i as f64 * delta);
            }
        }
        prev = cur;
    }
    (0..pts)
        .filter(|&i| c.right.is_none_or(|f| (i as i64 - f).abs() <= SLOPE_STEPS))
        .map(|i| prev[i])
        .fold(f64::INFINITY, f64::min)
}

fn random_case(rng: &mut ChaCha8Rng, n: usize) -> Case {
    // a Lipschitz previous state and a spiky target above it
    let mut prev = vec![0i64; n + 2];
    prev[0] = rng.gen_range(0..LATTICE / 2);
    for i in 1..n + 2 {
        prev[i] = (prev[i - 1] + rng.gen_range(-SLOPE_STEPS..=SLOPE_STEPS)).clamp(0, LATTICE);
    }
    let target: Vec<i64> = prev
        .iter()
        .map(|&p| {
            (p + if rng.gen_bool(0.4) {
                rng.gen_range(0..LATTICE / 2)
            } else {
                0
            })
            .min(LATTICE)
        })
        .collect();
    let lo: Vec<i64> = (0..n + 2)
        .map(|i| {
            (0..n + 2)
                .map(|j| target[j] + (i.abs_diff(j) as i64) * SLOPE_STEPS)
                .min()
                .unwrap()
        })
        .collect();
    let hi: Vec<i64> = (0..n + 2)
        .map(|i| {
            (0..n + 2)
                .map(|j| target[j] - (i.abs_diff(j) as i64) * SLOPE_STEPS)
                .max()
                .unwrap()
        })
        .collect();
    let eps_c = 1e9 / 610e9;
    Case {
        strains: (0..n).map(|_| eps_c * rng.gen_range(0.5..4.0)).collect(),
        moduli: (0..n).map(|_| 610e9 * rng.gen_range(0.97..1.03)).collect(),
        lower: (1..=n).map(|i| lo[i].max(prev[i])).collect(),
        upper: (1..=n).map(|i| hi[i].min(LATTICE)).collect(),
        left: Some(target[0]),
        right: rng.gen_bool(0.7).then_some(target[n + 1]),
    }
}

#[test]
fn matches_lattice_optimum() {
    let m = MaterialModel::new(MaterialProperties::alumina(), ModelVariant::LipField, 2.21e-7).unwrap();
    let delta = 1.0 / LATTICE as f64;
    for seed in [3, 11] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut checked = 0;
        while checked < 40 {
            let n = rng.gen_range(2..=9);
            let c = random_case(&mut rng, n);
            let best = lattice_minimum(&m, &c);
            if !best.is_finite() {
                continue;
            }
            let p = DamageSubproblem {
                material: &m,
                element_size: 2.21e-7,
                slope: SLOPE_STEPS as f64 * delta,
                strains: c.strains.clone(),
                moduli: c.moduli.clone(),
                lower: c.lower.iter().map(|&v| v as f64 * delta).collect(),
                upper: c.upper.iter().map(|&v| v as f64 * delta).collect(),
                left_fixed: c.left.map(|v| v as f64 * delta),
                right_fixed: c.right.map(|v| v as f64 * delta),
            };
            let d = solve_constrained(&p, CONSTRAINED_TOLERANCE).unwrap();
            assert!(p.is_feasible(&d, 1e-12));
            let ours: f64 = (0..n).map(|i| element_cost(&m, c.strains[i], c.moduli[i], d[i])).sum();
            assert!((p.objective(&d) - ours * 2.21e-7).abs() <= 1e-12 * ours * 2.21e-7);
            assert!(ours <= best * (1.0 + 1e-12), "lattice beat the solver: {ours} > {best}");
            assert!((best - ours) / best <= 1e-9, "{n}: {ours} vs {best}");
            checked += 1;
        }
    }
}

#[test]
fn window_min_reference() {
    let v = [5.0, 1.0, 4.0, 3.0, 9.0, 2.0];
    assert_eq!(window_min(&v, 1), vec![1.0, 1.0, 1.0, 3.0, 2.0, 2.0]);
    assert_eq!(window_min(&v, 0), v.to_vec());
}
