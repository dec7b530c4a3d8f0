//! Built-in invariant checks behind `brc verify`.
//!
//! Deterministic, self-contained, and fast: the suite re-derives the core
//! numerical guarantees (integrator order, symmetry, spectral rescaling,
//! ridge identities, state bounds, seed determinism) on small instances.

use ndarray::prelude::*;
use rand::Rng;

use crate::dynamics::{
    self, arctan_normalize, classify_chaotic, classify_swing, integrate, rk4_step, AsymptoticLabel,
    ChuaParams, SwingParams, System, TimeSeries,
};
use crate::linalg;
use crate::objective;
use crate::reservoir::{
    build_matrices, normal_equation_backward_error, random_state, reservoir_step, spectral_radius,
    state_transform, train_readout, Hyperparams, MatrixSeeds,
};
use crate::rng;

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    let detail = if detail.is_empty() { detail } else { format!(": {detail}") };
    Check { name, passed, detail }
}

fn swing039() -> System {
    System::Swing(SwingParams {
        input_power: 0.4,
        damping: 0.39,
        state_damping: 0.7,
        noise_amplitude: 0.0,
    })
}

fn chua_reference() -> System {
    System::Chua(ChuaParams { c1: 15.6, c2: 1.0, c3: 33.0, m0: -8.0 / 7.0, m1: -5.0 / 7.0 })
}

pub fn run_all() -> Vec<Check> {
    vec![
        rk4_fixed_point(),
        rk4_convergence_order(),
        chua_odd_symmetry(),
        arctan_properties(),
        spectral_rescaling(),
        ridge_identities(),
        state_boundedness(),
        transform_parity(),
        seed_determinism(),
        echo_contraction(),
        classifier_thresholds(),
        config_round_trip(),
    ]
}

fn rk4_fixed_point() -> Check {
    let theta = 0.4f64.asin();
    let sys = swing039();
    let y = rk4_step(
        |s: [f64; 2], t| {
            let r = sys.rhs_at(&s, t);
            [r[0], r[1]]
        },
        [theta, 0.0],
        0.0,
        0.05,
    );
    let drift = ((y[0] - theta).powi(2) + y[1].powi(2)).sqrt();
    check("rk4-fixed-point", drift < 1e-12, format!("drift {drift:.2e}"))
}

fn rk4_convergence_order() -> Check {
    let sys = swing039();
    let ic = [0.2, 0.4];
    let endpoint = |dt: f64, steps: usize| {
        let s = integrate(&sys, &ic, dt, steps, 0.0, None).unwrap();
        (s.value(s.len() - 1, 0), s.value(s.len() - 1, 1))
    };
    let oracle = endpoint(1e-5, 250_000);
    let err = |(a, b): (f64, f64)| ((a - oracle.0).powi(2) + (b - oracle.1).powi(2)).sqrt();
    let e1 = err(endpoint(0.05, 50));
    let e2 = err(endpoint(0.025, 100));
    let order = (e1 / e2).log2();
    check("rk4-convergence-order", order >= 3.5, format!("measured order {order:.2}"))
}

fn chua_odd_symmetry() -> Check {
    let sys = chua_reference();
    let a = integrate(&sys, &[0.5, 0.1, -0.2], 0.05, 3000, 0.0, None).unwrap();
    let b = integrate(&sys, &[-0.5, -0.1, 0.2], 0.05, 3000, 0.0, None).unwrap();
    let mut worst = 0.0f64;
    for i in 0..a.len() {
        for j in 0..3 {
            worst = worst.max((a.value(i, j) + b.value(i, j)).abs());
        }
    }
    check("chua-odd-symmetry", worst <= 1e-9, format!("max deviation {worst:.2e}"))
}

fn arctan_properties() -> Check {
    let mut ok = true;
    let mut prev = f64::NEG_INFINITY;
    for i in -1000..=1000 {
        let v = arctan_normalize(i as f64 * 0.1);
        ok &= v > prev && v > -1.0 && v < 1.0;
        ok &= (arctan_normalize(-(i as f64) * 0.1) + v).abs() < 1e-15;
        prev = v;
    }
    check("arctan-normalization", ok, String::new())
}

fn spectral_rescaling() -> Check {
    let hp = Hyperparams {
        n: 200,
        d: 2,
        connectivity: 0.3,
        spectral_radius: 0.9,
        input_scale: 1.0,
        leak: 0.5,
        ridge: 1e-6,
    };
    let mats = build_matrices(&hp, MatrixSeeds { input: 1, adjacency: 2, init_state: 3 }).unwrap();
    let (r, _) = spectral_radius(&mats.adjacency.view()).unwrap();
    let dev = (r - 0.9).abs();
    check("spectral-rescaling", dev <= 1e-6, format!("|radius − λ| = {dev:.2e}"))
}

fn ridge_identities() -> Check {
    let w = train_readout(&array![[2.0]], &array![[4.0]], 1.0).unwrap();
    let scalar_ok = (w[[0, 0]] - 1.6).abs() < 1e-14;

    let mut r = rng::seeded(21);
    let v = Array2::from_shape_fn((30, 120), |_| 2.0 * r.gen::<f64>() - 1.0);
    let u = Array2::from_shape_fn((2, 120), |_| 2.0 * r.gen::<f64>() - 1.0);
    let norms: Vec<f64> = [1e-10, 1e-6, 1e-2]
        .iter()
        .map(|&eta| linalg::frobenius(&train_readout(&v, &u, eta).unwrap()))
        .collect();
    let shrink_ok = norms[0] >= norms[1] && norms[1] >= norms[2];
    let w2 = train_readout(&v, &u, 3.458e-4).unwrap();
    let backward = normal_equation_backward_error(&w2, &v, &u, 3.458e-4);
    check(
        "ridge-identities",
        scalar_ok && shrink_ok && backward <= 1e-8,
        format!("backward error {backward:.2e}"),
    )
}

fn state_boundedness() -> Check {
    let mut rng = rng::seeded(33);
    let mut updates = 0usize;
    let mut ok = true;
    while updates < 100_000 {
        let n = rng.gen_range(1..=32);
        let d = rng.gen_range(1..=3);
        let hp = Hyperparams {
            n,
            d,
            connectivity: rng.gen_range(0.05..0.95),
            spectral_radius: rng.gen_range(0.01..3.0),
            input_scale: rng.gen_range(0.01..3.0),
            leak: rng.gen_range(0.05..1.0f64),
            ridge: 1e-6,
        };
        let seeds = MatrixSeeds {
            input: rng.gen(),
            adjacency: rng.gen(),
            init_state: rng.gen(),
        };
        let Ok(mats) = build_matrices(&hp, seeds) else { continue };
        let mut state = random_state(n, &mut rng);
        for _ in 0..200 {
            let input = Array1::from_shape_fn(d, |_| {
                let magnitude = 10f64.powf(rng.gen_range(-3.0..300.0));
                if rng.gen::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            });
            state = reservoir_step(&state, input.view(), &mats, hp.leak);
            updates += 1;
            if state.iter().any(|v| v.abs() > 1.0 || !v.is_finite()) {
                ok = false;
            }
        }
    }
    check("state-boundedness", ok, format!("{updates} fuzzed updates"))
}

fn transform_parity() -> Check {
    let t = state_transform(&array![-0.5, -0.5, 0.3, 2.0]);
    let ok = t == array![-0.5, 0.25, 0.3, 4.0];
    check("transform-parity", ok, String::new())
}

fn seed_determinism() -> Check {
    let hp = Hyperparams {
        n: 50,
        d: 2,
        connectivity: 0.4,
        spectral_radius: 0.7,
        input_scale: 1.5,
        leak: 0.6,
        ridge: 1e-5,
    };
    let seeds = MatrixSeeds { input: 5, adjacency: 6, init_state: 7 };
    let a = build_matrices(&hp, seeds).unwrap();
    let b = build_matrices(&hp, seeds).unwrap();
    check("seed-determinism", a.w_in == b.w_in && a.adjacency == b.adjacency, String::new())
}

fn echo_contraction() -> Check {
    let hp = Hyperparams {
        n: 80,
        d: 2,
        connectivity: 0.4,
        spectral_radius: 0.5,
        input_scale: 1.0,
        leak: 0.6,
        ridge: 1e-6,
    };
    let mats = build_matrices(&hp, MatrixSeeds { input: 8, adjacency: 9, init_state: 10 }).unwrap();
    let drive = TimeSeries::new(
        0.05,
        0.0,
        Array2::from_shape_fn((60, 2), |(i, j)| ((i + 2 * j) as f64 * 0.29).sin() * 0.8),
    )
    .unwrap();
    let e0 = objective::sync_error(&mats, hp.leak, &[drive.clone()], 0, 50, 4).unwrap();
    let e10 = objective::sync_error(&mats, hp.leak, &[drive.clone()], 10, 50, 4).unwrap();
    let e20 = objective::sync_error(&mats, hp.leak, &[drive], 20, 50, 4).unwrap();
    check(
        "echo-contraction",
        e10 < e0 && e20 <= e10,
        format!("τ=0: {e0:.3}, τ=10: {e10:.3e}, τ=20: {e20:.3e}"),
    )
}

fn classifier_thresholds() -> Check {
    let mut ok = true;
    let flat = TimeSeries::new(0.05, 0.0, Array2::zeros((11, 2))).unwrap();
    ok &= classify_swing(&flat, 10).unwrap() == AsymptoticLabel::Operating;
    let mut pos = Array2::zeros((11, 2));
    pos[[10, 1]] = 0.995;
    ok &= classify_swing(&TimeSeries::new(0.05, 0.0, pos).unwrap(), 10).unwrap()
        == AsymptoticLabel::PositiveDiverging;
    let mut mid = Array2::zeros((11, 2));
    mid[[10, 1]] = 0.5;
    ok &= classify_swing(&TimeSeries::new(0.05, 0.0, mid).unwrap(), 10).unwrap()
        == AsymptoticLabel::Undecided;
    let left = TimeSeries::new(0.05, 0.0, Array2::from_elem((20, 3), -0.3)).unwrap();
    ok &= classify_chaotic(&left, 10).unwrap() == AsymptoticLabel::AttractorLeft;
    let tie = TimeSeries::new(0.05, 0.0, Array2::zeros((20, 3))).unwrap();
    ok &= classify_chaotic(&tie, 10).unwrap() == AsymptoticLabel::Undecided;
    ok &= dynamics::swing_label_from_omega(-0.995) == AsymptoticLabel::NegativeDiverging;
    check("classifier-thresholds", ok, String::new())
}

fn config_round_trip() -> Check {
    let mut ok = true;
    for cfg in crate::config::bundled() {
        let text = match cfg.to_toml() {
            Ok(t) => t,
            Err(_) => {
                ok = false;
                continue;
            }
        };
        match crate::config::ExperimentConfig::parse(&text) {
            Ok(back) => ok &= back == cfg,
            Err(_) => ok = false,
        }
    }
    check("config-round-trip", ok, String::new())
}
