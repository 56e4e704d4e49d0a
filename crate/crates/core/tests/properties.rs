use std::sync::Arc;

use chemoshear::effective::{cut_coordinate, effective_drift_for, expected_hitting_time_ode, run_1d_ensemble};
use chemoshear::field::{broadcast, remainder, x_average};
use chemoshear::rng::trajectory_rng;
use chemoshear::stats::{run_ensemble_with, run_trajectories};
use chemoshear::{
    build_target_density, cutoff_phi, run_deterministic, run_trajectory, solve_chemical, GridField,
    Point2, SimParams, VelocitySampler, Workers,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn chemotactic(l: f64, amplitude: f64) -> SimParams {
    let mut p = SimParams::with_box(l);
    p.amplitude = amplitude;
    p.chi = 500.0;
    p.v_max = 5.0;
    p
}

#[test]
fn drift_speed_bound_on_random_points() {
    let params = chemotactic(20.0, 40.0);
    let sampler = VelocitySampler::build(&params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let p = Point2::new(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0));
        let v = sampler.chemotaxis(p);
        assert!(v.norm() <= params.v_max * (1.0 + 1e-12), "|V| = {} at {p:?}", v.norm());
        let total = sampler.total_drift(p);
        assert!(total.x.abs() <= params.amplitude + params.v_max + 1e-9);
    }
}

#[test]
fn zero_sensitivity_matches_no_field() {
    let mut with_field = chemotactic(10.0, 3.0);
    with_field.chi = 0.0;
    let field = solve_chemical(&build_target_density(&with_field), &with_field).unwrap();
    let a = VelocitySampler::new(&with_field, Some(Arc::new(field)));
    let mut bare = with_field.clone();
    bare.v_max = 0.0;
    let b = VelocitySampler::new(&bare, None);
    for k in 0..20 {
        let ra = run_trajectory(&with_field, &a, &mut trajectory_rng(5, k));
        let rb = run_trajectory(&bare, &b, &mut trajectory_rng(5, k));
        assert_eq!(ra, rb);
    }
}

#[test]
fn longer_horizon_only_adds_hits() {
    let mut short = SimParams::with_box(10.0);
    short.amplitude = 2.0;
    short.t_max = 50.0;
    let mut long = short.clone();
    long.t_max = 400.0;
    let sampler = VelocitySampler::build(&short).unwrap();
    let a = run_trajectories(&short, &sampler, 200, 9, Workers(None));
    let b = run_trajectories(&long, &sampler, 200, 9, Workers(None));
    assert!(a.iter().any(|r| !r.hit), "horizon too long to exercise timeouts");
    for (x, y) in a.iter().zip(&b) {
        if x.hit {
            assert_eq!(x, y);
        } else {
            assert!(y.time >= x.time);
        }
    }
    assert!(b.iter().filter(|r| r.hit).count() >= a.iter().filter(|r| r.hit).count());
}

#[test]
fn zero_noise_trajectory_is_the_deterministic_run() {
    let mut params = chemotactic(20.0, 10.0);
    params.nu = 0.0;
    params.t_max = 300.0;
    let sampler = VelocitySampler::build(&params).unwrap();
    for k in 0..5 {
        let start = Point2::new(k as f64 * 1.7, 3.0 + k as f64 * 2.9);
        params.start = start;
        let a = run_trajectory(&params, &sampler, &mut trajectory_rng(1, k));
        let b = run_deterministic(&params, &sampler, start, params.t_max);
        assert_eq!(a, b);
    }
}

#[test]
fn ensemble_is_worker_count_independent() {
    let params = chemotactic(12.0, 6.0);
    let sampler = VelocitySampler::build(&params).unwrap();
    let one = run_ensemble_with(&params, &sampler, 64, 21, Workers(Some(1))).unwrap();
    let four = run_ensemble_with(&params, &sampler, 64, 21, Workers(Some(4))).unwrap();
    assert_eq!(one.mean.to_bits(), four.mean.to_bits());
    assert_eq!(one.std.to_bits(), four.std.to_bits());
    assert_eq!(one, four);
}

#[test]
fn one_dimensional_monte_carlo_is_calibrated() {
    // 20 independent seeds; a calibrated estimator lands within 3 stderr of
    // the ODE time almost always.
    let params = chemotactic(20.0, 0.0);
    let drift = effective_drift_for(&params).unwrap();
    let y0 = 3.0;
    let reference = expected_hitting_time_ode(&drift, &params, cut_coordinate(y0, &params)).unwrap();
    let inside = (0..20)
        .filter(|&seed| {
            let s = run_1d_ensemble(&drift, &params, y0, 200, seed, Workers(None)).unwrap();
            (s.mean - reference).abs() <= 3.0 * s.stderr
        })
        .count();
    assert!(inside >= 19, "{inside}/20 seeds within 3 stderr of {reference}");
}

fn phi_monotone_and_capped(v_max: f64, a: f64, b: f64) {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let (pl, ph) = (cutoff_phi(lo, v_max), cutoff_phi(hi, v_max));
    assert!(pl <= ph + 1e-15);
    assert!(ph <= v_max + 1e-15 && pl >= 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn phi_shape(v_max in 0.1f64..20.0, a in 0.0f64..50.0, b in 0.0f64..50.0) {
        phi_monotone_and_capped(v_max, a, b);
        prop_assert_eq!(cutoff_phi(0.0, v_max), 0.0);
        let small = 1e-3 * v_max;
        prop_assert!((cutoff_phi(small, v_max) - small).abs() <= 1e-12);
    }

    #[test]
    fn average_plus_remainder_is_exact(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..24 * 24).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = GridField::new(24, 6.0, values).unwrap();
        let avg = broadcast(&x_average(&f));
        let rem = remainder(&f);
        for ((a, r), v) in avg.values().iter().zip(rem.values()).zip(f.values()) {
            prop_assert!((a + r - v).abs() <= 1e-14);
        }
        let rem_avg = x_average(&rem);
        prop_assert!(rem_avg.values().iter().all(|v| v.abs() <= 1e-14));
    }
}

#[test]
fn sheared_field_has_point_symmetry() {
    // u(L − y) = −u(y), so c(L − x, L − y) = c(x, y) about the target.
    let params = chemotactic(10.0, 30.0);
    let n = params.grid_n as isize;
    let c = solve_chemical(&build_target_density(&params), &params).unwrap();
    for j in 0..n {
        for i in 0..n {
            let a = c.at(i, j);
            let b = c.at(-i, -j);
            assert!((a - b).abs() <= 1e-9 * c.max(), "({i}, {j}): {a} vs {b}");
        }
    }
}
