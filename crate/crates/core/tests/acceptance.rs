//! Acceptance suite. Runs every criterion in order, prints one
//! `criterion N PASS|FAIL` line each and exits non-zero if any failed.
//!
//! `cargo test -p chemoshear --test acceptance -- 1 6` runs a subset.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use chemoshear::effective::run_1d_ensemble;
use chemoshear::field::{broadcast, homogenization_norms, remainder, x_average};
use chemoshear::rng::trajectory_rng;
use chemoshear::stats::{line_sample_points, run_ensemble_with, run_trajectories, success_fraction_line_with};
use chemoshear::sweep::{default_shear_grid, sweep_with};
use chemoshear::{
    build_target_density, cutoff_phi, expected_hitting_time_ode, find_optimal_shear,
    hitting_time_1d_closed_form, run_trajectory, solve_chemical, theorem1_convergence_study,
    theorem3_convergence_study, EffectiveDrift1D, GridField, Point2, SimParams, SweepAxis, SweepSpec,
    VelocitySampler, Workers,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BOX: f64 = 50.0;
/// Long enough that fewer than 1% of the slowest (χ = 0, A = 0) runs time out.
const T_MAX: f64 = 200_000.0;
const RUNS: usize = 200;
/// Largest shear rate of the deterministic line-sample comparison, s⁻¹.
const LINE_SAMPLE_LARGEST_RATE: f64 = 25.0;

type Criterion = (&'static str, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

fn base() -> SimParams {
    let mut p = SimParams::with_box(BOX);
    p.t_max = T_MAX;
    p
}

fn chemotactic() -> SimParams {
    let mut p = base();
    p.chi = 500.0;
    p.v_max = 5.0;
    p
}

fn workers() -> Workers {
    Workers::from_env()
}

fn closed_forms() -> Outcome {
    let l50 = hitting_time_1d_closed_form(0.0, &SimParams::with_box(50.0)).unwrap();
    let l80 = hitting_time_1d_closed_form(0.0, &SimParams::with_box(80.0)).unwrap();
    let exact = l50 == 2304.0 && l80 == 6084.0;

    let p = SimParams::with_box(50.0);
    let drift = EffectiveDrift1D::zero(256, 50.0);
    let mut worst: f64 = 0.0;
    for s in [0.5, 6.0, 12.0, 24.0, 36.0, 47.5] {
        let cf = hitting_time_1d_closed_form(s - 24.0, &p).unwrap();
        let ode = expected_hitting_time_ode(&drift, &p, s).unwrap();
        worst = worst.max((ode - cf).abs() / cf);
    }
    Outcome::new(
        exact && worst <= 1e-3,
        format!("T(L=50) = {l50}, T(L=80) = {l80}, zero-drift ODE max rel err {worst:.2e}"),
    )
}

fn one_d_monte_carlo() -> Outcome {
    let p = base();
    let drift = EffectiveDrift1D::zero(256, BOX);
    let s = run_1d_ensemble(&drift, &p, 0.0, 1000, 2, workers()).unwrap();
    let gap = s.mean - 2304.0;
    Outcome::new(
        gap.abs() <= 3.0 * s.stderr && s.n_timeouts == 0,
        format!("mean {:.1} ± {:.1} (gap {gap:+.1}), {} timeouts", s.mean, s.stderr, s.n_timeouts),
    )
}

fn shear_only_convergence() -> Outcome {
    let p = base();
    let rates = [0.0, 0.025, 0.25, 2.5, 25.0];
    let amplitudes: Vec<f64> = rates.iter().map(|r| 4.0 * BOX * r).collect();
    let table = theorem1_convergence_study(&p, &amplitudes, RUNS, 3, workers()).unwrap();
    let means: Vec<String> = table
        .rows
        .iter()
        .map(|r| match r.stats {
            Some(s) => format!("{:.0}±{:.0}", s.mean, s.stderr),
            None => "failed".into(),
        })
        .collect();
    let usable = table.rows.iter().all(|r| r.stats.is_some_and(|s| s.usable()));
    let last = table.last().unwrap();
    let close = last.within(0.02);
    Outcome::new(
        usable && table.non_increasing_within_noise() && close,
        format!(
            "means {} at {:?} s⁻¹; final gap {:+.1} to {}",
            means.join(", "),
            rates,
            last.gap().unwrap_or(f64::NAN),
            last.reference
        ),
    )
}

fn optimal_shear() -> Outcome {
    let mut free = base();
    free.chi = 0.0;
    let sampler = VelocitySampler::build(&free).unwrap();
    let no_chemo = run_ensemble_with(&free, &sampler, RUNS, 4, workers()).unwrap();

    let spec = SweepSpec {
        base: chemotactic(),
        axis: SweepAxis::ShearRate,
        values: default_shear_grid(),
        n_runs: RUNS,
        master_seed: 4,
    };
    let result = sweep_with(&spec, workers(), &mut ()).unwrap();
    let usable = result.rows.iter().all(|r| r.usable());
    let zero = result.rows[0].stats.unwrap();
    let best = find_optimal_shear(&result).unwrap();
    let best_per_s = best.value / 4.0;

    let a = zero.mean < 0.5 * no_chemo.mean;
    let b = best.mean < 2304.0;
    let c = (0.005..=0.1).contains(&best_per_s);
    let curve: Vec<String> = result
        .rows
        .iter()
        .map(|r| match r.stats {
            Some(s) => format!("{:.3e}:{:.0}±{:.0}", r.value / 4.0, s.mean, s.stderr),
            None => format!("{:.3e}:failed", r.value / 4.0),
        })
        .collect();
    let plateau: Vec<String> = best.plateau.iter().map(|v| format!("{:.3e}", v / 4.0)).collect();
    Outcome::new(
        usable && a && b && c,
        format!(
            "(a) {} zero-shear {:.0} vs χ=0 {:.0}; (b) {} argmin mean {:.0} vs 2304; \
             (c) {} argmin {:.3e} s⁻¹, level within noise at [{}] s⁻¹; curve [{}]",
            mark(a),
            zero.mean,
            no_chemo.mean,
            mark(b),
            best.mean,
            mark(c),
            best_per_s,
            plateau.join(", "),
            curve.join(", ")
        ),
    )
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

fn line_sample() -> Outcome {
    let spacing = 0.01;
    let count = line_sample_points(BOX, spacing).len();
    let mut p = chemotactic();
    p.nu = 0.0;
    let fraction = |rate: f64| {
        let mut q = p.clone();
        q.set_shear_rate_per_second(rate);
        let sampler = VelocitySampler::build(&q).unwrap();
        success_fraction_line_with(&q, &sampler, spacing, 2000.0, workers()).unwrap()
    };
    let at_zero = fraction(0.0);
    let at_opt = fraction(0.05);
    let at_top = fraction(LINE_SAMPLE_LARGEST_RATE);
    let pass = count == 2501 && at_opt.fraction() > at_zero.fraction() && at_opt.fraction() > at_top.fraction();
    Outcome::new(
        pass,
        format!(
            "{count} agents; hits {} at 0, {} at 0.05 s⁻¹, {} at {LINE_SAMPLE_LARGEST_RATE} s⁻¹",
            at_zero.n_hits, at_opt.n_hits, at_top.n_hits
        ),
    )
}

fn homogenization() -> Outcome {
    let mut p = base();
    let n = build_target_density(&p);
    let mut sups = Vec::new();
    let mut worst_mass: f64 = 0.0;
    for a in [100.0, 200.0, 400.0, 800.0] {
        p.amplitude = a;
        let c = solve_chemical(&n, &p).unwrap();
        worst_mass = worst_mass.max((c.integral() - 1.0).abs());
        sups.push(homogenization_norms(&c).sup_rem);
    }
    let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
    let listed: Vec<String> = sups.iter().map(|v| format!("{v:.4e}")).collect();
    Outcome::new(
        decreasing && worst_mass <= 1e-7,
        format!(
            "sup|c∼| = [{}] at A = 100, 200, 400, 800; max mass error {worst_mass:.1e}",
            listed.join(", ")
        ),
    )
}

fn invariants() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    let mut p = SimParams::with_box(20.0);
    p.chi = 500.0;
    p.v_max = 5.0;
    p.amplitude = 40.0;
    let sampler = VelocitySampler::build(&p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let speed_ok = (0..10_000).all(|_| {
        let q = Point2::new(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0));
        sampler.chemotaxis(q).norm() <= p.v_max * (1.0 + 1e-12)
    });
    check(speed_ok, "speed bound");

    let phi_ok = cutoff_phi(0.0, 5.0) == 0.0
        && (cutoff_phi(1e-3, 5.0) - 1e-3).abs() < 1e-12
        && (0..2000).all(|k| {
            let (a, b) = (k as f64 * 0.01, (k + 1) as f64 * 0.01);
            cutoff_phi(a, 5.0) <= cutoff_phi(b, 5.0) && cutoff_phi(b, 5.0) <= 5.0
        });
    check(phi_ok, "cutoff shape");

    let mut q = p.clone();
    q.t_max = 400.0;
    let one = run_ensemble_with(&q, &sampler, 32, 8, Workers(Some(1))).unwrap();
    let three = run_ensemble_with(&q, &sampler, 32, 8, Workers(Some(3))).unwrap();
    check(one == three && one.mean.to_bits() == three.mean.to_bits(), "worker-count independence");
    let again = run_trajectories(&q, &sampler, 8, 8, Workers(Some(2)));
    let serial: Vec<_> = (0..8).map(|k| run_trajectory(&q, &sampler, &mut trajectory_rng(8, k))).collect();
    check(again == serial, "seed determinism");

    let c = sampler.field().unwrap();
    let split = broadcast(&x_average(c));
    let rem = remainder(c);
    let exact = split
        .values()
        .iter()
        .zip(rem.values())
        .zip(c.values())
        .all(|((a, r), v)| (a + r - v).abs() <= 1e-15 * c.max());
    check(exact, "average/remainder decomposition");

    let n = p.grid_n as isize;
    let point_sym = (0..n).all(|j| (0..n).all(|i| (c.at(i, j) - c.at(-i, -j)).abs() <= 1e-9 * c.max()));
    check(point_sym, "point symmetry of the sheared field");
    let mut still = p.clone();
    still.amplitude = 0.0;
    let c0: GridField = solve_chemical(&build_target_density(&still), &still).unwrap();
    let dihedral = (0..n).all(|j| {
        (0..n).all(|i| {
            let v = c0.at(i, j);
            [c0.at(-i, j), c0.at(i, -j), c0.at(j, i)].iter().all(|w| (v - w).abs() <= 1e-7 * c0.max())
        })
    });
    check(dihedral, "dihedral symmetry without shear");

    let mut calm = p.clone();
    calm.chi = 0.0;
    let with_field = VelocitySampler::new(&calm, Some(Arc::new(c.clone())));
    let bare = VelocitySampler::new(&calm, None);
    let same = (0..8).all(|k| {
        run_trajectory(&calm, &with_field, &mut trajectory_rng(2, k))
            == run_trajectory(&calm, &bare, &mut trajectory_rng(2, k))
    });
    check(same, "χ = 0 ignores the field");

    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            "speed bound, cutoff shape, seeding, worker independence, decomposition, symmetries".to_string()
        } else {
            format!("violated: {}", failures.join(", "))
        },
    )
}

fn chemotactic_convergence() -> Outcome {
    let p = chemotactic();
    let table = theorem3_convergence_study(&p, &[4.0 * BOX * 25.0], RUNS, 8, workers()).unwrap();
    let row = table.last().unwrap();
    match row.stats {
        Some(s) => Outcome::new(
            s.usable() && row.within(0.05),
            format!(
                "2D mean {:.1} ± {:.1}, effective ODE {:.1}, gap {:+.1} ({:+.1}%)",
                s.mean,
                s.stderr,
                row.reference,
                s.mean - row.reference,
                100.0 * (s.mean - row.reference) / row.reference
            ),
        ),
        None => Outcome::new(false, row.failure.clone().unwrap_or_default()),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1", "closed-form and zero-drift ODE", closed_forms),
        ("2", "1D Monte Carlo vs closed form", one_d_monte_carlo),
        ("3", "shear-only approach to the 1D limit", shear_only_convergence),
        ("4", "optimal shear with chemotaxis", optimal_shear),
        ("5", "deterministic line sample", line_sample),
        ("6", "homogenization of the chemical", homogenization),
        ("7", "invariants", invariants),
        ("8", "chemotactic approach to the effective ODE", chemotactic_convergence),
    ];
    let selected: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.iter().any(|s| s == id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id} {verdict} ({:.1}s) {name}: {}",
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
        failed += usize::from(!outcome.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
