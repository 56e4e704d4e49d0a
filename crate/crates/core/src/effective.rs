//! The one-dimensional large-shear limit.
//!
//! Two coordinates are used for the 1D problem. Torus coordinates y ∈ [0, L)
//! are those of the 2D model, with the absorbing band [L/2 − δ, L/2 + δ].
//! Cutting the circle at the band gives the interval s ∈ [0, M],
//! M = L − 2δ, with both endpoints absorbing: s = (y − L/2 − δ) mod L. The
//! default start y = 0 lands on the midpoint s = M/2.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dynamics::{chemotactic_velocity, max_steps, HitResult};
use crate::error::{Error, Result};
use crate::field::{build_target_density, x_average, Profile1D};
use crate::params::SimParams;
use crate::rng::trajectory_rng;
use crate::stats::{HittingTimeStats, Workers};
use crate::torus::{periodic_delta, wrap_coord, Point2};

/// Length M = L − 2δ of the cut interval.
pub fn cut_length(params: &SimParams) -> f64 {
    params.box_size - 2.0 * params.delta
}

/// Torus y to cut coordinate s ∈ [0, L).
pub fn cut_coordinate(y: f64, params: &SimParams) -> f64 {
    wrap_coord(y - params.box_size / 2.0 - params.delta, params.box_size)
}

pub fn torus_coordinate(s: f64, params: &SimParams) -> f64 {
    wrap_coord(s + params.box_size / 2.0 + params.delta, params.box_size)
}

/// Expected exit time of ν-Brownian motion from (−(L/2 − δ), L/2 − δ)
/// started at `y0`: ((L/2 − δ)² − y0²)/ν.
pub fn hitting_time_1d_closed_form(y0: f64, params: &SimParams) -> Result<f64> {
    let half = params.box_size / 2.0 - params.delta;
    if !(y0.abs() <= half) {
        return Err(Error::Domain(format!("|y0| = {} exceeds L/2 − delta = {half}", y0.abs())));
    }
    Ok((half * half - y0 * y0) / params.nu)
}

/// Solve −c″ + c = n on the circle with the three-point Laplacian, by the
/// cyclic Thomas algorithm.
pub fn solve_avg_chemical_1d(n_avg: &Profile1D) -> Result<Profile1D> {
    let n = n_avg.n_side();
    if n < 3 {
        return Err(Error::Domain(format!("profile needs at least 3 nodes, got {n}")));
    }
    let h = n_avg.spacing();
    let off = -1.0 / (h * h);
    let diag = 1.0 + 2.0 / (h * h);
    let rhs = n_avg.values();

    // Sherman–Morrison: A = T + u vᵀ with u = (γ, 0, …, 0, off),
    // v = (1, 0, …, 0, off/γ), T tridiagonal with modified corners.
    let gamma = -diag;
    let mut main = vec![diag; n];
    main[0] -= gamma;
    main[n - 1] -= off * off / gamma;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = off;
    let x = thomas(off, &main, rhs);
    let z = thomas(off, &main, &u);
    let fact = (x[0] + off * x[n - 1] / gamma) / (1.0 + z[0] + off * z[n - 1] / gamma);
    let mut c: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a - fact * b).collect();

    // Row sums of the operator are 1, so Σc = Σn up to rounding; restore it.
    let shift = (rhs.iter().sum::<f64>() - c.iter().sum::<f64>()) / n as f64;
    for v in &mut c {
        *v += shift;
    }

    let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let residual = (0..n)
        .map(|j| {
            let l = c[(j + n - 1) % n];
            let r = c[(j + 1) % n];
            (off * (l + r) + diag * c[j] - rhs[j]).abs()
        })
        .fold(0.0, f64::max);
    if !(residual / scale <= 1e-10) {
        return Err(Error::SolverDiverged {
            iterations: 1,
            residual: residual / scale,
            peclet: 0.0,
        });
    }
    Ok(Profile1D::new(n_avg.box_size(), c))
}

/// Constant off-diagonals `off`, main diagonal `main`.
fn thomas(off: f64, main: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = main.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = off / main[0];
    dp[0] = rhs[0] / main[0];
    for i in 1..n {
        let m = main[i] - off * cp[i - 1];
        cp[i] = off / m;
        dp[i] = (rhs[i] - off * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Effective vertical drift φ(χ|∂y⟨c⟩|)·sign(∂y⟨c⟩) on the profile grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveDrift1D {
    pub profile: Profile1D,
    pub chi: f64,
    pub v_max: f64,
}

impl EffectiveDrift1D {
    pub fn zero(n_side: usize, box_size: f64) -> Self {
        EffectiveDrift1D {
            profile: Profile1D::new(box_size, vec![0.0; n_side]),
            chi: 0.0,
            v_max: 0.0,
        }
    }

    /// Linear interpolation at torus coordinate `y`.
    #[inline]
    pub fn velocity(&self, y: f64) -> f64 {
        self.profile.interpolate(y)
    }

    pub fn sup_norm(&self) -> f64 {
        self.profile.sup_norm()
    }
}

pub fn effective_drift(c_avg: &Profile1D, chi: f64, v_max: f64) -> EffectiveDrift1D {
    let n = c_avg.n_side() as isize;
    let h = c_avg.spacing();
    let values = (0..n)
        .map(|j| {
            let g = (c_avg.at(j + 1) - c_avg.at(j - 1)) / (2.0 * h);
            chemotactic_velocity((0.0, g), chi, v_max).y
        })
        .collect();
    EffectiveDrift1D {
        profile: Profile1D::new(c_avg.box_size(), values),
        chi,
        v_max,
    }
}

/// ⟨n⟩ from the 2D target density, then ⟨c⟩ and its effective drift.
pub fn effective_drift_for(params: &SimParams) -> Result<EffectiveDrift1D> {
    let n_avg = x_average(&build_target_density(params));
    let c_avg = solve_avg_chemical_1d(&n_avg)?;
    Ok(effective_drift(&c_avg, params.chi, params.v_max))
}

/// T on a uniform grid of the cut interval.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingTimeProfile {
    pub length: f64,
    pub values: Vec<f64>,
}

impl HittingTimeProfile {
    pub fn spacing(&self) -> f64 {
        self.length / (self.values.len() - 1) as f64
    }

    /// Linear interpolation at cut coordinate `s` ∈ [0, M].
    pub fn at(&self, s: f64) -> f64 {
        let u = (s / self.spacing()).clamp(0.0, (self.values.len() - 1) as f64);
        let k = (u.floor() as usize).min(self.values.len() - 2);
        let t = u - k as f64;
        self.values[k] * (1.0 - t) + self.values[k + 1] * t
    }
}

/// Solve ½νT″ + V T′ = −1 on [0, M], T(0) = T(M) = 0, with centred
/// differences on `intervals` equal cells and a Thomas sweep. Keep
/// |V|·ds ≤ ν so the system is an M-matrix; [`default_intervals`] does.
pub fn hitting_time_profile(
    drift: &EffectiveDrift1D,
    params: &SimParams,
    intervals: usize,
) -> HittingTimeProfile {
    let m = intervals.max(2);
    let length = cut_length(params);
    let ds = length / m as f64;
    let diff = 0.5 * params.nu / (ds * ds);

    // Interior unknowns T_1..T_{m-1}; boundary values are zero.
    let n = m - 1;
    let mut lower = vec![0.0; n];
    let mut diag = vec![-2.0 * diff; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![-1.0; n];
    for (i, (lo, up)) in lower.iter_mut().zip(upper.iter_mut()).enumerate() {
        let v = drift.velocity(torus_coordinate((i + 1) as f64 * ds, params));
        *lo = diff - v / (2.0 * ds);
        *up = diff + v / (2.0 * ds);
    }
    for i in 1..n {
        let w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut values = vec![0.0; m + 1];
    values[n] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        values[i + 1] = (rhs[i] - upper[i] * values[i + 2]) / diag[i];
    }
    HittingTimeProfile { length, values }
}

/// Default resolution: at least the profile spacing, cell Péclet |V|·ds/ν
/// at most 1/2, and 512 cells.
pub fn default_intervals(drift: &EffectiveDrift1D, params: &SimParams) -> usize {
    let length = cut_length(params);
    let by_profile = (length / drift.profile.spacing()).ceil() as usize;
    let by_peclet = if params.nu > 0.0 {
        (2.0 * length * drift.sup_norm() / params.nu).ceil() as usize
    } else {
        0
    };
    by_profile.max(by_peclet).max(512)
}

/// Expected hitting time of the effective 1D system from cut coordinate `s0`.
pub fn expected_hitting_time_ode(drift: &EffectiveDrift1D, params: &SimParams, s0: f64) -> Result<f64> {
    let length = cut_length(params);
    if !(s0 > 0.0 && s0 < length) {
        return Err(Error::Domain(format!("s0 = {s0} outside the open interval (0, {length})")));
    }
    Ok(hitting_time_profile(drift, params, default_intervals(drift, params)).at(s0))
}

/// Euler–Maruyama run of dY = V(Y)dt + √ν dB from torus coordinate `y0`
/// until |Y − L/2| ≤ δ or `params.t_max`. One normal per step.
pub fn run_1d_sde<R: Rng + ?Sized>(
    drift: &EffectiveDrift1D,
    params: &SimParams,
    y0: f64,
    rng: &mut R,
) -> HitResult {
    let l = params.box_size;
    let mid = l / 2.0;
    let dt = params.dt;
    let scale = params.nu.sqrt() * dt.sqrt();
    let mut y = wrap_coord(y0, l);
    let inside = |y: f64| periodic_delta(y, mid, l).abs() <= params.delta;
    let done = |hit, steps: u64, y| HitResult {
        hit,
        time: steps as f64 * dt,
        steps,
        final_pos: Point2::new(0.0, y),
    };
    if inside(y) {
        return done(true, 0, y);
    }
    let budget = max_steps(params.t_max, dt);
    for step in 1..=budget {
        let xi: f64 = rng.sample(StandardNormal);
        y = wrap_coord(y + drift.velocity(y) * dt + scale * xi, l);
        if inside(y) {
            return done(true, step, y);
        }
    }
    done(false, budget, y)
}

/// Ensemble of [`run_1d_sde`] with the same seeding and reduction rules as
/// the 2D runner.
pub fn run_1d_ensemble(
    drift: &EffectiveDrift1D,
    params: &SimParams,
    y0: f64,
    n_runs: usize,
    master_seed: u64,
    workers: Workers,
) -> Result<HittingTimeStats> {
    if n_runs == 0 {
        return Err(Error::Domain("n_runs must be at least 1".into()));
    }
    let results: Vec<HitResult> = workers.install(|| {
        (0..n_runs)
            .into_par_iter()
            .map(|k| run_1d_sde(drift, params, y0, &mut trajectory_rng(master_seed, k as u64)))
            .collect()
    });
    HittingTimeStats::from_results(&results, master_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::x_average;
    use proptest::prelude::*;

    fn params(l: f64) -> SimParams {
        let mut p = SimParams::with_box(l);
        p.grid_n = 256;
        p
    }

    fn chemotactic(l: f64) -> SimParams {
        let mut p = params(l);
        p.chi = 500.0;
        p.v_max = 5.0;
        p
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(hitting_time_1d_closed_form(0.0, &params(80.0)).unwrap(), 6084.0);
        assert_eq!(hitting_time_1d_closed_form(0.0, &params(50.0)).unwrap(), 2304.0);
        assert_eq!(hitting_time_1d_closed_form(24.0, &params(50.0)).unwrap(), 0.0);
        assert!(hitting_time_1d_closed_form(24.5, &params(50.0)).is_err());
    }

    #[test]
    fn coordinates_round_trip() {
        let p = params(50.0);
        assert_eq!(cut_coordinate(0.0, &p), 24.0);
        assert_eq!(cut_coordinate(26.0, &p), 0.0);
        assert_eq!(torus_coordinate(48.0, &p), 24.0);
        for y in [0.0, 3.7, 26.0, 49.9] {
            assert!((torus_coordinate(cut_coordinate(y, &p), &p) - y).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_density_gives_constant_chemical() {
        let n = Profile1D::new(50.0, vec![0.3; 64]);
        let c = solve_avg_chemical_1d(&n).unwrap();
        assert!(c.values().iter().all(|v| (v - 0.3).abs() < 1e-13));
    }

    #[test]
    fn chemical_1d_matches_a_dense_solve() {
        let n_avg = Profile1D::from_fn(12, 6.0, |y| (y * 1.3).sin().powi(2));
        let c = solve_avg_chemical_1d(&n_avg).unwrap();
        let h = n_avg.spacing();
        // Assemble the circulant matrix and solve by Gaussian elimination.
        let m = 12;
        let mut a = vec![vec![0.0; m + 1]; m];
        for j in 0..m {
            a[j][j] = 1.0 + 2.0 / (h * h);
            a[j][(j + 1) % m] -= 1.0 / (h * h);
            a[j][(j + m - 1) % m] -= 1.0 / (h * h);
            a[j][m] = n_avg.values()[j];
        }
        for col in 0..m {
            let piv = a[col][col];
            for row in 0..m {
                if row != col {
                    let f = a[row][col] / piv;
                    for k in col..=m {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
        for j in 0..m {
            assert!((c.values()[j] - a[j][m] / a[j][j]).abs() < 1e-13);
        }
    }

    #[test]
    fn chemical_1d_mass_and_symmetry() {
        let p = chemotactic(50.0);
        let n_avg = x_average(&build_target_density(&p));
        let c = solve_avg_chemical_1d(&n_avg).unwrap();
        assert!((c.integral() - n_avg.integral()).abs() <= 1e-9);
        assert!((n_avg.integral() - 1.0 / 50.0).abs() < 1e-12);
        let n = c.n_side() as isize;
        let mid = n / 2;
        for d in 0..mid {
            assert!((c.at(mid + d) - c.at(mid - d)).abs() <= 1e-10 * c.sup_norm());
        }
        assert_eq!(c.at(mid), c.values().iter().copied().fold(f64::MIN, f64::max));
    }

    #[test]
    fn drift_examples() {
        let flat = Profile1D::new(50.0, vec![2.0; 100]);
        assert_eq!(effective_drift(&flat, 500.0, 5.0).sup_norm(), 0.0);

        let p = chemotactic(50.0);
        let c = solve_avg_chemical_1d(&x_average(&build_target_density(&p))).unwrap();
        assert_eq!(effective_drift(&c, 0.0, 5.0).sup_norm(), 0.0);

        let d = effective_drift(&c, 500.0, 5.0);
        assert!(d.sup_norm() <= 5.0);
        assert!(d.velocity(20.0) > 0.0 && d.velocity(30.0) < 0.0);
        assert!(d.velocity(3.0) > 0.0 && d.velocity(47.0) < 0.0);
    }

    #[test]
    fn zero_drift_ode_matches_closed_form() {
        let p = params(50.0);
        let drift = EffectiveDrift1D::zero(256, 50.0);
        let mid = cut_length(&p) / 2.0;
        let t = expected_hitting_time_ode(&drift, &p, mid).unwrap();
        assert!((t - 2304.0).abs() <= 1e-9 * 2304.0, "{t}");
        for s in [1.0, 7.5, 30.0, 47.0] {
            let shifted = s - mid;
            let exact = hitting_time_1d_closed_form(shifted, &p).unwrap();
            let t = expected_hitting_time_ode(&drift, &p, s).unwrap();
            assert!((t - exact).abs() <= 1e-3 * exact, "{s}: {t} vs {exact}");
        }
        assert!(expected_hitting_time_ode(&drift, &p, 1e-6).unwrap() < 1e-3);
        assert!(expected_hitting_time_ode(&drift, &p, 0.0).is_err());
        assert!(expected_hitting_time_ode(&drift, &p, 48.0).is_err());
    }

    /// Constant drift b on the cut interval has
    /// T(s) = −s/b + (M/b)(1 − e^{−2bs/ν})/(1 − e^{−2bM/ν}).
    fn constant_drift_exact(b: f64, nu: f64, m: f64, s: f64) -> f64 {
        if b < 0.0 {
            return constant_drift_exact(-b, nu, m, m - s);
        }
        -s / b + (m / b) * (1.0 - (-2.0 * b * s / nu).exp()) / (1.0 - (-2.0 * b * m / nu).exp())
    }

    #[test]
    fn profile_converges_at_second_order() {
        let p = params(50.0);
        let b = 0.02;
        let drift = EffectiveDrift1D {
            profile: Profile1D::new(50.0, vec![b; 64]),
            chi: 1.0,
            v_max: 1.0,
        };
        let s = 24.0;
        let exact = constant_drift_exact(b, p.nu, cut_length(&p), s);
        let mut prev = f64::INFINITY;
        for m in [48, 96, 192, 384] {
            let err = (hitting_time_profile(&drift, &p, m).at(s) - exact).abs();
            assert!(err * 3.9 <= prev, "m = {m}: {err} after {prev}");
            prev = err;
        }
        assert!(prev < 1e-3 * exact);
    }

    #[test]
    fn strong_drift_stays_accurate() {
        // Exponents of order 10³ in the integral representation.
        let p = params(50.0);
        for b in [-4.0, 4.0] {
            let drift = EffectiveDrift1D {
                profile: Profile1D::new(50.0, vec![b; 64]),
                chi: 1.0,
                v_max: 5.0,
            };
            for s in [0.5, 3.0, 24.0, 45.0, 47.5] {
                let exact = constant_drift_exact(b, p.nu, cut_length(&p), s);
                let t = expected_hitting_time_ode(&drift, &p, s).unwrap();
                assert!((t - exact).abs() <= 2e-3 * exact, "b = {b}, s = {s}: {t} vs {exact}");
            }
        }
    }

    #[test]
    fn chemotaxis_shortens_the_ode_time() {
        let p = chemotactic(50.0);
        let drift = effective_drift_for(&p).unwrap();
        for s in [2.0, 10.0, 24.0, 38.0, 46.0] {
            let t = expected_hitting_time_ode(&drift, &p, s).unwrap();
            let free = hitting_time_1d_closed_form(s - 24.0, &p).unwrap();
            assert!(t > 0.0 && t < free, "{s}: {t} vs {free}");
        }
        let t = expected_hitting_time_ode(&drift, &p, 24.0).unwrap();
        let prof = hitting_time_profile(&drift, &p, 960);
        for k in 0..=960 {
            let mirror = prof.values[960 - k];
            assert!((prof.values[k] - mirror).abs() <= 1e-6 * t);
        }
    }

    #[test]
    fn sde_starting_in_band_hits_at_once() {
        let p = params(50.0);
        let drift = EffectiveDrift1D::zero(64, 50.0);
        let r = run_1d_sde(&drift, &p, 25.9, &mut trajectory_rng(0, 0));
        assert_eq!((r.hit, r.time), (true, 0.0));
    }

    proptest! {
        #[test]
        fn closed_form_is_nonnegative_and_even(y0 in -24.0f64..24.0) {
            let p = params(50.0);
            let t = hitting_time_1d_closed_form(y0, &p).unwrap();
            prop_assert!(t >= 0.0);
            prop_assert_eq!(t, hitting_time_1d_closed_form(-y0, &p).unwrap());
        }
    }
}
