//! Agent dynamics: saturated shear plus flux-limited chemotaxis, integrated
//! by Euler–Maruyama (with noise) or explicit Euler (without).
//!
//! Hits are detected at step endpoints. When a single increment would move
//! the agent more than δ/2, the step is split into equal substeps with the
//! drift re-evaluated at each one and the step's Brownian increment spread
//! evenly across them, so a fast agent cannot jump over the target while the
//! noise per `dt` keeps exactly the Euler–Maruyama law.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::field::{build_target_density, gradient_at, solve_chemical, GridField};
use crate::params::SimParams;
use crate::torus::{shear_velocity, torus_distance, wrap_point, Point2};

/// Lower edge of the smoothing window, as a fraction of `v_max`.
pub const PHI_BLEND_LO: f64 = 0.9;
/// Upper edge of the smoothing window, as a fraction of `v_max`.
pub const PHI_BLEND_HI: f64 = 1.1;
/// Below this |∇c| the direction ∇c/|∇c| is taken as zero.
pub const GRADIENT_FLOOR: f64 = 1e-14;

/// Flux-limiting cutoff φ: identity up to 0.9·v_max, constant v_max beyond
/// 1.1·v_max, joined by the polynomial that matches value, slope and
/// curvature at both ends. On the window with t ∈ [0, 1] it reads
/// `a + w·(t − t³ + t⁴/2)`, whose slope `(1 − t)²(1 + 2t)` is non-negative.
pub fn cutoff_phi(r: f64, v_max: f64) -> f64 {
    if v_max <= 0.0 {
        return 0.0;
    }
    let lo = PHI_BLEND_LO * v_max;
    let hi = PHI_BLEND_HI * v_max;
    if r <= lo {
        r.max(0.0)
    } else if r >= hi {
        v_max
    } else {
        let w = hi - lo;
        let t = (r - lo) / w;
        let t3 = t * t * t;
        (lo + w * (t - t3 + 0.5 * t3 * t)).min(v_max)
    }
}

/// φ(χ|g|)·g/|g|, zero when |g| ≤ [`GRADIENT_FLOOR`].
#[inline]
pub fn chemotactic_velocity(grad: (f64, f64), chi: f64, v_max: f64) -> Point2 {
    let norm = grad.0.hypot(grad.1);
    if norm <= GRADIENT_FLOOR {
        return Point2::default();
    }
    let speed = cutoff_phi(chi * norm, v_max);
    Point2::new(speed * grad.0 / norm, speed * grad.1 / norm)
}

/// Immutable drift evaluator shared by every trajectory of an ensemble.
#[derive(Debug, Clone)]
pub struct VelocitySampler {
    params: SimParams,
    field: Option<Arc<GridField>>,
}

impl VelocitySampler {
    pub fn new(params: &SimParams, field: Option<Arc<GridField>>) -> Self {
        VelocitySampler {
            params: params.clone(),
            field,
        }
    }

    /// Solve the chemical field when chemotaxis is active and wrap it.
    pub fn build(params: &SimParams) -> Result<Self> {
        let field = if params.chi > 0.0 && params.v_max > 0.0 {
            let n = build_target_density(params);
            Some(Arc::new(solve_chemical(&n, params)?))
        } else {
            None
        };
        Ok(Self::new(params, field))
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn field(&self) -> Option<&GridField> {
        self.field.as_deref()
    }

    #[inline]
    pub fn chemotaxis(&self, p: Point2) -> Point2 {
        match &self.field {
            Some(field) if self.params.chi > 0.0 && self.params.v_max > 0.0 => {
                chemotactic_velocity(gradient_at(field, p), self.params.chi, self.params.v_max)
            }
            _ => Point2::default(),
        }
    }

    #[inline]
    pub fn total_drift(&self, p: Point2) -> Point2 {
        let v = self.chemotaxis(p);
        Point2::new(shear_velocity(p.y, &self.params) + v.x, v.y)
    }
}

/// (A·u(y) + V⁽¹⁾, V⁽²⁾) at `p`.
#[inline]
pub fn total_drift(p: Point2, sampler: &VelocitySampler) -> Point2 {
    sampler.total_drift(p)
}

/// Number of equal substeps needed so that no drift increment exceeds δ/2.
#[inline]
fn substeps(drift: Point2, dt: f64, params: &SimParams) -> usize {
    if !params.substep {
        return 1;
    }
    let travel = drift.norm() * dt;
    let limit = 0.5 * params.delta;
    if travel <= limit {
        1
    } else {
        (travel / limit).ceil() as usize
    }
}

/// One increment of length `dt` with a pre-scaled Brownian displacement.
/// Returns the new position and whether any substep endpoint lies in the
/// target (stopping there when `stop_on_hit`).
#[inline]
fn advance(
    p: Point2,
    sampler: &VelocitySampler,
    dt: f64,
    noise: Point2,
    stop_on_hit: bool,
) -> (Point2, bool) {
    let params = &sampler.params;
    let l = params.box_size;
    let center = params.center();
    let d0 = sampler.total_drift(p);
    let k = substeps(d0, dt, params);
    if k == 1 {
        let q = wrap_point(
            Point2::new(p.x + d0.x * dt + noise.x, p.y + d0.y * dt + noise.y),
            l,
        );
        return (q, torus_distance(q, center, l) <= params.delta);
    }
    let sub_dt = dt / k as f64;
    let sub_noise = noise * (1.0 / k as f64);
    let mut q = p;
    let mut hit = false;
    for i in 0..k {
        let d = if i == 0 { d0 } else { sampler.total_drift(q) };
        q = wrap_point(
            Point2::new(q.x + d.x * sub_dt + sub_noise.x, q.y + d.y * sub_dt + sub_noise.y),
            l,
        );
        if torus_distance(q, center, l) <= params.delta {
            hit = true;
            if stop_on_hit {
                break;
            }
        }
    }
    (q, hit)
}

/// One Euler–Maruyama step from `p` with standard normal pair `noise`:
/// wrap(p + drift·dt + √ν·√dt·noise).
pub fn em_step(p: Point2, sampler: &VelocitySampler, dt: f64, noise: (f64, f64)) -> Point2 {
    let scale = sampler.params.nu.sqrt() * dt.sqrt();
    advance(p, sampler, dt, Point2::new(scale * noise.0, scale * noise.1), false).0
}

/// Outcome of one trajectory. `time == steps as f64 * dt` in both the hit and
/// the timeout case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitResult {
    pub hit: bool,
    pub time: f64,
    pub steps: u64,
    pub final_pos: Point2,
}

/// Step budget for a horizon `t_max`.
pub fn max_steps(t_max: f64, dt: f64) -> u64 {
    (t_max / dt - 1e-9).ceil().max(0.0) as u64
}

fn integrate(
    params: &SimParams,
    sampler: &VelocitySampler,
    start: Point2,
    t_max: f64,
    mut noise: impl FnMut() -> Point2,
    mut record: impl FnMut(f64, Point2),
) -> HitResult {
    let l = params.box_size;
    let mut p = wrap_point(start, l);
    record(0.0, p);
    if torus_distance(p, params.center(), l) <= params.delta {
        return HitResult { hit: true, time: 0.0, steps: 0, final_pos: p };
    }
    let budget = max_steps(t_max, params.dt);
    for step in 1..=budget {
        let (q, hit) = advance(p, sampler, params.dt, noise(), true);
        p = q;
        let time = step as f64 * params.dt;
        record(time, p);
        if hit {
            return HitResult { hit: true, time, steps: step, final_pos: p };
        }
    }
    HitResult {
        hit: false,
        time: budget as f64 * params.dt,
        steps: budget,
        final_pos: p,
    }
}

fn normal_pair<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Point2 {
    let n1: f64 = rng.sample(StandardNormal);
    let n2: f64 = rng.sample(StandardNormal);
    Point2::new(scale * n1, scale * n2)
}

/// First hitting time of B((L/2, L/2); δ) from `params.start`, or a timeout at
/// `params.t_max`. Consumes exactly two normals per step.
pub fn run_trajectory<R: Rng + ?Sized>(
    params: &SimParams,
    sampler: &VelocitySampler,
    rng: &mut R,
) -> HitResult {
    let scale = params.nu.sqrt() * params.dt.sqrt();
    integrate(params, sampler, params.start, params.t_max, || normal_pair(rng, scale), |_, _| {})
}

/// As [`run_trajectory`], also returning `(t, position)` every `stride` steps
/// plus the final state.
pub fn run_trajectory_recorded<R: Rng + ?Sized>(
    params: &SimParams,
    sampler: &VelocitySampler,
    rng: &mut R,
    stride: u64,
) -> (HitResult, Vec<(f64, Point2)>) {
    let scale = params.nu.sqrt() * params.dt.sqrt();
    let stride = stride.max(1);
    let mut path = Vec::new();
    let mut count = 0u64;
    let result = integrate(
        params,
        sampler,
        params.start,
        params.t_max,
        || normal_pair(rng, scale),
        |t, p| {
            if count.is_multiple_of(stride) {
                path.push((t, p));
            }
            count += 1;
        },
    );
    if path.last().map(|&(t, _)| t) != Some(result.time) {
        path.push((result.time, result.final_pos));
    }
    (result, path)
}

/// Noise-free explicit Euler run of the drift alone.
pub fn run_deterministic(
    params: &SimParams,
    sampler: &VelocitySampler,
    start: Point2,
    t_max: f64,
) -> HitResult {
    integrate(params, sampler, start, t_max, Point2::default, |_, _| {})
}
