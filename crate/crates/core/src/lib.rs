//! First hitting times of a diffusing searcher under shear flow and
//! flux-limited chemotaxis on the periodic box [0, L)².
//!
//! Lengths are in units of the target radius δ (0.1 mm) and times in units
//! of 4 s. A searcher at X follows
//!
//! ```text
//! dX = (A·u(Y) + V₁(X)) dt + √ν dB₁
//! dY = V₂(X) dt + √ν dB₂
//! ```
//!
//! with u(y) = sin(2π(y − L/2)/L), saturated at `shear_cutoff`, and
//! V = φ(χ|∇c|)·∇c/|∇c| driven by the steady chemical
//! −Δc + A·u(y)∂ₓc = n − c released by the target.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod effective;
pub mod error;
pub mod field;
pub mod params;
pub mod rng;
pub mod stats;
pub mod sweep;
pub mod torus;

pub use dynamics::{
    chemotactic_velocity, cutoff_phi, em_step, run_deterministic, run_trajectory,
    run_trajectory_recorded, total_drift, HitResult, VelocitySampler,
};
pub use effective::{
    effective_drift, expected_hitting_time_ode, hitting_time_1d_closed_form, run_1d_sde,
    solve_avg_chemical_1d, EffectiveDrift1D,
};
pub use error::{ConfigError, Error, Result, Violation};
pub use field::{build_target_density, solve_chemical, GridField, Profile1D};
pub use params::{validate_params, RawConfig, SimParams};
pub use stats::{run_ensemble, success_fraction_line, HittingTimeStats, Workers};
pub use sweep::{
    emit_csv, find_optimal_shear, sweep, theorem1_convergence_study, theorem3_convergence_study,
    SweepAxis, SweepResult, SweepRow, SweepSpec,
};
pub use torus::{shear_velocity, torus_distance, wrap_point, Point2};
