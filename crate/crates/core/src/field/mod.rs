//! Periodic scalar fields on the N×N grid over [0, L)² and the steady
//! chemoattractant problem −Δc + A·u(y)∂ₓc = n − c.
//!
//! Storage is row-major with rows indexed by y: `values[j * n + i]` holds
//! f(i·h, j·h).

mod homogenize;
mod interp;
mod io;
mod solver;

pub use io::format_float;

pub use homogenize::{broadcast, homogenization_norms, remainder, x_average, HomogenizationNorms};
pub use interp::{gradient_at, interpolate, GRADIENT_STEP_FRACTION};
pub use solver::{
    apply_operator, residual_inf, solve_chemical, solve_chemical_with, PositivityReport, Preconditioner,
    SolveReport, SolverOptions,
};

use crate::error::{Error, Result};
use crate::params::SimParams;
use crate::torus::{torus_distance, Point2};

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    n_side: usize,
    box_size: f64,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(n_side: usize, box_size: f64, values: Vec<f64>) -> Result<Self> {
        if n_side == 0 || values.len() != n_side * n_side {
            return Err(Error::GridFormat(format!(
                "expected {n_side}² values, got {}",
                values.len()
            )));
        }
        if !(box_size > 0.0 && box_size.is_finite()) {
            return Err(Error::GridFormat(format!("box size must be positive, got {box_size}")));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::GridFormat(format!("non-finite value at index {k}")));
        }
        Ok(GridField { n_side, box_size, values })
    }

    pub fn zeros(n_side: usize, box_size: f64) -> Self {
        GridField {
            n_side,
            box_size,
            values: vec![0.0; n_side * n_side],
        }
    }

    /// Sample `f(x, y)` at every node.
    pub fn from_fn(n_side: usize, box_size: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let h = box_size / n_side as f64;
        let mut values = Vec::with_capacity(n_side * n_side);
        for j in 0..n_side {
            for i in 0..n_side {
                values.push(f(i as f64 * h, j as f64 * h));
            }
        }
        GridField { n_side, box_size, values }
    }

    pub fn n_side(&self) -> usize {
        self.n_side
    }

    pub fn box_size(&self) -> f64 {
        self.box_size
    }

    pub fn spacing(&self) -> f64 {
        self.box_size / self.n_side as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Value at node (i, j), indices taken mod n.
    #[inline]
    pub fn at(&self, i: isize, j: isize) -> f64 {
        let n = self.n_side as isize;
        let i = i.rem_euclid(n) as usize;
        let j = j.rem_euclid(n) as usize;
        self.values[j * self.n_side + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_side..(j + 1) * self.n_side]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Discrete integral Σ f·h².
    pub fn integral(&self) -> f64 {
        let h = self.spacing();
        self.values.iter().sum::<f64>() * h * h
    }
}

/// Periodic 1D profile over y ∈ [0, L).
#[derive(Debug, Clone, PartialEq)]
pub struct Profile1D {
    box_size: f64,
    values: Vec<f64>,
}

impl Profile1D {
    pub fn new(box_size: f64, values: Vec<f64>) -> Self {
        Profile1D { box_size, values }
    }

    pub fn from_fn(n_side: usize, box_size: f64, f: impl Fn(f64) -> f64) -> Self {
        let h = box_size / n_side as f64;
        Profile1D {
            box_size,
            values: (0..n_side).map(|j| f(j as f64 * h)).collect(),
        }
    }

    pub fn n_side(&self) -> usize {
        self.values.len()
    }

    pub fn box_size(&self) -> f64 {
        self.box_size
    }

    pub fn spacing(&self) -> f64 {
        self.box_size / self.values.len() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, j: isize) -> f64 {
        let n = self.values.len() as isize;
        self.values[j.rem_euclid(n) as usize]
    }

    /// Σ f·h.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Periodic piecewise-linear interpolation at `y`.
    #[inline]
    pub fn interpolate(&self, y: f64) -> f64 {
        let n = self.values.len();
        let u = y.rem_euclid(self.box_size) / self.spacing();
        let j0 = u.floor();
        let t = u - j0;
        let j0 = (j0 as usize) % n;
        let j1 = (j0 + 1) % n;
        self.values[j0] * (1.0 - t) + self.values[j1] * t
    }
}

/// Target density: the indicator of B((L/2, L/2); δ) with a one-cell linear
/// ramp outside the rim, scaled so Σ n·h² = 1.
pub fn build_target_density(params: &SimParams) -> GridField {
    let n = params.grid_n;
    let h = params.grid_spacing();
    let center = params.center();
    let delta = params.delta;
    let mut field = GridField::from_fn(n, params.box_size, |x, y| {
        let r = torus_distance(Point2::new(x, y), center, params.box_size);
        ((delta + h - r) / h).clamp(0.0, 1.0)
    });
    let mass = field.integral();
    for v in field.values_mut() {
        *v /= mass;
    }
    field
}
