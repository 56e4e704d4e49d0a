//! Periodic geometry on [0, L)² and the saturated shear profile.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use crate::params::SimParams;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

/// Reduce a coordinate into [0, l).
#[inline]
pub fn wrap_coord(v: f64, l: f64) -> f64 {
    let r = v.rem_euclid(l);
    // rem_euclid can round up to l for tiny negative inputs; +0.0 clears -0.0.
    if r >= l {
        0.0
    } else {
        r + 0.0
    }
}

#[inline]
pub fn wrap_point(p: Point2, l: f64) -> Point2 {
    Point2::new(wrap_coord(p.x, l), wrap_coord(p.y, l))
}

/// Signed shortest displacement from `a` to `b` on a circle of length `l`,
/// in [-l/2, l/2].
#[inline]
pub fn periodic_delta(a: f64, b: f64, l: f64) -> f64 {
    let d = (b - a).rem_euclid(l);
    if d > l / 2.0 {
        d - l
    } else {
        d
    }
}

/// Euclidean distance on the torus: minimum over periodic images.
#[inline]
pub fn torus_distance(p: Point2, q: Point2, l: f64) -> f64 {
    periodic_delta(p.x, q.x, l).hypot(periodic_delta(p.y, q.y, l))
}

/// Unit-amplitude shear profile u(y) = sin(2π(y − L/2)/L), vanishing on the
/// target row.
#[inline]
pub fn shear_profile(y: f64, l: f64) -> f64 {
    (2.0 * PI * (y - l / 2.0) / l).sin()
}

/// A·u(y), clipped to ±shear_cutoff.
#[inline]
pub fn shear_velocity(y: f64, params: &SimParams) -> f64 {
    let s = params.amplitude * shear_profile(y, params.box_size);
    s.clamp(-params.shear_cutoff, params.shear_cutoff)
}
