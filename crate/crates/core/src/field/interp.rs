//! Local bicubic (Catmull–Rom) interpolation on the periodic grid, and the
//! chemical gradient taken by centered differences of the interpolant.

use super::GridField;
use crate::torus::{wrap_coord, Point2};

/// Differencing step of [`gradient_at`] as a fraction of the grid spacing.
pub const GRADIENT_STEP_FRACTION: f64 = 0.5;

#[inline]
fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

#[inline]
fn stencil(coord: f64, field: &GridField) -> ([usize; 4], [f64; 4]) {
    let n = field.n_side();
    let u = wrap_coord(coord, field.box_size()) / field.spacing();
    let base = u.floor();
    let t = u - base;
    // u < n up to rounding, so one subtraction wraps every index.
    let wrap = |k: usize| if k >= n { k - n } else { k };
    let b = wrap(base as usize);
    let idx = [wrap(b + n - 1), b, wrap(b + 1), wrap(b + 2)];
    (idx, catmull_rom_weights(t))
}

#[inline]
fn combine(field: &GridField, (xi, wx): &([usize; 4], [f64; 4]), (yj, wy): &([usize; 4], [f64; 4])) -> f64 {
    let n = field.n_side();
    let values = field.values();
    let mut acc = 0.0;
    for b in 0..4 {
        let row = &values[yj[b] * n..(yj[b] + 1) * n];
        let along = wx[0] * row[xi[0]] + wx[1] * row[xi[1]] + wx[2] * row[xi[2]] + wx[3] * row[xi[3]];
        acc += wy[b] * along;
    }
    acc
}

/// Value of the bicubic interpolant at an arbitrary point.
#[inline]
pub fn interpolate(field: &GridField, p: Point2) -> f64 {
    combine(field, &stencil(p.x, field), &stencil(p.y, field))
}

/// ∇c at `p`: centered differences of the interpolant with step h/2.
#[inline]
pub fn gradient_at(field: &GridField, p: Point2) -> (f64, f64) {
    let step = GRADIENT_STEP_FRACTION * field.spacing();
    let (sx, sy) = (stencil(p.x, field), stencil(p.y, field));
    let e = combine(field, &stencil(p.x + step, field), &sy);
    let w = combine(field, &stencil(p.x - step, field), &sy);
    let nn = combine(field, &sx, &stencil(p.y + step, field));
    let s = combine(field, &sx, &stencil(p.y - step, field));
    ((e - w) / (2.0 * step), (nn - s) / (2.0 * step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn interpolant_passes_through_nodes() {
        let f = GridField::from_fn(32, 10.0, |x, y| (x * 0.3).sin() + y * y * 0.01);
        let h = f.spacing();
        for (i, j) in [(0, 0), (5, 7), (31, 31), (16, 2)] {
            let v = interpolate(&f, Point2::new(i as f64 * h, j as f64 * h));
            assert!((v - f.at(i, j)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let f = GridField::from_fn(32, 10.0, |_, _| 2.5);
        for p in [Point2::new(0.0, 0.0), Point2::new(3.3, 9.99), Point2::new(-4.0, 17.0)] {
            let (gx, gy) = gradient_at(&f, p);
            assert!(gx.abs() < 1e-12 && gy.abs() < 1e-12);
        }
    }

    #[test]
    fn sine_gradient_within_two_percent() {
        let l = 50.0;
        for n in [128, 256] {
            let f = GridField::from_fn(n, l, |x, _| (2.0 * PI * x / l).sin());
            for y in [0.0, 7.3, 25.0] {
                let (gx, gy) = gradient_at(&f, Point2::new(0.0, y));
                let exact = 2.0 * PI / l;
                assert!((gx - exact).abs() <= 0.02 * exact, "n={n} gx={gx}");
                assert!(gy.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_is_periodic_across_edges() {
        let l = 20.0;
        let f = GridField::from_fn(64, l, |x, y| (2.0 * PI * x / l).cos() * (2.0 * PI * y / l).sin());
        let a = gradient_at(&f, Point2::new(0.01, 0.02));
        let b = gradient_at(&f, Point2::new(l + 0.01, -l + 0.02));
        assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    }

    // Second-order convergence on smooth fields: error ratio ≥ 3.5 per
    // doubling of grid_n.
    #[test]
    fn gradient_converges_at_second_order() {
        let l = 10.0;
        let k = 2.0 * PI / l;
        let f = |x: f64, y: f64| (k * x).sin() * (2.0 * k * y).cos() + 0.5 * (k * (x + y)).cos();
        let grad = |x: f64, y: f64| {
            (
                k * (k * x).cos() * (2.0 * k * y).cos() - 0.5 * k * (k * (x + y)).sin(),
                -2.0 * k * (k * x).sin() * (2.0 * k * y).sin() - 0.5 * k * (k * (x + y)).sin(),
            )
        };
        let probes: Vec<Point2> = (0..50)
            .map(|m| Point2::new(0.137 * m as f64 * 1.3 % l, (0.71 * m as f64 + 0.05) % l))
            .collect();
        let err = |n: usize| {
            let field = GridField::from_fn(n, l, f);
            probes
                .iter()
                .map(|&p| {
                    let (gx, gy) = gradient_at(&field, p);
                    let (ex, ey) = grad(p.x, p.y);
                    (gx - ex).abs().max((gy - ey).abs())
                })
                .fold(0.0, f64::max)
        };
        let errors: Vec<f64> = [32, 64, 128].iter().map(|&n| err(n)).collect();
        for w in errors.windows(2) {
            assert!(w[0] / w[1] >= 3.5, "errors {errors:?}");
        }
    }
}
