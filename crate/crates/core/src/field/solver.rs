//! Matrix-free BiCGSTAB for the discrete operator
//! `(−Δ_h + s(y)·D⁰ₓ + I) c = n` with the five-point Laplacian and centered
//! x-differences on the periodic grid. `s(y)` is the saturated shear.
//!
//! The operator has x-independent coefficients, so a Fourier transform in x
//! splits it into one periodic tridiagonal system in y per wavenumber. That
//! line solve is the default preconditioner and inverts the operator up to
//! rounding; plain Jacobi scaling stalls once |s|·h exceeds about 10.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::GridField;
use crate::error::{Error, Result};
use crate::params::SimParams;
use crate::torus::shear_velocity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    /// Exact x-Fourier / y-tridiagonal solve of the same stencil.
    #[default]
    FourierLine,
    /// Constant diagonal scaling.
    Jacobi,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Stop when ‖r‖∞ ≤ rel_tol·‖n‖∞.
    pub rel_tol: f64,
    pub max_iterations: usize,
    /// Give up after this many iterations without a new best residual.
    pub stagnation_window: usize,
    pub preconditioner: Preconditioner,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            // Tighter than the 1e-8 contract so the mass identity also holds
            // on large boxes.
            rel_tol: 1e-10,
            max_iterations: 20_000,
            stagnation_window: 2_000,
            preconditioner: Preconditioner::FourierLine,
        }
    }
}

/// Sign diagnostics. The centered scheme is not monotone when |s|·h is
/// large, so negative cells are reported rather than rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityReport {
    pub negative_cells: usize,
    pub min_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub restarts: usize,
    /// ‖r‖∞ / ‖n‖∞ of the returned solution.
    pub relative_residual: f64,
    /// max |s(y)|·h over the grid.
    pub peclet: f64,
    pub positivity: PositivityReport,
}

fn shear_rows(params: &SimParams, n: usize) -> Vec<f64> {
    let h = params.box_size / n as f64;
    (0..n).map(|j| shear_velocity(j as f64 * h, params)).collect()
}

fn apply(c: &[f64], out: &mut [f64], n: usize, h: f64, shear: &[f64]) {
    let inv_h2 = 1.0 / (h * h);
    let diag = 4.0 * inv_h2 + 1.0;
    for j in 0..n {
        let jm = if j == 0 { n - 1 } else { j - 1 };
        let jp = if j + 1 == n { 0 } else { j + 1 };
        let adv = shear[j] / (2.0 * h);
        let row = &c[j * n..(j + 1) * n];
        let below = &c[jm * n..(jm + 1) * n];
        let above = &c[jp * n..(jp + 1) * n];
        let out_row = &mut out[j * n..(j + 1) * n];
        for i in 0..n {
            let im = if i == 0 { n - 1 } else { i - 1 };
            let ip = if i + 1 == n { 0 } else { i + 1 };
            let (w, e) = (row[im], row[ip]);
            out_row[i] = diag * row[i] - inv_h2 * (w + e + below[i] + above[i]) + adv * (e - w);
        }
    }
}

/// Apply the discrete operator to `c` with the shear of `params`.
pub fn apply_operator(c: &GridField, params: &SimParams) -> GridField {
    let n = c.n_side();
    let shear = shear_rows(params, n);
    let mut out = GridField::zeros(n, c.box_size());
    apply(c.values(), out.values_mut(), n, c.spacing(), &shear);
    out
}

/// ‖(−Δ_h + s·D⁰ₓ + I)c − n‖∞.
pub fn residual_inf(c: &GridField, n: &GridField, params: &SimParams) -> f64 {
    let mc = apply_operator(c, params);
    mc.values()
        .iter()
        .zip(n.values())
        .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Per wavenumber k the stencil acts on the row transforms ĉ_j(k) as
/// `−(ĉ_{j−1} + ĉ_{j+1})/h² + (a_k + i·b_k·s_j)·ĉ_j` with
/// a_k = (4 − 2cos θ_k)/h² + 1 and b_k = sin θ_k / h.
struct FourierLine {
    n: usize,
    h: f64,
    shear: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FourierLine {
    fn new(n: usize, h: f64, shear: &[f64]) -> Self {
        let mut planner = FftPlanner::new();
        FourierLine {
            n,
            h,
            shear: shear.to_vec(),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let n = self.n;
        let h2 = self.h * self.h;
        let mut spec: Vec<Complex64> = rhs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for row in spec.chunks_exact_mut(n) {
            self.forward.process(row);
        }
        let off = -1.0 / h2;
        let mut column = vec![Complex64::default(); n];
        let mut diag = vec![Complex64::default(); n];
        let mut scratch = CyclicScratch::new(n);
        for k in 0..n {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let a = (4.0 - 2.0 * theta.cos()) / h2 + 1.0;
            let b = theta.sin() / self.h;
            for j in 0..n {
                diag[j] = Complex64::new(a, b * self.shear[j]);
                column[j] = spec[j * n + k];
            }
            scratch.solve(off, &diag, &mut column);
            for j in 0..n {
                spec[j * n + k] = column[j];
            }
        }
        let scale = 1.0 / n as f64;
        for (row, out_row) in spec.chunks_exact_mut(n).zip(out.chunks_exact_mut(n)) {
            self.inverse.process(row);
            for (o, v) in out_row.iter_mut().zip(row.iter()) {
                *o = v.re * scale;
            }
        }
    }
}

/// Work arrays for the cyclic tridiagonal solve with constant off-diagonal.
struct CyclicScratch {
    main: Vec<Complex64>,
    u: Vec<Complex64>,
    cp: Vec<Complex64>,
    dp: Vec<Complex64>,
}

impl CyclicScratch {
    fn new(n: usize) -> Self {
        let zero = Complex64::default();
        CyclicScratch {
            main: vec![zero; n],
            u: vec![zero; n],
            cp: vec![zero; n],
            dp: vec![zero; n],
        }
    }

    /// Sherman–Morrison on the periodic system; `x` holds the right-hand side
    /// on entry and the solution on exit. Rows are strictly diagonally
    /// dominant, so no pivoting is needed.
    fn solve(&mut self, off: f64, diag: &[Complex64], x: &mut [Complex64]) {
        let n = diag.len();
        let gamma = -diag[0];
        self.main.copy_from_slice(diag);
        self.main[0] -= gamma;
        self.main[n - 1] -= off * off / gamma;
        self.u.iter_mut().for_each(|e| *e = Complex64::default());
        self.u[0] = gamma;
        self.u[n - 1] = Complex64::new(off, 0.0);
        thomas_complex(off, &self.main, x, &mut self.cp, &mut self.dp);
        let mut u = std::mem::take(&mut self.u);
        thomas_complex(off, &self.main, &mut u, &mut self.cp, &mut self.dp);
        let fact = (x[0] + x[n - 1] * off / gamma) / (u[0] + u[n - 1] * off / gamma + 1.0);
        for (xi, ui) in x.iter_mut().zip(&u) {
            *xi -= fact * ui;
        }
        self.u = u;
    }
}

fn thomas_complex(off: f64, main: &[Complex64], x: &mut [Complex64], cp: &mut [Complex64], dp: &mut [Complex64]) {
    let n = main.len();
    cp[0] = off / main[0];
    dp[0] = x[0] / main[0];
    for i in 1..n {
        let m = main[i] - cp[i - 1] * off;
        cp[i] = off / m;
        dp[i] = (x[i] - dp[i - 1] * off) / m;
    }
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
}

enum Precond {
    Jacobi(f64),
    Line(Box<FourierLine>),
}

impl Precond {
    fn apply(&self, r: &[f64], out: &mut [f64]) {
        match self {
            Precond::Jacobi(inv_diag) => {
                for (o, v) in out.iter_mut().zip(r) {
                    *o = v * inv_diag;
                }
            }
            Precond::Line(line) => line.solve(r, out),
        }
    }
}

pub fn solve_chemical(n: &GridField, params: &SimParams) -> Result<GridField> {
    solve_chemical_with(n, params, &SolverOptions::default()).map(|(c, _)| c)
}

pub fn solve_chemical_with(
    n: &GridField,
    params: &SimParams,
    opts: &SolverOptions,
) -> Result<(GridField, SolveReport)> {
    let size = n.n_side();
    let len = size * size;
    let h = n.spacing();
    let shear = shear_rows(params, size);
    let peclet = shear.iter().fold(0.0f64, |m, s| m.max(s.abs())) * h;
    let precond = match opts.preconditioner {
        Preconditioner::Jacobi => Precond::Jacobi(1.0 / (4.0 / (h * h) + 1.0)),
        Preconditioner::FourierLine => Precond::Line(Box::new(FourierLine::new(size, h, &shear))),
    };

    let b = n.values();
    let b_norm = sup(b);
    if b_norm == 0.0 {
        let c = GridField::zeros(size, n.box_size());
        let report = SolveReport {
            iterations: 0,
            restarts: 0,
            relative_residual: 0.0,
            peclet,
            positivity: PositivityReport { negative_cells: 0, min_value: 0.0 },
        };
        return Ok((c, report));
    }
    let target = opts.rel_tol * b_norm;

    let mut x = vec![0.0; len];
    precond.apply(b, &mut x);
    let mut r = vec![0.0; len];
    let mut r_hat = vec![0.0; len];
    let mut p = vec![0.0; len];
    let mut v = vec![0.0; len];
    let mut s = vec![0.0; len];
    let mut t = vec![0.0; len];
    let mut y = vec![0.0; len];
    let mut z = vec![0.0; len];

    let mut iterations = 0;
    let mut restarts = 0;
    let mut best = f64::INFINITY;
    let mut best_at = 0;

    let true_residual = |x: &[f64], r: &mut [f64], scratch: &mut [f64]| {
        apply(x, scratch, size, h, &shear);
        for k in 0..len {
            r[k] = b[k] - scratch[k];
        }
        sup(r)
    };

    'outer: loop {
        let mut res = true_residual(&x, &mut r, &mut t);
        if res <= target {
            break;
        }
        r_hat.copy_from_slice(&r);
        p.iter_mut().for_each(|e| *e = 0.0);
        v.iter_mut().for_each(|e| *e = 0.0);
        let (mut rho, mut alpha, mut omega) = (1.0f64, 1.0f64, 1.0f64);

        loop {
            if iterations >= opts.max_iterations || iterations - best_at > opts.stagnation_window {
                break 'outer;
            }
            iterations += 1;

            let rho_next = dot(&r_hat, &r);
            if rho_next == 0.0 || !rho_next.is_finite() {
                restarts += 1;
                continue 'outer;
            }
            let beta = (rho_next / rho) * (alpha / omega);
            rho = rho_next;
            for k in 0..len {
                p[k] = r[k] + beta * (p[k] - omega * v[k]);
            }
            precond.apply(&p, &mut y);
            apply(&y, &mut v, size, h, &shear);
            let denom = dot(&r_hat, &v);
            if denom == 0.0 || !denom.is_finite() {
                restarts += 1;
                continue 'outer;
            }
            alpha = rho / denom;
            for k in 0..len {
                s[k] = r[k] - alpha * v[k];
            }
            if sup(&s) <= target {
                for k in 0..len {
                    x[k] += alpha * y[k];
                }
                // Confirm against the true residual before accepting.
                continue 'outer;
            }
            precond.apply(&s, &mut z);
            apply(&z, &mut t, size, h, &shear);
            let tt = dot(&t, &t);
            if tt == 0.0 {
                restarts += 1;
                continue 'outer;
            }
            omega = dot(&t, &s) / tt;
            for k in 0..len {
                x[k] += alpha * y[k] + omega * z[k];
                r[k] = s[k] - omega * t[k];
            }
            res = sup(&r);
            if res < best {
                best = res;
                best_at = iterations;
            }
            if res <= target {
                continue 'outer;
            }
            if omega == 0.0 || !omega.is_finite() {
                restarts += 1;
                continue 'outer;
            }
        }
    }

    // The constant mode is an exact eigenvector with eigenvalue 1, so the
    // discrete mass can be corrected directly.
    let mass_gap = (b.iter().sum::<f64>() - x.iter().sum::<f64>()) / len as f64;
    for e in x.iter_mut() {
        *e += mass_gap;
    }

    let final_res = true_residual(&x, &mut r, &mut t);
    let relative_residual = final_res / b_norm;
    if !(final_res <= 2.0 * target) || x.iter().any(|e| !e.is_finite()) {
        return Err(Error::SolverDiverged {
            iterations,
            residual: relative_residual,
            peclet,
        });
    }

    let negative_cells = x.iter().filter(|&&e| e < 0.0).count();
    let min_value = x.iter().copied().fold(f64::INFINITY, f64::min);
    let c = GridField::new(size, n.box_size(), x)?;
    Ok((
        c,
        SolveReport {
            iterations,
            restarts,
            relative_residual,
            peclet,
            positivity: PositivityReport { negative_cells, min_value },
        },
    ))
}
