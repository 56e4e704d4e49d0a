//! Parameter sweeps, optimal-shear search, large-shear convergence studies
//! and their CSV output.
//!
//! Rows run one after another; each owns the worker pool for its ensemble.
//! Row k is seeded with `derive_seed(master_seed, k)`, so dropping or
//! reordering rows leaves the others unchanged.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::dynamics::VelocitySampler;
use crate::effective::{
    cut_coordinate, cut_length, effective_drift_for, expected_hitting_time_ode,
    hitting_time_1d_closed_form, run_1d_ensemble, EffectiveDrift1D,
};
use crate::error::{Error, Result};
use crate::field::{build_target_density, format_float, solve_chemical, GridField};
use crate::params::SimParams;
use crate::rng::derive_seed;
use crate::stats::{run_ensemble_with, HittingTimeStats, Workers};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// A/L in (4 s)⁻¹.
    ShearRate,
    /// A/L in s⁻¹.
    ShearRatePerSecond,
    Chi,
    VMax,
    /// Box side; grid spacing and shear rate are held fixed and `t_max`
    /// scales with L².
    BoxSize,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 5] = [
        SweepAxis::ShearRate,
        SweepAxis::ShearRatePerSecond,
        SweepAxis::Chi,
        SweepAxis::VMax,
        SweepAxis::BoxSize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::ShearRate => "shear_rate",
            SweepAxis::ShearRatePerSecond => "shear_rate_per_s",
            SweepAxis::Chi => "chi",
            SweepAxis::VMax => "v_max",
            SweepAxis::BoxSize => "L",
        }
    }

    /// Whether changing this value changes the chemical field.
    pub fn affects_field(self) -> bool {
        matches!(self, SweepAxis::ShearRate | SweepAxis::ShearRatePerSecond | SweepAxis::BoxSize)
    }

    pub fn apply(self, base: &SimParams, value: f64) -> SimParams {
        let mut p = base.clone();
        match self {
            SweepAxis::ShearRate => p.set_shear_rate(value),
            SweepAxis::ShearRatePerSecond => p.set_shear_rate_per_second(value),
            SweepAxis::Chi => p.chi = value,
            SweepAxis::VMax => p.v_max = value,
            SweepAxis::BoxSize => {
                let rate = base.shear_rate();
                let h = base.grid_spacing();
                let ratio = value / base.box_size;
                p.box_size = value;
                p.grid_n = (value / h).round().max(1.0) as usize;
                p.t_max = base.t_max * ratio * ratio;
                p.set_shear_rate(rate);
            }
        }
        p
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = SweepAxis::ALL.iter().map(|a| a.name()).collect();
                Error::Sweep(format!("unknown axis {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: SimParams,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub n_runs: usize,
    pub master_seed: u64,
}

impl SweepSpec {
    pub fn check(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Sweep("no axis values".into()));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Sweep(format!("non-finite axis value {v}")));
        }
        if let Some(w) = self.values.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Sweep(format!(
                "axis values must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if self.n_runs == 0 {
            return Err(Error::Sweep("n_runs must be at least 1".into()));
        }
        for &v in &self.values {
            self.axis.apply(&self.base, v).check().map_err(Error::Config)?;
        }
        Ok(())
    }
}

/// 0 followed by `per_decade`-spaced log points from 10^lo to 10^hi.
pub fn log_grid_with_zero(lo_exp: f64, hi_exp: f64, points: usize) -> Vec<f64> {
    let mut values = vec![0.0];
    let steps = points.max(2) - 1;
    values.extend((0..=steps).map(|k| 10f64.powf(lo_exp + (hi_exp - lo_exp) * k as f64 / steps as f64)));
    values
}

/// 0 plus 12 log-spaced rates over [10⁻³, 10²] (4 s)⁻¹.
pub fn default_shear_grid() -> Vec<f64> {
    log_grid_with_zero(-3.0, 2.0, 12)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    pub params: SimParams,
    pub seed: u64,
    pub stats: Option<HittingTimeStats>,
    /// Why the row produced no statistics.
    pub failure: Option<String>,
}

impl SweepRow {
    /// Has statistics with at most 1% timeouts.
    pub fn usable(&self) -> bool {
        self.stats.as_ref().is_some_and(HittingTimeStats::usable)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub base: SimParams,
    pub rows: Vec<SweepRow>,
    /// Index into `rows` of the lowest mean among usable rows.
    pub argmin: Option<usize>,
}

impl SweepResult {
    pub fn new(axis: SweepAxis, base: SimParams, rows: Vec<SweepRow>) -> Self {
        let argmin = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.usable())
            .min_by(|a, b| {
                let ma = a.1.stats.unwrap().mean;
                let mb = b.1.stats.unwrap().mean;
                ma.total_cmp(&mb)
            })
            .map(|(k, _)| k);
        SweepResult { axis, base, rows, argmin }
    }

    pub fn argmin_value(&self) -> Option<f64> {
        self.argmin.map(|k| self.rows[k].value)
    }

    pub fn argmin_mean(&self) -> Option<f64> {
        self.argmin.and_then(|k| self.rows[k].stats.map(|s| s.mean))
    }

    pub fn usable_rows(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.usable())
    }
}

/// Called after each finished row, e.g. to append it to a CSV file.
pub trait RowSink {
    fn row(&mut self, axis: SweepAxis, row: &SweepRow) -> Result<()>;
}

impl RowSink for () {
    fn row(&mut self, _: SweepAxis, _: &SweepRow) -> Result<()> {
        Ok(())
    }
}

pub fn sweep(spec: &SweepSpec) -> Result<SweepResult> {
    sweep_with(spec, Workers::from_env(), &mut ())
}

/// Run every row of `spec`. A row whose solve fails or whose trajectories
/// all time out is recorded as failed and the sweep continues; sink errors
/// abort.
pub fn sweep_with(spec: &SweepSpec, workers: Workers, sink: &mut dyn RowSink) -> Result<SweepResult> {
    spec.check()?;
    let mut shared: Option<Option<Arc<GridField>>> = None;
    let mut rows = Vec::with_capacity(spec.values.len());
    for (index, &value) in spec.values.iter().enumerate() {
        let params = spec.axis.apply(&spec.base, value);
        let seed = derive_seed(spec.master_seed, index as u64);
        let field = if spec.axis.affects_field() {
            chemical_field(&params).map(|f| f.map(Arc::new))
        } else {
            match &shared {
                Some(f) => Ok(f.clone()),
                None => {
                    let f = field_for_axis(spec)?;
                    shared = Some(f.clone());
                    Ok(f)
                }
            }
        };
        let outcome = field.and_then(|field| {
            let sampler = VelocitySampler::new(&params, field);
            run_ensemble_with(&params, &sampler, spec.n_runs, seed, workers)
        });
        let (stats, failure) = match outcome {
            Ok(s) => (Some(s), None),
            Err(e @ (Error::SolverDiverged { .. } | Error::AllTimedOut { .. })) => {
                (None, Some(e.to_string()))
            }
            Err(e) => return Err(e),
        };
        let row = SweepRow { index, value, params, seed, stats, failure };
        sink.row(spec.axis, &row)?;
        rows.push(row);
    }
    Ok(SweepResult::new(spec.axis, spec.base.clone(), rows))
}

fn chemical_field(params: &SimParams) -> Result<Option<GridField>> {
    if params.chi > 0.0 && params.v_max > 0.0 {
        solve_chemical(&build_target_density(params), params).map(Some)
    } else {
        Ok(None)
    }
}

/// The field shared by every row of an axis that leaves it unchanged; solved
/// if any row needs it.
fn field_for_axis(spec: &SweepSpec) -> Result<Option<Arc<GridField>>> {
    let needed = spec
        .values
        .iter()
        .map(|&v| spec.axis.apply(&spec.base, v))
        .any(|p| p.chi > 0.0 && p.v_max > 0.0);
    if !needed {
        return Ok(None);
    }
    let mut p = spec.base.clone();
    p.chi = p.chi.max(1.0);
    p.v_max = p.v_max.max(1.0);
    chemical_field(&p).map(|f| f.map(Arc::new))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalShear {
    pub value: f64,
    pub mean: f64,
    /// 2·stderr of the argmin row.
    pub ci: f64,
    /// Axis values of usable rows statistically level with the minimum:
    /// mean − argmin_mean ≤ 2·√(stderr² + stderr_min²).
    pub plateau: Vec<f64>,
}

pub fn find_optimal_shear(result: &SweepResult) -> Result<OptimalShear> {
    let found = result.usable_rows().count();
    if found < 3 {
        return Err(Error::InsufficientRows { needed: 3, found });
    }
    let best = &result.rows[result.argmin.expect("usable rows exist")];
    let b = best.stats.expect("usable row has stats");
    let plateau = result
        .usable_rows()
        .filter(|r| {
            let s = r.stats.unwrap();
            s.mean - b.mean <= 2.0 * s.stderr.hypot(b.stderr)
        })
        .map(|r| r.value)
        .collect();
    Ok(OptimalShear {
        value: best.value,
        mean: b.mean,
        ci: 2.0 * b.stderr,
        plateau,
    })
}

/// One amplitude of a large-shear convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub amplitude: f64,
    pub params: SimParams,
    pub stats: Option<HittingTimeStats>,
    pub failure: Option<String>,
    /// The 1D limit the 2D mean should approach.
    pub reference: f64,
}

impl ConvergenceRow {
    /// 2D mean minus the 1D reference.
    pub fn gap(&self) -> Option<f64> {
        self.stats.map(|s| s.mean - self.reference)
    }

    /// |gap| ≤ max(3·stderr, rel·reference).
    pub fn within(&self, rel: f64) -> bool {
        match (self.gap(), self.stats) {
            (Some(g), Some(s)) => g.abs() <= (3.0 * s.stderr).max(rel * self.reference),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub base: SimParams,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn last(&self) -> Option<&ConvergenceRow> {
        self.rows.last()
    }

    /// Every usable mean is at most the previous one plus 2·stderr of both.
    pub fn non_increasing_within_noise(&self) -> bool {
        let usable: Vec<HittingTimeStats> =
            self.rows.iter().filter_map(|r| r.stats).filter(|s| s.usable()).collect();
        usable.windows(2).all(|w| w[1].mean <= w[0].mean + 2.0 * w[1].stderr.hypot(w[0].stderr))
    }
}

fn convergence_study(
    params: &SimParams,
    amplitudes: &[f64],
    n_runs: usize,
    master_seed: u64,
    workers: Workers,
    reference: f64,
) -> Result<ConvergenceTable> {
    let spec = SweepSpec {
        base: params.clone(),
        axis: SweepAxis::ShearRate,
        values: amplitudes.iter().map(|a| a / params.box_size).collect(),
        n_runs,
        master_seed,
    };
    let result = sweep_with(&spec, workers, &mut ())?;
    let rows = result
        .rows
        .into_iter()
        .zip(amplitudes)
        .map(|(r, &a)| ConvergenceRow {
            amplitude: a,
            params: r.params,
            stats: r.stats,
            failure: r.failure,
            reference,
        })
        .collect();
    Ok(ConvergenceTable { base: params.clone(), rows })
}

/// Closed-form exit time for the start's shifted coordinate.
pub fn closed_form_reference(params: &SimParams) -> Result<f64> {
    let shifted = cut_coordinate(params.start.y, params) - cut_length(params) / 2.0;
    hitting_time_1d_closed_form(shifted, params)
}

/// Effective 1D ODE time from the start's cut coordinate.
pub fn ode_reference(params: &SimParams) -> Result<(EffectiveDrift1D, f64)> {
    let drift = effective_drift_for(params)?;
    let t = expected_hitting_time_ode(&drift, params, cut_coordinate(params.start.y, params))?;
    Ok((drift, t))
}

/// 2D means without chemotaxis against the closed-form 1D time.
pub fn theorem1_convergence_study(
    params: &SimParams,
    amplitudes: &[f64],
    n_runs: usize,
    master_seed: u64,
    workers: Workers,
) -> Result<ConvergenceTable> {
    if params.chi != 0.0 {
        return Err(Error::Domain("the no-chemotaxis study needs chi = 0".into()));
    }
    let reference = closed_form_reference(params)?;
    convergence_study(params, amplitudes, n_runs, master_seed, workers, reference)
}

/// 2D means with chemotaxis against the effective 1D ODE time.
pub fn theorem3_convergence_study(
    params: &SimParams,
    amplitudes: &[f64],
    n_runs: usize,
    master_seed: u64,
    workers: Workers,
) -> Result<ConvergenceTable> {
    if !(params.chi > 0.0) {
        return Err(Error::Domain("the chemotaxis study needs chi > 0".into()));
    }
    let (_, reference) = ode_reference(params)?;
    convergence_study(params, amplitudes, n_runs, master_seed, workers, reference)
}

/// One start point of the 1D reference table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveRow {
    /// Cut coordinate.
    pub s0: f64,
    /// Torus coordinate.
    pub y0: f64,
    pub closed_form: f64,
    pub ode: f64,
    pub mc: HittingTimeStats,
}

/// Closed form, ODE and 1D Monte Carlo at each cut coordinate in `starts`.
pub fn effective_1d_table(
    params: &SimParams,
    starts: &[f64],
    n_runs: usize,
    master_seed: u64,
    workers: Workers,
) -> Result<Vec<EffectiveRow>> {
    let drift = effective_drift_for(params)?;
    let half = cut_length(params) / 2.0;
    starts
        .iter()
        .enumerate()
        .map(|(k, &s0)| {
            let y0 = crate::effective::torus_coordinate(s0, params);
            Ok(EffectiveRow {
                s0,
                y0,
                closed_form: hitting_time_1d_closed_form(s0 - half, params)?,
                ode: expected_hitting_time_ode(&drift, params, s0)?,
                mc: run_1d_ensemble(&drift, params, y0, n_runs, derive_seed(master_seed, k as u64), workers)?,
            })
        })
        .collect()
}

pub const SWEEP_COLUMNS: [&str; 16] = [
    "swept_param_name",
    "swept_param_value",
    "A",
    "shear_rate",
    "L",
    "chi",
    "v_max",
    "nu",
    "dt",
    "n_runs",
    "n_hits",
    "n_timeouts",
    "mean",
    "std",
    "stderr",
    "master_seed",
];

pub const CONVERGENCE_COLUMNS: [&str; 11] = [
    "A",
    "shear_rate",
    "n_runs",
    "n_hits",
    "n_timeouts",
    "mean",
    "std",
    "stderr",
    "reference",
    "gap",
    "master_seed",
];

pub const EFFECTIVE_COLUMNS: [&str; 6] = ["s0", "y0", "T_closed_form", "T_ODE", "T_MC", "stderr"];

/// Comment lines above the column header: tool version and resolved params.
fn preamble(version: &str, params: &SimParams, extra: &[String]) -> Vec<String> {
    let mut lines = vec![format!("chemoshear {version}")];
    lines.extend(params.to_config_lines().into_iter().map(|l| l.trim_start_matches("# ").to_string()));
    lines.extend(extra.iter().cloned());
    lines
}

/// Data columns for one sweep row, or `None` for a failed row.
pub fn sweep_record(axis: SweepAxis, row: &SweepRow) -> Option<Vec<String>> {
    let s = row.stats?;
    let p = &row.params;
    Some(vec![
        axis.name().to_string(),
        format_float(row.value),
        format_float(p.amplitude),
        format_float(p.shear_rate()),
        format_float(p.box_size),
        format_float(p.chi),
        format_float(p.v_max),
        format_float(p.nu),
        format_float(p.dt),
        s.n_runs.to_string(),
        s.n_hits.to_string(),
        s.n_timeouts.to_string(),
        format_float(s.mean),
        format_float(s.std),
        format_float(s.stderr),
        s.master_seed.to_string(),
    ])
}

/// Line-oriented CSV writer with `#` comment lines; every write is flushed
/// so an interrupted run leaves a valid prefix.
pub struct CsvSink {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvSink {
    /// Create (truncate) `path` and write the preamble and column header.
    pub fn create(path: impl AsRef<Path>, comments: &[String], columns: &[&str]) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut sink = CsvSink { path, out: BufWriter::new(file) };
        for c in comments {
            sink.line(&format!("# {c}"))?;
        }
        sink.line(&columns.join(","))?;
        Ok(sink)
    }

    /// Reopen an existing file for appending data lines.
    pub fn append(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().append(true).open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(CsvSink { path, out: BufWriter::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn record(&mut self, fields: &[String]) -> Result<()> {
        self.line(&fields.join(","))
    }

    pub fn comment(&mut self, text: &str) -> Result<()> {
        self.line(&format!("# {text}"))
    }

    fn line(&mut self, text: &str) -> Result<()> {
        writeln!(self.out, "{text}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

/// Sweep sink that appends each finished row; failed rows become comments.
pub struct SweepCsv(pub CsvSink);

impl SweepCsv {
    pub fn create(path: impl AsRef<Path>, spec: &SweepSpec, version: &str) -> Result<Self> {
        let extra = vec![
            format!("axis = {}", spec.axis),
            format!("n_runs = {}", spec.n_runs),
            format!("master_seed = {}", spec.master_seed),
        ];
        CsvSink::create(path, &preamble(version, &spec.base, &extra), &SWEEP_COLUMNS).map(SweepCsv)
    }
}

impl RowSink for SweepCsv {
    fn row(&mut self, axis: SweepAxis, row: &SweepRow) -> Result<()> {
        match sweep_record(axis, row) {
            Some(fields) => self.0.record(&fields),
            None => self.0.comment(&format!(
                "row {} ({} = {}) failed: {}",
                row.index,
                axis,
                row.value,
                row.failure.as_deref().unwrap_or("unknown")
            )),
        }
    }
}

/// Write a finished sweep in one go.
pub fn emit_csv(result: &SweepResult, path: impl AsRef<Path>, version: &str) -> Result<()> {
    let extra = vec![format!("axis = {}", result.axis)];
    let sink = CsvSink::create(path, &preamble(version, &result.base, &extra), &SWEEP_COLUMNS)?;
    let mut csv = SweepCsv(sink);
    for row in &result.rows {
        csv.row(result.axis, row)?;
    }
    Ok(())
}

pub fn emit_convergence_csv(table: &ConvergenceTable, path: impl AsRef<Path>, version: &str) -> Result<()> {
    let mut sink = CsvSink::create(path, &preamble(version, &table.base, &[]), &CONVERGENCE_COLUMNS)?;
    for r in &table.rows {
        match r.stats {
            Some(s) => sink.record(&[
                format_float(r.amplitude),
                format_float(r.params.shear_rate()),
                s.n_runs.to_string(),
                s.n_hits.to_string(),
                s.n_timeouts.to_string(),
                format_float(s.mean),
                format_float(s.std),
                format_float(s.stderr),
                format_float(r.reference),
                format_float(s.mean - r.reference),
                s.master_seed.to_string(),
            ])?,
            None => sink.comment(&format!(
                "A = {} failed: {}",
                r.amplitude,
                r.failure.as_deref().unwrap_or("unknown")
            ))?,
        }
    }
    Ok(())
}

pub fn emit_effective_csv(
    rows: &[EffectiveRow],
    params: &SimParams,
    path: impl AsRef<Path>,
    version: &str,
) -> Result<()> {
    let mut sink = CsvSink::create(path, &preamble(version, params, &[]), &EFFECTIVE_COLUMNS)?;
    for r in rows {
        sink.record(&[
            format_float(r.s0),
            format_float(r.y0),
            format_float(r.closed_form),
            format_float(r.ode),
            format_float(r.mc.mean),
            format_float(r.mc.stderr),
        ])?;
    }
    Ok(())
}
