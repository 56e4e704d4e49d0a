//! Monte Carlo ensembles of first hitting times and the deterministic
//! line-sample experiment.
//!
//! Trajectories fan out over a rayon pool; per-trajectory results are
//! collected in trajectory-index order and reduced sequentially, so the
//! statistics are bitwise independent of the worker count.

use rayon::prelude::*;

use crate::dynamics::{run_deterministic, run_trajectory, HitResult, VelocitySampler};
use crate::error::{Error, Result};
use crate::params::SimParams;
use crate::rng::trajectory_rng;
use crate::torus::Point2;

/// Environment variable read by [`Workers::from_env`].
pub const WORKERS_ENV: &str = "CHEMOSHEAR_WORKERS";

/// Rows with a larger timeout share are flagged unusable.
pub const MAX_TIMEOUT_FRACTION: f64 = 0.01;

/// Size of the worker pool; `None` means rayon's default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Workers(pub Option<usize>);

impl Workers {
    pub fn from_env() -> Self {
        Workers(
            std::env::var(WORKERS_ENV)
                .ok()
                .and_then(|v| v.trim().parse().ok())
                .filter(|&n: &usize| n > 0),
        )
    }

    pub fn install<T: Send>(self, job: impl FnOnce() -> T + Send) -> T {
        match self.0 {
            None => job(),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("thread pool")
                .install(job),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingTimeStats {
    pub n_runs: usize,
    pub n_hits: usize,
    pub n_timeouts: usize,
    /// Mean over hits only.
    pub mean: f64,
    /// Sample standard deviation over hits.
    pub std: f64,
    /// std / √n_hits.
    pub stderr: f64,
    pub master_seed: u64,
}

impl HittingTimeStats {
    /// Aggregate in the given order; timeouts are counted, never averaged.
    pub fn from_results(results: &[HitResult], master_seed: u64) -> Result<Self> {
        let n_runs = results.len();
        let hits: Vec<f64> = results.iter().filter(|r| r.hit).map(|r| r.time).collect();
        let n_hits = hits.len();
        if n_hits == 0 {
            return Err(Error::AllTimedOut { n_runs });
        }
        let mean = hits.iter().sum::<f64>() / n_hits as f64;
        let var = if n_hits > 1 {
            hits.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n_hits - 1) as f64
        } else {
            0.0
        };
        let std = var.sqrt();
        Ok(HittingTimeStats {
            n_runs,
            n_hits,
            n_timeouts: n_runs - n_hits,
            mean,
            std,
            stderr: std / (n_hits as f64).sqrt(),
            master_seed,
        })
    }

    pub fn timeout_fraction(&self) -> f64 {
        self.n_timeouts as f64 / self.n_runs as f64
    }

    /// At most 1% timeouts.
    pub fn usable(&self) -> bool {
        self.timeout_fraction() <= MAX_TIMEOUT_FRACTION
    }

    /// Half-width of two-standard-deviation error bars.
    pub fn two_std(&self) -> f64 {
        2.0 * self.std
    }
}

/// Every trajectory of an ensemble, in index order.
pub fn run_trajectories(
    params: &SimParams,
    sampler: &VelocitySampler,
    n_runs: usize,
    master_seed: u64,
    workers: Workers,
) -> Vec<HitResult> {
    workers.install(|| {
        (0..n_runs)
            .into_par_iter()
            .map(|k| {
                let mut rng = trajectory_rng(master_seed, k as u64);
                run_trajectory(params, sampler, &mut rng)
            })
            .collect()
    })
}

/// Ensemble statistics with a prebuilt sampler.
pub fn run_ensemble_with(
    params: &SimParams,
    sampler: &VelocitySampler,
    n_runs: usize,
    master_seed: u64,
    workers: Workers,
) -> Result<HittingTimeStats> {
    if n_runs == 0 {
        return Err(Error::Domain("n_runs must be at least 1".into()));
    }
    let results = run_trajectories(params, sampler, n_runs, master_seed, workers);
    HittingTimeStats::from_results(&results, master_seed)
}

/// Solve the chemical field once, then run `n_runs` trajectories.
pub fn run_ensemble(params: &SimParams, n_runs: usize, master_seed: u64) -> Result<HittingTimeStats> {
    let sampler = VelocitySampler::build(params)?;
    run_ensemble_with(params, &sampler, n_runs, master_seed, Workers::from_env())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSample {
    pub n_agents: usize,
    pub n_hits: usize,
}

impl LineSample {
    pub fn fraction(&self) -> f64 {
        self.n_hits as f64 / self.n_agents as f64
    }
}

/// Starting points x = 0, y = k·spacing covering [0, L/2] inclusive.
pub fn line_sample_points(box_size: f64, spacing: f64) -> Vec<Point2> {
    let count = ((box_size / 2.0) / spacing + 1e-9).floor() as usize + 1;
    (0..count).map(|k| Point2::new(0.0, k as f64 * spacing)).collect()
}

/// Noise-free agents released along the line sample; how many hit within
/// `t_max`.
pub fn success_fraction_line_with(
    params: &SimParams,
    sampler: &VelocitySampler,
    spacing: f64,
    t_max: f64,
    workers: Workers,
) -> Result<LineSample> {
    if !(spacing > 0.0) {
        return Err(Error::Domain(format!("spacing must be positive, got {spacing}")));
    }
    let starts = line_sample_points(params.box_size, spacing);
    let hits: Vec<bool> = workers.install(|| {
        starts
            .par_iter()
            .map(|&s| run_deterministic(params, sampler, s, t_max).hit)
            .collect()
    });
    Ok(LineSample {
        n_agents: starts.len(),
        n_hits: hits.iter().filter(|&&h| h).count(),
    })
}

pub fn success_fraction_line(params: &SimParams, spacing: f64, t_max: f64) -> Result<f64> {
    let sampler = VelocitySampler::build(params)?;
    success_fraction_line_with(params, &sampler, spacing, t_max, Workers::from_env())
        .map(|s| s.fraction())
}
