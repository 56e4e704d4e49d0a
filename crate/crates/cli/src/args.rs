use std::path::PathBuf;

use chemoshear::params::RawConfig;
use chemoshear::stats::WORKERS_ENV;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "chemoshear",
    version = env!("CHEMOSHEAR_VERSION"),
    about = "First hitting times under shear flow and flux-limited chemotaxis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one ensemble and report hitting-time statistics.
    Simulate(SimulateArgs),
    /// Run one ensemble per value of a parameter axis.
    Sweep(SweepArgs),
    /// Solve the chemical field and export it.
    Field(FieldArgs),
    /// Closed form, effective ODE and 1D Monte Carlo at several starts.
    Effective1d(EffectiveArgs),
    /// Noise-free line-sample success fraction, per shear rate.
    Deterministic(DeterministicArgs),
    /// 2D means without chemotaxis against the closed-form 1D time.
    ConvergeT1(ConvergeArgs),
    /// 2D means with chemotaxis against the effective 1D ODE time.
    ConvergeT3(ConvergeArgs),
}

/// Simulation parameters. Flags override values read from `--config`.
#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Flat TOML file with `key = value` parameters.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Box side L, in units of the target radius.
    #[arg(long = "L", global = true, allow_hyphen_values = true)]
    pub box_size: Option<String>,
    /// Shear amplitude A.
    #[arg(long = "A", global = true, allow_hyphen_values = true)]
    pub amplitude: Option<String>,
    /// Shear rate A/L in (4 s)^-1.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub shear_rate: Option<String>,
    /// Shear rate A/L in s^-1.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub shear_rate_per_s: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub nu: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub chi: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub v_max: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub delta: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub shear_cutoff: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub dt: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t_max: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub grid_n: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub start_x: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub start_y: Option<String>,
    /// Disable substepping of fast advection.
    #[arg(long, global = true)]
    pub no_substep: bool,
    /// Accept grids coarser than delta/2.
    #[arg(long, global = true)]
    pub force_grid: bool,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
}

impl ParamArgs {
    /// Flag values as a raw config; unset flags are absent.
    pub fn overrides(&self) -> RawConfig {
        let mut raw = RawConfig::new();
        let pairs = [
            ("L", &self.box_size),
            ("A", &self.amplitude),
            ("shear_rate", &self.shear_rate),
            ("shear_rate_per_s", &self.shear_rate_per_s),
            ("nu", &self.nu),
            ("chi", &self.chi),
            ("v_max", &self.v_max),
            ("delta", &self.delta),
            ("shear_cutoff", &self.shear_cutoff),
            ("dt", &self.dt),
            ("t_max", &self.t_max),
            ("grid_n", &self.grid_n),
            ("start_x", &self.start_x),
            ("start_y", &self.start_y),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                raw.set(key, v);
            }
        }
        if self.no_substep {
            raw.set("substep", false);
        }
        if self.force_grid {
            raw.set("force_grid", true);
        }
        raw
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Trajectories per ensemble.
    #[arg(long, default_value_t = 200)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Write the statistics row here (sweep CSV schema).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Write (trajectory, t, x, y) samples of the first trajectories here.
    #[arg(long)]
    pub dump_trajectories: Option<PathBuf>,
    /// How many trajectories to dump.
    #[arg(long, default_value_t = 1)]
    pub dump_count: usize,
    /// Record every n-th step in the dump.
    #[arg(long, default_value_t = 100)]
    pub dump_stride: u64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// One of shear_rate, shear_rate_per_s, chi, v_max, L.
    #[arg(long, default_value = "shear_rate")]
    pub axis: String,
    /// Comma-separated axis values; defaults to 0 plus 12 log-spaced shear
    /// rates over [1e-3, 1e2] (4 s)^-1.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Option<Vec<f64>>,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Binary grid output (u64 n, f64 L, n² f64 values; little-endian).
    #[arg(long)]
    pub binary: Option<PathBuf>,
    /// x,y,value CSV output.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Export the target density instead of the chemical.
    #[arg(long)]
    pub density: bool,
}

#[derive(Debug, Args)]
pub struct EffectiveArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Start points as cut coordinates in (0, L − 2δ); defaults to five
    /// evenly spaced interior points.
    #[arg(long, value_delimiter = ',')]
    pub starts: Option<Vec<f64>>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DeterministicArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Distance between agents on the line x = 0, y ∈ [0, L/2].
    #[arg(long, default_value_t = 0.01)]
    pub spacing: f64,
    /// Integration horizon.
    #[arg(long, default_value_t = 2000.0)]
    pub horizon: f64,
    /// Comma-separated shear rates in s^-1; defaults to the configured one.
    #[arg(long, value_delimiter = ',')]
    pub rates_per_s: Option<Vec<f64>>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated shear amplitudes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub amplitudes: Vec<f64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}
