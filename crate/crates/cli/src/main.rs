mod args;

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use chemoshear::field::{homogenization_norms, solve_chemical_with, SolverOptions};
use chemoshear::rng::trajectory_rng;
use chemoshear::stats::{run_ensemble_with, success_fraction_line_with, LineSample};
use chemoshear::sweep::{
    default_shear_grid, effective_1d_table, emit_convergence_csv, emit_effective_csv, sweep_record,
    sweep_with, CsvSink, OptimalShear, SweepCsv, SWEEP_COLUMNS,
};
use chemoshear::{
    build_target_density, find_optimal_shear, run_trajectory_recorded, theorem1_convergence_study,
    theorem3_convergence_study, ConfigError, Error, HittingTimeStats, RawConfig, SimParams,
    SweepAxis, SweepRow, SweepSpec, VelocitySampler, Workers,
};
use clap::Parser;

use args::{
    Cli, Command, ConvergeArgs, DeterministicArgs, EffectiveArgs, FieldArgs, ParamArgs,
    SimulateArgs, SweepArgs,
};

const VERSION: &str = env!("CHEMOSHEAR_VERSION");

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Sweep(_) => 2,
        Error::SolverDiverged { .. } => 3,
        Error::AllTimedOut { .. } => 4,
        _ => 1,
    }
}

fn run(command: Command) -> chemoshear::Result<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Field(a) => field(a),
        Command::Effective1d(a) => effective(a),
        Command::Deterministic(a) => deterministic(a),
        Command::ConvergeT1(a) => converge(a, false),
        Command::ConvergeT3(a) => converge(a, true),
    }
}

fn load_params(args: &ParamArgs) -> chemoshear::Result<SimParams> {
    let mut raw = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            RawConfig::from_toml_str(&text).map_err(|e| config_in(path, e))?
        }
        None => RawConfig::new(),
    };
    raw.merge(&args.overrides());
    Ok(chemoshear::validate_params(&raw)?)
}

fn config_in(path: &Path, e: ConfigError) -> Error {
    eprintln!("in {}:", path.display());
    Error::Config(e)
}

fn workers(args: &ParamArgs) -> Workers {
    Workers(args.workers)
}

fn print_stats(label: &str, s: &HittingTimeStats) {
    println!(
        "{label}mean = {:.4}  std = {:.4}  stderr = {:.4}  hits = {}/{}  timeouts = {}",
        s.mean, s.std, s.stderr, s.n_hits, s.n_runs, s.n_timeouts
    );
    if !s.usable() {
        eprintln!(
            "warning: {:.1}% of trajectories timed out; the mean is biased low",
            100.0 * s.timeout_fraction()
        );
    }
}

fn simulate(a: SimulateArgs) -> chemoshear::Result<()> {
    let params = load_params(&a.params)?;
    let sampler = VelocitySampler::build(&params)?;
    let stats = run_ensemble_with(&params, &sampler, a.run.runs, a.run.seed, workers(&a.params))?;
    println!("{params}");
    print_stats("", &stats);

    if let Some(path) = &a.output {
        let row = SweepRow {
            index: 0,
            value: params.shear_rate(),
            params: params.clone(),
            seed: a.run.seed,
            stats: Some(stats),
            failure: None,
        };
        let mut comments = vec![format!("chemoshear {VERSION}")];
        comments.extend(params.to_config_lines().into_iter().map(|l| l.trim_start_matches("# ").to_string()));
        let mut sink = CsvSink::create(path, &comments, &SWEEP_COLUMNS)?;
        if let Some(fields) = sweep_record(SweepAxis::ShearRate, &row) {
            sink.record(&fields)?;
        }
    }

    if let Some(path) = &a.dump_trajectories {
        let mut sink = CsvSink::create(
            path,
            &[format!("chemoshear {VERSION}"), format!("master_seed = {}", a.run.seed)],
            &["trajectory", "t", "x", "y"],
        )?;
        for k in 0..a.dump_count.min(a.run.runs) {
            let mut rng = trajectory_rng(a.run.seed, k as u64);
            let (_, path) = run_trajectory_recorded(&params, &sampler, &mut rng, a.dump_stride);
            for (t, p) in path {
                sink.record(&[k.to_string(), fmt(t), fmt(p.x), fmt(p.y)])?;
            }
        }
    }
    Ok(())
}

fn fmt(v: f64) -> String {
    chemoshear::field::format_float(v)
}

fn sweep_cmd(a: SweepArgs) -> chemoshear::Result<()> {
    let base = load_params(&a.params)?;
    let axis: SweepAxis = a.axis.parse()?;
    let values = match a.values {
        Some(v) => v,
        None if axis == SweepAxis::ShearRate => default_shear_grid(),
        None => return Err(Error::Sweep(format!("--values is required for axis {axis}"))),
    };
    let spec = SweepSpec {
        base,
        axis,
        values,
        n_runs: a.run.runs,
        master_seed: a.run.seed,
    };
    spec.check()?;
    let mut sink = SweepCsv::create(&a.output, &spec, VERSION)?;
    let result = sweep_with(&spec, workers(&a.params), &mut sink)?;
    for row in &result.rows {
        match (&row.stats, &row.failure) {
            (Some(s), _) => print_stats(&format!("{axis} = {:<12.6} ", row.value), s),
            (None, Some(f)) => println!("{axis} = {:<12.6} failed: {f}", row.value),
            (None, None) => {}
        }
    }
    match find_optimal_shear(&result) {
        Ok(OptimalShear { value, mean, ci, plateau }) => {
            println!("optimum: {axis} = {value} (mean {mean:.4} ± {ci:.4})");
            if plateau.len() > 1 {
                println!("level with the optimum within noise: {plateau:?}");
            }
        }
        Err(Error::InsufficientRows { found, .. }) => {
            eprintln!("warning: only {found} usable rows, no optimum reported");
        }
        Err(e) => return Err(e),
    }
    Ok(())
}

fn field(a: FieldArgs) -> chemoshear::Result<()> {
    let params = load_params(&a.params)?;
    let density = build_target_density(&params);
    let (c, report) = solve_chemical_with(&density, &params, &SolverOptions::default())?;
    let norms = homogenization_norms(&c);
    println!("{params}");
    println!(
        "iterations = {}  relative residual = {:.3e}  A·h = {:.3}",
        report.iterations, report.relative_residual, report.peclet
    );
    println!(
        "mass: sum n = {:.12}  sum c = {:.12}",
        density.integral(),
        c.integral()
    );
    println!(
        "sup c = {:.6e}  sup remainder = {:.6e}  sup d/dy remainder = {:.6e}",
        c.max(),
        norms.sup_rem,
        norms.sup_dy_rem
    );
    if report.positivity.negative_cells > 0 {
        eprintln!(
            "warning: {} negative cells (min {:.3e})",
            report.positivity.negative_cells, report.positivity.min_value
        );
    }
    let out = if a.density { &density } else { &c };
    if let Some(path) = &a.binary {
        out.save_binary(path)?;
    }
    if let Some(path) = &a.csv {
        out.save_csv(path)?;
    }
    Ok(())
}

fn effective(a: EffectiveArgs) -> chemoshear::Result<()> {
    let params = load_params(&a.params)?;
    let m = chemoshear::effective::cut_length(&params);
    let starts = a
        .starts
        .unwrap_or_else(|| (1..=5).map(|k| k as f64 * m / 6.0).collect());
    let rows = effective_1d_table(&params, &starts, a.run.runs, a.run.seed, workers(&a.params))?;
    println!("{params}");
    println!("{:>10} {:>10} {:>14} {:>14} {:>14} {:>10}", "s0", "y0", "closed form", "ODE", "MC", "stderr");
    for r in &rows {
        println!(
            "{:>10.4} {:>10.4} {:>14.4} {:>14.4} {:>14.4} {:>10.4}",
            r.s0, r.y0, r.closed_form, r.ode, r.mc.mean, r.mc.stderr
        );
    }
    if let Some(path) = &a.output {
        emit_effective_csv(&rows, &params, path, VERSION)?;
    }
    Ok(())
}

fn deterministic(a: DeterministicArgs) -> chemoshear::Result<()> {
    let base = load_params(&a.params)?;
    let rates = a
        .rates_per_s
        .unwrap_or_else(|| vec![base.shear_rate_per_second()]);
    let mut sink = match &a.output {
        Some(path) => {
            let mut comments = vec![format!("chemoshear {VERSION}")];
            comments.extend(base.to_config_lines().into_iter().map(|l| l.trim_start_matches("# ").to_string()));
            comments.push(format!("spacing = {}", a.spacing));
            comments.push(format!("horizon = {}", a.horizon));
            Some(CsvSink::create(
                path,
                &comments,
                &["shear_rate_per_s", "A", "n_agents", "n_hits", "fraction"],
            )?)
        }
        None => None,
    };
    for rate in rates {
        let mut params = base.clone();
        params.set_shear_rate_per_second(rate);
        params.check()?;
        let sampler = VelocitySampler::build(&params)?;
        let LineSample { n_agents, n_hits } =
            success_fraction_line_with(&params, &sampler, a.spacing, a.horizon, workers(&a.params))?;
        let fraction = n_hits as f64 / n_agents as f64;
        println!("rate = {rate} s^-1  A = {}  hits = {n_hits}/{n_agents}  fraction = {fraction:.4}", params.amplitude);
        if let Some(sink) = sink.as_mut() {
            sink.record(&[fmt(rate), fmt(params.amplitude), n_agents.to_string(), n_hits.to_string(), fmt(fraction)])?;
        }
    }
    Ok(())
}

fn converge(a: ConvergeArgs, chemotaxis: bool) -> chemoshear::Result<()> {
    let params = load_params(&a.params)?;
    let table = if chemotaxis {
        theorem3_convergence_study(&params, &a.amplitudes, a.run.runs, a.run.seed, workers(&a.params))?
    } else {
        theorem1_convergence_study(&params, &a.amplitudes, a.run.runs, a.run.seed, workers(&a.params))?
    };
    println!("{params}");
    if let Some(first) = table.rows.first() {
        println!("1D reference time = {:.4}", first.reference);
    }
    for r in &table.rows {
        match (&r.stats, &r.failure) {
            (Some(s), _) => print_stats(&format!("A = {:<10} gap = {:>+10.4}  ", r.amplitude, s.mean - r.reference), s),
            (None, Some(f)) => println!("A = {:<10} failed: {f}", r.amplitude),
            (None, None) => {}
        }
    }
    if !table.non_increasing_within_noise() {
        eprintln!("warning: means are not non-increasing within noise");
    }
    if let Some(path) = &a.output {
        emit_convergence_csv(&table, path, VERSION)?;
    }
    Ok(())
}
