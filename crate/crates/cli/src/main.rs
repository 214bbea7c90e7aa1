//! `softcon` command line: run inverse-problem experiments from a JSON
//! configuration or a named preset, and emit cost-surface grids for
//! external plotting.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use softcon_cli::config::parse_config;
use softcon_cli::output::{contour_csv, write_file, GridSpec};
use softcon_cli::presets::{preset, PRESET_NAMES};
use softcon_cli::runner::{execute, resolve_output_dir, write_artifacts, RunResult};
use softcon_cli::CliError;
use softcon_core::model::SyntheticModel;
use softcon_core::stats::Vector;

#[derive(Parser)]
#[command(name = "softcon", version, about = "Constrained Bayesian inverse problems")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the data-misfit cost on a parameter grid and write it as CSV.
    Contour(ContourArgs),
    /// List the available preset names.
    Presets,
}

#[derive(Args, Default)]
struct RunArgs {
    /// JSON run configuration file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named experiment preset.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Override the seed from the config or preset.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Directory for result and trace files.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Write the full ensemble to CSV at every iteration.
    #[arg(long)]
    snapshot_ensembles: bool,
    /// Perturb observations with fresh noise draws in each Kalman update.
    #[arg(long = "perturbed-obs")]
    perturbed_obs: bool,
}

#[derive(Args)]
struct ContourArgs {
    /// Grid lower corner, as `THETA1,THETA2`.
    #[arg(long, value_name = "T1,T2", default_value = "-3,-3", value_parser = parse_pair, allow_hyphen_values = true)]
    min: (f64, f64),
    /// Grid upper corner, as `THETA1,THETA2`.
    #[arg(long, value_name = "T1,T2", default_value = "3,3", value_parser = parse_pair, allow_hyphen_values = true)]
    max: (f64, f64),
    /// Grid points per axis, as `N1,N2`.
    #[arg(long, value_name = "N1,N2", default_value = "121,121", value_parser = parse_steps)]
    steps: (usize, usize),
    /// Observed output the cost is measured against.
    #[arg(long, value_name = "Y", default_value_t = -1.0, allow_hyphen_values = true)]
    observed: f64,
    /// Directory for the emitted CSV.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// File-name stem of the emitted CSV.
    #[arg(long, default_value = "contour")]
    label: String,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma-separated values, got {s:?}"));
    }
    let a = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let b = parts[1].trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, b))
}

fn parse_steps(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = parse_pair(s)?;
    if a < 1.0 || b < 1.0 || a.fract() != 0.0 || b.fract() != 0.0 {
        return Err(format!("expected two positive integers, got {s:?}"));
    }
    Ok((a as usize, b as usize))
}

fn run_configs(args: &RunArgs) -> Result<Vec<RunResult>, CliError> {
    let mut configs = match (&args.config, &args.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)?;
            vec![parse_config(&text)?]
        }
        (None, Some(name)) => preset(name)?,
        (None, None) | (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "pass exactly one of --config or --preset".into(),
            ))
        }
    };
    for config in &mut configs {
        if let Some(seed) = args.seed {
            config.seed = seed;
        }
        if args.snapshot_ensembles {
            config.snapshot_ensembles = true;
        }
        if args.perturbed_obs {
            config.perturbed_observations = true;
        }
        config.validate()?;
    }
    let mut results = Vec::new();
    for config in &configs {
        let output = execute(config)?;
        let dir = resolve_output_dir(config, args.out.as_deref());
        let written = write_artifacts(&output, &dir)?;
        let result = output.result;
        println!(
            "{}: theta* = [{}], y* = [{}], group {}, {} iteration(s){} ({:.3}s)",
            config.label(),
            join(&result.estimate.theta),
            join(&result.estimate.output),
            result.estimate.group,
            result.iterations,
            if result.converged { ", converged" } else { "" },
            result.wall_clock_secs.unwrap_or(0.0),
        );
        for path in &written {
            println!("  wrote {}", path.display());
        }
        results.push(result);
    }
    Ok(results)
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.4}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn run_contour(args: &ContourArgs) -> Result<(), CliError> {
    let grid = GridSpec {
        min: args.min,
        max: args.max,
        steps: args.steps,
    };
    let model = SyntheticModel;
    let h = SyntheticModel::observation_operator();
    let observed = Vector::new(vec![args.observed]);
    let csv = contour_csv(&model, &h, &observed, &grid)?;
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let name = format!("{}.csv", args.label);
    write_file(&dir, &name, &csv)?;
    println!("wrote {}", dir.join(name).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Some(Command::Contour(args)) => run_contour(args),
        Some(Command::Presets) => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            Ok(())
        }
        None => run_configs(&cli.run).map(|_| ()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
