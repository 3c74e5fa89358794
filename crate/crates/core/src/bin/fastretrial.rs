use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use fastretrial::config::{sig9, simulate};
use fastretrial::experiments::{run_preset, Preset, DEFAULT_SEED};
use fastretrial::stability::{check_stability, max_stable_n1, min_stable_l1, optimal_z};
use fastretrial::{Error, Result};

/// Fast-retrial random access: simulation, figure presets and stability analysis.
#[derive(Debug, Parser)]
#[command(name = "fastretrial", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario; writes trace.csv and summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reproduce a figure preset (fig3a, fig3b, fig4, fig5) as CSV.
    Experiment {
        preset: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Closed-form stability report as JSON.
    Analyze {
        #[arg(long)]
        n1: usize,
        #[arg(long)]
        l1: u32,
        #[arg(long)]
        lambda: f64,
        /// Rate cap for the device-count bounds; defaults to --lambda.
        #[arg(long)]
        lambda_max: Option<f64>,
    },
}

fn analyze(n1: usize, l1: u32, lambda: f64, lambda_max: Option<f64>) -> Result<serde_json::Value> {
    if n1 < 1 {
        return Err(Error::InvalidParameter {
            name: "n1",
            reason: "at least one device is required".into(),
        });
    }
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: format!("{lambda} is not in [0, 1)"),
        });
    }
    let report = check_stability(&vec![lambda; n1], l1)?;
    let min_l1 = min_stable_l1(lambda, n1)?;
    let lambda_max = lambda_max.unwrap_or(lambda);
    if !(0.0..=1.0).contains(&lambda_max) {
        return Err(Error::InvalidParameter {
            name: "lambda_max",
            reason: format!("{lambda_max} is not in [0, 1]"),
        });
    }
    // unbounded when nobody transmits; undefined for a single preamble
    let bound = if l1 >= 2 && lambda_max > 0.0 {
        Some(max_stable_n1(lambda_max, l1)?)
    } else {
        None
    };
    let optimum = if n1 >= 2 {
        Some(optimal_z(lambda * n1 as f64, n1)?)
    } else {
        None
    };
    Ok(json!({
        "n1": n1,
        "l1": l1,
        "lambda": sig9(lambda),
        "lambda_max": sig9(lambda_max),
        "stable": report.stable,
        "full_load_success": sig9(report.full_load_success),
        "margin": sig9(report.margin),
        "min_stable_l1": min_l1,
        "n1_bound_exact": bound.map(|b| b.exact),
        "n1_bound_exponential": bound.map(|b| sig9(b.exponential)),
        "z_star": optimum.map(|o| sig9(o.z)),
        "l1_star": optimum.map(|o| sig9(o.l1)),
    }))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Simulate { config, out } => {
            let output = simulate(&config, &out)?;
            eprintln!(
                "wrote {} and {}",
                output.trace_path.display(),
                output.summary_path.display()
            );
        }
        Command::Experiment { preset, out, seed } => {
            let preset: Preset = preset.parse()?;
            let path = run_preset(preset, &out, seed)?;
            eprintln!("wrote {}", path.display());
        }
        Command::Analyze {
            n1,
            l1,
            lambda,
            lambda_max,
        } => {
            let report = analyze(n1, l1, lambda, lambda_max)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
