//! Command-line front end for the hybrid regression workbench.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime
//! failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{
    cmd_catalog, cmd_datagen, cmd_eval, cmd_expressibility, cmd_noise, cmd_sweep, cmd_train,
    parse_grid, parse_levels, parse_templates, with_jobs, SweepMode,
};
use config::ExperimentConfig;
use hqnn_core::error::Error;
use hqnn_core::noise::NoiseMode;

#[derive(Parser)]
#[command(
    name = "hqnn",
    about = "Hybrid quantum-classical regression experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic device CSV.
    Datagen {
        /// Number of records.
        #[arg(long)]
        n: usize,
        /// Generator seed.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model from a config file and write model + metrics artifacts.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (0 = library default).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Evaluate a saved model on a CSV dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Run the single-template (19 x 5, strict) or mixed-pair (19 x 19, dual)
    /// circuit sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// "single" or "mixed".
        #[arg(long)]
        mode: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of split repetitions per row.
        #[arg(long)]
        num_splits: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Estimate circuit expressibility over templates and levels.
    Expressibility {
        /// Template selector: "all", "1-19", or "1,5,13".
        #[arg(long, default_value = "all")]
        templates: String,
        /// Level selector: "1-3" or "2".
        #[arg(long, default_value = "1")]
        levels: String,
        #[arg(long, default_value_t = 5000)]
        pairs: usize,
        #[arg(long, default_value_t = 75)]
        bins: usize,
        #[arg(long, default_value_t = 1234)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Evaluate (or retrain) a saved model under gate-level depolarizing
    /// noise over a (p1, p2) grid.
    Noise {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// "evaluate" or "retrain".
        #[arg(long, default_value = "evaluate")]
        mode: String,
        /// Grid "p1,p2;p1,p2;..." (defaults to the built-in four-point grid).
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Write the template catalog CSV.
    Catalog {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn load_config(path: &std::path::Path, seed: Option<u64>) -> Result<ExperimentConfig, Error> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        config.override_seed(seed);
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Datagen { n, seed, out } => cmd_datagen(n, seed, &out),
        Command::Train {
            config,
            seed,
            out,
            jobs,
        } => {
            let config = load_config(&config, seed)?;
            with_jobs(jobs, move || cmd_train(&config, &out))?
        }
        Command::Eval {
            model,
            data,
            out,
            jobs,
        } => with_jobs(jobs, move || cmd_eval(&model, &data, &out))?,
        Command::Sweep {
            config,
            mode,
            seed,
            num_splits,
            out,
            jobs,
        } => {
            let mut config = load_config(&config, seed)?;
            if let Some(n) = num_splits {
                if n == 0 {
                    return Err(Error::Config("num_splits must be positive".into()));
                }
                config.num_splits = n;
            }
            let mode = match mode.as_str() {
                "single" => SweepMode::Single,
                "mixed" => SweepMode::Mixed,
                other => {
                    return Err(Error::Config(format!(
                        "sweep mode '{other}' is not 'single' or 'mixed'"
                    )))
                }
            };
            with_jobs(jobs, move || cmd_sweep(&config, mode, &out))?
        }
        Command::Expressibility {
            templates,
            levels,
            pairs,
            bins,
            seed,
            out,
            jobs,
        } => {
            let templates = parse_templates(&templates)?;
            let levels = parse_levels(&levels)?;
            with_jobs(jobs, move || {
                cmd_expressibility(&templates, &levels, pairs, bins, seed, &out)
            })?
        }
        Command::Noise {
            config,
            model,
            mode,
            grid,
            seed,
            out,
            jobs,
        } => {
            let config = load_config(&config, seed)?;
            let mode = match mode.as_str() {
                "evaluate" => NoiseMode::Evaluate,
                "retrain" => NoiseMode::Retrain,
                other => {
                    return Err(Error::Config(format!(
                        "noise mode '{other}' is not 'evaluate' or 'retrain'"
                    )))
                }
            };
            let grid = grid.as_deref().map(parse_grid).transpose()?;
            with_jobs(jobs, move || cmd_noise(&config, &model, mode, grid, &out))?
        }
        Command::Catalog { out } => cmd_catalog(&out),
    }
}

fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Config(_) => 2,
        Error::Parse { .. } | Error::Io { .. } => 3,
        Error::Contract(_) | Error::Usage(_) | Error::DegenerateScale(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
