use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use noisesync::{LandauStuartParams, LaserParams, Model};
use noisesync_cli::config::{Experiment, ExperimentConfig, FloquetExp};
use noisesync_cli::experiments::{self, RunFlags, RunReport};
use noisesync_cli::output::output_root;
use noisesync_cli::{presets, CliError, OUTPUT_ROOT_ENV};

#[derive(Parser)]
#[command(name = "noisesync", version, about = "Noise synchronisation experiments for forced limit-cycle oscillators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Laser,
    LandauStuart,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file, a preset, or `floquet` with flags.
    Run {
        /// Config file (TOML or JSON), or `floquet`.
        target: Option<String>,
        #[arg(long, conflicts_with = "target")]
        preset: Option<String>,
        /// Model for `run floquet`.
        #[arg(long, value_enum, default_value = "laser")]
        model: ModelKind,
        #[arg(long, default_value_t = 1.0)]
        j: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        /// Output root (overrides the environment variable).
        #[arg(long, env = OUTPUT_ROOT_ENV)]
        output_root: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Stop a sweep after this many newly computed jobs.
        #[arg(long)]
        stop_after_jobs: Option<usize>,
    },
    /// Continue an interrupted sweep from its checkpoint.
    Resume {
        checkpoint: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        stop_after_jobs: Option<usize>,
    },
    /// List the shipped presets, or print one as TOML.
    ListPresets {
        #[arg(long)]
        show: Option<String>,
    },
    /// Parse and check a config without running it.
    ValidateConfig { path: PathBuf },
}

fn init_workers(n: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Config("workers: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn print_report(r: &RunReport) {
    for l in &r.lines {
        println!("{l}");
    }
    println!("artifacts: {}", r.dir.display());
}

fn floquet_config(model: ModelKind, j: f64, alpha: f64) -> ExperimentConfig {
    let model: Model = match model {
        ModelKind::Laser => LaserParams::new(j, alpha).into(),
        ModelKind::LandauStuart => LandauStuartParams::new(j, alpha).into(),
    };
    ExperimentConfig {
        name: format!("floquet-{}-j{j}", model.name()),
        seed: 0,
        workers: None,
        output_dir: None,
        experiment: Experiment::Floquet(FloquetExp { model, numeric: true }),
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            target,
            preset,
            model,
            j,
            alpha,
            output_root: root,
            workers,
            stop_after_jobs,
        } => {
            let cfg = match (target.as_deref(), preset) {
                (_, Some(p)) => presets::find(&p).ok_or_else(|| CliError::Config(format!("unknown preset `{p}`")))?,
                (Some("floquet"), None) => floquet_config(model, j, alpha),
                (Some(path), None) => ExperimentConfig::load(path.as_ref())?,
                (None, None) => return Err(CliError::Config("give a config file, `floquet` or --preset".into())),
            };
            cfg.validate()?;
            init_workers(workers.or(cfg.workers))?;
            let root = root.unwrap_or_else(output_root);
            let report = experiments::run(&cfg, &root, &RunFlags { stop_after_jobs })?;
            print_report(&report);
        }
        Command::Resume {
            checkpoint,
            workers,
            stop_after_jobs,
        } => {
            init_workers(workers)?;
            if !checkpoint.exists() {
                return Err(CliError::Checkpoint(format!("{}: no such checkpoint", checkpoint.display())));
            }
            let report = experiments::resume(&checkpoint, &RunFlags { stop_after_jobs })?;
            print_report(&report);
        }
        Command::ListPresets { show } => match show {
            Some(name) => {
                let cfg = presets::find(&name).ok_or_else(|| CliError::Config(format!("unknown preset `{name}`")))?;
                print!("{}", cfg.to_toml());
            }
            None => {
                for p in presets::all() {
                    println!("{:<10} {}", p.name, p.description);
                }
            }
        },
        Command::ValidateConfig { path } => {
            let cfg = ExperimentConfig::load(&path)?;
            println!("ok: {} ({}), config hash {}", cfg.name, cfg.experiment.kind(), cfg.numeric_hash());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
