//! Thin command-line front end over the fringeless library.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use fringeless::cli::{self, Experiment, OutputFormat, RunConfig};

#[derive(Parser)]
#[command(
    name = "fringeless",
    about = "Homodyne interferometer simulation and absolute sub-wavelength \
             piezo calibration from phase-modulation harmonics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Flat key = value configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base RNG seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep worker threads; overrides the config. 0 = automatic.
    #[arg(long)]
    workers: Option<usize>,
    /// Artifact selection: json | csv | both.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Voltage sweep at both lock points and harmonic-ratio calibration.
    Calibrate(CommonArgs),
    /// Calibration plus a reduced-range sweep for the detection limit.
    Sensitivity(CommonArgs),
    /// Quantum-limit arithmetic against a measured sensitivity.
    SqlCompare(CommonArgs),
    /// Measure the harmonic SNRs of a recorded trace file.
    AnalyzeTrace {
        #[command(flatten)]
        common: CommonArgs,
        /// Trace file; overrides trace_path from the config.
        trace: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::default().filter_or("FRINGELESS_LOG", "warn"),
    )
    .init();

    let cli = Cli::parse();
    let (experiment, common, trace_arg) = match &cli.command {
        Command::Calibrate(c) => (Experiment::Calibrate, c.clone(), None),
        Command::Sensitivity(c) => (Experiment::Sensitivity, c.clone(), None),
        Command::SqlCompare(c) => (Experiment::SqlCompare, c.clone(), None),
        Command::AnalyzeTrace { common, trace } => {
            (Experiment::AnalyzeTrace, common.clone(), trace.clone())
        }
    };

    match run(experiment, common, trace_arg) {
        Ok(artifacts) => {
            if let Some(p) = &artifacts.report_json {
                println!("report: {}", p.display());
            }
            if let Some(p) = &artifacts.sweep_csv {
                println!("sweep data: {}", p.display());
            }
            if let Some(p) = &artifacts.sensitivity_csv {
                println!("sensitivity data: {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}

fn run(
    experiment: Experiment,
    common: CommonArgs,
    trace_arg: Option<PathBuf>,
) -> fringeless::Result<cli::ExperimentArtifacts> {
    let mut config = match &common.config {
        Some(path) => cli::load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(cfg_exp) = config.experiment {
        if cfg_exp != experiment {
            return Err(fringeless::Error::Config(format!(
                "config selects experiment '{}' but the verb is '{}'",
                cfg_exp.name(),
                experiment.name()
            )));
        }
    }
    config.experiment = Some(experiment);
    if let Some(seed) = common.seed {
        config.base_seed = seed;
        config.plan.rng_seed = seed;
    }
    if let Some(out) = common.out {
        config.out_dir = out;
    }
    if let Some(workers) = common.workers {
        config.workers = workers;
    }
    if let Some(format) = common.format {
        config.format = OutputFormat::from_str(&format)?;
    }
    if let Some(trace) = trace_arg {
        config.trace_path = Some(trace);
    }
    cli::run_experiment(&config)
}
