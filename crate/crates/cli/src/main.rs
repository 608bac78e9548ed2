use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qwdm_cli::config::{explain, ExperimentConfig};
use qwdm_cli::stages;

/// Quantum-walk-driven categorical diffusion experiments.
#[derive(Parser)]
#[command(name = "qwdm", version, about)]
struct Cli {
    /// Configuration file (key = value lines); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Serial reproducibility mode: single-threaded sweeps, no wall-clock
    /// timings in manifests; reruns are byte-identical.
    #[arg(long, global = true)]
    serial: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build per-step transition kernels and KL-vs-uniform traces.
    Kernels,
    /// Sample forward trajectories for the training set.
    Forward,
    /// Train the denoiser on sampled trajectories.
    Train,
    /// Generate images from the trained checkpoint.
    Generate,
    /// Score the generated set against the training set.
    Evaluate,
    /// Run the full pipeline per (omega, repetition) and aggregate.
    Sweep,
    /// Chain kernels, forward, train, generate, and evaluate.
    RunAll,
    /// Inspect the configuration.
    Config {
        /// Print every key with its default and meaning.
        #[arg(long)]
        explain: bool,
    },
}

fn load_config(cli: &Cli) -> qwdm_cli::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.serial = cli.serial;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> qwdm_cli::Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Kernels => stages::cmd_kernels(&cfg),
        Command::Forward => stages::cmd_forward(&cfg),
        Command::Train => stages::cmd_train(&cfg),
        Command::Generate => stages::cmd_generate(&cfg),
        Command::Evaluate => stages::cmd_evaluate(&cfg),
        Command::Sweep => stages::cmd_sweep(&cfg),
        Command::RunAll => stages::run_all(&cfg),
        Command::Config { explain: expl } => {
            if *expl {
                print!("{}", explain(Some(&cfg)));
            } else {
                for (k, v) in cfg.to_map() {
                    println!("{k} = {v}");
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
