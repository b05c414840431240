//! Command-line harness: `pretrain` the models, `run` the policy grid,
//! `dump-surface` the learned gaze-reward model.
//!
//! Exit codes: 0 success, 2 invalid configuration or arguments, 3 the
//! grid ran but one or more cells failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gazetrack::harness::{
    dump_surface, format_summary, load_models, pretrain, run_experiment, ExperimentConfig,
    RunOptions, SurfaceOptions,
};
use gazetrack::Error;

#[derive(Parser)]
#[command(
    name = "gazetrack",
    about = "Simultaneous object tracking and gaze control on synthetic video",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the glimpse feature model, the identity fusion model, and
    /// its readout, writing them to the configured model files.
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        /// Training seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the policy-comparison grid and write CSV tables.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for result tables.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Replace the configured base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Restrict the grid to one policy.
        #[arg(long)]
        policy: Option<String>,
        /// Restrict the grid to one target class.
        #[arg(long)]
        glyph: Option<usize>,
    },
    /// Track one sequence with the Bayesian-optimization policy and
    /// export its posterior reward surface as CSV and PGM.
    DumpSurface {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "surface")]
        out: PathBuf,
        /// Replace the configured base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Target class of the traced sequence.
        #[arg(long, default_value_t = 0)]
        glyph: usize,
        /// Repetition index of the traced sequence.
        #[arg(long, default_value_t = 0)]
        rep: usize,
        /// Grid points per axis.
        #[arg(long, default_value_t = 64)]
        resolution: usize,
    },
}

fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::ConfigInvalid(_) | Error::BadFile { .. } | Error::Io(_) => 2,
        _ => 3,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Pretrain { config, seed } => {
            let config = ExperimentConfig::load(&config)?;
            let models = pretrain(&config, seed)?;
            println!(
                "wrote {} ({}x{}), {} ({} factors), {} ({} classes)",
                config.models.rbm_path().display(),
                models.rbm.n_visible,
                models.rbm.n_hidden,
                config.models.mfrbm_path().display(),
                models.mfrbm.factors,
                config.models.readout_path().display(),
                models.readout.classes,
            );
            Ok(0)
        }
        Command::Run { config, out, seed, policy, glyph } => {
            let config = ExperimentConfig::load(&config)?;
            let models = load_models(&config)?;
            let options = RunOptions { out_dir: out, policy, glyph, base_seed: seed };
            let report = run_experiment(&config, &models, &options)?;
            print!("{}", format_summary(&config, &report));
            for path in &report.files_written {
                println!("wrote {}", path.display());
            }
            Ok(report.exit_code() as u8)
        }
        Command::DumpSurface { config, out, seed, glyph, rep, resolution } => {
            let config = ExperimentConfig::load(&config)?;
            let models = load_models(&config)?;
            let options = SurfaceOptions {
                out_dir: out,
                glyph,
                seed_index: rep,
                resolution,
                base_seed: seed,
            };
            let (csv, pgm) = dump_surface(&config, &models, &options)?;
            println!("wrote {}", csv.display());
            println!("wrote {}", pgm.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
