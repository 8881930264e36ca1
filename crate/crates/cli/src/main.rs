use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nvhf_cli::config::{ErrorKind, Format};
use nvhf_cli::{figure, load_config, load_file, run, CliError, Overrides};

/// Adaptive Bayesian estimation of the NV-center hyperfine coupling.
#[derive(Parser)]
#[command(name = "nvhf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble and write per-step traces plus a summary.
    Run {
        #[command(flatten)]
        common: Common,
        /// Override the error model of the configuration.
        #[arg(long, value_enum)]
        error_model: Option<ErrorKind>,
    },
    /// Write normalized precision curves for several error models.
    Figure {
        #[command(flatten)]
        common: Common,
        /// Error models to simulate, in output order.
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ErrorKind::None, ErrorKind::Rotation, ErrorKind::Decoherence])]
        models: Vec<ErrorKind>,
    },
    /// Print the fully resolved configuration as TOML.
    Config {
        /// TOML configuration; defaults apply to missing keys.
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults apply to missing keys.
    config: Option<PathBuf>,
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Common {
    fn overrides(&self, error_model: Option<ErrorKind>) -> Overrides {
        Overrides {
            seed: self.seed,
            trials: self.trials,
            error_model,
            output: self.output.clone(),
            format: self.format,
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { common, error_model } => {
            let resolved = load_config(common.config.as_deref(), &common.overrides(error_model))?;
            for path in run(&resolved)? {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Figure { common, models } => {
            let file = load_file(common.config.as_deref(), &common.overrides(None))?;
            let path = figure(&file, &models)?;
            eprintln!("wrote {}", path.display());
        }
        Command::Config { config } => {
            let resolved = load_config(config.as_deref(), &Overrides::default())?;
            print!("{}", resolved.echo().to_toml());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nvhf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
