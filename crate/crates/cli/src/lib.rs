//! Batch front-end for the adaptive hyperfine-estimation simulator: unit-checked
//! TOML configuration, ensemble runs, and CSV/JSON output.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use nvhf_core::protocol::run_ensemble;
use thiserror::Error;

pub mod config;
pub mod output;
pub mod units;

use config::{ConfigFile, ErrorKind, Format, Resolved};

/// Environment variable naming the output directory used when neither the
/// command line nor the configuration sets one.
pub const OUTPUT_DIR_ENV: &str = "NVHF_OUTPUT_DIR";
pub const FALLBACK_OUTPUT_DIR: &str = "nvhf-output";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("constraint error: {0}")]
    Constraint(String),

    #[error(transparent)]
    Core(nvhf_core::Error),

    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    /// Classifies a core error raised while resolving a configuration.
    pub fn from_core(e: nvhf_core::Error) -> Self {
        match e {
            nvhf_core::Error::Constraint { .. } => CliError::Constraint(e.to_string()),
            nvhf_core::Error::InvalidParams(_) | nvhf_core::Error::DegenerateDenominator { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Core(other),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Constraint(_) => 3,
            _ => 1,
        }
    }
}

/// Command-line values that take precedence over the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub error_model: Option<ErrorKind>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

impl Overrides {
    pub fn apply(&self, file: &mut ConfigFile) {
        if let Some(seed) = self.seed {
            file.seed = Some(seed);
        }
        if let Some(trials) = self.trials {
            file.trials = Some(trials);
        }
        if let Some(kind) = self.error_model {
            file.error_model.kind = Some(kind);
        }
        if let Some(format) = self.format {
            file.format = Some(format);
        }
        if let Some(dir) = &self.output {
            file.output_dir = Some(dir.clone());
        }
    }
}

/// Reads the document at `path` (defaults when absent) and applies `overrides`.
pub fn load_file(path: Option<&Path>, overrides: &Overrides) -> Result<ConfigFile, CliError> {
    let mut file = match path {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    overrides.apply(&mut file);
    Ok(file)
}

pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<Resolved, CliError> {
    load_file(path, overrides)?.resolve()
}

/// `--output`, then the configuration, then the environment, then a fixed name.
pub fn output_dir(resolved: &Resolved) -> PathBuf {
    resolved
        .output_dir
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_DIR))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Runs the ensemble and writes `trace.{csv,json}`, `summary.json` and the
/// canonical `config.toml`. Returns the paths written.
pub fn run(resolved: &Resolved) -> Result<Vec<PathBuf>, CliError> {
    let dir = output_dir(resolved);
    let ensemble = run_ensemble(&resolved.run, resolved.trials).map_err(CliError::from_core)?;
    ensure_dir(&dir)?;

    let trace = dir.join(format!("trace.{}", resolved.format.extension()));
    output::write_trace(&output::trace_rows(&ensemble), resolved.format, create(&trace)?)?;
    let summary = dir.join("summary.json");
    output::write_json(&output::summarize(&ensemble), create(&summary)?)?;
    let config = dir.join("config.toml");
    std::fs::write(&config, resolved.echo().to_toml()).map_err(|source| CliError::Io {
        path: config.clone(),
        source,
    })?;
    Ok(vec![trace, summary, config])
}

/// Runs one ensemble per error model with otherwise identical settings and
/// writes the stacked figure table.
pub fn figure(file: &ConfigFile, models: &[ErrorKind]) -> Result<PathBuf, CliError> {
    let mut rows = Vec::new();
    let mut dir = None;
    let mut format = Format::Csv;
    for &kind in models {
        let mut f = file.clone();
        f.error_model.kind = Some(kind);
        let r = f.resolve()?;
        let ensemble = run_ensemble(&r.run, r.trials).map_err(CliError::from_core)?;
        rows.extend(output::emit_figure_data(&ensemble));
        dir = Some(output_dir(&r));
        format = r.format;
    }
    let dir = dir.ok_or_else(|| CliError::Config("no error models requested".into()))?;
    ensure_dir(&dir)?;
    let path = dir.join(format!("figure.{}", format.extension()));
    output::write_figure(&rows, format, create(&path)?)?;
    Ok(path)
}
