//! TOML run configuration.
//!
//! Every dimensioned value is a string with a unit suffix; dimensionless
//! values (g-factors, `q_z`, `c`, counts) are plain numbers. Missing keys
//! fall back to the reference NV-center run.

use std::path::PathBuf;

use clap::ValueEnum;
use nvhf_core::bayes::{GaussianKnowledge, SchedulerConfig};
use nvhf_core::circuit::ErrorModel;
use nvhf_core::evolution::DissipationParams;
use nvhf_core::protocol::{RunConfig, Sampling};
use nvhf_core::spin_system::{eta, SystemParams};
use serde::{Deserialize, Serialize};

use crate::units::{Dimension, Quantity};
use crate::CliError;

pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_EPSILON_RAD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    #[default]
    #[serde(alias = "ideal")]
    None,
    Rotation,
    Decoherence,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_perp: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_z: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std: Option<Quantity>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_std: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_n: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rabi: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finite_pulses: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<Sampling>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_min: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_cap: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_tau: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_max: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorModelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<ErrorKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t1: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2: Option<Quantity>,
}

/// Parsed configuration document; `None` means "use the default".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub prior: PriorSection,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub scheduler: SchedulerSection,
    #[serde(default)]
    pub error_model: ErrorModelSection,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub run: RunConfig,
    pub trials: usize,
    pub format: Format,
    pub output_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let base = RunConfig::nv_default(ErrorModel::Ideal).map_err(CliError::from_core)?;

        let s = &self.system;
        let system = SystemParams {
            a: get(&s.a, "system.a", Dimension::Frequency, "MHz", base.system.a)?,
            a_perp: get(&s.a_perp, "system.a_perp", Dimension::Frequency, "MHz", base.system.a_perp)?,
            d: get(&s.d, "system.d", Dimension::Frequency, "MHz", base.system.d)?,
            b: get(&s.b, "system.b", Dimension::Field, "T", base.system.b)?,
            g_e: s.g_e.unwrap_or(base.system.g_e),
            g_n: s.g_n.unwrap_or(base.system.g_n),
            q_z: s.q_z.unwrap_or(base.system.q_z),
        };
        system.validate().map_err(CliError::from_core)?;

        let prior = GaussianKnowledge::new(
            get(&self.prior.mean, "prior.mean", Dimension::Frequency, "MHz", base.prior.mean)?,
            get(&self.prior.std, "prior.std", Dimension::Frequency, "MHz", base.prior.std)?,
        )
        .map_err(CliError::from_core)?;

        let p = &self.protocol;
        let n = p.shots.unwrap_or(base.n);
        if n == 0 {
            return Err(CliError::Config("protocol.shots must be positive".into()));
        }
        let tau_n = get(&p.tau_n, "protocol.tau_n", Dimension::Time, "us", base.tau_n)?;

        let sc = &self.scheduler;
        let eta_squared = eta(&system).map_err(CliError::from_core)?.powi(2);
        let scheduler = SchedulerConfig {
            c: sc.c.unwrap_or(base.scheduler.c),
            zeta: 1.0 / (n as f64).sqrt(),
            tau_cap: get_opt(&sc.tau_cap, "scheduler.tau_cap", Dimension::Time, "us")?,
            tau_min: get(&sc.tau_min, "scheduler.tau_min", Dimension::Time, "us", tau_n)?,
            m_max: sc.m_max.unwrap_or(base.scheduler.m_max),
            first_tau: get_opt(&sc.first_tau, "scheduler.first_tau", Dimension::Time, "us")?,
            threshold: sc.threshold.unwrap_or(base.scheduler.threshold),
            eta_squared,
        };
        scheduler.validate().map_err(CliError::from_core)?;

        let run = RunConfig {
            system,
            prior,
            n,
            k_max: p.k_max.unwrap_or(base.k_max),
            target_std: get(&p.target_std, "protocol.target_std", Dimension::Frequency, "MHz", base.target_std)?,
            error_model: self.error_model()?,
            scheduler,
            tau_n,
            rabi_khz: get(&p.rabi, "protocol.rabi", Dimension::Frequency, "kHz", base.rabi_khz)?,
            use_finite_pulses: p.finite_pulses.unwrap_or(base.use_finite_pulses),
            sampling: p.sampling.unwrap_or(base.sampling),
            seed: self.seed.unwrap_or(base.seed),
        };
        run.validate().map_err(CliError::from_core)?;

        let trials = self.trials.unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(CliError::Config("trials must be positive".into()));
        }
        Ok(Resolved {
            run,
            trials,
            format: self.format.unwrap_or_default(),
            output_dir: self.output_dir.clone(),
        })
    }

    fn error_model(&self) -> Result<ErrorModel, CliError> {
        let e = &self.error_model;
        let defaults = DissipationParams::nv_room_temperature();
        Ok(match e.kind.unwrap_or_default() {
            ErrorKind::None => ErrorModel::Ideal,
            ErrorKind::Rotation => ErrorModel::RotationError {
                epsilon: get(&e.epsilon, "error_model.epsilon", Dimension::Angle, "rad", DEFAULT_EPSILON_RAD)?,
            },
            ErrorKind::Decoherence => ErrorModel::Decoherence(DissipationParams {
                t1: get(&e.t1, "error_model.t1", Dimension::Time, "us", defaults.t1)?,
                t2: get(&e.t2, "error_model.t2", Dimension::Time, "us", defaults.t2)?,
            }),
        })
    }
}

impl Resolved {
    /// Canonical document that resolves back to exactly these settings; the
    /// output location is not part of it.
    pub fn echo(&self) -> ConfigFile {
        let r = &self.run;
        let q = Quantity::new;
        let sc = &r.scheduler;
        let error_model = match r.error_model {
            ErrorModel::Ideal => ErrorModelSection { kind: Some(ErrorKind::None), ..Default::default() },
            ErrorModel::RotationError { epsilon } => ErrorModelSection {
                kind: Some(ErrorKind::Rotation),
                epsilon: Some(q(epsilon, "rad")),
                ..Default::default()
            },
            ErrorModel::Decoherence(d) => ErrorModelSection {
                kind: Some(ErrorKind::Decoherence),
                t1: Some(q(d.t1, "us")),
                t2: Some(q(d.t2, "us")),
                ..Default::default()
            },
        };
        ConfigFile {
            trials: Some(self.trials),
            seed: Some(r.seed),
            format: Some(self.format),
            output_dir: None,
            system: SystemSection {
                a: Some(q(r.system.a, "MHz")),
                a_perp: Some(q(r.system.a_perp, "MHz")),
                d: Some(q(r.system.d, "MHz")),
                b: Some(q(r.system.b, "T")),
                g_e: Some(r.system.g_e),
                g_n: Some(r.system.g_n),
                q_z: Some(r.system.q_z),
            },
            prior: PriorSection {
                mean: Some(q(r.prior.mean, "MHz")),
                std: Some(q(r.prior.std, "MHz")),
            },
            protocol: ProtocolSection {
                shots: Some(r.n),
                k_max: Some(r.k_max),
                target_std: Some(q(r.target_std, "MHz")),
                tau_n: Some(q(r.tau_n, "us")),
                rabi: Some(q(r.rabi_khz, "kHz")),
                finite_pulses: Some(r.use_finite_pulses),
                sampling: Some(r.sampling),
            },
            scheduler: SchedulerSection {
                c: Some(sc.c),
                threshold: Some(sc.threshold),
                tau_min: Some(q(sc.tau_min, "us")),
                tau_cap: sc.tau_cap.map(|t| q(t, "us")),
                first_tau: sc.first_tau.map(|t| q(t, "us")),
                m_max: Some(sc.m_max),
            },
            error_model,
        }
    }
}

fn get(field: &Option<Quantity>, key: &str, dim: Dimension, unit: &str, default: f64) -> Result<f64, CliError> {
    Ok(get_opt(field, key, dim, unit)?.unwrap_or(default))
}

fn get_opt(field: &Option<Quantity>, key: &str, dim: Dimension, unit: &str) -> Result<Option<f64>, CliError> {
    field
        .as_ref()
        .map(|q| q.to(dim, unit).map_err(|e| CliError::Config(format!("{key}: {e}"))))
        .transpose()
}
