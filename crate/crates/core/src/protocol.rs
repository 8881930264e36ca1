//! The adaptive K-step estimation loop, resource accounting and the
//! quantum-metrology-limit (QML) and standard-quantum-limit (SQL) references.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{
    bayes_update, check_constraints, choose_tau, knowledge_from_measurement, ConstraintReport,
    GaussianKnowledge, SchedulerConfig,
};
use crate::circuit::{
    analytic_expectation, CircuitSimulator, CircuitSpec, ErrorModel, MeasurementRecord, Visibility,
};
use crate::spin_system::{eta, SystemParams, TWO_PI};
use crate::{Error, Result};

/// How each step's `Z_k` is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// `N` simulated projective shots.
    Shots,
    /// `Z_k = Q cos(2πAτ)` exactly, keeping `ζ = 1/√N` for the update.
    Noiseless,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Physical system; `system.a` is the true coupling, seen only by the simulator.
    pub system: SystemParams,
    pub prior: GaussianKnowledge,
    /// Shots per step.
    pub n: u64,
    pub k_max: usize,
    /// Stop once `Δ_k` reaches this value (MHz); zero disables.
    pub target_std: f64,
    pub error_model: ErrorModel,
    pub scheduler: SchedulerConfig,
    /// Controlled nuclear pulse duration (μs).
    pub tau_n: f64,
    /// Nuclear Rabi frequency (kHz).
    pub rabi_khz: f64,
    pub use_finite_pulses: bool,
    pub sampling: Sampling,
    pub seed: u64,
}

impl RunConfig {
    /// True A = 3.06 MHz, prior N(3.03, 0.03²) MHz, N = 1000, c = 0.2, 1 μs
    /// pulses at 500 kHz, seven steps.
    pub fn nv_default(error_model: ErrorModel) -> Result<Self> {
        let system = SystemParams::nv15n().with_a(3.06);
        let n = 1000;
        let eta_squared = eta(&system)?.powi(2);
        let scheduler = SchedulerConfig::new(0.2, 1.0 / (n as f64).sqrt(), eta_squared)?.with_tau_min(1.0);
        Ok(RunConfig {
            system,
            prior: GaussianKnowledge::new(3.03, 0.03)?,
            n,
            k_max: 7,
            target_std: 0.0,
            error_model,
            scheduler,
            tau_n: 1.0,
            rabi_khz: 500.0,
            use_finite_pulses: false,
            sampling: Sampling::Shots,
            seed: 0,
        })
    }

    pub fn true_a(&self) -> f64 {
        self.system.a
    }

    pub fn with_seed(self, seed: u64) -> Self {
        RunConfig { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.error_model.validate()?;
        self.scheduler.validate()?;
        if !(0.1..=100.0).contains(&self.true_a()) {
            return Err(Error::InvalidParams(format!(
                "true A = {} MHz is outside 0.1–100 MHz",
                self.true_a()
            )));
        }
        if self.k_max < 1 {
            return Err(Error::InvalidParams("K_max must be at least 1".into()));
        }
        if !(self.target_std >= 0.0) {
            return Err(Error::InvalidParams("target std must be ≥ 0".into()));
        }
        let zeta = 1.0 / (self.n as f64).sqrt();
        if (self.scheduler.zeta - zeta).abs() > 1e-12 * zeta {
            return Err(Error::InvalidParams(format!(
                "scheduler ζ = {} does not match 1/√N = {zeta}",
                self.scheduler.zeta
            )));
        }
        if self.scheduler.tau_min < self.tau_n {
            return Err(Error::InvalidParams(format!(
                "τ_min = {} μs is shorter than the pulse τ_n = {} μs",
                self.scheduler.tau_min, self.tau_n
            )));
        }
        self.circuit_spec(self.tau_n + 1.0).validate()
    }

    fn circuit_spec(&self, tau_effective: f64) -> CircuitSpec {
        CircuitSpec {
            tau: tau_effective - self.tau_n,
            tau_n: self.tau_n,
            n: self.n,
            rabi_khz: self.rabi_khz,
            use_finite_pulses: self.use_finite_pulses,
        }
    }
}

/// One adaptive step. Durations in μs, frequencies in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    /// Effective phase duration `τ_k` (free segment plus pulse).
    pub tau: f64,
    pub m: u64,
    pub z: f64,
    pub plus: u64,
    pub minus: u64,
    pub visibility: f64,
    pub a_k: f64,
    pub delta_k: f64,
    /// Cumulative `N·Σ 2τ_j`.
    pub r_k: f64,
    pub delta_qml: f64,
    pub delta_sql: f64,
    /// The scheduler found no admissible `τ` and the previous one was reused.
    pub repeated_tau: bool,
    pub constraints: ConstraintReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionTrace {
    pub seed: u64,
    pub true_a: f64,
    pub n: u64,
    pub steps: Vec<StepRecord>,
}

impl PrecisionTrace {
    pub fn taus(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.tau).collect()
    }

    pub fn visibilities(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.visibility).collect()
    }

    pub fn last(&self) -> &StepRecord {
        self.steps.last().expect("a trace has at least one step")
    }

    /// `|A_k − A| / Δ_k` at step `k` (1-based).
    pub fn normalized_error(&self, k: usize) -> f64 {
        let s = &self.steps[k - 1];
        (s.a_k - self.true_a).abs() / s.delta_k
    }
}

/// `N(Σ τ_k)²` in μs².
pub fn qml_reference(n: u64, taus: &[f64]) -> f64 {
    let total: f64 = taus.iter().sum();
    n as f64 * total * total
}

/// `N τ₁ Σ τ_k` in μs².
pub fn sql_reference(n: u64, taus: &[f64]) -> f64 {
    n as f64 * taus.first().copied().unwrap_or(0.0) * taus.iter().sum::<f64>()
}

/// `N Σ (Q_k τ_k)²` in μs².
pub fn achieved_precision(n: u64, taus: &[f64], visibilities: &[f64]) -> f64 {
    assert_eq!(taus.len(), visibilities.len(), "one visibility per step");
    n as f64 * taus.iter().zip(visibilities).map(|(t, q)| (q * t).powi(2)).sum::<f64>()
}

/// Standard deviation in MHz for a precision `1/Δ²` expressed in μs² of phase
/// time: `Δ = 1/(2π√P)`.
pub fn precision_to_std_mhz(precision: f64) -> f64 {
    1.0 / (TWO_PI * precision.sqrt())
}

pub fn run_estimation(cfg: &RunConfig) -> Result<PrecisionTrace> {
    cfg.validate()?;
    let eta_squared = cfg.scheduler.eta_squared;
    let sim = CircuitSimulator::new(&cfg.system, &cfg.circuit_spec(cfg.tau_n + 1.0), &cfg.error_model)?;
    let mut outcome_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut eps_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    eps_rng.set_stream(1);

    let mut knowledge = cfg.prior;
    let mut taus = Vec::with_capacity(cfg.k_max);
    let mut steps: Vec<StepRecord> = Vec::with_capacity(cfg.k_max);
    for k in 1..=cfg.k_max {
        let (tau, m, repeated_tau) = match choose_tau(&knowledge, &cfg.scheduler, &cfg.error_model) {
            Ok(choice) => (choice.tau, choice.m, false),
            Err(Error::NoFeasibleTau(reason)) => match steps.last() {
                Some(prev) => (prev.tau, prev.m, true),
                None => return Err(Error::NoFeasibleTau(reason)),
            },
            Err(e) => return Err(e),
        };
        let spec = cfg.circuit_spec(tau);
        let q = cfg.error_model.q(tau);
        let constraints = check_constraints(&knowledge, tau, &cfg.scheduler, q);
        let record = match cfg.sampling {
            Sampling::Shots => sim.measure(&spec, &mut outcome_rng, &mut eps_rng)?,
            Sampling::Noiseless => MeasurementRecord {
                z: analytic_expectation(&cfg.system, &spec, &cfg.error_model),
                zeta: spec.zeta(),
                tau_effective: tau,
                plus: 0,
                minus: 0,
            },
        };
        let meas = knowledge_from_measurement(&record, knowledge.mean, tau, q, eta_squared)?;
        knowledge = bayes_update(&knowledge, &meas);
        taus.push(tau);

        steps.push(StepRecord {
            k,
            tau,
            m,
            z: record.z,
            plus: record.plus,
            minus: record.minus,
            visibility: q,
            a_k: knowledge.mean,
            delta_k: knowledge.std,
            r_k: 2.0 * cfg.n as f64 * taus.iter().sum::<f64>(),
            delta_qml: precision_to_std_mhz(qml_reference(cfg.n, &taus)),
            delta_sql: precision_to_std_mhz(sql_reference(cfg.n, &taus)),
            repeated_tau,
            constraints,
        });
        if cfg.target_std > 0.0 && knowledge.std <= cfg.target_std {
            break;
        }
    }
    Ok(PrecisionTrace {
        seed: cfg.seed,
        true_a: cfg.true_a(),
        n: cfg.n,
        steps,
    })
}

/// Aggregate statistics at one step index over all traces that reached it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub k: usize,
    pub trials: usize,
    pub median_tau: f64,
    pub median_delta: f64,
    pub delta_q25: f64,
    pub delta_q75: f64,
    pub median_delta_qml: f64,
    pub median_delta_sql: f64,
    /// Median over trials of `Δ_k/Δ_{k,QML}`.
    pub median_ratio_qml: f64,
    /// Median over trials of `|A_k − A|/Δ_k`.
    pub median_normalized_error: f64,
    /// Fraction of trials with `|A_k − A| ≤ 1.96·Δ_k`.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEnsemble {
    pub config: RunConfig,
    pub traces: Vec<PrecisionTrace>,
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

impl TrialEnsemble {
    pub fn max_steps(&self) -> usize {
        self.traces.iter().map(|t| t.steps.len()).max().unwrap_or(0)
    }

    pub fn step_summary(&self, k: usize) -> Option<StepSummary> {
        let reached: Vec<&PrecisionTrace> = self.traces.iter().filter(|t| t.steps.len() >= k).collect();
        if k == 0 || reached.is_empty() {
            return None;
        }
        let pick = |f: &dyn Fn(&PrecisionTrace) -> f64| reached.iter().map(|t| f(t)).collect::<Vec<_>>();
        let deltas = pick(&|t| t.steps[k - 1].delta_k);
        let errors = pick(&|t| t.normalized_error(k));
        let covered = errors.iter().filter(|&&e| e <= 1.96).count();
        Some(StepSummary {
            k,
            trials: reached.len(),
            median_tau: median(&pick(&|t| t.steps[k - 1].tau)),
            median_delta: median(&deltas),
            delta_q25: quantile(&deltas, 0.25),
            delta_q75: quantile(&deltas, 0.75),
            median_delta_qml: median(&pick(&|t| t.steps[k - 1].delta_qml)),
            median_delta_sql: median(&pick(&|t| t.steps[k - 1].delta_sql)),
            median_ratio_qml: median(&pick(&|t| t.steps[k - 1].delta_k / t.steps[k - 1].delta_qml)),
            median_normalized_error: median(&errors),
            coverage: covered as f64 / reached.len() as f64,
        })
    }

    pub fn summaries(&self) -> Vec<StepSummary> {
        (1..=self.max_steps()).filter_map(|k| self.step_summary(k)).collect()
    }

    /// Fraction of trials whose final `A_K ± 1.96Δ_K` contains the true `A`.
    pub fn final_coverage(&self) -> f64 {
        let covered = self
            .traces
            .iter()
            .filter(|t| t.normalized_error(t.steps.len()) <= 1.96)
            .count();
        covered as f64 / self.traces.len() as f64
    }

    pub fn final_deltas(&self) -> Vec<f64> {
        self.traces.iter().map(|t| t.last().delta_k).collect()
    }
}

/// Runs `trials` independent traces with seeds `cfg.seed + i` in parallel;
/// results are ordered by trial index.
pub fn run_ensemble(cfg: &RunConfig, trials: usize) -> Result<TrialEnsemble> {
    if trials == 0 {
        return Err(Error::InvalidParams("at least one trial is required".into()));
    }
    cfg.validate()?;
    let traces = (0..trials as u64)
        .into_par_iter()
        .map(|i| run_estimation(&cfg.with_seed(cfg.seed.wrapping_add(i))))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialEnsemble { config: *cfg, traces })
}
