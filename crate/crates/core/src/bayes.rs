//! Gaussian knowledge about `A`, its update from one estimation step, and the
//! choice of the next evolution time.

use serde::{Deserialize, Serialize};

use crate::circuit::{MeasurementRecord, Visibility};
use crate::spin_system::TWO_PI;
use crate::{Error, Result};

/// Default ratio standing in for `≫`/`≪`.
pub const DEFAULT_THRESHOLD: f64 = 5.0;

/// Visibility must exceed this multiple of `η²`.
pub const VISIBILITY_FLOOR_FACTOR: f64 = 10.0;

/// Tolerance on the resonance condition, in cycles.
pub const RESONANCE_TOL: f64 = 1e-9;

/// Normal belief `N(mean, std²)` about `A` in MHz; `std = ∞` is uninformative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKnowledge {
    pub mean: f64,
    pub std: f64,
}

impl GaussianKnowledge {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !mean.is_finite() || !(std > 0.0) {
            return Err(Error::InvalidParams(format!(
                "knowledge needs finite mean and std > 0, got ({mean}, {std})"
            )));
        }
        Ok(GaussianKnowledge { mean, std })
    }

    pub fn uninformative(mean: f64) -> Self {
        GaussianKnowledge {
            mean,
            std: f64::INFINITY,
        }
    }

    /// `1/std²`, zero when uninformative.
    pub fn information(&self) -> f64 {
        1.0 / (self.std * self.std)
    }

    /// `mean/std²`.
    pub fn weighted_mean(&self) -> f64 {
        if self.std.is_finite() {
            self.mean * self.information()
        } else {
            0.0
        }
    }

    pub fn is_informative(&self) -> bool {
        self.std.is_finite()
    }
}

/// Step-time selection rule and the thresholds used to judge it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    /// Target phase dispersion `2πΔτ`.
    pub c: f64,
    /// Per-step estimator std `1/√N`.
    pub zeta: f64,
    /// Upper bound on `τ` (μs).
    pub tau_cap: Option<f64>,
    /// Lower bound on `τ` (μs); the phase duration cannot be shorter than the
    /// nuclear pulse.
    pub tau_min: f64,
    pub m_max: u64,
    /// `τ` used when the prior is uninformative (μs), snapped to resonance.
    pub first_tau: Option<f64>,
    /// Ratio standing in for `≫`/`≪`.
    pub threshold: f64,
    /// `η²` of the system, used by the visibility condition.
    pub eta_squared: f64,
}

impl SchedulerConfig {
    /// Checks `c/ζ ≥ threshold` and `6ζ/c³ ≥ threshold`.
    pub fn new(c: f64, zeta: f64, eta_squared: f64) -> Result<Self> {
        let cfg = SchedulerConfig {
            c,
            zeta,
            tau_cap: None,
            tau_min: 0.0,
            m_max: 1 << 40,
            first_tau: None,
            threshold: DEFAULT_THRESHOLD,
            eta_squared,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_tau_min(self, tau_min: f64) -> Self {
        SchedulerConfig { tau_min, ..self }
    }

    pub fn with_tau_cap(self, tau_cap: Option<f64>) -> Self {
        SchedulerConfig { tau_cap, ..self }
    }

    pub fn with_first_tau(self, first_tau: Option<f64>) -> Self {
        SchedulerConfig { first_tau, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.zeta > 0.0 && self.threshold > 0.0) {
            return Err(Error::InvalidParams(format!(
                "c = {}, ζ = {}, threshold = {} must be positive",
                self.c, self.zeta, self.threshold
            )));
        }
        if !(self.tau_min >= 0.0) || self.tau_cap.is_some_and(|cap| !(cap > 0.0)) {
            return Err(Error::InvalidParams("τ bounds must be non-negative".into()));
        }
        if self.first_tau.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidParams("first τ must be positive".into()));
        }
        if !(self.eta_squared >= 0.0) {
            return Err(Error::InvalidParams("η² must be non-negative".into()));
        }
        let c_over_zeta = self.c / self.zeta;
        let six_zeta_over_c3 = 6.0 * self.zeta / self.c.powi(3);
        if c_over_zeta < self.threshold || six_zeta_over_c3 < self.threshold {
            return Err(Error::Constraint {
                c_over_zeta,
                six_zeta_over_c3,
                threshold: self.threshold,
            });
        }
        Ok(())
    }
}

/// Selected phase duration `τ = (m + ¼)/A_{k−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauChoice {
    pub tau: f64,
    pub m: u64,
}

/// Converts `Z_k` into knowledge about `A`: mean `A_{k−1} − Z/(2πQτ)` and std
/// `ζ/(2πQτ)`, both in MHz.
pub fn knowledge_from_measurement(
    record: &MeasurementRecord,
    prior_mean: f64,
    tau: f64,
    q: f64,
    eta_squared: f64,
) -> Result<GaussianKnowledge> {
    if !(q * tau > 0.0) {
        return Err(Error::InvalidParams(format!("Q·τ = {} must be positive", q * tau)));
    }
    let floor = VISIBILITY_FLOOR_FACTOR * eta_squared;
    if q <= floor {
        return Err(Error::VisibilityUnderflow { visibility: q, floor });
    }
    let scale = TWO_PI * q * tau;
    GaussianKnowledge::new(prior_mean - record.z / scale, record.zeta / scale)
}

/// Inverse-variance fusion of two independent Gaussian beliefs.
pub fn bayes_update(prior: &GaussianKnowledge, meas: &GaussianKnowledge) -> GaussianKnowledge {
    match (prior.is_informative(), meas.is_informative()) {
        (false, _) => *meas,
        (true, false) => *prior,
        (true, true) => {
            let info = prior.information() + meas.information();
            GaussianKnowledge {
                mean: (prior.weighted_mean() + meas.weighted_mean()) / info,
                std: info.sqrt().recip(),
            }
        }
    }
}

/// Distance of `A·τ` from `m + ¼`, in cycles.
pub fn resonance_offset(a: f64, tau: f64) -> f64 {
    let x = (a * tau - 0.25).rem_euclid(1.0);
    x.min(1.0 - x)
}

fn resonant_tau(a: f64, m: u64) -> f64 {
    (m as f64 + 0.25) / a
}

/// Largest `m` with `(m + ¼)/a ≤ limit`, or `None` if even `m = 0` exceeds it.
fn largest_m_below(a: f64, limit: f64) -> Option<u64> {
    if !(limit.is_finite()) {
        return Some(u64::MAX);
    }
    let raw = (a * limit - 0.25).floor();
    if raw < 0.0 {
        return None;
    }
    let mut m = raw.min(u64::MAX as f64) as u64;
    while m > 0 && resonant_tau(a, m) > limit {
        m -= 1;
    }
    (resonant_tau(a, m) <= limit).then_some(m)
}

/// Picks `τ_k` on a resonance `2πA_{k−1}τ = π/2 + 2πm`: the largest `m` with
/// `2πΔ_{k−1}τ ≤ c` and `τ` within the cap. The cap is the smaller of
/// `cfg.tau_cap` and the maximizer of `Q(τ)τ`. When that `τ` falls below
/// `cfg.tau_min`, the smallest resonance above `tau_min` is used instead,
/// provided its third-order phase error `(2πΔτ)³/6` stays small against `ζ`.
pub fn choose_tau(prior: &GaussianKnowledge, cfg: &SchedulerConfig, q_model: &dyn Visibility) -> Result<TauChoice> {
    cfg.validate()?;
    let a = prior.mean;
    if !(a > 0.0) {
        return Err(Error::InvalidParams(format!("prior mean {a} MHz must be positive")));
    }
    let cap = match (cfg.tau_cap, q_model.optimal_tau()) {
        (Some(x), Some(y)) => x.min(y),
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => f64::INFINITY,
    };
    let m_floor = smallest_m_above(a, cfg.tau_min);

    if !prior.is_informative() {
        let guess = cfg.first_tau.ok_or_else(|| {
            Error::NoFeasibleTau("uninformative prior needs an explicit first τ".into())
        })?;
        let m = ((a * guess - 0.25).round().max(0.0) as u64).max(m_floor);
        return Ok(TauChoice { tau: resonant_tau(a, m), m });
    }

    let dispersion_limit = cfg.c / (TWO_PI * prior.std);
    let by_dispersion = largest_m_below(a, dispersion_limit).ok_or_else(|| {
        Error::NoFeasibleTau(format!(
            "Δ = {} MHz is too broad: 2πΔτ > c already at m = 0",
            prior.std
        ))
    })?;
    let by_cap = largest_m_below(a, cap)
        .ok_or_else(|| Error::NoFeasibleTau(format!("τ cap {cap} μs is below the first resonance")))?;
    let m = by_dispersion.min(by_cap).min(cfg.m_max);
    if m >= m_floor {
        return Ok(TauChoice { tau: resonant_tau(a, m), m });
    }

    let tau = resonant_tau(a, m_floor);
    let dispersion = TWO_PI * prior.std * tau;
    if tau <= cap && m_floor <= cfg.m_max && 6.0 * cfg.zeta / dispersion.powi(3) >= cfg.threshold {
        Ok(TauChoice { tau, m: m_floor })
    } else {
        Err(Error::NoFeasibleTau(format!(
            "shortest resonance above τ_min = {} μs has dispersion {dispersion:.4}",
            cfg.tau_min
        )))
    }
}

fn smallest_m_above(a: f64, tau_min: f64) -> u64 {
    let mut m = (a * tau_min - 0.25).ceil().max(0.0) as u64;
    while m > 0 && resonant_tau(a, m - 1) >= tau_min {
        m -= 1;
    }
    while resonant_tau(a, m) < tau_min {
        m += 1;
    }
    m
}

/// Diagnostic values behind the step conditions, each with its pass flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// Distance from resonance in cycles.
    pub resonance_offset: f64,
    pub resonance_ok: bool,
    /// `2πΔ_{k−1}τ_k`.
    pub dispersion: f64,
    /// Taylor remainder `Q·(2πΔτ)³/6`.
    pub taylor_remainder: f64,
    /// `6ζ / (2πΔτ)³`.
    pub taylor_ratio: f64,
    pub taylor_ok: bool,
    /// `Q·2πΔτ / η²`.
    pub visibility_ratio: f64,
    pub visibility_ok: bool,
    /// `2πΔτ / (ζ/Q)`.
    pub qml_ratio: f64,
    pub qml_ok: bool,
}

impl ConstraintReport {
    pub fn all_ok(&self) -> bool {
        self.resonance_ok && self.taylor_ok && self.visibility_ok && self.qml_ok
    }
}

pub fn check_constraints(prior: &GaussianKnowledge, tau: f64, cfg: &SchedulerConfig, q: f64) -> ConstraintReport {
    let resonance_offset = resonance_offset(prior.mean, tau);
    let dispersion = TWO_PI * prior.std * tau;
    let taylor_ratio = 6.0 * cfg.zeta / dispersion.powi(3);
    let visibility_ratio = if cfg.eta_squared > 0.0 {
        q * dispersion / cfg.eta_squared
    } else {
        f64::INFINITY
    };
    let qml_ratio = dispersion * q / cfg.zeta;
    ConstraintReport {
        resonance_offset,
        resonance_ok: resonance_offset < RESONANCE_TOL,
        dispersion,
        taylor_remainder: q * dispersion.powi(3) / 6.0,
        taylor_ratio,
        taylor_ok: taylor_ratio >= cfg.threshold,
        visibility_ratio,
        visibility_ok: visibility_ratio >= cfg.threshold,
        qml_ratio,
        qml_ok: qml_ratio >= cfg.threshold,
    }
}
