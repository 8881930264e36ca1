//! The single-estimation echo circuit, its closed-form expectation values,
//! and shot sampling.
//!
//! Sequence on `|+⟩⟨+| ⊗ ρ_n`: free evolution, controlled nuclear π,
//! electron π, controlled nuclear π, free evolution, electron π/2, measure `Z`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::evolution::{
    lindblad_channel, propagator, pulse_channel, pulse_propagator, rotation_electron,
    rotation_nuclear_controlled, Channel, DensityMatrix, DissipationParams, PulseSpec, Unitary,
};
use crate::ops::Op4;
use crate::spin_system::{
    build_h, delta_shift, electron_z, nuclear_resonance, SystemParams, TWO_PI,
};
use crate::{Error, Result};
use std::f64::consts::PI;

/// Tolerance within which an expectation value outside `[−1, 1]` is clamped.
pub const EXPECTATION_CLAMP_TOL: f64 = 1e-9;

/// Smallest shot count a [`CircuitSpec`] accepts.
pub const MIN_SHOTS: u64 = 100;

/// Contrast `Q(τ)` of the measured signal `Q(τ)·cos(2πAτ)`.
pub trait Visibility {
    /// `tau` is the effective phase duration `τ + τ_n` (μs).
    fn q(&self, tau: f64) -> f64;

    /// Maximizer of `Q(τ)·τ` when it is finite.
    fn optimal_tau(&self) -> Option<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorModel {
    Ideal,
    /// Each controlled nuclear rotation is off by `2ε_i` with `ε_i ~ N(0, epsilon²)`.
    RotationError { epsilon: f64 },
    Decoherence(DissipationParams),
}

impl ErrorModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            ErrorModel::Ideal => Ok(()),
            ErrorModel::RotationError { epsilon } => {
                if *epsilon >= 0.0 && epsilon.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParams(format!("rotation error ε = {epsilon} must be ≥ 0")))
                }
            }
            ErrorModel::Decoherence(d) => d.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ErrorModel::Ideal => "ideal",
            ErrorModel::RotationError { .. } => "rotation",
            ErrorModel::Decoherence(_) => "decoherence",
        }
    }

    fn dissipation(&self) -> Option<&DissipationParams> {
        match self {
            ErrorModel::Decoherence(d) => Some(d),
            _ => None,
        }
    }
}

impl Visibility for ErrorModel {
    fn q(&self, tau: f64) -> f64 {
        match self {
            ErrorModel::Ideal => 1.0,
            ErrorModel::RotationError { epsilon } => 1.0 - epsilon * epsilon,
            ErrorModel::Decoherence(d) => (-2.0 * tau / d.t2).exp(),
        }
    }

    fn optimal_tau(&self) -> Option<f64> {
        match self {
            ErrorModel::Decoherence(d) if d.t2.is_finite() => Some(0.5 * d.t2),
            _ => None,
        }
    }
}

/// One estimation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    /// Free-evolution segment (μs), on each side of the echo.
    pub tau: f64,
    /// Controlled nuclear pulse duration (μs).
    pub tau_n: f64,
    /// Shots per estimator.
    pub n: u64,
    /// Nuclear Rabi frequency (kHz); a π pulse needs `2π·rabi·τ_n = π`.
    pub rabi_khz: f64,
    pub use_finite_pulses: bool,
}

impl CircuitSpec {
    /// 1 μs pulses at 500 kHz, 1000 shots.
    pub fn nv_default(tau: f64) -> Self {
        CircuitSpec {
            tau,
            tau_n: 1.0,
            n: 1000,
            rabi_khz: 500.0,
            use_finite_pulses: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParams(format!("τ = {} μs must be positive", self.tau)));
        }
        if !(self.tau_n >= 0.0) || !self.tau_n.is_finite() {
            return Err(Error::InvalidParams(format!("τ_n = {} μs must be ≥ 0", self.tau_n)));
        }
        if self.n < MIN_SHOTS {
            return Err(Error::InvalidParams(format!("N = {} is below {MIN_SHOTS}", self.n)));
        }
        if self.use_finite_pulses {
            let area = self.rabi_angular() * self.tau_n;
            if !(self.tau_n > 0.0) || (area - PI).abs() > 1e-6 * PI {
                return Err(Error::InvalidParams(format!(
                    "finite pulses need 2π·rabi·τ_n = π, got {area}"
                )));
            }
        }
        Ok(())
    }

    /// `τ + τ_n`, the duration that sets the measured phase.
    pub fn tau_effective(&self) -> f64 {
        self.tau + self.tau_n
    }

    /// Rabi angular frequency in rad/μs.
    pub fn rabi_angular(&self) -> f64 {
        TWO_PI * self.rabi_khz * 1e-3
    }

    pub fn zeta(&self) -> f64 {
        1.0 / (self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub z: f64,
    pub zeta: f64,
    pub tau_effective: f64,
    pub plus: u64,
    pub minus: u64,
}

impl MeasurementRecord {
    pub fn shots(&self) -> u64 {
        self.plus + self.minus
    }

    /// Builds the record from counts of `+1` and `−1` outcomes.
    pub fn from_counts(plus: u64, minus: u64, tau_effective: f64) -> Self {
        let n = (plus + minus) as f64;
        MeasurementRecord {
            z: (plus as f64 - minus as f64) / n,
            zeta: 1.0 / n.sqrt(),
            tau_effective,
            plus,
            minus,
        }
    }
}

/// `cos(θτ)` for the abstract two-qubit model with coupling `θ`; the nuclear
/// polarization drops out.
pub fn dqc1_expectation(theta: f64, tau: f64, _q_z: f64) -> f64 {
    (theta * tau).cos()
}

/// `⟨X⟩` after plain free evolution for `tau`, to first order in η:
/// `cos(2π(D′+δ)τ)·cos(πAτ) + q_z·sin(2π(D′+δ)τ)·sin(πAτ)`.
pub fn expectation_x_no_echo(params: &SystemParams, tau: f64) -> Result<f64> {
    let fast = TWO_PI * (params.d_prime() + delta_shift(params)?) * tau;
    let slow = PI * params.a * tau;
    Ok(fast.cos() * slow.cos() + params.q_z * fast.sin() * slow.sin())
}

/// `Q·cos(2πA(τ+τ_n))`.
pub fn analytic_expectation(params: &SystemParams, spec: &CircuitSpec, err: &ErrorModel) -> f64 {
    let tau_eff = spec.tau_effective();
    err.q(tau_eff) * (TWO_PI * params.a * tau_eff).cos()
}

/// Draws `N` projective outcomes with `p₊ = (1 + ⟨Z⟩)/2`.
pub fn sample_estimator<R: Rng + ?Sized>(expectation: f64, n: u64, rng: &mut R) -> Result<MeasurementRecord> {
    sample_shots(n, 0.0, rng, |_| Ok(expectation))
}

/// Shot loop shared by fixed and per-shot expectation values. Each shot draws
/// one uniform from `rng`, so streams stay aligned across error models.
pub(crate) fn sample_shots<R: Rng + ?Sized>(
    n: u64,
    tau_effective: f64,
    rng: &mut R,
    mut expectation: impl FnMut(u64) -> Result<f64>,
) -> Result<MeasurementRecord> {
    if n == 0 {
        return Err(Error::InvalidParams("N must be at least 1".into()));
    }
    let mut plus = 0;
    for shot in 0..n {
        let p = 0.5 * (1.0 + clamp_expectation(expectation(shot)?)?);
        if rng.random::<f64>() < p {
            plus += 1;
        }
    }
    Ok(MeasurementRecord::from_counts(plus, n - plus, tau_effective))
}

fn clamp_expectation(x: f64) -> Result<f64> {
    if !(x.abs() <= 1.0 + EXPECTATION_CLAMP_TOL) {
        return Err(Error::ProbabilityOutOfRange(x));
    }
    Ok(x.clamp(-1.0, 1.0))
}

/// Draws the two rotation errors `(ε_a, ε_b)` of one circuit execution.
pub fn draw_rotation_errors<R: Rng + ?Sized>(err: &ErrorModel, rng: &mut R) -> (f64, f64) {
    match err {
        ErrorModel::RotationError { epsilon } if *epsilon > 0.0 => {
            let normal = Normal::new(0.0, *epsilon).expect("validated ε");
            (normal.sample(rng), normal.sample(rng))
        }
        _ => (0.0, 0.0),
    }
}

enum Pulses {
    Instant,
    Unitary(Unitary, Unitary),
    Channel(Channel, Channel),
}

/// Precomputes everything about the circuit that does not depend on `τ` or on
/// the rotation errors, so repeated executions only pay for the free segments.
pub struct CircuitSimulator {
    params: SystemParams,
    err: ErrorModel,
    tau_n: f64,
    rabi: f64,
    finite: bool,
    carrier: f64,
    pulses: Pulses,
    rho0: DensityMatrix,
    observable: Op4,
}

impl CircuitSimulator {
    pub fn new(params: &SystemParams, spec: &CircuitSpec, err: &ErrorModel) -> Result<Self> {
        params.validate()?;
        err.validate()?;
        spec.validate()?;
        let carrier = nuclear_resonance(params)?;
        let mut sim = CircuitSimulator {
            params: *params,
            err: *err,
            tau_n: spec.tau_n,
            rabi: spec.rabi_angular(),
            finite: spec.use_finite_pulses,
            carrier,
            pulses: Pulses::Instant,
            rho0: DensityMatrix::initial(params.q_z),
            observable: electron_z(),
        };
        if sim.finite && !matches!(err, ErrorModel::RotationError { .. }) {
            sim.pulses = sim.build_pulses(0.0, 0.0)?;
        }
        Ok(sim)
    }

    fn pulse_specs(&self, eps_a: f64, eps_b: f64) -> (PulseSpec, PulseSpec) {
        let scale = |eps: f64| self.rabi * (PI + 2.0 * eps) / PI;
        let first = PulseSpec {
            t1: -self.tau_n,
            t2: 0.0,
            omega_r: scale(eps_a),
            carrier: self.carrier,
        };
        let second = PulseSpec {
            t1: 0.0,
            t2: self.tau_n,
            omega_r: scale(eps_b),
            carrier: self.carrier,
        };
        (first, second)
    }

    fn build_pulses(&self, eps_a: f64, eps_b: f64) -> Result<Pulses> {
        let (first, second) = self.pulse_specs(eps_a, eps_b);
        Ok(match self.err.dissipation() {
            Some(d) => Pulses::Channel(
                pulse_channel(&self.params, &first, d)?,
                pulse_channel(&self.params, &second, d)?,
            ),
            None => Pulses::Unitary(
                pulse_propagator(&self.params, &first)?,
                pulse_propagator(&self.params, &second)?,
            ),
        })
    }

    /// Duration of each free segment: `τ` with finite pulses, `τ + τ_n`
    /// when the pulses are instantaneous.
    fn free_duration(&self, tau: f64) -> f64 {
        if self.finite {
            tau
        } else {
            tau + self.tau_n
        }
    }

    /// Exact `⟨Z⟩` for free segment `tau` and rotation errors `(ε_a, ε_b)`.
    pub fn expectation(&self, tau: f64, eps_a: f64, eps_b: f64) -> Result<f64> {
        let free = self.free_duration(tau);
        let h = build_h(&self.params);
        let rebuilt;
        let pulses = if self.finite && (eps_a != 0.0 || eps_b != 0.0 || matches!(self.pulses, Pulses::Instant)) {
            rebuilt = self.build_pulses(eps_a, eps_b)?;
            &rebuilt
        } else {
            &self.pulses
        };

        let flip = rotation_electron(PI);
        let readout = rotation_electron(0.5 * PI);
        let rho = match self.err.dissipation() {
            Some(d) => {
                let seg = lindblad_channel(&h, d, free)?;
                let (pa, pb) = match pulses {
                    Pulses::Channel(a, b) => (a.clone(), b.clone()),
                    _ => (
                        Channel::from_unitary(&rotation_nuclear_controlled(PI + 2.0 * eps_a)),
                        Channel::from_unitary(&rotation_nuclear_controlled(PI + 2.0 * eps_b)),
                    ),
                };
                let total = Channel::from_unitary(&readout)
                    .after(&seg)
                    .after(&pb)
                    .after(&Channel::from_unitary(&flip))
                    .after(&pa)
                    .after(&seg);
                total.apply(&self.rho0)
            }
            None => {
                let seg = propagator(&h, free)?;
                let (pa, pb) = match pulses {
                    Pulses::Unitary(a, b) => (a.clone(), b.clone()),
                    _ => (
                        rotation_nuclear_controlled(PI + 2.0 * eps_a),
                        rotation_nuclear_controlled(PI + 2.0 * eps_b),
                    ),
                };
                let u = &(&(&(&(&readout * &seg) * &pb) * &flip) * &pa) * &seg;
                u.apply(&self.rho0)
            }
        };
        Ok(rho.expectation(&self.observable))
    }

    /// Runs the `N` shots of one estimation step. Rotation errors are redrawn
    /// for every shot from `eps_rng`; outcomes use one uniform from
    /// `outcome_rng` per shot.
    pub fn measure<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &self,
        spec: &CircuitSpec,
        outcome_rng: &mut R1,
        eps_rng: &mut R2,
    ) -> Result<MeasurementRecord> {
        spec.validate()?;
        let tau_eff = spec.tau_effective();
        match self.err {
            ErrorModel::RotationError { .. } => sample_shots(spec.n, tau_eff, outcome_rng, |_| {
                let (a, b) = draw_rotation_errors(&self.err, eps_rng);
                self.expectation(spec.tau, a, b)
            }),
            _ => {
                let z = self.expectation(spec.tau, 0.0, 0.0)?;
                sample_shots(spec.n, tau_eff, outcome_rng, |_| Ok(z))
            }
        }
    }
}

/// One execution of the circuit on the exact state; rotation errors, if any,
/// are drawn from `rng`.
pub fn run_circuit_exact<R: Rng + ?Sized>(
    params: &SystemParams,
    spec: &CircuitSpec,
    err: &ErrorModel,
    rng: &mut R,
) -> Result<f64> {
    let sim = CircuitSimulator::new(params, spec, err)?;
    let (a, b) = draw_rotation_errors(err, rng);
    sim.expectation(spec.tau, a, b)
}
