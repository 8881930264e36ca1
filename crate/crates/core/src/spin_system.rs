//! Two-qubit NV Hamiltonian in the `{m_s = 0, m_s = −1} ⊗ {↑, ↓}` subspace.
//!
//! The projected Hamiltonian is `H = H₀ + H_mix` with
//!
//! ```text
//! H₀    = ½ g_N μ_N B σ_z + |1⟩⟨1| ⊗ (D′ − ½ A σ_z),   D′ = D − g_e μ_B B
//! H_mix = (A⊥/√2)(|0,↓⟩⟨1,↑| + |1,↑⟩⟨0,↓|)
//! ```
//!
//! Parameters are ordinary frequencies (MHz); the matrices returned here are in
//! angular units (rad/μs), i.e. every entry carries a factor 2π.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::ops::{kron, on_electron, on_nucleus, pauli_y, pauli_z, proj_one, re, Op4};
use crate::{Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;

/// Bohr magneton over Planck's constant, 13.996 GHz/T, stored in MHz/T.
pub const MU_B_MHZ_PER_T: f64 = 13_996.0;

/// Nuclear magneton over Planck's constant, 7.6226 MHz/T.
pub const MU_N_MHZ_PER_T: f64 = 7.6226;

/// Magneton values used throughout, in frequency-per-tesla units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub mu_b: f64,
    pub mu_n: f64,
    pub two_pi: f64,
}

impl PhysicalConstants {
    pub const STANDARD: PhysicalConstants = PhysicalConstants {
        mu_b: MU_B_MHZ_PER_T,
        mu_n: MU_N_MHZ_PER_T,
        two_pi: TWO_PI,
    };
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::STANDARD
    }
}

/// Ordering of the four product states used by every matrix in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TwoQubitBasis {
    ZeroUp = 0,
    ZeroDown = 1,
    OneUp = 2,
    OneDown = 3,
}

impl TwoQubitBasis {
    pub const ALL: [TwoQubitBasis; 4] = [
        TwoQubitBasis::ZeroUp,
        TwoQubitBasis::ZeroDown,
        TwoQubitBasis::OneUp,
        TwoQubitBasis::OneDown,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// NV-center parameters. Frequencies in MHz, field in tesla.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Longitudinal hyperfine coupling `A`.
    pub a: f64,
    /// Transverse hyperfine coupling `A⊥`.
    pub a_perp: f64,
    /// Zero-field splitting `D`.
    pub d: f64,
    /// Magnetic field along the NV axis.
    pub b: f64,
    pub g_e: f64,
    pub g_n: f64,
    /// Nuclear polarization `q_z` produced by electron initialisation.
    pub q_z: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::nv15n()
    }
}

impl SystemParams {
    /// ¹⁵N NV center at B = 0.2 T with literature couplings
    /// (A ≈ 3.03 MHz, A⊥ ≈ 3.65 MHz, D = 2.87 GHz, g_e = 2.0023, g_N = −0.5664).
    pub fn nv15n() -> Self {
        SystemParams {
            a: 3.03,
            a_perp: 3.65,
            d: 2870.0,
            b: 0.2,
            g_e: 2.0023,
            g_n: -0.5664,
            q_z: 0.0,
        }
    }

    pub fn with_a(self, a: f64) -> Self {
        SystemParams { a, ..self }
    }

    pub fn with_q_z(self, q_z: f64) -> Self {
        SystemParams { q_z, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.a_perp, self.d, self.b, self.g_e, self.g_n, self.q_z]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParams("all system parameters must be finite".into()));
        }
        if self.q_z.abs() > 1.0 {
            return Err(Error::InvalidParams(format!(
                "nuclear polarization q_z = {} outside [-1, 1]",
                self.q_z
            )));
        }
        if self.a_perp < 0.0 {
            return Err(Error::InvalidParams(format!(
                "A⊥ = {} MHz must be non-negative",
                self.a_perp
            )));
        }
        Ok(())
    }

    /// `D′ = D − g_e μ_B B` (MHz).
    pub fn d_prime(&self) -> f64 {
        self.d - self.g_e * MU_B_MHZ_PER_T * self.b
    }

    /// Nuclear Zeeman frequency `g_N μ_N B` (MHz).
    pub fn nuclear_zeeman(&self) -> f64 {
        self.g_n * MU_N_MHZ_PER_T * self.b
    }

    /// Splitting `D′ + g_N μ_N B − A/2` between `|1,↑⟩` and `|0,↓⟩` under `H₀`.
    pub fn mixing_gap(&self) -> f64 {
        self.d_prime() + self.nuclear_zeeman() - 0.5 * self.a
    }

    /// Whether `|D′| / A⊥ > 100`, the regime where η-expansions are trusted.
    pub fn is_perturbative(&self) -> bool {
        self.a_perp == 0.0 || self.d_prime().abs() / self.a_perp > 100.0
    }
}

/// Hermitian 4×4 operator in rad/μs.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian(Op4);

impl Hamiltonian {
    /// Wraps a matrix, rejecting anything that is not Hermitian to 1e−12.
    pub fn from_matrix(m: Op4) -> Result<Self> {
        let defect = crate::ops::hermiticity_defect(&m);
        if defect > 1e-12 {
            return Err(Error::InvalidParams(format!(
                "matrix is not Hermitian (relative defect {defect:.3e})"
            )));
        }
        Ok(Hamiltonian(m))
    }

    pub fn zero() -> Self {
        Hamiltonian(Op4::zeros())
    }

    pub fn matrix(&self) -> &Op4 {
        &self.0
    }

    pub fn into_matrix(self) -> Op4 {
        self.0
    }

    pub fn plus(&self, other: &Hamiltonian) -> Hamiltonian {
        Hamiltonian(self.0 + other.0)
    }

    /// Spectral norm (largest |eigenvalue|).
    pub fn norm(&self) -> f64 {
        crate::ops::hermitian_norm(&self.0)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        crate::ops::hermitian_eigen(&self.0).0
    }
}

impl std::ops::Index<(usize, usize)> for Hamiltonian {
    type Output = crate::ops::C64;

    fn index(&self, idx: (usize, usize)) -> &Self::Output {
        &self.0[idx]
    }
}

/// Diagonal part `H₀`.
pub fn build_h0(params: &SystemParams) -> Hamiltonian {
    let nuclear = on_nucleus(&pauli_z()) * re(0.5 * TWO_PI * params.nuclear_zeeman());
    let electron_block = crate::ops::identity2() * re(TWO_PI * params.d_prime())
        - pauli_z() * re(0.5 * TWO_PI * params.a);
    Hamiltonian(nuclear + kron(&proj_one(), &electron_block))
}

/// Off-diagonal part `H_mix` coupling `|0,↓⟩` and `|1,↑⟩`.
pub fn build_hmix(params: &SystemParams) -> Hamiltonian {
    let mut m = Op4::zeros();
    let coupling = re(TWO_PI * params.a_perp / SQRT_2);
    let (lo, hi) = (TwoQubitBasis::ZeroDown.index(), TwoQubitBasis::OneUp.index());
    m[(lo, hi)] = coupling;
    m[(hi, lo)] = coupling;
    Hamiltonian(m)
}

/// Full projected Hamiltonian `H₀ + H_mix`.
pub fn build_h(params: &SystemParams) -> Hamiltonian {
    build_h0(params).plus(&build_hmix(params))
}

/// `σ_y Y` as a single two-qubit operator.
fn echo_conjugator() -> Op4 {
    kron(&pauli_y(), &pauli_y())
}

/// Conjugation `H ↦ σ_y Y H Y σ_y` of an arbitrary Hamiltonian.
pub fn echo_conjugate(h: &Hamiltonian) -> Hamiltonian {
    let w = echo_conjugator();
    Hamiltonian(w * h.matrix() * w)
}

/// Echoed Hamiltonian `H′ = σ_y Y H Y σ_y` seen by the state after the two
/// π rotations.
pub fn build_h_echoed(params: &SystemParams) -> Hamiltonian {
    echo_conjugate(&build_h(params))
}

/// Mixing parameter `η = A⊥ / (D′ + g_N μ_N B − A/2)`.
pub fn eta(params: &SystemParams) -> Result<f64> {
    let denominator = params.mixing_gap();
    if denominator.abs() < 10.0 * params.a_perp || denominator == 0.0 {
        return Err(Error::DegenerateDenominator {
            denominator,
            a_perp: params.a_perp,
        });
    }
    Ok(params.a_perp / denominator)
}

/// Level shift `δ = η A⊥ / 2` (MHz) of `|1,↑⟩` (and `−δ` of `|0,↓⟩`).
pub fn delta_shift(params: &SystemParams) -> Result<f64> {
    Ok(eta(params)? * params.a_perp / 2.0)
}

/// Carrier (rad/μs) resonant with `|1,↑⟩ → |1,↓⟩`: `2π(A − g_N μ_N B − δ)`.
pub fn nuclear_resonance(params: &SystemParams) -> Result<f64> {
    Ok(TWO_PI * (params.a - params.nuclear_zeeman() - delta_shift(params)?))
}

/// Electron Pauli `Z ⊗ I`, the measured observable.
pub fn electron_z() -> Op4 {
    on_electron(&pauli_z())
}
