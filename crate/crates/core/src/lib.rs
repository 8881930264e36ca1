//! Simulation of the NV-center electron / ¹⁵N nuclear two-qubit system and of an
//! adaptive, spin-echo based DQC1 protocol for estimating the longitudinal
//! hyperfine coupling `A`.
//!
//! The crate is organised bottom-up:
//!
//! - [`spin_system`]: Hamiltonians in the fixed basis `|0↑⟩, |0↓⟩, |1↑⟩, |1↓⟩`
//!   and the perturbative mixing quantities η and δ.
//! - [`evolution`]: unitary propagators, Lindblad evolution and finite square
//!   pulses.
//! - [`circuit`]: the single-estimation circuit, its closed-form expectation
//!   values and measurement sampling.
//! - [`bayes`]: Gaussian knowledge, Bayesian fusion and the τ scheduler.
//! - [`protocol`]: the K-step adaptive estimation and precision references.
//!
//! Frequencies are ordinary frequencies in MHz and durations are in μs. Every
//! phase or propagator multiplies by 2π, so Hamiltonian entries are in rad/μs.

pub mod bayes;
pub mod circuit;
pub mod error;
pub mod evolution;
pub mod ops;
pub mod protocol;
pub mod spin_system;

pub use error::{Error, Result};
