use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error(
        "perturbative denominator {denominator:.6e} MHz is within 10·A⊥ ({a_perp:.6e} MHz); mixing is not perturbative"
    )]
    DegenerateDenominator { denominator: f64, a_perp: f64 },

    #[error("negative duration {0} μs")]
    NegativeDuration(f64),

    #[error("required integration step {step:.3e} μs is below 1e-9 μs")]
    StepSizeUnderflow { step: f64 },

    #[error("carrier detuned by {detuning:.6e} rad/μs, more than the Rabi frequency {rabi:.6e} rad/μs")]
    OffResonance { detuning: f64, rabi: f64 },

    #[error("expectation value {0} lies outside [-1, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("visibility {visibility:.3e} is not above the mixing remainder floor {floor:.3e}")]
    VisibilityUnderflow { visibility: f64, floor: f64 },

    #[error("no feasible τ: {0}")]
    NoFeasibleTau(String),

    #[error(
        "scheduler constant violates c ≫ ζ and c³ ≪ 6ζ: c/ζ = {c_over_zeta:.3}, 6ζ/c³ = {six_zeta_over_c3:.3} (each must be ≥ {threshold})"
    )]
    Constraint {
        c_over_zeta: f64,
        six_zeta_over_c3: f64,
        threshold: f64,
    },
}
