//! Small dense operators on the two-qubit space.
//!
//! Basis index is `2·e + n` with electron `e ∈ {0, 1}` (`|m_s = 0⟩`, `|m_s = −1⟩`)
//! and nucleus `n ∈ {0, 1}` (`|↑⟩`, `|↓⟩`). Superoperators act on the row-major
//! vectorisation `vec(ρ)[4i + j] = ρ[(i, j)]`.

use nalgebra::{Matrix2, Matrix4, SMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Op2 = Matrix2<C64>;
pub type Op4 = Matrix4<C64>;
pub type Super = SMatrix<C64, 16, 16>;

pub const DIM: usize = 4;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity2() -> Op2 {
    Op2::identity()
}

pub fn pauli_x() -> Op2 {
    Op2::new(re(0.0), re(1.0), re(1.0), re(0.0))
}

pub fn pauli_y() -> Op2 {
    Op2::new(re(0.0), c(0.0, -1.0), c(0.0, 1.0), re(0.0))
}

pub fn pauli_z() -> Op2 {
    Op2::new(re(1.0), re(0.0), re(0.0), re(-1.0))
}

/// `|1⟩⟨1|` on a single qubit.
pub fn proj_one() -> Op2 {
    Op2::new(re(0.0), re(0.0), re(0.0), re(1.0))
}

/// `|0⟩⟨0|` on a single qubit.
pub fn proj_zero() -> Op2 {
    Op2::new(re(1.0), re(0.0), re(0.0), re(0.0))
}

/// Electron ⊗ nucleus.
pub fn kron(electron: &Op2, nucleus: &Op2) -> Op4 {
    Op4::from_fn(|i, j| electron[(i / 2, j / 2)] * nucleus[(i % 2, j % 2)])
}

pub fn on_electron(op: &Op2) -> Op4 {
    kron(op, &identity2())
}

pub fn on_nucleus(op: &Op2) -> Op4 {
    kron(&identity2(), op)
}

pub fn dagger(m: &Op4) -> Op4 {
    m.adjoint()
}

/// Largest entrywise deviation from Hermiticity, relative to the largest entry.
pub fn hermiticity_defect(m: &Op4) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

/// Largest entrywise deviation of `U†U` from the identity.
pub fn unitarity_defect(u: &Op4) -> f64 {
    (u.adjoint() * u - Op4::identity())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &Op4, b: &Op4) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigen-decomposition of a Hermitian operator: ascending real eigenvalues and
/// the matching orthonormal eigenvectors as columns.
pub fn hermitian_eigen(h: &Op4) -> (Vec<f64>, Op4) {
    // symmetrise so roundoff in the input cannot leak into the solver
    let sym = (h + h.adjoint()) * re(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..DIM).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = Op4::from_fn(|i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Spectral norm of a Hermitian operator.
pub fn hermitian_norm(h: &Op4) -> f64 {
    let (values, _) = hermitian_eigen(h);
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `e^{−iHt}` for Hermitian `H` through its eigen-decomposition.
pub fn exp_minus_i(h: &Op4, t: f64) -> Op4 {
    let (values, vectors) = hermitian_eigen(h);
    let phases = Op4::from_diagonal(&nalgebra::Vector4::from_fn(|k, _| {
        C64::from_polar(1.0, -values[k] * t)
    }));
    vectors * phases * vectors.adjoint()
}

/// Superoperator of `ρ ↦ A ρ B`.
pub fn sandwich(a: &Op4, b: &Op4) -> Super {
    let bt = b.transpose();
    Super::from_fn(|r, s| a[(r / DIM, s / DIM)] * bt[(r % DIM, s % DIM)])
}

pub fn vectorize(rho: &Op4) -> SMatrix<C64, 16, 1> {
    SMatrix::<C64, 16, 1>::from_fn(|r, _| rho[(r / DIM, r % DIM)])
}

pub fn unvectorize(v: &SMatrix<C64, 16, 1>) -> Op4 {
    Op4::from_fn(|i, j| v[DIM * i + j])
}

pub fn apply_super(s: &Super, rho: &Op4) -> Op4 {
    unvectorize(&(s * vectorize(rho)))
}
