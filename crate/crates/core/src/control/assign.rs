use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::design::check_targets;
use crate::error::{EtdfError, Result};
use crate::linalg::{condition_number, eigenvalues, monic_poly_from_roots, spectral_distance};

/// Relative accuracy demanded of an assignment before it is returned.
pub const ASSIGNMENT_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct Controllability {
    /// Krylov matrix `[b, P b, …, P^{n−1} b]`.
    pub matrix: DMatrix<f64>,
    pub det: f64,
    /// `1e−10 · ∏ ‖column‖`.
    pub threshold: f64,
}

impl Controllability {
    pub fn is_controllable(&self) -> bool {
        self.det.abs() > self.threshold
    }

    pub fn condition(&self) -> f64 {
        condition_number(&self.matrix)
    }
}

pub fn krylov_matrix(a: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let n = b.len();
    let mut m = DMatrix::zeros(n, n);
    let mut col = b.clone();
    for j in 0..n {
        m.set_column(j, &col);
        col = a * col;
    }
    m
}

pub fn controllability(p0: &DMatrix<f64>, b0: &DVector<f64>) -> Controllability {
    let matrix = krylov_matrix(p0, b0);
    let det = matrix.determinant();
    let scale: f64 = matrix.column_iter().map(|c| c.norm()).product();
    Controllability {
        matrix,
        det,
        threshold: 1e-10 * scale,
    }
}

/// `(e^{s c} − 1)/c`, with the limit `s` for `|c| < 1e−12`.
pub fn sigma_real(s: f64, c: f64) -> f64 {
    if c.abs() < 1e-12 {
        s
    } else {
        (s * c).exp_m1() / c
    }
}

/// `exp(s b kᵀ) = I + σ(s, kᵀb) b kᵀ` (rank-one exponential).
pub fn exp_rank_one(b: &DVector<f64>, k: &DVector<f64>, s: f64) -> DMatrix<f64> {
    let n = b.len();
    let c = k.dot(b);
    DMatrix::identity(n, n) + (b * k.transpose()) * sigma_real(s, c)
}

/// `P0 · exp(−b K₀ᵀ)`, the short-impulse limit of the controlled monodromy.
pub fn closed_loop_limit(p0: &DMatrix<f64>, b0: &DVector<f64>, k0: &DVector<f64>) -> DMatrix<f64> {
    p0 * exp_rank_one(b0, k0, -1.0)
}

/// Ackermann's formula: `L` with `spec(A + b Lᵀ) = targets`.
pub fn ackermann(a: &DMatrix<f64>, b: &DVector<f64>, targets: &[Complex64]) -> Result<DVector<f64>> {
    let n = b.len();
    if a.nrows() != n || a.ncols() != n || targets.len() != n {
        return Err(EtdfError::DimensionMismatch(format!(
            "A is {}x{}, b has length {n}, {} targets",
            a.nrows(),
            a.ncols(),
            targets.len()
        )));
    }
    let ctrl = controllability(a, b);
    if !ctrl.is_controllable() {
        return Err(EtdfError::AssignmentImpossible { det: ctrl.det });
    }
    let coeffs = monic_poly_from_roots(targets);
    let cmax = coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if coeffs.iter().any(|z| z.im.abs() > 1e-12 * cmax) {
        return Err(EtdfError::InvalidDesign(
            "target polynomial is not real (targets not closed under conjugation)".into(),
        ));
    }
    // φ(A) by Horner
    let mut phi = DMatrix::<f64>::identity(n, n);
    for c in coeffs[..n].iter().rev() {
        phi = a * phi + DMatrix::identity(n, n) * c.re;
    }
    // row eₙᵀ C⁻¹ from Cᵀ z = eₙ
    let mut en = DVector::zeros(n);
    en[n - 1] = 1.0;
    let z = ctrl
        .matrix
        .transpose()
        .lu()
        .solve(&en)
        .ok_or(EtdfError::AssignmentImpossible { det: ctrl.det })?;
    let k_ack = phi.transpose() * z;
    Ok(-k_ack)
}

#[derive(Clone, Debug)]
pub struct Assignment {
    pub gain: DVector<f64>,
    pub achieved: Vec<Complex64>,
    pub deviation: f64,
    pub krylov_condition: f64,
}

/// Real `K` with `spec(A · exp(b Kᵀ)) = targets`.
///
/// Uses `A exp(bKᵀ) = A + (Ab) Lᵀ` with `L = σ(1, Kᵀb) K`: place the pair
/// `(A, Ab)` by Ackermann, then undo the scalar `σ` through the determinant
/// identity `1 + Lᵀb = e^{Kᵀb}`.
pub fn assign_spectrum_exp_report(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    targets: &[Complex64],
) -> Result<Assignment> {
    let n = b.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(EtdfError::DimensionMismatch(format!(
            "A is {}x{}, b has length {n}",
            a.nrows(),
            a.ncols()
        )));
    }
    let det_a = a.determinant();
    if !(det_a > 0.0) {
        return Err(EtdfError::DeterminantObstruction(format!("det A = {det_a:.6e} is not positive")));
    }
    let ctrl = controllability(a, b);
    if !ctrl.is_controllable() {
        return Err(EtdfError::AssignmentImpossible { det: ctrl.det });
    }
    check_targets(targets, n)?;
    let ab = a * b;
    let l = ackermann(a, &ab, targets)?;
    let beta = l.dot(b);
    if !(1.0 + beta > 0.0) {
        return Err(EtdfError::DeterminantObstruction(format!(
            "1 + Lᵀb = {:.6e} is not positive",
            1.0 + beta
        )));
    }
    let c = beta.ln_1p();
    let sigma = sigma_real(1.0, c);
    let gain = l / sigma;
    if gain.iter().any(|v| !v.is_finite()) {
        return Err(EtdfError::IllConditionedAssignment {
            achieved: Vec::new(),
            deviation: f64::INFINITY,
        });
    }
    let m = a * exp_rank_one(b, &gain, 1.0);
    let achieved = eigenvalues(&m)?;
    let deviation = spectral_distance(&achieved, targets);
    let scale = targets.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if !(deviation <= ASSIGNMENT_TOL * scale) {
        return Err(EtdfError::IllConditionedAssignment { achieved, deviation });
    }
    Ok(Assignment {
        gain,
        achieved,
        deviation,
        krylov_condition: ctrl.condition(),
    })
}

pub fn assign_spectrum_exp(a: &DMatrix<f64>, b: &DVector<f64>, targets: &[Complex64]) -> Result<DVector<f64>> {
    assign_spectrum_exp_report(a, b, targets).map(|r| r.gain)
}

/// Gains `K₀` with `spec(P0 · exp(−b0 K₀ᵀ)) = targets`.
pub fn design_gains(p0: &DMatrix<f64>, b0: &DVector<f64>, targets: &[Complex64]) -> Result<Assignment> {
    assign_spectrum_exp_report(p0, &(-b0), targets)
}
