//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{EtdfError, Result};

const SCHUR_MAX_ITER: usize = 100_000;

/// Eigenvalues of a real square matrix.
///
/// Uses faer's Hessenberg QR, which stays robust on the clustered spectra of
/// the discretised period map where nalgebra's real Schur iteration stalls.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if m.nrows() != m.ncols() {
        return Err(EtdfError::DimensionMismatch(format!(
            "eigenvalues of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(EtdfError::EigenFailure("matrix has non-finite entries".into()));
    }
    let fm = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let ev = fm.eigenvalues().map_err(|e| {
        EtdfError::EigenFailure(format!(
            "{e:?} ({}x{}, cond ~ {:.3e})",
            m.nrows(),
            m.ncols(),
            condition_number(m)
        ))
    })?;
    Ok(ev.iter().map(|z| Complex64::new(z.re, z.im)).collect())
}

/// Eigenvalues of a complex square matrix.
pub fn eigenvalues_complex(m: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| EtdfError::EigenFailure("complex Schur iteration did not converge".into()))?;
    schur
        .eigenvalues()
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| EtdfError::EigenFailure("complex Schur form is not triangular".into()))
}

/// 2-norm condition number from the singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Coefficients `[c_0, c_1, ..., c_{n-1}, 1]` of the monic polynomial with
/// the given roots, lowest degree first.
pub fn monic_poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= r * c;
        }
        coeffs = next;
    }
    coeffs
}

/// Greedy nearest matching of `a` against `b`.
///
/// Pairs are taken in order of increasing distance; each element is used at
/// most once. Returns `(index_in_a, index_in_b, distance)`.
pub fn match_nearest(a: &[Complex64], b: &[Complex64]) -> Vec<(usize, usize, f64)> {
    let mut pairs: Vec<(usize, usize, f64)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            pairs.push((i, j, (x - y).norm()));
        }
    }
    pairs.sort_by(|p, q| p.2.total_cmp(&q.2));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut out = Vec::new();
    for (i, j, d) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((i, j, d));
        }
    }
    out.sort_by_key(|p| p.0);
    out
}

/// Largest deviation of a greedy nearest matching, `inf` when sizes differ.
pub fn spectral_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    match_nearest(a, b).iter().map(|p| p.2).fold(0.0, f64::max)
}

/// Sort complex numbers by (real, imag) for deterministic output.
pub fn sort_complex(v: &mut [Complex64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

pub fn outer(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    a * b.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_from_conjugate_pair_is_real() {
        let c = monic_poly_from_roots(&[Complex64::new(0.0, 0.5), Complex64::new(0.0, -0.5)]);
        assert_eq!(c.len(), 3);
        assert!((c[0] - Complex64::new(0.25, 0.0)).norm() < 1e-15);
        assert!(c[1].norm() < 1e-15);
        assert!((c[2] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rotation_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let mut ev = eigenvalues(&m).unwrap();
        sort_complex(&mut ev);
        assert!((ev[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((ev[1] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn greedy_matching_pairs_closest_first() {
        let a = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let b = [Complex64::new(1.1, 0.0), Complex64::new(0.05, 0.0)];
        let m = match_nearest(&a, &b);
        assert_eq!(m[0].1, 1);
        assert_eq!(m[1].1, 0);
        assert!((spectral_distance(&a, &b) - 0.1).abs() < 1e-12);
    }
}
