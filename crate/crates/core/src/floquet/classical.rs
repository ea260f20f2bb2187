use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::types::{FloquetSpectrum, Method, Multiplier, MultiplierClass, SpectrumNote};
use crate::control::GainDesign;
use crate::error::{EtdfError, Result};
use crate::linalg::{eigenvalues, eigenvalues_complex};
use crate::models::PeriodicOrbit;
use crate::ode::{integrate, monodromy_parametrized, monodromy_uncontrolled, IntegratorOptions, Linearization, Trajectory};

/// Spectrum of `P(1; δ, K₀)`, the loop with `x̃` replaced by `x_*`.
pub fn classical_spectrum(lin: &Linearization, design: &GainDesign, opts: &IntegratorOptions) -> Result<FloquetSpectrum> {
    let p1 = monodromy_parametrized(lin, Complex64::new(1.0, 0.0), design, opts)?;
    let ev = eigenvalues_complex(&p1.map(|z| Complex64::new(z.re, 0.0)))?;
    let unstable = ev.iter().any(|z| z.norm() > 1.0);
    let mut spec = FloquetSpectrum {
        multipliers: ev
            .into_iter()
            .map(|value| Multiplier {
                value,
                class: MultiplierClass::Assigned,
                residual: 0.0,
                index: None,
            })
            .collect(),
        method: Method::Classical,
        epsilon: design.epsilon,
        delta: design.delta,
        notes: Vec::new(),
    };
    spec.sort();
    if unstable {
        spec.notes.push(SpectrumNote::EtdfMustFailForSmallEpsilon);
    }
    Ok(spec)
}

/// Periodic solution of `y' = −A(t)ᵀ y` through the left eigenvector of
/// `P0` for the multiplier 1, normalised against the right one.
#[derive(Clone, Debug)]
pub struct Adjoint {
    traj: Arc<Trajectory>,
    period: f64,
}

impl Adjoint {
    pub fn eval(&self, t: f64) -> DVector<f64> {
        DVector::from_vec(self.traj.eval(t.rem_euclid(self.period)))
    }

    pub fn period(&self) -> f64 {
        self.period
    }
}

/// `xdot0` fixes the normalisation `x̄(0)ᵀ ẋ_*(0) = 1`.
pub fn adjoint_eigenvector(lin: &Linearization, xdot0: &DVector<f64>, opts: &IntegratorOptions) -> Result<Adjoint> {
    let p0 = monodromy_uncontrolled(lin, opts)?;
    let n = p0.nrows();
    let ev = eigenvalues(&p0)?;
    let (k, _) = ev
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).norm().total_cmp(&(b.1 - 1.0).norm()))
        .ok_or(EtdfError::DegenerateTrivialMultiplier)?;
    if (ev[k] - 1.0).norm() > 1e-6 {
        return Err(EtdfError::DegenerateTrivialMultiplier);
    }
    if ev.iter().enumerate().any(|(j, z)| j != k && (z - ev[k]).norm() < 1e-8) {
        return Err(EtdfError::DegenerateTrivialMultiplier);
    }
    // null vector of P0ᵀ − I: right singular vector of the smallest singular value
    let m = p0.transpose() - DMatrix::identity(n, n);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| EtdfError::EigenFailure("SVD without V".into()))?;
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(EtdfError::DegenerateTrivialMultiplier)?;
    let w: DVector<f64> = v_t.row(imin).transpose();
    let pairing = w.dot(xdot0);
    if pairing.abs() < 1e-12 {
        return Err(EtdfError::DegenerateNormalization(pairing));
    }
    let w = w / pairing;
    let period = lin.period();
    let dense = opts.clone().with_h_max(period / 256.0);
    let traj = integrate(
        |t, y, dy| {
            let a = lin.a(t);
            let f = -(a.transpose() * DVector::from_row_slice(y));
            dy.copy_from_slice(f.as_slice());
        },
        0.0,
        period,
        w.as_slice(),
        &[],
        &dense,
    )?;
    Ok(Adjoint {
        traj: Arc::new(traj),
        period,
    })
}

/// `∫ x̄ᵀ b Kᵀ ẋ_* dt / ∫ x̄ᵀ ẋ_* dt` for a constant gain `K`.
pub fn constant_gain_criterion(
    lin: &Linearization,
    orbit: &PeriodicOrbit,
    k: &DVector<f64>,
    opts: &IntegratorOptions,
) -> Result<f64> {
    let adj = adjoint_eigenvector(lin, orbit.xdot0(), opts)?;
    // trapezoid rule, spectrally accurate for periodic integrands
    let samples = 512;
    let h = lin.period() / samples as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..samples {
        let t = i as f64 * h;
        let xb = adj.eval(t);
        let v = orbit.velocity(t);
        num += xb.dot(&lin.b(t)) * k.dot(&v);
        den += xb.dot(&v);
    }
    let (num, den) = (num * h, den * h);
    if den.abs() < 1e-12 {
        return Err(EtdfError::DegenerateNormalization(den));
    }
    Ok(num / den)
}
