//! Hopf normal form with scalar input entering both components:
//!
//! ```text
//! ẋ₁ = p x₁ − x₂ + x₁ (x₁² + x₂²) + u
//! ẋ₂ = x₁ + p x₂ + x₂ (x₁² + x₂²) + u
//! ```
//!
//! For `p < 0` it has the unstable orbit `[r sin t, −r cos t]`, `r = √(−p)`,
//! with period `2π` and multipliers `{1, e^{−4πp}}`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::orbit::{OrbitSource, PeriodicOrbit};
use super::system::ControlledSystem;
use crate::error::{EtdfError, Result};
use crate::ode::Linearization;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HopfSystem {
    pub p: f64,
}

fn jac(p: f64, x1: f64, x2: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[
            p + 3.0 * x1 * x1 + x2 * x2,
            -1.0 + 2.0 * x1 * x2,
            1.0 + 2.0 * x1 * x2,
            p + x1 * x1 + 3.0 * x2 * x2,
        ],
    )
}

impl ControlledSystem for HopfSystem {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, x: &[f64], u: f64, out: &mut [f64]) {
        let r2 = x[0] * x[0] + x[1] * x[1];
        out[0] = self.p * x[0] - x[1] + x[0] * r2 + u;
        out[1] = x[0] + self.p * x[1] + x[1] * r2 + u;
    }

    fn name(&self) -> String {
        format!("hopf(p={})", self.p)
    }

    fn jacobian_x(&self, x: &[f64], _u: f64) -> DMatrix<f64> {
        jac(self.p, x[0], x[1])
    }

    fn jacobian_u(&self, _x: &[f64], _u: f64) -> DVector<f64> {
        DVector::from_element(2, 1.0)
    }

    fn has_analytic_jacobians(&self) -> bool {
        true
    }
}

pub fn hopf_period() -> f64 {
    2.0 * PI
}

pub fn hopf_orbit(p: f64) -> Result<PeriodicOrbit> {
    if !(p < 0.0) {
        return Err(EtdfError::NoPeriodicOrbit(format!(
            "Hopf normal form has no nontrivial periodic orbit for p = {p} >= 0"
        )));
    }
    let r = (-p).sqrt();
    PeriodicOrbit::new(
        hopf_period(),
        move |t| DVector::from_row_slice(&[r * t.sin(), -r * t.cos()]),
        move |t| DVector::from_row_slice(&[r * t.cos(), r * t.sin()]),
        OrbitSource::Analytic,
    )
}

/// Closed-form linearisation along the orbit. Valid for `p ≤ 0`; at `p = 0`
/// the orbit collapses onto the equilibrium and `A(t)` is the constant
/// rotation generator.
pub fn hopf_linearization(p: f64) -> Result<Linearization> {
    if p > 0.0 {
        return Err(EtdfError::NoPeriodicOrbit(format!(
            "Hopf normal form has no nontrivial periodic orbit for p = {p} > 0"
        )));
    }
    let r = (-p).sqrt();
    Linearization::new(
        hopf_period(),
        move |t| jac(p, r * t.sin(), -r * t.cos()),
        |_| DVector::from_element(2, 1.0),
    )
}

/// `diag(1, e^{−4πp})`.
pub fn hopf_monodromy_closed_form(p: f64) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, (-4.0 * PI * p).exp()]))
}

pub fn hopf_system(p: f64) -> Result<(HopfSystem, PeriodicOrbit, Linearization)> {
    let orbit = hopf_orbit(p)?;
    let lin = hopf_linearization(p)?;
    Ok((HopfSystem { p }, orbit, lin))
}
