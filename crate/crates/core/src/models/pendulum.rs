//! Damped pendulum with a parametrically modulated restoring force,
//! written autonomously by appending a stable limit-cycle oscillator:
//!
//! ```text
//! θ' = ω
//! ω' = −γ ω − (1 + a c) sin θ + u
//! c' = c (1 − c² − s²) − Ω s
//! s' = s (1 − c² − s²) + Ω c
//! ```
//!
//! The defaults put the forcing frequency `Ω` inside the principal
//! parametric-resonance tongue, where the hanging position loses stability
//! to a period-two (relative to the forcing) oscillation. The numbers are
//! repository defaults, not reference values.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::system::ControlledSystem;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendulumParams {
    pub damping: f64,
    pub amplitude: f64,
    pub frequency: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            damping: 0.1,
            amplitude: 0.3,
            frequency: 1.8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PendulumSystem {
    pub params: PendulumParams,
}

impl PendulumSystem {
    pub fn new(params: PendulumParams) -> Self {
        Self { params }
    }

    /// Period of the subharmonic orbit, two forcing periods.
    pub fn orbit_period(&self) -> f64 {
        4.0 * PI / self.params.frequency
    }

    /// Shooting seed for the default parameters.
    pub fn orbit_seed(&self) -> DVector<f64> {
        DVector::from_row_slice(&[0.3151, -0.80175, 1.0, 0.0])
    }
}

impl ControlledSystem for PendulumSystem {
    fn dim(&self) -> usize {
        4
    }

    fn rhs(&self, x: &[f64], u: f64, out: &mut [f64]) {
        let PendulumParams {
            damping,
            amplitude,
            frequency,
        } = self.params;
        let (th, om, c, s) = (x[0], x[1], x[2], x[3]);
        let q = 1.0 - c * c - s * s;
        out[0] = om;
        out[1] = -damping * om - (1.0 + amplitude * c) * th.sin() + u;
        out[2] = c * q - frequency * s;
        out[3] = s * q + frequency * c;
    }

    fn name(&self) -> String {
        "pendulum".into()
    }

    fn jacobian_x(&self, x: &[f64], _u: f64) -> DMatrix<f64> {
        let PendulumParams {
            damping,
            amplitude,
            frequency,
        } = self.params;
        let (th, c, s) = (x[0], x[2], x[3]);
        let q = 1.0 - c * c - s * s;
        DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0,
                1.0,
                0.0,
                0.0,
                -(1.0 + amplitude * c) * th.cos(),
                -damping,
                -amplitude * th.sin(),
                0.0,
                0.0,
                0.0,
                q - 2.0 * c * c,
                -2.0 * c * s - frequency,
                0.0,
                0.0,
                -2.0 * c * s + frequency,
                q - 2.0 * s * s,
            ],
        )
    }

    fn jacobian_u(&self, _x: &[f64], _u: f64) -> DVector<f64> {
        DVector::from_row_slice(&[0.0, 1.0, 0.0, 0.0])
    }

    fn has_analytic_jacobians(&self) -> bool {
        true
    }
}
