use nalgebra::DVector;

use super::design::{GainDesign, SectionMap};
use super::impulse::{smoothstep, ImpulseProfile};
use crate::error::{EtdfError, Result};
use crate::models::PeriodicOrbit;

pub const SECTION_MAX_ITER: usize = 20;

/// Linear time-since-section: `ẋ_*(0)ᵀ(x − x_*(0)) / ‖ẋ_*(0)‖²`.
pub fn section_time(x: &[f64], orbit: &PeriodicOrbit) -> f64 {
    let v = orbit.xdot0();
    let x0 = orbit.x0();
    let mut num = 0.0;
    for i in 0..v.len() {
        num += v[i] * (x[i] - x0[i]);
    }
    num / v.norm_squared()
}

/// Root `t` of `ẋ_*(0)ᵀ(x − x_*(t)) = 0` near `0`, by Newton from the
/// linear estimate.
pub fn section_time_implicit(x: &[f64], orbit: &PeriodicOrbit) -> Result<f64> {
    let v = orbit.xdot0();
    let xv = DVector::from_row_slice(x);
    let scale = v.norm() * xv.amax().max(orbit.x0().amax()).max(1.0);
    let mut t = section_time(x, orbit);
    for _ in 0..SECTION_MAX_ITER {
        let g = v.dot(&(&xv - orbit.state(t)));
        let dg = -v.dot(&orbit.velocity(t));
        if dg == 0.0 || !dg.is_finite() {
            break;
        }
        let step = g / dg;
        t -= step;
        if step.abs() <= 1e-14 * t.abs().max(1.0) && g.abs() <= 1e-12 * scale {
            return Ok(t);
        }
        if step.abs() <= 1e-15 * t.abs().max(1.0) {
            return Ok(t);
        }
    }
    let g = v.dot(&(&xv - orbit.state(t)));
    if g.abs() <= 1e-12 * scale {
        return Ok(t);
    }
    Err(EtdfError::SectionProjectionFailed {
        iterations: SECTION_MAX_ITER,
    })
}

/// `J_ρ(x) = m((2ρ − ‖x − x_*(0)‖)/ρ)`: 1 within `ρ`, 0 beyond `2ρ`.
pub fn bump(x: &[f64], center: &DVector<f64>, rho: f64) -> f64 {
    let mut d2 = 0.0;
    for i in 0..center.len() {
        let d = x[i] - center[i];
        d2 += d * d;
    }
    smoothstep((2.0 * rho - d2.sqrt()) / rho)
}

/// 10% of the orbit's diameter.
pub fn default_rho(orbit: &PeriodicOrbit) -> f64 {
    0.1 * orbit.diameter(256)
}

/// Autonomous gate `x ↦ J_ρ(x)·Δ_δ(t̃(x))` with the regularised impulse.
#[derive(Clone, Debug)]
pub struct StateGate {
    orbit: PeriodicOrbit,
    profile: ImpulseProfile,
    rho: f64,
    section: SectionMap,
}

impl StateGate {
    pub fn new(orbit: &PeriodicOrbit, design: &GainDesign) -> Self {
        let rho = design.rho.unwrap_or_else(|| default_rho(orbit));
        Self {
            orbit: orbit.clone(),
            profile: ImpulseProfile::new(design.delta, orbit.period(), true),
            rho,
            section: design.section,
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let j = bump(x, self.orbit.x0(), self.rho);
        if j == 0.0 {
            return 0.0;
        }
        let t = match self.section {
            SectionMap::Linear => section_time(x, &self.orbit),
            // fall back to the linear estimate where the projection fails
            SectionMap::Implicit => {
                section_time_implicit(x, &self.orbit).unwrap_or_else(|_| section_time(x, &self.orbit))
            }
        };
        j * self.profile.value(t)
    }
}

pub fn state_gate(x: &[f64], orbit: &PeriodicOrbit, design: &GainDesign) -> f64 {
    StateGate::new(orbit, design).value(x)
}
