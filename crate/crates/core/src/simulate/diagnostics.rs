use nalgebra::DVector;

use crate::error::{EtdfError, Result};
use crate::models::PeriodicOrbit;

/// Distances below this are treated as noise by [`estimate_decay`].
pub const DISTANCE_FLOOR: f64 = 1e-13;

const ALIGN_SAMPLES: usize = 128;
const ALIGN_COARSE: usize = 64;

/// Per-period record of a closed-loop run.
#[derive(Clone, Debug, Default)]
pub struct SimDiagnostics {
    /// `max |u|` over each completed period.
    pub max_control: Vec<f64>,
    /// `sup_t ‖x(t) − x_*(t + s*)‖` over each completed period.
    pub orbit_distance: Vec<f64>,
    /// Phase shift `s* ∈ [0, T)` of each period.
    pub phase: Vec<f64>,
    /// Period index at which the state left the escape ball.
    pub diverged_at: Option<usize>,
    /// Integrator failure that ended the run, if any.
    pub failure: Option<String>,
    /// `‖x̃(0) − (1−ε) x̃(−T) − ε x(−T)‖` of the initial history.
    pub initial_compatibility_defect: f64,
    pub decay: Option<DecayEstimate>,
}

impl SimDiagnostics {
    pub fn periods(&self) -> usize {
        self.max_control.len()
    }

    pub fn converged(&self) -> bool {
        self.diverged_at.is_none() && self.failure.is_none() && self.decay.is_some_and(|d| d.rate < 1.0)
    }

    /// Last-period over first-period maximal control.
    pub fn control_ratio(&self) -> Option<f64> {
        match (self.max_control.first(), self.max_control.last()) {
            (Some(&a), Some(&b)) if a > 0.0 => Some(b / a),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayEstimate {
    /// `e^{slope}` of the log-distance fit: the empirical dominant multiplier.
    pub rate: f64,
    pub first: usize,
    pub last: usize,
    pub growing: bool,
}

/// `s* ∈ [0, T)` minimising `∫₀ᵀ ‖x(t) − x_*(t + s)‖² dt`, where `segment(t)`
/// gives `x` on one period `t ∈ [0, T]`.
pub fn phase_align<F>(segment: F, orbit: &PeriodicOrbit) -> f64
where
    F: Fn(f64) -> DVector<f64>,
{
    let period = orbit.period();
    let ts: Vec<f64> = (0..ALIGN_SAMPLES).map(|i| period * i as f64 / ALIGN_SAMPLES as f64).collect();
    let xs: Vec<DVector<f64>> = ts.iter().map(|&t| segment(t)).collect();
    let cost = |s: f64| -> f64 {
        ts.iter()
            .zip(&xs)
            .map(|(&t, x)| (x - orbit.state(t + s)).norm_squared())
            .sum()
    };
    let h = period / ALIGN_COARSE as f64;
    let (mut best, mut best_cost) = (0.0, f64::INFINITY);
    for i in 0..ALIGN_COARSE {
        let s = i as f64 * h;
        let c = cost(s);
        if c < best_cost {
            best = s;
            best_cost = c;
        }
    }
    // golden section on the bracket around the coarse minimum
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (best - h, best + h);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    while b - a > 1e-11 * period {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d);
        }
    }
    let s = (0.5 * (a + b)).rem_euclid(period);
    if s >= period {
        0.0
    } else {
        s
    }
}

/// Least-squares slope of `ln dₖ` against `k` over `distances[skip..]`,
/// stopping at the first distance below [`DISTANCE_FLOOR`].
pub fn fit_decay(distances: &[f64], skip: usize) -> Result<DecayEstimate> {
    let end = distances
        .iter()
        .enumerate()
        .skip(skip)
        .find(|(_, &d)| !(d >= DISTANCE_FLOOR && d.is_finite()))
        .map_or(distances.len(), |(i, _)| i);
    if end < skip + 5 {
        return Err(EtdfError::InsufficientData(format!(
            "decay fit needs 5 periods above the {DISTANCE_FLOOR:e} floor, got {}",
            end.saturating_sub(skip)
        )));
    }
    let pts: Vec<(f64, f64)> = (skip..end).map(|k| (k as f64, distances[k].ln())).collect();
    let m = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
    let rate = (sxy / sxx).exp();
    Ok(DecayEstimate {
        rate,
        first: skip,
        last: end - 1,
        growing: rate > 1.0,
    })
}

/// Decay fit over the orbit distances, discarding the first tenth of the
/// run as transient.
pub fn estimate_decay(diag: &SimDiagnostics) -> Result<DecayEstimate> {
    fit_decay(&diag.orbit_distance, diag.orbit_distance.len() / 10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::hopf_orbit;

    #[test]
    fn exact_shift_is_recovered() {
        let orbit = hopf_orbit(-0.25).unwrap();
        let s = phase_align(|t| orbit.state(t + 0.3), &orbit);
        assert!((s - 0.3).abs() < 1e-4, "{s}");
        let s0 = phase_align(|t| orbit.state(t), &orbit);
        assert!(s0.min(orbit.period() - s0) < 1e-8, "{s0}");
        let late = phase_align(|t| orbit.state(t + 6.2), &orbit);
        assert!((late - 6.2).abs() < 1e-4);
    }

    #[test]
    fn noisy_shift_is_recovered() {
        let orbit = hopf_orbit(-0.25).unwrap();
        let noise = |t: f64| DVector::from_row_slice(&[(7.0 * t).sin(), (13.0 * t + 1.0).cos()]) * 1e-4;
        let s = phase_align(|t| orbit.state(t + 1.1) + noise(t), &orbit);
        assert!((s - 1.1).abs() < 1e-3, "{s}");
    }

    #[test]
    fn geometric_decay_is_fitted() {
        let d: Vec<f64> = (0..40).map(|k| 0.9f64.powi(k)).collect();
        let fit = fit_decay(&d, 0).unwrap();
        assert!((fit.rate - 0.9).abs() < 1e-6);
        assert!(!fit.growing);
        let diag = SimDiagnostics {
            orbit_distance: d,
            ..Default::default()
        };
        assert!((estimate_decay(&diag).unwrap().rate - 0.9).abs() < 1e-6);
    }

    #[test]
    fn floor_truncates_the_fit() {
        let mut d: Vec<f64> = (0..30).map(|k| 0.5f64.powi(k)).collect();
        d.extend([1e-14, 1e-5, 1e-5]);
        let fit = fit_decay(&d, 0).unwrap();
        assert_eq!(fit.last, 29);
        assert!((fit.rate - 0.5).abs() < 1e-9);
        assert!(fit_decay(&[1.0, 0.5, 1e-20], 0).is_err());
    }

    #[test]
    fn growth_is_flagged() {
        let d: Vec<f64> = (0..8).map(|k| 1e-6 * 23.14f64.powi(k)).collect();
        let fit = fit_decay(&d, 0).unwrap();
        assert!(fit.growing && (fit.rate - 23.14).abs() < 1e-6);
    }
}
