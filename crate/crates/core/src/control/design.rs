use nalgebra::DVector;
use num_complex::Complex64;

use super::impulse::ImpulseProfile;
use crate::error::{EtdfError, Result};

/// How the feedback gain is switched on along the period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gating {
    /// `Δ_δ(t)`, synchronised with the orbit's period.
    TimeGated,
    /// `J_ρ(x)·Δ_δ(t̃(x))`, autonomous.
    StateGated,
    /// Gain always on (no impulse), used for constant-gain comparisons.
    Constant,
}

/// How a state is mapped to a time since the section at `x_*(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum SectionMap {
    #[default]
    Linear,
    Implicit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GainDesign {
    pub k0: DVector<f64>,
    pub delta: f64,
    pub epsilon: f64,
    /// Gate radius. `None` means 10% of the orbit diameter, resolved by
    /// [`crate::control::default_rho`].
    pub rho: Option<f64>,
    pub targets: Vec<Complex64>,
    pub gating: Gating,
    pub regularised: bool,
    pub section: SectionMap,
}

impl GainDesign {
    pub fn new(k0: DVector<f64>, delta: f64, epsilon: f64) -> Self {
        Self {
            k0,
            delta,
            epsilon,
            rho: None,
            targets: Vec::new(),
            gating: Gating::TimeGated,
            regularised: true,
            section: SectionMap::Linear,
        }
    }

    pub fn with_gating(mut self, gating: Gating) -> Self {
        self.gating = gating;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn with_targets(mut self, targets: Vec<Complex64>) -> Self {
        self.targets = targets;
        self
    }

    pub fn with_regularised(mut self, regularised: bool) -> Self {
        self.regularised = regularised;
        self
    }

    pub fn with_section(mut self, section: SectionMap) -> Self {
        self.section = section;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_k0(mut self, k0: DVector<f64>) -> Self {
        self.k0 = k0;
        self
    }

    /// The state gate always uses the smooth profile.
    pub fn is_regularised(&self) -> bool {
        self.regularised || self.gating == Gating::StateGated
    }

    pub fn impulse(&self, period: f64) -> ImpulseProfile {
        ImpulseProfile::new(self.delta, period, self.is_regularised())
    }

    /// Time profile multiplying `b K₀ᵀ` in the linearised loop.
    pub fn gain_weight(&self, t: f64, period: f64) -> f64 {
        match self.gating {
            Gating::Constant => 1.0,
            _ => self.impulse(period).value(t),
        }
    }

    pub fn breakpoints(&self, period: f64, t0: f64, t1: f64) -> Vec<f64> {
        match self.gating {
            Gating::Constant => Vec::new(),
            _ => self.impulse(period).breakpoints(t0, t1),
        }
    }

    /// Where the gain profile can be nonzero within `[0, T]`.
    pub fn gain_support(&self, period: f64) -> Vec<(f64, f64)> {
        match self.gating {
            Gating::Constant => vec![(0.0, period)],
            _ => self.impulse(period).support(),
        }
    }

    /// `K₀ᵀ b`.
    pub fn kb(&self, b: &DVector<f64>) -> f64 {
        self.k0.dot(b)
    }

    pub fn validate(&self, period: f64) -> Result<()> {
        if self.k0.iter().any(|v| !v.is_finite()) {
            return Err(EtdfError::InvalidDesign("gain has non-finite entries".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(EtdfError::InvalidDesign(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if self.gating != Gating::Constant {
            if !(self.delta > 0.0 && self.delta < period) {
                return Err(EtdfError::InvalidDesign(format!(
                    "delta must lie in (0, T = {period}), got {}",
                    self.delta
                )));
            }
            if !self.impulse(period).fits_period() {
                return Err(EtdfError::InvalidDesign(format!(
                    "regularised impulse needs 2 delta^2 + delta < T, got delta = {}",
                    self.delta
                )));
            }
        }
        if let Some(rho) = self.rho {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(EtdfError::InvalidDesign(format!("rho must be positive, got {rho}")));
            }
        }
        if !self.targets.is_empty() {
            check_targets(&self.targets, self.k0.len())?;
        }
        Ok(())
    }
}

/// Targets must be `n` values, closed under conjugation, with a positive
/// real product.
pub fn check_targets(targets: &[Complex64], n: usize) -> Result<()> {
    if targets.len() != n {
        return Err(EtdfError::InvalidDesign(format!(
            "expected {n} target multipliers, got {}",
            targets.len()
        )));
    }
    if targets.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(EtdfError::InvalidDesign("non-finite target".into()));
    }
    let scale = targets.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut used = vec![false; n];
    for (i, z) in targets.iter().enumerate() {
        if used[i] {
            continue;
        }
        if z.im.abs() <= 1e-12 * scale {
            used[i] = true;
            continue;
        }
        let partner = (0..n).find(|&j| !used[j] && j != i && (targets[j] - z.conj()).norm() <= 1e-12 * scale);
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => {
                return Err(EtdfError::InvalidDesign(format!(
                    "targets are not closed under conjugation (no partner for {z})"
                )))
            }
        }
    }
    let prod: Complex64 = targets.iter().product();
    if !(prod.re > 0.0) || prod.im.abs() > 1e-12 * prod.norm().max(f64::MIN_POSITIVE) {
        return Err(EtdfError::DeterminantObstruction(format!(
            "product of targets is {prod}, must be real and positive"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn valid_design_passes() {
        let d = GainDesign::new(DVector::from_row_slice(&[-0.258, 4.786]), 2.0 * PI / 500.0, 0.04)
            .with_targets(vec![c(0.0, 0.5), c(0.0, -0.5)])
            .with_rho(0.3);
        d.validate(2.0 * PI).unwrap();
    }

    #[test]
    fn rejects_bad_parameters() {
        let base = GainDesign::new(DVector::from_row_slice(&[1.0, 1.0]), 0.1, 0.5);
        let tp = 1.0;
        assert!(base.clone().with_epsilon(0.0).validate(tp).is_err());
        assert!(base.clone().with_epsilon(1.0).validate(tp).is_err());
        assert!(base.clone().with_delta(0.0).validate(tp).is_err());
        assert!(base.clone().with_delta(0.7).validate(tp).is_err());
        assert!(base.clone().with_delta(0.7).with_regularised(false).validate(tp).is_ok());
        // the state gate is always regularised
        assert!(base
            .clone()
            .with_delta(0.7)
            .with_regularised(false)
            .with_gating(Gating::StateGated)
            .validate(tp)
            .is_err());
        assert!(base.clone().with_rho(-1.0).validate(tp).is_err());
        assert!(base.clone().with_delta(5.0).with_gating(Gating::Constant).validate(tp).is_ok());
    }

    #[test]
    fn target_checks() {
        assert!(check_targets(&[c(0.0, 0.5), c(0.0, -0.5)], 2).is_ok());
        assert!(check_targets(&[c(0.1, 0.0), c(0.2, 0.0)], 2).is_ok());
        assert!(matches!(
            check_targets(&[c(0.0, 0.5), c(0.0, 0.5)], 2),
            Err(EtdfError::InvalidDesign(_))
        ));
        assert!(matches!(
            check_targets(&[c(-0.1, 0.0), c(0.2, 0.0)], 2),
            Err(EtdfError::DeterminantObstruction(_))
        ));
        assert!(check_targets(&[c(0.1, 0.0)], 2).is_err());
    }

    #[test]
    fn constant_gating_is_flat() {
        let d = GainDesign::new(DVector::from_row_slice(&[1.0]), 0.1, 0.5).with_gating(Gating::Constant);
        assert_eq!(d.gain_weight(0.7, 1.0), 1.0);
        assert!(d.breakpoints(1.0, 0.0, 1.0).is_empty());
        assert_eq!(d.gain_support(1.0), vec![(0.0, 1.0)]);
    }
}
