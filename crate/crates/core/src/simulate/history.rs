use nalgebra::DVector;

use crate::error::{EtdfError, Result};
use crate::models::PeriodicOrbit;

/// Minimum number of history points per period.
pub const MIN_HISTORY_POINTS: usize = 200;

/// Initial segments of `x` and `x̃` on a uniform mesh over `[−T, 0]`,
/// interpolated by cubic Hermite polynomials.
#[derive(Clone, Debug)]
pub struct HistoryState {
    period: f64,
    mesh: Vec<f64>,
    x: Vec<DVector<f64>>,
    xdot: Vec<DVector<f64>>,
    xtilde: Vec<DVector<f64>>,
    xtilde_dot: Vec<DVector<f64>>,
}

fn centroid(orbit: &PeriodicOrbit) -> DVector<f64> {
    let m = 256;
    (0..m)
        .map(|i| orbit.state(i as f64 * orbit.period() / m as f64))
        .fold(DVector::zeros(orbit.dim()), |acc, v| acc + v)
        / m as f64
}

fn radial(x: &DVector<f64>, c: &DVector<f64>) -> DVector<f64> {
    let d = x - c;
    let r = d.norm();
    if r > 0.0 {
        d / r
    } else {
        d
    }
}

/// Fourth-order central difference.
fn derivative<F: Fn(f64) -> DVector<f64>>(f: &F, t: f64, h: f64) -> DVector<f64> {
    (f(t - 2.0 * h) - f(t - h) * 8.0 + f(t + h) * 8.0 - f(t + 2.0 * h)) / (12.0 * h)
}

impl HistoryState {
    /// Sample `x(t)` and `x̃(t)` for `t ∈ [−T, 0]` on `n_points` uniform
    /// nodes. Slopes come from finite differences of the functions.
    pub fn from_fn<X, Y>(period: f64, n_points: usize, x: X, xtilde: Y) -> Result<Self>
    where
        X: Fn(f64) -> DVector<f64>,
        Y: Fn(f64) -> DVector<f64>,
    {
        if n_points < MIN_HISTORY_POINTS {
            return Err(EtdfError::InvalidDesign(format!(
                "history needs at least {MIN_HISTORY_POINTS} points per period, got {n_points}"
            )));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(EtdfError::InvalidDesign(format!("period must be positive, got {period}")));
        }
        let h = period / (n_points - 1) as f64;
        let mesh: Vec<f64> = (0..n_points).map(|i| -period + i as f64 * h).collect();
        let fd = 1e-3 * period / (2.0 * std::f64::consts::PI);
        let xs: Vec<_> = mesh.iter().map(|&t| x(t)).collect();
        let n = xs[0].len();
        let ys: Vec<_> = mesh.iter().map(|&t| xtilde(t)).collect();
        if xs.iter().chain(&ys).any(|v| v.len() != n) {
            return Err(EtdfError::DimensionMismatch("history vectors differ in length".into()));
        }
        Ok(Self {
            period,
            xdot: mesh.iter().map(|&t| derivative(&x, t, fd)).collect(),
            xtilde_dot: mesh.iter().map(|&t| derivative(&xtilde, t, fd)).collect(),
            mesh,
            x: xs,
            xtilde: ys,
        })
    }

    /// Consistent start `x̃ ≡ x`.
    pub fn consistent<X>(period: f64, n_points: usize, x: X) -> Result<Self>
    where
        X: Fn(f64) -> DVector<f64>,
    {
        Self::from_fn(period, n_points, &x, &x)
    }

    /// `x(t) = x_*(t) + a r̂(t)` with `r̂` the unit vector from the orbit's
    /// centroid to `x_*(t)`, and `x̃ ≡ x`.
    pub fn perturbed_orbit(orbit: &PeriodicOrbit, n_points: usize, amplitude: f64) -> Result<Self> {
        let centroid = centroid(orbit);
        Self::consistent(orbit.period(), n_points, |t| {
            let s = orbit.state(t);
            &s + radial(&s, &centroid) * amplitude
        })
    }

    /// Exact orbit history for `x` and `x̃` except for the current state,
    /// `x(0) = x_*(0) + a r̂(0)`. The displacement enters over the last
    /// mesh interval, so `x` stays continuous.
    pub fn displaced_state(orbit: &PeriodicOrbit, n_points: usize, amplitude: f64) -> Result<Self> {
        let mut hs = Self::perturbed_orbit(orbit, n_points, 0.0)?;
        let c = centroid(orbit);
        let last = hs.mesh.len() - 1;
        let x0 = orbit.state(0.0);
        hs.x[last] = &x0 + radial(&x0, &c) * amplitude;
        Ok(hs)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn mesh(&self) -> &[f64] {
        &self.mesh
    }

    pub fn x_hist(&self) -> &[DVector<f64>] {
        &self.x
    }

    pub fn xtilde_hist(&self) -> &[DVector<f64>] {
        &self.xtilde
    }

    /// `‖x̃(0) − (1−ε) x̃(−T) − ε x(−T)‖`.
    pub fn compatibility_defect(&self, epsilon: f64) -> f64 {
        let last = self.mesh.len() - 1;
        (&self.xtilde[last] - &self.xtilde[0] * (1.0 - epsilon) - &self.x[0] * epsilon).norm()
    }

    fn locate(&self, t: f64) -> (usize, f64, f64) {
        let h = self.mesh[1] - self.mesh[0];
        let last = self.mesh.len() - 2;
        let i = (((t + self.period) / h).floor().max(0.0) as usize).min(last);
        (i, (t - self.mesh[i]) / h, h)
    }

    /// `(x(t), ẋ(t), x̃(t), x̃'(t))` from the Hermite interpolants.
    pub fn eval(&self, t: f64) -> [DVector<f64>; 4] {
        let (i, th, h) = self.locate(t);
        let (x, dx) = hermite(&self.x[i], &self.x[i + 1], &self.xdot[i], &self.xdot[i + 1], th, h);
        let (y, dy) = hermite(
            &self.xtilde[i],
            &self.xtilde[i + 1],
            &self.xtilde_dot[i],
            &self.xtilde_dot[i + 1],
            th,
            h,
        );
        [x, dx, y, dy]
    }
}

/// Cubic Hermite value and slope at `θ ∈ [0, 1]` of an interval of length `h`.
fn hermite(
    y0: &DVector<f64>,
    y1: &DVector<f64>,
    d0: &DVector<f64>,
    d1: &DVector<f64>,
    th: f64,
    h: f64,
) -> (DVector<f64>, DVector<f64>) {
    let mut v = DVector::zeros(y0.len());
    let mut d = DVector::zeros(y0.len());
    hermite_into(y0.as_slice(), y1.as_slice(), d0.as_slice(), d1.as_slice(), th, h, v.as_mut_slice(), d.as_mut_slice());
    (v, d)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn hermite_into(
    y0: &[f64],
    y1: &[f64],
    d0: &[f64],
    d1: &[f64],
    th: f64,
    h: f64,
    val: &mut [f64],
    slope: &mut [f64],
) {
    let t2 = th * th;
    let t3 = t2 * th;
    let (h00, h10, h01, h11) = (2.0 * t3 - 3.0 * t2 + 1.0, t3 - 2.0 * t2 + th, -2.0 * t3 + 3.0 * t2, t3 - t2);
    let (g00, g10, g01, g11) = (6.0 * t2 - 6.0 * th, 3.0 * t2 - 4.0 * th + 1.0, -6.0 * t2 + 6.0 * th, 3.0 * t2 - 2.0 * th);
    for i in 0..y0.len() {
        val[i] = h00 * y0[i] + h10 * h * d0[i] + h01 * y1[i] + h11 * h * d1[i];
        slope[i] = (g00 * y0[i] + g01 * y1[i]) / h + g10 * d0[i] + g11 * d1[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::hopf_orbit;

    #[test]
    fn cubic_data_is_reproduced() {
        let f = |t: f64| DVector::from_row_slice(&[t * t * t - 2.0 * t, 0.5 * t * t]);
        let hs = HistoryState::consistent(3.0, 201, f).unwrap();
        for t in [-2.99, -1.234, -0.5, -1e-3, 0.0] {
            let [x, dx, y, _] = hs.eval(t);
            assert!((x - f(t)).norm() < 1e-12, "t = {t}");
            assert!((dx[0] - (3.0 * t * t - 2.0)).abs() < 1e-9);
            assert!((y - f(t)).norm() < 1e-12);
        }
    }

    #[test]
    fn orbit_history_is_accurate() {
        let orbit = hopf_orbit(-0.25).unwrap();
        let hs = HistoryState::perturbed_orbit(&orbit, 512, 0.0).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..1000 {
            let t = -orbit.period() * i as f64 / 1000.0;
            worst = worst.max((hs.eval(t)[0].clone() - orbit.state(t)).norm());
        }
        assert!(worst < 1e-10, "{worst}");
        assert!(hs.compatibility_defect(0.04) < 1e-14);
    }

    #[test]
    fn radial_perturbation_scales_the_orbit() {
        let orbit = hopf_orbit(-0.25).unwrap();
        let hs = HistoryState::perturbed_orbit(&orbit, 256, 1e-3).unwrap();
        for (t, x) in hs.mesh().iter().zip(hs.x_hist()) {
            assert!((x.norm() - 0.501).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn displaced_state_moves_only_the_endpoint() {
        let orbit = hopf_orbit(-0.25).unwrap();
        let hs = HistoryState::displaced_state(&orbit, 256, 1e-3).unwrap();
        let last = hs.mesh().len() - 1;
        assert!((hs.x_hist()[last].norm() - 0.501).abs() < 1e-12);
        assert!((hs.x_hist()[last - 1].norm() - 0.5).abs() < 1e-12);
        assert!(hs.xtilde_hist().iter().all(|v| (v.norm() - 0.5).abs() < 1e-12));
        assert!(hs.compatibility_defect(0.04) < 1e-14);
    }

    #[test]
    fn inconsistent_start_is_recorded() {
        let hs = HistoryState::from_fn(1.0, 200, |_| DVector::from_element(1, 1.0), |_| DVector::from_element(1, 0.0)).unwrap();
        assert!((hs.compatibility_defect(0.25) - 0.25).abs() < 1e-15);
        assert!(HistoryState::consistent(1.0, 50, |_| DVector::zeros(1)).is_err());
    }
}
