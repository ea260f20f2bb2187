use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{EtdfError, Result};
use crate::ode::Trajectory;

type CurveFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrbitSource {
    Analytic,
    Shooting,
}

/// A `T`-periodic solution `x_*` with its velocity.
#[derive(Clone)]
pub struct PeriodicOrbit {
    period: f64,
    dim: usize,
    state: CurveFn,
    velocity: CurveFn,
    source: OrbitSource,
    x0: DVector<f64>,
    xdot0: DVector<f64>,
}

impl fmt::Debug for PeriodicOrbit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicOrbit")
            .field("period", &self.period)
            .field("source", &self.source)
            .field("x0", &self.x0.as_slice())
            .field("xdot0", &self.xdot0.as_slice())
            .finish()
    }
}

impl PeriodicOrbit {
    /// `state` and `velocity` are evaluated on `[0, T)`; arguments are
    /// wrapped before the call.
    pub fn new<X, V>(period: f64, state: X, velocity: V, source: OrbitSource) -> Result<Self>
    where
        X: Fn(f64) -> DVector<f64> + Send + Sync + 'static,
        V: Fn(f64) -> DVector<f64> + Send + Sync + 'static,
    {
        if !(period > 0.0 && period.is_finite()) {
            return Err(EtdfError::NoPeriodicOrbit(format!("period must be positive, got {period}")));
        }
        let x0 = state(0.0);
        let xdot0 = velocity(0.0);
        if xdot0.len() != x0.len() {
            return Err(EtdfError::DimensionMismatch("orbit state and velocity differ in length".into()));
        }
        let scale = x0.amax().max(1.0);
        if xdot0.norm() <= 1e-12 * scale {
            return Err(EtdfError::NoPeriodicOrbit("velocity vanishes at the anchor point".into()));
        }
        Ok(Self {
            period,
            dim: x0.len(),
            state: Arc::new(state),
            velocity: Arc::new(velocity),
            source,
            x0,
            xdot0,
        })
    }

    /// Orbit backed by a dense trajectory over `[0, T]`; the velocity is
    /// supplied separately (usually `f(x_*(t), 0)`).
    pub fn from_trajectory<V>(traj: Trajectory, velocity: V) -> Result<Self>
    where
        V: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    {
        let period = traj.t_end() - traj.t_start();
        let t0 = traj.t_start();
        let traj = Arc::new(traj);
        let tr = traj.clone();
        let state = move |t: f64| DVector::from_vec(tr.eval(t0 + t));
        let tr = traj;
        let vel = move |t: f64| velocity(&tr.eval(t0 + t));
        Self::new(period, state, vel, OrbitSource::Shooting)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> OrbitSource {
        self.source
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn xdot0(&self) -> &DVector<f64> {
        &self.xdot0
    }

    fn wrap(&self, t: f64) -> f64 {
        let s = t.rem_euclid(self.period);
        if s >= self.period {
            0.0
        } else {
            s
        }
    }

    pub fn state(&self, t: f64) -> DVector<f64> {
        (self.state)(self.wrap(t))
    }

    pub fn velocity(&self, t: f64) -> DVector<f64> {
        (self.velocity)(self.wrap(t))
    }

    /// `‖x_*(T) − x_*(0)‖` of the underlying representation (no wrapping).
    pub fn closure_defect(&self) -> f64 {
        ((self.state)(self.period) - &self.x0).norm()
    }

    /// Largest pairwise distance between `samples` points on the orbit.
    pub fn diameter(&self, samples: usize) -> f64 {
        let pts: Vec<DVector<f64>> = (0..samples)
            .map(|i| self.state(i as f64 * self.period / samples as f64))
            .collect();
        let mut d: f64 = 0.0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                d = d.max((&pts[i] - &pts[j]).norm());
            }
        }
        d
    }
}
