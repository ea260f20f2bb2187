use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

/// Scalar-input plant `ẋ = f(x, u)`.
pub trait ControlledSystem: Send + Sync {
    fn dim(&self) -> usize;

    fn rhs(&self, x: &[f64], u: f64, out: &mut [f64]);

    fn name(&self) -> String {
        "system".into()
    }

    fn jacobian_x(&self, x: &[f64], u: f64) -> DMatrix<f64> {
        fd_jacobian_x(self, x, u)
    }

    fn jacobian_u(&self, x: &[f64], u: f64) -> DVector<f64> {
        fd_jacobian_u(self, x, u)
    }

    /// Whether `jacobian_x`/`jacobian_u` are hand-written.
    fn has_analytic_jacobians(&self) -> bool {
        false
    }

    fn eval(&self, x: &[f64], u: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.rhs(x, u, out.as_mut_slice());
        out
    }
}

pub type SharedSystem = Arc<dyn ControlledSystem>;

fn fd_step(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

/// Central finite-difference `∂f/∂x`.
pub fn fd_jacobian_x<S: ControlledSystem + ?Sized>(sys: &S, x: &[f64], u: f64) -> DMatrix<f64> {
    let n = sys.dim();
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        let h = fd_step(x[j]);
        xp[j] = x[j] + h;
        sys.rhs(&xp, u, &mut fp);
        xp[j] = x[j] - h;
        sys.rhs(&xp, u, &mut fm);
        xp[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// Central finite-difference `∂f/∂u`.
pub fn fd_jacobian_u<S: ControlledSystem + ?Sized>(sys: &S, x: &[f64], u: f64) -> DVector<f64> {
    let n = sys.dim();
    let h = fd_step(u);
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    sys.rhs(x, u + h, &mut fp);
    sys.rhs(x, u - h, &mut fm);
    DVector::from_fn(n, |i, _| (fp[i] - fm[i]) / (2.0 * h))
}

/// Largest deviation between the system's Jacobians and finite differences,
/// relative to `max(1, ‖J‖)`.
pub fn jacobian_mismatch<S: ControlledSystem + ?Sized>(sys: &S, x: &[f64], u: f64) -> f64 {
    let jx = sys.jacobian_x(x, u);
    let ju = sys.jacobian_u(x, u);
    let fx = fd_jacobian_x(sys, x, u);
    let fu = fd_jacobian_u(sys, x, u);
    let ex = (&jx - fx).amax() / jx.amax().max(1.0);
    let eu = (&ju - fu).amax() / ju.amax().max(1.0);
    ex.max(eu)
}
