use nalgebra::{DMatrix, DVector};

use super::orbit::PeriodicOrbit;
use super::system::SharedSystem;
use crate::error::{EtdfError, Result};
use crate::ode::{integrate, IntegratorOptions, Linearization};

pub const SHOOTING_MAX_ITER: usize = 50;

#[derive(Clone, Debug)]
pub struct ShootingResult {
    pub orbit: PeriodicOrbit,
    /// Monodromy of the variational equation at the converged point.
    pub monodromy: DMatrix<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Flow over `[0, T]` together with its state Jacobian.
fn flow_with_jacobian(system: &SharedSystem, x0: &DVector<f64>, period: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = system.dim();
    let mut y0 = vec![0.0; n + n * n];
    y0[..n].copy_from_slice(x0.as_slice());
    for i in 0..n {
        y0[n + i * n + i] = 1.0;
    }
    let sys = system.clone();
    let opts = IntegratorOptions::default().endpoint_only();
    let traj = integrate(
        move |_, y, dy| {
            let (x, phi) = y.split_at(n);
            let (dx, dphi) = dy.split_at_mut(n);
            sys.rhs(x, 0.0, dx);
            let j = sys.jacobian_x(x, 0.0);
            let phi = DMatrix::from_column_slice(n, n, phi);
            dphi.copy_from_slice((j * phi).as_slice());
        },
        0.0,
        period,
        &y0,
        &[],
        &opts,
    )?;
    let y = traj.last_state();
    Ok((
        DVector::from_row_slice(&y[..n]),
        DMatrix::from_column_slice(n, n, &y[n..]),
    ))
}

/// Newton shooting for an autonomous periodic orbit with unknown period.
///
/// Unknowns are `(x(0), T)`; equations are `x(T) − x(0) = 0` and the phase
/// anchor `f(x_guess)ᵀ (x(0) − x_guess) = 0`.
pub fn find_orbit_shooting(
    system: SharedSystem,
    t_guess: f64,
    x_guess: &DVector<f64>,
    tol: f64,
) -> Result<ShootingResult> {
    let n = system.dim();
    if x_guess.len() != n {
        return Err(EtdfError::DimensionMismatch(format!(
            "seed has length {}, system dimension is {n}",
            x_guess.len()
        )));
    }
    if !(t_guess > 0.0) {
        return Err(EtdfError::OrbitNotFound(format!("period guess {t_guess} is not positive")));
    }
    let anchor = system.eval(x_guess.as_slice(), 0.0);
    let scale = x_guess.amax().max(1.0);
    if anchor.norm() <= 1e-12 * scale {
        return Err(EtdfError::OrbitNotFound(
            "singular phase condition: the seed is an equilibrium".into(),
        ));
    }
    let eval = |x: &DVector<f64>, period: f64| -> Result<(DVector<f64>, DVector<f64>, DMatrix<f64>)> {
        let (xt, m) = flow_with_jacobian(&system, x, period)?;
        let mut r = DVector::zeros(n + 1);
        r.rows_mut(0, n).copy_from(&(&xt - x));
        r[n] = anchor.dot(&(x - x_guess));
        if r.iter().any(|v| !v.is_finite()) {
            return Err(EtdfError::OrbitNotFound("non-finite shooting residual".into()));
        }
        Ok((r, xt, m))
    };
    let mut x = x_guess.clone();
    let mut period = t_guess;
    let (mut r, mut xt, mut m) = eval(&x, period)?;
    let mut iterations = 0;
    loop {
        let residual = r.norm();
        if residual <= tol * x.amax().max(1.0) {
            let orbit = dense_orbit(&system, &x, period)?;
            return Ok(ShootingResult {
                orbit,
                monodromy: m,
                iterations,
                residual,
            });
        }
        if iterations >= SHOOTING_MAX_ITER {
            return Err(EtdfError::OrbitNotFound(format!(
                "Newton did not converge in {SHOOTING_MAX_ITER} iterations (residual {residual:.3e})"
            )));
        }
        let ft = system.eval(xt.as_slice(), 0.0);
        let mut jac = DMatrix::zeros(n + 1, n + 1);
        jac.view_mut((0, 0), (n, n)).copy_from(&(&m - DMatrix::identity(n, n)));
        jac.view_mut((0, n), (n, 1)).copy_from(&ft);
        jac.view_mut((n, 0), (1, n)).copy_from(&anchor.transpose());
        let dz = jac
            .lu()
            .solve(&(-&r))
            .ok_or_else(|| EtdfError::OrbitNotFound("singular Newton matrix".into()))?;
        iterations += 1;
        // backtrack when the full step blows up or does not reduce the residual
        let mut alpha = 1.0;
        loop {
            let xn = &x + dz.rows(0, n) * alpha;
            let tn = period + dz[n] * alpha;
            if tn > 0.0 {
                if let Ok((rn, xtn, mn)) = eval(&xn, tn) {
                    if rn.norm() < residual || alpha < 1.0 / 64.0 {
                        x = xn;
                        period = tn;
                        r = rn;
                        xt = xtn;
                        m = mn;
                        break;
                    }
                }
            }
            alpha *= 0.5;
            if alpha < 1.0 / 1024.0 {
                return Err(EtdfError::OrbitNotFound(format!(
                    "line search failed at iteration {iterations} (residual {residual:.3e})"
                )));
            }
        }
    }
}

fn dense_orbit(system: &SharedSystem, x0: &DVector<f64>, period: f64) -> Result<PeriodicOrbit> {
    let sys = system.clone();
    let opts = IntegratorOptions::default().with_h_max(period / 512.0);
    let traj = integrate(|_, x, dx| sys.rhs(x, 0.0, dx), 0.0, period, x0.as_slice(), &[], &opts)?;
    let sys = system.clone();
    let orbit = PeriodicOrbit::from_trajectory(traj, move |x| sys.eval(x, 0.0))?;
    let defect = orbit.closure_defect();
    if defect > 1e-8 * x0.amax().max(1.0) {
        return Err(EtdfError::OrbitNotFound(format!("orbit does not close (defect {defect:.3e})")));
    }
    Ok(orbit)
}

/// `A(t) = ∂ₓf(x_*(t), 0)`, `b(t) = ∂ᵤf(x_*(t), 0)`.
pub fn linearize_along_orbit(system: SharedSystem, orbit: &PeriodicOrbit) -> Result<Linearization> {
    if system.dim() != orbit.dim() {
        return Err(EtdfError::DimensionMismatch(format!(
            "system dimension {}, orbit dimension {}",
            system.dim(),
            orbit.dim()
        )));
    }
    let (oa, ob) = (orbit.clone(), orbit.clone());
    let (sa, sb) = (system.clone(), system);
    Linearization::new(
        orbit.period(),
        move |t| sa.jacobian_x(oa.state(t).as_slice(), 0.0),
        move |t| sb.jacobian_u(ob.state(t).as_slice(), 0.0),
    )
}
