use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::integrator::{integrate, IntegratorOptions};
use crate::control::GainDesign;
use crate::error::{EtdfError, Result};

pub type MatrixFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// `T`-periodic linearisation `A(t) = ∂ₓf(x_*(t), 0)`, `b(t) = ∂ᵤf(x_*(t), 0)`
/// along a periodic orbit.
#[derive(Clone)]
pub struct Linearization {
    period: f64,
    dim: usize,
    a: MatrixFn,
    b: VectorFn,
}

impl fmt::Debug for Linearization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Linearization")
            .field("period", &self.period)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl Linearization {
    pub fn new<A, B>(period: f64, a: A, b: B) -> Result<Self>
    where
        A: Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
        B: Fn(f64) -> DVector<f64> + Send + Sync + 'static,
    {
        if !(period > 0.0 && period.is_finite()) {
            return Err(EtdfError::InvalidDesign(format!("period must be positive, got {period}")));
        }
        let a0 = a(0.0);
        let b0 = b(0.0);
        let dim = a0.nrows();
        if dim == 0 || a0.ncols() != dim || b0.len() != dim {
            return Err(EtdfError::DimensionMismatch(format!(
                "A(0) is {}x{}, b(0) has length {}",
                a0.nrows(),
                a0.ncols(),
                b0.len()
            )));
        }
        Ok(Self {
            period,
            dim,
            a: Arc::new(a),
            b: Arc::new(b),
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a(&self, t: f64) -> DMatrix<f64> {
        (self.a)(t)
    }

    pub fn b(&self, t: f64) -> DVector<f64> {
        (self.b)(t)
    }

    /// `‖A(T) − A(0)‖ + ‖b(T) − b(0)‖`.
    pub fn periodicity_defect(&self) -> f64 {
        (self.a(self.period) - self.a(0.0)).norm() + (self.b(self.period) - self.b(0.0)).norm()
    }
}

/// `Y(t1)` for `Y' = gen(t) Y`, `Y(t0) = I`.
pub fn fundamental_matrix<G>(
    gen: G,
    t0: f64,
    t1: f64,
    breakpoints: &[f64],
    opts: &IntegratorOptions,
) -> Result<DMatrix<f64>>
where
    G: Fn(f64) -> DMatrix<f64>,
{
    let n = gen(t0).nrows();
    let y0 = DMatrix::<f64>::identity(n, n);
    let opts = opts.clone().endpoint_only();
    let traj = integrate(
        |t, y, dy| {
            let g = gen(t);
            let ym = DMatrix::from_column_slice(n, n, y);
            dy.copy_from_slice((g * ym).as_slice());
        },
        t0,
        t1,
        y0.as_slice(),
        breakpoints,
        &opts,
    )?;
    Ok(DMatrix::from_column_slice(n, n, traj.last_state()))
}

/// Complex fundamental matrix, integrated in realified form
/// `[Yr; Yi]' = [[Gr, −Gi], [Gi, Gr]] [Yr; Yi]`.
pub fn fundamental_matrix_complex<G>(
    gen: G,
    t0: f64,
    t1: f64,
    breakpoints: &[f64],
    opts: &IntegratorOptions,
) -> Result<DMatrix<Complex64>>
where
    G: Fn(f64) -> DMatrix<Complex64>,
{
    let n = gen(t0).nrows();
    let nn = n * n;
    let mut y0 = vec![0.0; 2 * nn];
    for i in 0..n {
        y0[i * n + i] = 1.0;
    }
    let opts = opts.clone().endpoint_only();
    let traj = integrate(
        |t, y, dy| {
            let g = gen(t);
            let gr = g.map(|z| z.re);
            let gi = g.map(|z| z.im);
            let yr = DMatrix::from_column_slice(n, n, &y[..nn]);
            let yi = DMatrix::from_column_slice(n, n, &y[nn..]);
            let dr = &gr * &yr - &gi * &yi;
            let di = &gi * &yr + &gr * &yi;
            dy[..nn].copy_from_slice(dr.as_slice());
            dy[nn..].copy_from_slice(di.as_slice());
        },
        t0,
        t1,
        &y0,
        breakpoints,
        &opts,
    )?;
    let y = traj.last_state();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(y[j * n + i], y[nn + j * n + i])
    }))
}

/// Monodromy matrix `P0` of the uncontrolled linearisation over one period.
pub fn monodromy_uncontrolled(lin: &Linearization, opts: &IntegratorOptions) -> Result<DMatrix<f64>> {
    let p0 = fundamental_matrix(|t| lin.a(t), 0.0, lin.period(), &[], opts)?;
    check_monodromy(&p0)?;
    Ok(p0)
}

/// A flow map has positive determinant; anything else means the
/// integration went wrong.
pub fn check_monodromy(p0: &DMatrix<f64>) -> Result<()> {
    let det = p0.determinant();
    if !(det > 0.0) {
        return Err(EtdfError::InconsistentMonodromy { det });
    }
    Ok(())
}

/// Monodromy `P(μ; δ, K₀)` of `y' = [A(t) − μ g(t) b(t) K₀ᵀ] y` over `[0, T]`,
/// where `g` is the gain profile of `design` (impulse or constant).
pub fn monodromy_parametrized(
    lin: &Linearization,
    mu: Complex64,
    design: &GainDesign,
    opts: &IntegratorOptions,
) -> Result<DMatrix<Complex64>> {
    let period = lin.period();
    if design.k0.len() != lin.dim() {
        return Err(EtdfError::DimensionMismatch(format!(
            "gain has length {}, system dimension is {}",
            design.k0.len(),
            lin.dim()
        )));
    }
    let breakpoints = design.breakpoints(period, 0.0, period);
    let k0t = design.k0.transpose();
    fundamental_matrix_complex(
        |t| {
            let g = design.gain_weight(t, period);
            let a = lin.a(t);
            if g == 0.0 || mu == Complex64::new(0.0, 0.0) {
                return a.map(|v| Complex64::new(v, 0.0));
            }
            let bk = lin.b(t) * &k0t;
            DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
                Complex64::new(a[(i, j)], 0.0) - mu * (g * bk[(i, j)])
            })
        },
        0.0,
        period,
        &breakpoints,
        opts,
    )
}
