use nalgebra::{DMatrix, DVector};

use super::charfn::{CharFnOptions, Seeds};
use super::types::{FloquetSpectrum, Method, Multiplier};
use crate::control::{GainDesign, Gating};
use crate::error::{EtdfError, Result};
use crate::linalg::{condition_number, eigenvalues};
use crate::ode::{integrate, IntegratorOptions, Linearization};

/// Eigenvalues closer than this to `1 − ε` are taken as the exact
/// essential-spectrum cluster and dropped.
pub const ESSENTIAL_CLUSTER_TOL: f64 = 1e-7;

/// Mesh nodes in `[0, T]` carrying the memory state `x̃`.
///
/// The memory only acts through the gain, so nodes are placed on the gain
/// support; elsewhere `x̃` just decays by `1 − ε` per period and decouples.
/// The support is split at the profile's breakpoints: the plateau gets
/// `N/2` intervals and each smooth ramp `N/4`. A constant gain gets `N`
/// intervals on `[0, T]`. A node at `T` is not a state: it equals
/// `(1 − ε) x̃(0) + ε x(0)`.
pub fn operator_mesh(design: &GainDesign, period: f64, n: usize) -> Vec<f64> {
    let pieces: Vec<(f64, f64, usize)> = match design.gating {
        Gating::Constant => vec![(0.0, period, n)],
        _ => {
            let d = design.delta;
            if design.is_regularised() {
                let d2 = d * d;
                let q = (n / 4).max(2);
                vec![(0.0, d, (n / 2).max(2)), (d, d + d2, q), (period - d2, period, q)]
            } else {
                vec![(0.0, d, n)]
            }
        }
    };
    let mut nodes = Vec::new();
    for (a, b, m) in pieces {
        for i in 0..=m {
            nodes.push(a + (b - a) * i as f64 / m as f64);
        }
    }
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * period);
    nodes
}

struct OperatorSetup<'a> {
    lin: &'a Linearization,
    design: &'a GainDesign,
    nodes: Vec<f64>,
    /// Number of state nodes (all nodes below `T`).
    m: usize,
    breakpoints: Vec<f64>,
    opts: IntegratorOptions,
}

impl OperatorSetup<'_> {
    fn dim(&self) -> usize {
        let n = self.lin.dim();
        n + n * self.m
    }

    /// Image of one state vector under the period map.
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let n = self.lin.dim();
        let period = self.lin.period();
        let eps = self.design.epsilon;
        let y0 = &v[..n];
        let mut tilde: Vec<DVector<f64>> = (0..self.m)
            .map(|j| DVector::from_row_slice(&v[n + j * n..n + (j + 1) * n]))
            .collect();
        if self.nodes.len() > self.m {
            tilde.push(&tilde[0] * (1.0 - eps) + DVector::from_row_slice(y0) * eps);
        }
        let nodes = &self.nodes;
        let k0 = &self.design.k0;
        let interp = |t: f64| -> DVector<f64> {
            let last = nodes.len() - 1;
            if t <= nodes[0] {
                return tilde[0].clone();
            }
            if t >= nodes[last] {
                return tilde[last].clone();
            }
            let j = nodes.partition_point(|&s| s <= t) - 1;
            let w = (t - nodes[j]) / (nodes[j + 1] - nodes[j]);
            &tilde[j] * (1.0 - w) + &tilde[j + 1] * w
        };
        let traj = integrate(
            |t, y, dy| {
                let a = self.lin.a(t);
                let yv = DVector::from_row_slice(y);
                let mut f = &a * &yv;
                let g = self.design.gain_weight(t, period);
                if g != 0.0 {
                    let u = g * k0.dot(&(interp(t) - &yv));
                    f += self.lin.b(t) * u;
                }
                dy.copy_from_slice(f.as_slice());
            },
            0.0,
            period,
            y0,
            &self.breakpoints,
            &self.opts,
        )?;
        let mut out = vec![0.0; self.dim()];
        out[..n].copy_from_slice(traj.last_state());
        let mut ys = vec![0.0; n];
        for j in 0..self.m {
            traj.eval_into(nodes[j], &mut ys);
            for i in 0..n {
                out[n + j * n + i] = (1.0 - eps) * tilde[j][i] + eps * ys[i];
            }
        }
        Ok(out)
    }
}

/// Real matrix of the discretised period map on `(x(0), x̃ at mesh nodes)`.
pub fn operator_matrix(
    lin: &Linearization,
    design: &GainDesign,
    n: usize,
    opts: &IntegratorOptions,
    parallel: bool,
) -> Result<DMatrix<f64>> {
    let period = lin.period();
    let nodes = operator_mesh(design, period, n);
    let m = nodes.iter().filter(|&&s| s < period).count();
    let mut breakpoints = nodes.clone();
    breakpoints.extend(design.breakpoints(period, 0.0, period));
    breakpoints.sort_by(f64::total_cmp);
    let setup = OperatorSetup {
        lin,
        design,
        nodes,
        m,
        breakpoints,
        opts: opts.clone(),
    };
    let dim = setup.dim();
    let column = |k: usize| {
        let mut e = vec![0.0; dim];
        e[k] = 1.0;
        setup.apply(&e)
    };
    let cols: Vec<Result<Vec<f64>>> = if parallel {
        let workers = std::thread::available_parallelism().map(|v| v.get()).unwrap_or(1).min(dim);
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let column = &column;
                    scope.spawn(move || (w..dim).step_by(workers).map(|k| (k, column(k))).collect::<Vec<_>>())
                })
                .collect();
            let mut out: Vec<Option<Result<Vec<f64>>>> = (0..dim).map(|_| None).collect();
            for h in handles {
                for (k, c) in h.join().expect("operator column worker panicked") {
                    out[k] = Some(c);
                }
            }
            out.into_iter().map(|c| c.expect("every column assigned")).collect()
        })
    } else {
        (0..dim).map(column).collect()
    };
    let mut mat = DMatrix::zeros(dim, dim);
    for (k, c) in cols.into_iter().enumerate() {
        let c = c?;
        mat.column_mut(k).copy_from_slice(&c);
    }
    Ok(mat)
}

/// Spectrum of the discretised period map, with eigenvalues of modulus
/// below `(1 − ε)/2` and the exact `1 − ε` cluster removed.
pub fn operator_spectrum(
    lin: &Linearization,
    design: &GainDesign,
    n: usize,
    opts: &CharFnOptions,
) -> Result<FloquetSpectrum> {
    if n < 32 {
        return Err(EtdfError::InvalidDesign(format!("operator mesh needs N >= 32, got {n}")));
    }
    design.validate(lin.period())?;
    let mat = operator_matrix(lin, design, n, &opts.integrator, opts.parallel)?;
    let ev = eigenvalues(&mat).map_err(|e| {
        EtdfError::EigenFailure(format!(
            "{e}; operator matrix {}x{}, cond ~ {:.3e}",
            mat.nrows(),
            mat.ncols(),
            condition_number(&mat)
        ))
    })?;
    let eps = design.epsilon;
    let seeds = Seeds::compute(lin, design, opts)?;
    let multipliers = ev
        .into_iter()
        .filter(|z| z.norm() >= (1.0 - eps) / 2.0 && (z - (1.0 - eps)).norm() >= ESSENTIAL_CLUSTER_TOL)
        .map(|value| {
            let (class, index) = seeds.classify(value, opts.trivial_tol);
            Multiplier {
                value,
                class,
                residual: 0.0,
                index,
            }
        })
        .collect();
    let mut spec = FloquetSpectrum {
        multipliers,
        method: Method::Operator,
        epsilon: eps,
        delta: design.delta,
        notes: Vec::new(),
    };
    spec.sort();
    Ok(spec)
}

/// Observed order `log₂(|λ_N − λ_2N| / |λ_2N − λ_4N|)`.
pub fn richardson_order(coarse: num_complex::Complex64, mid: num_complex::Complex64, fine: num_complex::Complex64) -> f64 {
    ((coarse - mid).norm() / (mid - fine).norm()).log2()
}
