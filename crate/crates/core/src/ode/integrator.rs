//! Adaptive Dormand–Prince 5(4) integration with dense output.
//!
//! Right-hand sides may be piecewise smooth in `t`. Their breakpoints are
//! declared up front; every breakpoint becomes a step boundary and the
//! method restarts there. Stage times are kept strictly inside the current
//! breakpoint segment, so a piecewise definition is always evaluated on the
//! branch that belongs to the segment (one-sided values at the edges).

use crate::error::{EtdfError, Result};

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Error estimate weights (5th minus 4th order).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Continuous extension (Shampine), fourth order.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_init: Option<f64>,
    pub max_steps: usize,
    /// Record the continuous extension of every step.
    pub dense: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: f64::INFINITY,
            h_init: None,
            max_steps: 5_000_000,
            dense: true,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tol(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn endpoint_only(mut self) -> Self {
        self.dense = false;
        self
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }
}

/// Discrete solution with optional dense output.
///
/// With dense output recorded the interpolant is the fourth-order continuous
/// extension of the method; otherwise it falls back to linear interpolation
/// between accepted nodes.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    /// Five coefficient vectors per step, flattened.
    dense: Vec<f64>,
}

impl Trajectory {
    fn new(dim: usize, t0: f64, x0: &[f64]) -> Self {
        Self {
            dim,
            times: vec![t0],
            states: x0.to_vec(),
            dense: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn interpolation_order(&self) -> usize {
        if self.has_dense() {
            4
        } else {
            1
        }
    }

    fn has_dense(&self) -> bool {
        self.dense.len() == (self.times.len() - 1) * 5 * self.dim
    }

    /// Evaluate the interpolant at `t`; `t` is clamped to the covered range.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let n = self.dim;
        if self.times.len() == 1 {
            out.copy_from_slice(self.state(0));
            return;
        }
        let t = t.clamp(self.t_start(), self.t_end());
        let idx = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1) - 1;
        let (ta, tb) = (self.times[idx], self.times[idx + 1]);
        let theta = if tb > ta { (t - ta) / (tb - ta) } else { 0.0 };
        if self.has_dense() {
            let c = &self.dense[idx * 5 * n..(idx + 1) * 5 * n];
            let th1 = 1.0 - theta;
            for i in 0..n {
                let (r1, r2, r3, r4, r5) = (c[i], c[n + i], c[2 * n + i], c[3 * n + i], c[4 * n + i]);
                out[i] = r1 + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)));
            }
        } else {
            let (xa, xb) = (self.state(idx), self.state(idx + 1));
            for i in 0..n {
                out[i] = xa[i] + theta * (xb[i] - xa[i]);
            }
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }
}

/// Outcome of an integration that may be stopped early by an observer.
#[derive(Debug, Clone)]
pub struct Integration {
    pub trajectory: Trajectory,
    /// Time at which the observer requested a stop, if it did.
    pub stopped_at: Option<f64>,
}

/// Integrate `x' = rhs(t, x)` from `t0` to `t1`.
///
/// `breakpoints` lists the times where `rhs` may be non-smooth; those inside
/// `(t0, t1)` become mandatory step boundaries.
pub fn integrate<F>(
    rhs: F,
    t0: f64,
    t1: f64,
    x0: &[f64],
    breakpoints: &[f64],
    opts: &IntegratorOptions,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_observed(rhs, t0, t1, x0, breakpoints, opts, |_, _| true).map(|r| r.trajectory)
}

/// Like [`integrate`], calling `observe(t, x)` after every accepted step.
/// Returning `false` stops the integration at that step.
pub fn integrate_observed<F, O>(
    mut rhs: F,
    t0: f64,
    t1: f64,
    x0: &[f64],
    breakpoints: &[f64],
    opts: &IntegratorOptions,
    mut observe: O,
) -> Result<Integration>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]) -> bool,
{
    assert!(t1 > t0, "integration interval must be increasing");
    let n = x0.len();
    let mut traj = Trajectory::new(n, t0, x0);

    let mut bounds: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| {
            let tiny = 8.0 * f64::EPSILON * b.abs().max(1.0);
            b > t0 + tiny && b < t1 - tiny
        })
        .collect();
    bounds.sort_by(f64::total_cmp);
    bounds.dedup_by(|a, b| (*a - *b).abs() <= 4.0 * f64::EPSILON * a.abs().max(1.0));
    bounds.push(t1);

    let mut x = x0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    let mut y = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err_vec = vec![0.0; n];

    let mut t = t0;
    let mut seg = 0usize;
    let mut seg_start = t0;
    let mut seg_end = bounds[0];
    let eval_time = |s: f64, a: f64, b: f64| -> f64 {
        let eta = 16.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0);
        if b - a <= 2.0 * eta {
            0.5 * (a + b)
        } else {
            s.clamp(a + eta, b - eta)
        }
    };

    rhs(eval_time(t, seg_start, seg_end), &x, &mut k[0]);
    let mut h = match opts.h_init {
        Some(h) => h,
        None => initial_step(&mut rhs, t, &x, &k[0], opts, eval_time(t, seg_start, seg_end), seg_end),
    }
    .min(opts.h_max);
    let mut steps = 0usize;
    let mut last_rejected = false;

    while t < t1 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(EtdfError::TooManySteps {
                t,
                max_steps: opts.max_steps,
            });
        }
        let remaining = seg_end - t;
        let mut hh = h.min(opts.h_max);
        let to_end = hh >= remaining * (1.0 - 1e-10);
        if to_end {
            hh = remaining;
        }

        let et = |c: f64| eval_time(t + c * hh, seg_start, seg_end);
        for i in 0..n {
            y[i] = x[i] + hh * A21 * k[0][i];
        }
        rhs(et(C2), &y, &mut k[1]);
        for i in 0..n {
            y[i] = x[i] + hh * (A31 * k[0][i] + A32 * k[1][i]);
        }
        rhs(et(C3), &y, &mut k[2]);
        for i in 0..n {
            y[i] = x[i] + hh * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        rhs(et(C4), &y, &mut k[3]);
        for i in 0..n {
            y[i] = x[i] + hh * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        rhs(et(C5), &y, &mut k[4]);
        for i in 0..n {
            y[i] = x[i]
                + hh * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
        }
        rhs(et(1.0), &y, &mut k[5]);
        for i in 0..n {
            y_new[i] = x[i]
                + hh * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
        }
        rhs(et(1.0), &y_new, &mut k[6]);

        let mut err_sq = 0.0;
        for i in 0..n {
            err_vec[i] = hh
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = opts.atol + opts.rtol * x[i].abs().max(y_new[i].abs());
            err_sq += (err_vec[i] / sc).powi(2);
        }
        let err = (err_sq / n.max(1) as f64).sqrt();

        if !err.is_finite() {
            if y_new.iter().any(|v| !v.is_finite()) && hh < 1e-300 {
                return Err(EtdfError::NonFinite { t });
            }
            h = hh * FAC_MIN;
            last_rejected = true;
            if h < min_step(t) {
                return Err(EtdfError::StepUnderflow { t });
            }
            continue;
        }

        if err <= 1.0 {
            if opts.dense {
                traj.dense.extend_from_slice(&x);
                for i in 0..n {
                    traj.dense.push(y_new[i] - x[i]);
                }
                for i in 0..n {
                    let ydiff = y_new[i] - x[i];
                    traj.dense.push(hh * k[0][i] - ydiff);
                }
                for i in 0..n {
                    let ydiff = y_new[i] - x[i];
                    let bspl = hh * k[0][i] - ydiff;
                    traj.dense.push(ydiff - hh * k[6][i] - bspl);
                }
                for i in 0..n {
                    traj.dense.push(
                        hh * (D1 * k[0][i]
                            + D3 * k[2][i]
                            + D4 * k[3][i]
                            + D5 * k[4][i]
                            + D6 * k[5][i]
                            + D7 * k[6][i]),
                    );
                }
            }
            t = if to_end { seg_end } else { t + hh };
            x.copy_from_slice(&y_new);
            if opts.dense || traj.times.len() == 1 {
                traj.times.push(t);
                traj.states.extend_from_slice(&x);
            } else {
                let last = traj.times.len() - 1;
                traj.times[last] = t;
                traj.states[last * n..].copy_from_slice(&x);
            }

            if !observe(t, &x) {
                return Ok(Integration {
                    trajectory: traj,
                    stopped_at: Some(t),
                });
            }

            let mut fac = SAFETY * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = hh * fac;
            last_rejected = false;

            if to_end && t < t1 {
                seg += 1;
                seg_start = seg_end;
                seg_end = bounds[seg];
                rhs(eval_time(t, seg_start, seg_end), &x, &mut k[0]);
            } else {
                k.swap(0, 6);
            }
        } else {
            let fac = (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0);
            h = hh * fac;
            last_rejected = true;
            if h < min_step(t) {
                return Err(EtdfError::StepUnderflow { t });
            }
        }
    }

    Ok(Integration {
        trajectory: traj,
        stopped_at: None,
    })
}

fn min_step(t: f64) -> f64 {
    16.0 * f64::EPSILON * t.abs().max(1.0)
}

/// Starting step size heuristic (Hairer, Nørsett & Wanner, II.4).
fn initial_step<F>(
    rhs: &mut F,
    _t: f64,
    x: &[f64],
    f0: &[f64],
    opts: &IntegratorOptions,
    t_eval: f64,
    seg_end: f64,
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = x.len();
    let sc: Vec<f64> = x.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let norm = |v: &[f64]| -> f64 {
        (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt()
    };
    let d0 = norm(x);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(seg_end - t_eval).max(1e-12);
    let x1: Vec<f64> = x.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; n];
    rhs((t_eval + h0).min(seg_end), &x1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_keeps_state() {
        let v = [1.5, -2.0, 0.25];
        let traj = integrate(
            |_, _, dx: &mut [f64]| dx.fill(0.0),
            0.0,
            3.0,
            &v,
            &[],
            &IntegratorOptions::default(),
        )
        .unwrap();
        for t in [0.0, 0.7, 1.9, 3.0] {
            assert_eq!(traj.eval(t), v.to_vec());
        }
    }

    #[test]
    fn exponential_growth_hits_e() {
        let opts = IntegratorOptions::default();
        let traj = integrate(|_, x, dx| dx[0] = x[0], 0.0, 1.0, &[1.0], &[], &opts).unwrap();
        assert!((traj.last_state()[0] - std::f64::consts::E).abs() < 1e-9);
        // dense output between nodes
        for t in [0.123, 0.5, 0.77] {
            assert!((traj.eval(t)[0] - f64::exp(t)).abs() < 1e-9, "t = {t}");
        }
        assert_eq!(traj.interpolation_order(), 4);
    }

    #[test]
    fn breakpoints_are_step_boundaries() {
        let bps = [0.3, 0.30001, 0.8];
        let traj = integrate(
            |t, _, dx| dx[0] = if (0.3..=0.30001).contains(&t) { 1e5 } else { 0.0 },
            0.0,
            1.0,
            &[0.0],
            &bps,
            &IntegratorOptions::default(),
        )
        .unwrap();
        for b in bps {
            assert!(traj.times().iter().any(|&t| t == b), "missing breakpoint {b}");
        }
        // pulse of height 1e5 and width 1e-5 integrates to exactly one
        assert!((traj.last_state()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn one_sided_evaluation_at_edges() {
        // rhs jumps at t = 0.5; a step ending at 0.5 must never see the
        // right-hand value and vice versa
        let traj = integrate(
            |t, _, dx| dx[0] = if t < 0.5 { 1.0 } else { -1.0 },
            0.0,
            1.0,
            &[0.0],
            &[0.5],
            &IntegratorOptions::default(),
        )
        .unwrap();
        assert!((traj.eval(0.5)[0] - 0.5).abs() < 1e-13);
        assert!(traj.last_state()[0].abs() < 1e-13);
    }

    #[test]
    fn observer_can_stop() {
        let out = integrate_observed(
            |_, x, dx| dx[0] = x[0],
            0.0,
            10.0,
            &[1.0],
            &[],
            &IntegratorOptions::default(),
            |_, x| x[0] < 100.0,
        )
        .unwrap();
        let t = out.stopped_at.unwrap();
        assert!(t > 100f64.ln() - 1.0 && t < 10.0);
        assert!(out.trajectory.last_state()[0] >= 100.0);
    }

    #[test]
    fn endpoint_only_keeps_two_nodes() {
        let opts = IntegratorOptions::default().endpoint_only();
        let traj = integrate(|_, x, dx| dx[0] = -x[0], 0.0, 2.0, &[1.0], &[1.0], &opts).unwrap();
        assert_eq!(traj.len(), 2);
        assert!((traj.last_state()[0] - (-2.0f64).exp()).abs() < 1e-10);
    }
}
