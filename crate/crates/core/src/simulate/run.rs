use nalgebra::DVector;

use super::diagnostics::{estimate_decay, phase_align, SimDiagnostics};
use super::history::{hermite_into, HistoryState};
use crate::control::{GainDesign, Gating, ImpulseProfile, StateGate};
use crate::error::{EtdfError, Result};
use crate::models::{ControlledSystem, PeriodicOrbit};
use crate::ode::{integrate_observed, IntegratorOptions};

#[derive(Clone, Debug)]
pub struct SimOptions {
    pub integrator: IntegratorOptions,
    /// Escape ball radius around `x_*(0)`; `None` means 10 orbit diameters.
    pub escape_radius: Option<f64>,
    /// Stored samples per period in the returned trajectory.
    pub samples_per_period: usize,
    /// Memory-mesh intervals across the impulse plateau.
    pub window_intervals: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorOptions::default(),
            escape_radius: None,
            samples_per_period: 32,
            window_intervals: 64,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimSample {
    pub t: f64,
    pub x: DVector<f64>,
    pub xtilde: DVector<f64>,
    pub u: f64,
}

#[derive(Clone, Debug)]
pub struct SimResult {
    pub samples: Vec<SimSample>,
    pub diagnostics: SimDiagnostics,
    /// State at the end of the last completed period.
    pub final_state: DVector<f64>,
}

enum Gate {
    Time(ImpulseProfile),
    State(StateGate),
    Constant,
}

impl Gate {
    fn new(design: &GainDesign, orbit: &PeriodicOrbit) -> Self {
        match design.gating {
            Gating::TimeGated => Gate::Time(design.impulse(orbit.period())),
            Gating::StateGated => Gate::State(StateGate::new(orbit, design)),
            Gating::Constant => Gate::Constant,
        }
    }

    fn value(&self, s: f64, x: &[f64]) -> f64 {
        match self {
            Gate::Time(p) => p.value(s),
            Gate::State(g) => g.value(x),
            Gate::Constant => 1.0,
        }
    }
}

/// Phase nodes in `[0, T]` carrying `x̃` for one period, with the phase at
/// which the time gate is read for each node. Interior jumps of the time
/// gate get two nodes, one per side.
struct PhaseMesh {
    nodes: Vec<f64>,
    gate_phase: Vec<f64>,
    /// Nodes inside the refined gate window; the integrator stops at each.
    window: Vec<f64>,
}

fn phase_mesh(design: &GainDesign, period: f64, base: usize, window: usize) -> PhaseMesh {
    let mut pts: Vec<f64> = (0..=base).map(|i| period * i as f64 / base as f64).collect();
    let mut win = Vec::new();
    let mut pieces = Vec::new();
    if design.gating != Gating::Constant {
        let d = design.delta;
        pieces.push((0.0, d, window));
        if design.is_regularised() {
            let d2 = d * d;
            let q = (window / 4).max(2);
            pieces.push((d, d + d2, q));
            pieces.push((period - d2, period, q));
            if design.gating == Gating::StateGated {
                // the autonomous gate may fire slightly off the nominal phase
                let pad = (window / 2).max(2);
                pieces.push((d + d2, d + d2 + 2.0 * d, pad));
                pieces.push((period - d2 - 2.0 * d, period - d2, pad));
            }
        }
    }
    for (a, b, m) in pieces {
        for i in 0..=m {
            win.push(a + (b - a) * i as f64 / m as f64);
        }
    }
    pts.extend(&win);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * period);
    let eta = 1e-12 * period;
    let jumps: Vec<f64> = match design.gating {
        Gating::TimeGated => design
            .breakpoints(period, 0.0, period)
            .into_iter()
            .filter(|&b| b > eta && b < period - eta)
            .collect(),
        _ => Vec::new(),
    };
    let mut nodes = Vec::with_capacity(pts.len() + jumps.len());
    let mut gate_phase = Vec::with_capacity(pts.len() + jumps.len());
    for s in pts {
        if let Some(&b) = jumps.iter().find(|&&b| (b - s).abs() <= 1e-14 * period) {
            nodes.extend([b, b]);
            gate_phase.extend([b - eta, b + eta]);
        } else {
            nodes.push(s);
            gate_phase.push(if s >= period { period - eta } else { s });
        }
    }
    win.sort_by(f64::total_cmp);
    win.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * period);
    PhaseMesh {
        nodes,
        gate_phase,
        window: win,
    }
}

/// `x̃` over one period as a piecewise cubic Hermite interpolant.
struct MemoryBuffer<'a> {
    nodes: &'a [f64],
    dim: usize,
    val: Vec<f64>,
    der: Vec<f64>,
}

impl MemoryBuffer<'_> {
    fn eval_into(&self, s: f64, out: &mut [f64], slope: &mut [f64]) {
        let n = self.dim;
        let i = self.nodes.partition_point(|&v| v <= s).clamp(1, self.nodes.len() - 1) - 1;
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        let h = b - a;
        let th = ((s - a) / h).clamp(0.0, 1.0);
        hermite_into(
            &self.val[i * n..(i + 1) * n],
            &self.val[(i + 1) * n..(i + 2) * n],
            &self.der[i * n..(i + 1) * n],
            &self.der[(i + 1) * n..(i + 2) * n],
            th,
            h,
            out,
            slope,
        );
    }
}

fn control(gate: f64, k0: &[f64], xt: &[f64], x: &[f64]) -> f64 {
    if gate == 0.0 {
        return 0.0;
    }
    gate * k0.iter().zip(xt.iter().zip(x)).map(|(k, (a, b))| k * (a - b)).sum::<f64>()
}

/// Closed-loop run by the method of steps over `n_periods` periods.
///
/// On period `k` the memory is `x̃(t) = (1−ε) x̃(t−T) + ε x(t−T)`, evaluated
/// exactly at the phase nodes and interpolated in between, and `x` follows
/// `ẋ = f(x, u)` with `u = g · K₀ᵀ(x̃ − x)`. Leaving the escape ball or an
/// integrator failure ends the run and is recorded in the diagnostics.
pub fn simulate(
    system: &dyn ControlledSystem,
    orbit: &PeriodicOrbit,
    design: &GainDesign,
    init: &HistoryState,
    n_periods: usize,
    opts: &SimOptions,
) -> Result<SimResult> {
    let period = orbit.period();
    let n = system.dim();
    if orbit.dim() != n || init.dim() != n || design.k0.len() != n {
        return Err(EtdfError::DimensionMismatch(format!(
            "system {n}, orbit {}, history {}, gain {}",
            orbit.dim(),
            init.dim(),
            design.k0.len()
        )));
    }
    if (init.period() - period).abs() > 1e-12 * period {
        return Err(EtdfError::InvalidDesign(format!(
            "history spans {} but the orbit period is {period}",
            init.period()
        )));
    }
    design.validate(period)?;
    let eps = design.epsilon;
    let k0 = design.k0.as_slice();
    let gate = Gate::new(design, orbit);
    let mesh = phase_mesh(design, period, init.mesh().len() - 1, opts.window_intervals.max(4));
    let m = mesh.nodes.len();
    let escape = opts.escape_radius.unwrap_or_else(|| 10.0 * orbit.diameter(256));
    let center = orbit.x0().clone();
    let mut integ = opts.integrator.clone();
    integ.dense = true;

    // memory for period 0 from the initial history
    let mut buf = MemoryBuffer {
        nodes: &mesh.nodes,
        dim: n,
        val: vec![0.0; m * n],
        der: vec![0.0; m * n],
    };
    for (j, &s) in mesh.nodes.iter().enumerate() {
        let [x, dx, y, dy] = init.eval(s - period);
        for i in 0..n {
            buf.val[j * n + i] = (1.0 - eps) * y[i] + eps * x[i];
            buf.der[j * n + i] = (1.0 - eps) * dy[i] + eps * dx[i];
        }
    }
    let mut x_start = init.x_hist().last().cloned().unwrap_or_else(|| DVector::zeros(n));

    let mut diag = SimDiagnostics {
        initial_compatibility_defect: init.compatibility_defect(eps),
        ..Default::default()
    };
    let mut samples = Vec::with_capacity(n_periods * opts.samples_per_period);
    let spp = opts.samples_per_period;
    let mut xt = vec![0.0; n];
    let mut slope = vec![0.0; n];

    for k in 0..n_periods {
        let t0 = k as f64 * period;
        let mut max_u: f64 = 0.0;
        let run = {
            let buf = &buf;
            let gate = &gate;
            let center = &center;
            let mut xt_obs = vec![0.0; n];
            let mut sl_obs = vec![0.0; n];
            let mut xt_rhs = vec![0.0; n];
            let mut sl_rhs = vec![0.0; n];
            integrate_observed(
                |s, x, dx| {
                    buf.eval_into(s, &mut xt_rhs, &mut sl_rhs);
                    let u = control(gate.value(s, x), k0, &xt_rhs, x);
                    system.rhs(x, u, dx);
                },
                0.0,
                period,
                x_start.as_slice(),
                &mesh.window,
                &integ,
                |s, x| {
                    buf.eval_into(s, &mut xt_obs, &mut sl_obs);
                    max_u = max_u.max(control(gate.value(s, x), k0, &xt_obs, x).abs());
                    let r: f64 = x.iter().zip(center.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                    r.sqrt() <= escape && x.iter().all(|v| v.is_finite())
                },
            )
        };
        let traj = match run {
            Ok(r) if r.stopped_at.is_none() => r.trajectory,
            Ok(_) => {
                diag.diverged_at = Some(k);
                break;
            }
            Err(e) => {
                diag.diverged_at = Some(k);
                diag.failure = Some(e.to_string());
                break;
            }
        };

        // node data of this period feed the memory of the next one
        let mut next_val = vec![0.0; m * n];
        let mut next_der = vec![0.0; m * n];
        let mut xdot = vec![0.0; n];
        let mut x_nodes = Vec::with_capacity(m);
        for (j, &s) in mesh.nodes.iter().enumerate() {
            let x = traj.eval(s);
            let xt_j = &buf.val[j * n..(j + 1) * n];
            let u = control(gate.value(mesh.gate_phase[j], &x), k0, xt_j, &x);
            max_u = max_u.max(u.abs());
            system.rhs(&x, u, &mut xdot);
            for i in 0..n {
                next_val[j * n + i] = (1.0 - eps) * xt_j[i] + eps * x[i];
                next_der[j * n + i] = (1.0 - eps) * buf.der[j * n + i] + eps * xdot[i];
            }
            x_nodes.push(DVector::from_vec(x));
        }

        let shift = phase_align(|s| DVector::from_vec(traj.eval(s)), orbit);
        let dist = mesh
            .nodes
            .iter()
            .zip(&x_nodes)
            .map(|(&s, x)| (x - orbit.state(s + shift)).norm())
            .fold(0.0, f64::max);
        diag.max_control.push(max_u);
        diag.orbit_distance.push(dist);
        diag.phase.push(shift);

        for j in 0..spp {
            let s = period * j as f64 / spp as f64;
            let x = traj.eval(s);
            buf.eval_into(s, &mut xt, &mut slope);
            let u = control(gate.value(s, &x), k0, &xt, &x);
            samples.push(SimSample {
                t: t0 + s,
                x: DVector::from_vec(x),
                xtilde: DVector::from_column_slice(&xt),
                u,
            });
        }

        x_start = DVector::from_column_slice(traj.last_state());
        buf.val = next_val;
        buf.der = next_der;
    }
    diag.decay = estimate_decay(&diag).ok();
    Ok(SimResult {
        samples,
        diagnostics: diag,
        final_state: x_start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn jump_nodes_are_doubled() {
        let d = GainDesign::new(DVector::zeros(2), 0.1, 0.5).with_regularised(false);
        let mesh = phase_mesh(&d, 1.0, 100, 8);
        let at: Vec<usize> = (0..mesh.nodes.len()).filter(|&i| (mesh.nodes[i] - 0.1).abs() < 1e-15).collect();
        assert_eq!(at.len(), 2);
        assert!(mesh.gate_phase[at[0]] < 0.1 && mesh.gate_phase[at[1]] > 0.1);
        assert_eq!(mesh.nodes[0], 0.0);
        assert_eq!(*mesh.nodes.last().unwrap(), 1.0);
        assert!(*mesh.gate_phase.last().unwrap() < 1.0);
        assert_eq!(mesh.window.len(), 9);
    }

    #[test]
    fn constant_gain_uses_the_base_mesh() {
        let d = GainDesign::new(DVector::zeros(2), 0.1, 0.5).with_gating(Gating::Constant);
        let mesh = phase_mesh(&d, 2.0, 200, 64);
        assert_eq!(mesh.nodes.len(), 201);
        assert!(mesh.window.is_empty());
    }

    #[test]
    fn state_gate_window_is_padded() {
        let d = GainDesign::new(DVector::zeros(2), 0.1, 0.5).with_gating(Gating::StateGated);
        let mesh = phase_mesh(&d, 2.0, 200, 64);
        let hi = mesh.window.iter().copied().filter(|&s| s < 1.0).fold(0.0, f64::max);
        assert!((hi - (0.1 + 0.01 + 0.2)).abs() < 1e-12);
        let lo = mesh.window.iter().copied().filter(|&s| s > 1.0).fold(2.0, f64::min);
        assert!((lo - (2.0 - 0.01 - 0.2)).abs() < 1e-12);
    }

    #[test]
    fn memory_buffer_is_piecewise_cubic() {
        let nodes = vec![0.0, 0.5, 0.5, 1.0];
        // f = s³ on the left piece, 2 + s on the right
        let buf = MemoryBuffer {
            nodes: &nodes,
            dim: 1,
            val: vec![0.0, 0.125, 2.5, 3.0],
            der: vec![0.0, 0.75, 1.0, 1.0],
        };
        let (mut v, mut d) = ([0.0], [0.0]);
        buf.eval_into(0.3, &mut v, &mut d);
        assert!((v[0] - 0.027).abs() < 1e-15 && (d[0] - 0.27).abs() < 1e-14);
        buf.eval_into(0.5, &mut v, &mut d);
        assert!((v[0] - 2.5).abs() < 1e-15);
        buf.eval_into(0.75, &mut v, &mut d);
        assert!((v[0] - 2.75).abs() < 1e-15);
        buf.eval_into(1.0, &mut v, &mut d);
        assert!((v[0] - 3.0).abs() < 1e-15);
    }
}
