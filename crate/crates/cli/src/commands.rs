use std::sync::Arc;

use etdf::control::{controllability, design_gains, Assignment, GainDesign, Gating};
use etdf::floquet::{asymptotic_spectrum, operator_spectrum, spectrum_char, CharFnOptions, FloquetSpectrum, MultiplierClass};
use etdf::linalg::match_nearest;
use etdf::models::{
    find_orbit_shooting, hopf_linearization, hopf_system, linearize_along_orbit, ExprSystem, PendulumParams,
    PendulumSystem, PeriodicOrbit, SharedSystem,
};
use etdf::ode::{monodromy_uncontrolled, IntegratorOptions, Linearization};
use etdf::simulate::{simulate, HistoryState, SimOptions};
use etdf::verify;
use etdf::{Complex64, EtdfError};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{GatingName, InitialCondition, ModelName, RunConfig, SpectrumMethod};
use crate::error::CliError;
use crate::output::{Cell, Sink, Table};

/// Env var capping sweep concurrency.
pub const THREADS_ENV: &str = "ETDF_NUM_THREADS";

#[derive(Serialize)]
struct C {
    re: f64,
    im: f64,
}

impl From<Complex64> for C {
    fn from(z: Complex64) -> Self {
        C { re: z.re, im: z.im }
    }
}

#[derive(Serialize)]
struct Resolved<'a> {
    config_hash: &'a str,
    config: &'a RunConfig,
}

pub struct Plant {
    pub system: SharedSystem,
    pub orbit: PeriodicOrbit,
    pub lin: Linearization,
}

fn integrator(cfg: &RunConfig) -> IntegratorOptions {
    IntegratorOptions::with_tol(cfg.tolerances.rtol, cfg.tolerances.atol)
}

fn char_options(cfg: &RunConfig) -> CharFnOptions {
    CharFnOptions {
        integrator: integrator(cfg),
        mu_bound: cfg.tolerances.mu_bound,
        ..CharFnOptions::default()
    }
}

pub fn model_dim(cfg: &RunConfig) -> usize {
    match cfg.model.name {
        ModelName::Hopf => 2,
        ModelName::Pendulum => 4,
        ModelName::Custom => cfg.model.equations.len(),
    }
}

pub fn plant(cfg: &RunConfig) -> Result<Plant, CliError> {
    let m = &cfg.model;
    let (system, t_guess, seed): (SharedSystem, f64, DVector<f64>) = match m.name {
        ModelName::Hopf => {
            let (sys, orbit, lin) = hopf_system(m.p)?;
            return Ok(Plant {
                system: Arc::new(sys),
                orbit,
                lin,
            });
        }
        ModelName::Pendulum => {
            let sys = PendulumSystem::new(PendulumParams {
                damping: m.damping,
                amplitude: m.amplitude,
                frequency: m.frequency,
            });
            (Arc::new(sys), sys.orbit_period(), sys.orbit_seed())
        }
        ModelName::Custom => {
            let sys = ExprSystem::parse(&m.equations, &m.constants)?;
            let t = m.period_guess.expect("validated");
            (Arc::new(sys), t, DVector::from_column_slice(&m.seed))
        }
    };
    let shot = find_orbit_shooting(system.clone(), t_guess, &seed, m.shooting_tol)?;
    let lin = linearize_along_orbit(system.clone(), &shot.orbit)?;
    Ok(Plant {
        system,
        orbit: shot.orbit,
        lin,
    })
}

/// The Hopf linearisation exists at `p = 0` even though the orbit does not,
/// so the design step can report the lost controllability there.
pub fn linearization(cfg: &RunConfig) -> Result<Linearization, CliError> {
    match cfg.model.name {
        ModelName::Hopf => Ok(hopf_linearization(cfg.model.p)?),
        _ => Ok(plant(cfg)?.lin),
    }
}

fn at_hopf_point(cfg: &RunConfig) -> bool {
    cfg.model.name == ModelName::Hopf && cfg.model.p == 0.0
}

/// Inline gains, or gains assigned from the targets.
pub fn gains(cfg: &RunConfig, lin: &Linearization) -> Result<(DVector<f64>, Option<Assignment>), CliError> {
    if let Some(g) = &cfg.design.gains {
        if g.len() != lin.dim() {
            return Err(CliError::Config(format!(
                "design.gains has {} entries, system dimension is {}",
                g.len(),
                lin.dim()
            )));
        }
        return Ok((DVector::from_column_slice(g), None));
    }
    let p0 = monodromy_uncontrolled(lin, &integrator(cfg))?;
    match design_gains(&p0, &lin.b(0.0), &cfg.targets()?) {
        Ok(a) => Ok((a.gain.clone(), Some(a))),
        Err(e @ EtdfError::AssignmentImpossible { .. }) if at_hopf_point(cfg) => Err(CliError::HopfPoint(e)),
        Err(e) => Err(e.into()),
    }
}

pub fn gain_design(cfg: &RunConfig, lin: &Linearization, k0: DVector<f64>) -> Result<GainDesign, CliError> {
    let d = &cfg.design;
    let delta = d.delta.unwrap_or(lin.period() / d.delta_divisor);
    let gating = match d.gating {
        GatingName::Time => Gating::TimeGated,
        GatingName::State => Gating::StateGated,
        GatingName::Constant => Gating::Constant,
    };
    let mut design = GainDesign::new(k0, delta, d.epsilon)
        .with_gating(gating)
        .with_regularised(d.regularised)
        .with_targets(if d.gains.is_some() { Vec::new() } else { cfg.targets()? });
    if let Some(rho) = d.rho {
        design = design.with_rho(rho);
    }
    design.validate(lin.period())?;
    Ok(design)
}

fn sink(cfg: &RunConfig) -> Result<Sink, CliError> {
    let hash = cfg.hash();
    let s = Sink::new(cfg.output.dir.as_deref(), cfg.output.format, hash)?;
    s.json(
        "config",
        &Resolved {
            config_hash: s.hash(),
            config: cfg,
        },
    )?;
    Ok(s)
}

fn print<T: Serialize>(value: &T) -> Result<(), CliError> {
    say(&serde_json::to_string_pretty(value)?)
}

fn say(text: &str) -> Result<(), CliError> {
    use std::io::Write;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // a closed pipe (`| head`) is not an error for us
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct Achieved {
    re: f64,
    im: f64,
    residual: f64,
}

#[derive(Serialize)]
struct DesignReport<'a> {
    config_hash: &'a str,
    model: String,
    period: f64,
    monodromy: Vec<Vec<f64>>,
    controllability_det: f64,
    krylov_condition: f64,
    gains: Vec<f64>,
    targets: Vec<C>,
    achieved: Vec<Achieved>,
    max_residual: f64,
}

pub fn cmd_design(cfg: &RunConfig) -> Result<(), CliError> {
    let out = sink(cfg)?;
    let lin = linearization(cfg)?;
    let p0 = monodromy_uncontrolled(&lin, &integrator(cfg))?;
    let ctrl = controllability(&p0, &lin.b(0.0));
    if cfg.design.gains.is_some() {
        return Err(CliError::Config("design computes gains from targets; remove design.gains".into()));
    }
    let (k, report) = gains(cfg, &lin)?;
    let report = report.expect("assigned gains");
    let targets = cfg.targets()?;
    let mut achieved: Vec<Achieved> = report
        .achieved
        .iter()
        .map(|z| Achieved {
            re: z.re,
            im: z.im,
            residual: f64::NAN,
        })
        .collect();
    for (i, _, d) in match_nearest(&report.achieved, &targets) {
        achieved[i].residual = d;
    }
    let rep = DesignReport {
        config_hash: out.hash(),
        model: format!("{:?}", cfg.model.name).to_lowercase(),
        period: lin.period(),
        monodromy: p0.row_iter().map(|r| r.iter().copied().collect()).collect(),
        controllability_det: ctrl.det,
        krylov_condition: report.krylov_condition,
        gains: k.iter().copied().collect(),
        targets: targets.into_iter().map(C::from).collect(),
        max_residual: report.deviation,
        achieved,
    };
    out.json("design", &rep)?;
    print(&rep)
}

#[derive(Serialize)]
struct MethodSummary {
    method: &'static str,
    stable: Option<bool>,
    max_nontrivial_modulus: Option<f64>,
    count: usize,
    notes: Vec<String>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SpectrumSummary<'a> {
    config_hash: &'a str,
    gains: Vec<f64>,
    epsilon: f64,
    delta: f64,
    stable: Option<bool>,
    max_nontrivial_modulus: Option<f64>,
    methods: Vec<MethodSummary>,
}

fn spectrum_rows(table: &mut Table, s: &FloquetSpectrum) {
    for m in &s.multipliers {
        table.push(vec![
            s.method.as_str().into(),
            m.class.as_str().into(),
            m.index.map_or(Cell::Empty, Cell::Int),
            m.value.re.into(),
            m.value.im.into(),
            m.value.norm().into(),
            m.residual.into(),
        ]);
    }
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<(), CliError> {
    let out = sink(cfg)?;
    let lin = linearization(cfg)?;
    let (k, _) = gains(cfg, &lin)?;
    let design = gain_design(cfg, &lin, k)?;
    let opts = char_options(cfg);
    let mut table = Table::new(&["method", "class", "index", "re", "im", "modulus", "residual"]);
    let mut methods = Vec::new();
    let mut verdict = None;
    let mut first_err = None;
    for m in &cfg.spectrum.methods {
        let res = match m {
            SpectrumMethod::CharFn => spectrum_char(&lin, &design, &opts),
            SpectrumMethod::Operator => operator_spectrum(&lin, &design, cfg.spectrum.mesh, &opts),
            SpectrumMethod::Asymptotic => Ok(asymptotic_spectrum(&lin, &design)),
        };
        let name = match m {
            SpectrumMethod::CharFn => "char_fn",
            SpectrumMethod::Operator => "operator",
            SpectrumMethod::Asymptotic => "asymptotic",
        };
        match res {
            Ok(s) => {
                spectrum_rows(&mut table, &s);
                let max = s.max_nontrivial_modulus();
                // the asymptotic list omits the assigned pair, so it gives no verdict
                if verdict.is_none() && *m != SpectrumMethod::Asymptotic {
                    verdict = Some((s.is_stable(), max));
                }
                let judged = *m != SpectrumMethod::Asymptotic;
                methods.push(MethodSummary {
                    method: name,
                    stable: judged.then(|| s.is_stable()),
                    max_nontrivial_modulus: Some(max),
                    count: s.multipliers.len(),
                    notes: s.notes.iter().map(|n| n.to_string()).collect(),
                    error: None,
                });
            }
            Err(e) => {
                methods.push(MethodSummary {
                    method: name,
                    stable: None,
                    max_nontrivial_modulus: None,
                    count: 0,
                    notes: Vec::new(),
                    error: Some(e.to_string()),
                });
                first_err.get_or_insert(e);
            }
        }
    }
    if verdict.is_none() && methods.iter().all(|m| m.error.is_some()) {
        if let Some(e) = first_err {
            return Err(e.into());
        }
    }
    let summary = SpectrumSummary {
        config_hash: out.hash(),
        gains: design.k0.iter().copied().collect(),
        epsilon: design.epsilon,
        delta: design.delta,
        stable: verdict.map(|v| v.0),
        max_nontrivial_modulus: verdict.map(|v| v.1),
        methods,
    };
    out.table("spectrum", &table)?;
    out.json("spectrum_summary", &summary)?;
    print(&summary)
}

#[derive(Serialize)]
struct SimSummary<'a> {
    config_hash: &'a str,
    verdict: &'static str,
    periods_completed: usize,
    /// 1-based, like the rows of the per-period table.
    diverged_in_period: Option<usize>,
    failure: Option<String>,
    decay_rate: Option<f64>,
    control_ratio: Option<f64>,
    initial_max_control: Option<f64>,
    final_max_control: Option<f64>,
    final_orbit_distance: Option<f64>,
    initial_compatibility_defect: f64,
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let out = sink(cfg)?;
    let plant = plant(cfg)?;
    let (k, _) = gains(cfg, &plant.lin)?;
    let design = gain_design(cfg, &plant.lin, k)?;
    let s = &cfg.simulate;
    let init = match s.initial {
        InitialCondition::Displaced => HistoryState::displaced_state(&plant.orbit, s.history_points, s.perturbation)?,
        InitialCondition::PerturbedHistory => {
            HistoryState::perturbed_orbit(&plant.orbit, s.history_points, s.perturbation)?
        }
    };
    let opts = SimOptions {
        integrator: integrator(cfg),
        escape_radius: s.escape_radius,
        samples_per_period: s.samples_per_period,
        window_intervals: s.window_intervals,
    };
    let res = simulate(plant.system.as_ref(), &plant.orbit, &design, &init, s.periods, &opts)?;
    let n = plant.lin.dim();

    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.extend((1..=n).map(|i| format!("xtilde{i}")));
    cols.push("u".into());
    let mut traj = Table::new(&cols);
    for smp in &res.samples {
        let mut row: Vec<Cell> = vec![smp.t.into()];
        row.extend(smp.x.iter().map(|&v| Cell::Num(v)));
        row.extend(smp.xtilde.iter().map(|&v| Cell::Num(v)));
        row.push(smp.u.into());
        traj.push(row);
    }
    let d = &res.diagnostics;
    let mut per = Table::new(&["period", "max_control", "orbit_distance", "phase"]);
    for k in 0..d.periods() {
        per.push(vec![
            Cell::Int(k as i64 + 1),
            d.max_control[k].into(),
            d.orbit_distance.get(k).copied().into(),
            d.phase.get(k).copied().into(),
        ]);
    }
    let verdict = if d.diverged_at.is_some() || d.failure.is_some() {
        "diverged"
    } else if d.converged() {
        "converged"
    } else {
        "not_converged"
    };
    let summary = SimSummary {
        config_hash: out.hash(),
        verdict,
        periods_completed: d.periods(),
        diverged_in_period: d.diverged_at.map(|k| k + 1),
        failure: d.failure.clone(),
        decay_rate: d.decay.as_ref().map(|e| e.rate),
        control_ratio: d.control_ratio(),
        initial_max_control: d.max_control.first().copied(),
        final_max_control: d.max_control.last().copied(),
        final_orbit_distance: d.orbit_distance.last().copied(),
        initial_compatibility_defect: d.initial_compatibility_defect,
    };
    out.table("trajectory", &traj)?;
    out.table("periods", &per)?;
    out.json("simulate_summary", &summary)?;
    print(&summary)
}

struct PointResult {
    gains: Option<DVector<f64>>,
    stable: Option<bool>,
    max_modulus: Option<f64>,
    delay_radius: Option<f64>,
    error: Option<String>,
}

fn sweep_point(cfg: &RunConfig) -> PointResult {
    let mut r = PointResult {
        gains: None,
        stable: None,
        max_modulus: None,
        delay_radius: None,
        error: None,
    };
    let run = |r: &mut PointResult| -> Result<(), CliError> {
        let lin = linearization(cfg)?;
        let (k, _) = gains(cfg, &lin)?;
        r.gains = Some(k.clone());
        let design = gain_design(cfg, &lin, k)?;
        let opts = CharFnOptions {
            parallel: false,
            ..char_options(cfg)
        };
        let s = spectrum_char(&lin, &design, &opts)?;
        r.stable = Some(s.is_stable());
        r.max_modulus = Some(s.max_nontrivial_modulus());
        // the delay-induced family clusters on the circle |λ − (1 − ε/2)| = ε/2
        let center = 1.0 - 0.5 * design.epsilon;
        r.delay_radius = s
            .of_class(MultiplierClass::DelayInduced)
            .iter()
            .map(|m| (m.value - center).norm())
            .reduce(f64::max);
        Ok(())
    };
    if let Err(e) = run(&mut r) {
        r.error = Some(e.to_string());
    }
    r
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    config_hash: &'a str,
    points: usize,
    failed: usize,
    unstable: usize,
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let out = sink(cfg)?;
    let sw = &cfg.sweep;
    if sw.p.is_some() && cfg.model.name != ModelName::Hopf {
        return Err(CliError::Config("sweep.p applies to the hopf model only".into()));
    }
    let axis = |g: &Option<crate::config::Grid>, base: Option<f64>| match g {
        Some(g) => g.points().into_iter().map(Some).collect(),
        None => vec![base],
    };
    let ps: Vec<Option<f64>> = axis(&sw.p, Some(cfg.model.p));
    let eps: Vec<Option<f64>> = axis(&sw.epsilon, Some(cfg.design.epsilon));
    let deltas: Vec<Option<f64>> = axis(&sw.delta, cfg.design.delta);
    let mut points = Vec::new();
    for &p in &ps {
        for &e in &eps {
            for &d in &deltas {
                let mut c = cfg.clone();
                c.model.p = p.expect("p axis always set");
                c.design.epsilon = e.expect("epsilon axis always set");
                c.design.delta = d;
                points.push(c);
            }
        }
    }
    let results: Vec<PointResult> = if points.is_empty() {
        Vec::new()
    } else {
        thread_pool()?.install(|| points.par_iter().map(sweep_point).collect())
    };

    let n = model_dim(cfg);
    let mut cols = vec!["p".to_string(), "epsilon".into(), "delta".into()];
    cols.extend((1..=n).map(|i| format!("k{i}")));
    cols.extend(["stable", "max_nontrivial_modulus", "delay_radius", "error"].map(String::from));
    let mut table = Table::new(&cols);
    for (c, r) in points.iter().zip(&results) {
        let delta = c.design.delta.or_else(|| {
            // resolved the same way as the design step
            (c.model.name == ModelName::Hopf).then(|| etdf::models::hopf_period() / c.design.delta_divisor)
        });
        let mut row: Vec<Cell> = vec![
            if c.model.name == ModelName::Hopf { Cell::Num(c.model.p) } else { Cell::Empty },
            c.design.epsilon.into(),
            delta.into(),
        ];
        match &r.gains {
            Some(k) => row.extend(k.iter().map(|&v| Cell::Num(v))),
            None => row.extend(std::iter::repeat_n(Cell::Empty, n)),
        }
        row.extend([
            r.stable.into(),
            r.max_modulus.into(),
            r.delay_radius.into(),
            r.error.clone().into(),
        ]);
        table.push(row);
    }
    let summary = SweepSummary {
        config_hash: out.hash(),
        points: results.len(),
        failed: results.iter().filter(|r| r.error.is_some()).count(),
        unstable: results.iter().filter(|r| r.stable == Some(false)).count(),
    };
    out.table("sweep", &table)?;
    out.json("sweep_summary", &summary)?;
    print(&summary)
}

#[derive(Serialize)]
struct CheckOut<'a> {
    check: &'a str,
    passed: bool,
}

#[derive(Serialize)]
struct CriterionOut<'a> {
    id: usize,
    name: &'a str,
    passed: bool,
    checks: Vec<CheckOut<'a>>,
}

#[derive(Serialize)]
struct VerifyOut<'a> {
    config_hash: &'a str,
    passed: usize,
    total: usize,
    criteria: Vec<CriterionOut<'a>>,
}

/// Runs the acceptance suite. The benchmark is fixed, so the config only
/// chooses where the report goes.
pub fn cmd_verify(cfg: &RunConfig) -> Result<(), CliError> {
    let out = sink(cfg)?;
    let results = verify::run_all();
    for r in &results {
        say(&r.to_string())?;
    }
    let passed = results.iter().filter(|r| r.passed).count();
    say(&format!("acceptance: {passed}/{} criteria passed", results.len()))?;
    let report = VerifyOut {
        config_hash: out.hash(),
        passed,
        total: results.len(),
        criteria: results
            .iter()
            .map(|r| CriterionOut {
                id: r.id,
                name: r.name,
                passed: r.passed,
                checks: r
                    .checks
                    .iter()
                    .map(|(c, ok)| CheckOut {
                        check: c,
                        passed: *ok,
                    })
                    .collect(),
            })
            .collect(),
    };
    out.json("verify", &report)?;
    match results.len() - passed {
        0 => Ok(()),
        n => Err(CliError::Verify(n)),
    }
}
