//! Acceptance checks on the Hopf benchmark, shared by the test suite and the
//! command-line `verify` subcommand.

use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::{closed_loop_limit, design_gains, GainDesign, Gating};
use crate::error::Result;
use crate::floquet::{
    asymptotic_multiplier, classical_spectrum, constant_gain_criterion, kappa_roots, operator_spectrum,
    richardson_order, spectrum_char, CharFnOptions, FloquetSpectrum, MultiplierClass,
};
use crate::linalg::{eigenvalues, match_nearest, spectral_distance, to_complex};
use crate::models::{hopf_monodromy_closed_form, hopf_system, HopfSystem, PeriodicOrbit};
use crate::ode::{monodromy_parametrized, monodromy_uncontrolled, IntegratorOptions, Linearization};
use crate::simulate::{simulate, HistoryState, SimOptions};
use crate::Complex64;

pub const BENCH_P: f64 = -0.25;
pub const BENCH_EPSILON: f64 = 0.04;
pub const BENCH_DELTA_DIVISOR: f64 = 500.0;
pub const BENCH_RHO: f64 = 0.3;
pub const PUBLISHED_GAIN: [f64; 2] = [-0.258, 4.786];

pub const GAIN_TOL: f64 = 1e-3;
pub const ASSIGN_TOL: f64 = 1e-9;
pub const MONODROMY_TOL: f64 = 1e-7;
pub const PUBLISHED_E_PI: f64 = 23.141;
pub const PUBLISHED_E_PI_TOL: f64 = 5e-4;
pub const TRIVIAL_TOL: f64 = 1e-6;
pub const ASSIGNED_TOL: f64 = 0.05;
pub const CIRCLE_TOL: f64 = 0.02;
pub const SPECTRUM_RUNTIME: Duration = Duration::from_secs(30);
pub const OPERATOR_MESH: usize = 256;
pub const OPERATOR_MESHES: [usize; 3] = [64, 128, 256];
pub const OPERATOR_MATCH_TOL: f64 = 1e-3;
pub const ORDER_TARGET: f64 = 2.0;
pub const ORDER_TOL: f64 = 0.5;
pub const DELTA_DIVISORS: [f64; 3] = [125.0, 250.0, 500.0];
pub const HALVING_RATIO: f64 = 0.5;
pub const HALVING_TOL: f64 = 0.15;
pub const SIM_PERTURBATION: f64 = 1e-3;
pub const SIM_PERIODS: usize = 400;
pub const SIM_HISTORY_POINTS: usize = 512;
pub const CONTROL_RATIO_MAX: f64 = 1e-6;
pub const DECAY_TOL: f64 = 0.1;
pub const CONSTANT_EPSILON: f64 = 0.02;
pub const CIRCLE_EXACT_TOL: f64 = 4.0 * f64::EPSILON;
pub const SWEEP_COARSE: (f64, f64, usize) = (-0.5, -0.05, 20);
pub const SWEEP_FINE: (f64, f64, usize) = (-0.05, -0.005, 10);
pub const RANDOM_GAINS: usize = 10;
pub const RANDOM_SEED: u64 = 20_240_917;
pub const RANDOM_GAIN_RANGE: f64 = 3.0;
pub const LEMMA_EPSILON: f64 = 0.02;

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    /// One entry per sub-check: description and outcome.
    pub checks: Vec<(String, bool)>,
    pub elapsed: Duration,
}

impl CriterionResult {
    fn new(id: usize, name: &'static str) -> Self {
        Self {
            id,
            name,
            passed: true,
            checks: Vec::new(),
            elapsed: Duration::ZERO,
        }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.passed &= ok;
        self.checks.push((what, ok));
    }

    fn fail(&mut self, what: String) {
        self.check(false, what);
    }
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:>2}. {} ({:.2?})", self.id, self.name, self.elapsed)?;
        for (what, ok) in &self.checks {
            write!(f, "\n       {} {what}", if *ok { "ok  " } else { "FAIL" })?;
        }
        Ok(())
    }
}

/// The Hopf benchmark: orbit, linearisation and the assigned gains.
pub struct Benchmark {
    pub system: HopfSystem,
    pub orbit: PeriodicOrbit,
    pub lin: Linearization,
    pub p0: DMatrix<f64>,
    pub targets: Vec<Complex64>,
    pub gain: DVector<f64>,
    pub design: GainDesign,
    pub opts: CharFnOptions,
}

impl Benchmark {
    pub fn new() -> Result<Self> {
        let (system, orbit, lin) = hopf_system(BENCH_P)?;
        let p0 = monodromy_uncontrolled(&lin, &IntegratorOptions::default())?;
        let targets = vec![Complex64::new(0.0, 0.5), Complex64::new(0.0, -0.5)];
        let gain = design_gains(&p0, &lin.b(0.0), &targets)?.gain;
        let design = GainDesign::new(gain.clone(), lin.period() / BENCH_DELTA_DIVISOR, BENCH_EPSILON)
            .with_rho(BENCH_RHO)
            .with_gating(Gating::StateGated)
            .with_targets(targets.clone());
        Ok(Self {
            system,
            orbit,
            lin,
            p0,
            targets,
            gain,
            design,
            opts: CharFnOptions::default(),
        })
    }
}

fn timed<F: FnOnce(&mut CriterionResult)>(id: usize, name: &'static str, body: F) -> CriterionResult {
    let mut r = CriterionResult::new(id, name);
    let start = Instant::now();
    body(&mut r);
    r.elapsed = start.elapsed();
    r
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn gain_reproduction(bench: &Benchmark) -> CriterionResult {
    timed(1, "gain reproduction", |r| {
        let k = &bench.gain;
        let dev = (0..2).map(|i| (k[i] - PUBLISHED_GAIN[i]).abs()).fold(0.0, f64::max);
        r.check(
            dev <= GAIN_TOL,
            format!("K0 = ({:.6}, {:.6}), max deviation from published {dev:.2e} <= {GAIN_TOL:e}", k[0], k[1]),
        );
        let limit = closed_loop_limit(&bench.p0, &bench.lin.b(0.0), k);
        match eigenvalues(&limit) {
            Ok(ev) => {
                let d = spectral_distance(&ev, &bench.targets);
                r.check(d <= ASSIGN_TOL, format!("spec(P0 exp(-b K0^T)) vs +-i/2: {d:.2e} <= {ASSIGN_TOL:e}"));
            }
            Err(e) => r.fail(format!("eigenvalues of the limit matrix: {e}")),
        }
    })
}

pub fn monodromy_oracle(bench: &Benchmark) -> CriterionResult {
    timed(2, "monodromy oracle", |r| {
        let exact = hopf_monodromy_closed_form(BENCH_P);
        let err = (&bench.p0 - &exact).amax();
        r.check(err <= MONODROMY_TOL, format!("max |P0 - diag(1, e^pi)| = {err:.2e} <= {MONODROMY_TOL:e}"));
        let big = bench.p0[(1, 1)];
        let dev = (big - PUBLISHED_E_PI).abs();
        r.check(
            dev <= PUBLISHED_E_PI_TOL,
            format!("P0[1,1] = {big:.6} matches published 23.141 to {dev:.1e}"),
        );
    })
}

pub fn spectrum_reproduction(bench: &Benchmark) -> (CriterionResult, Option<FloquetSpectrum>) {
    let mut spectrum = None;
    let res = timed(3, "spectrum reproduction", |r| {
        let start = Instant::now();
        let s = match spectrum_char(&bench.lin, &bench.design, &bench.opts) {
            Ok(s) => s,
            Err(e) => return r.fail(format!("spectrum_char failed: {e}")),
        };
        let took = start.elapsed();
        let near_one = s.multipliers.iter().filter(|m| (m.value - 1.0).norm() <= TRIVIAL_TOL).count();
        r.check(near_one == 1, format!("multipliers within {TRIVIAL_TOL:e} of 1: {near_one} (want 1)"));

        let assigned: Vec<Complex64> = s.of_class(MultiplierClass::Assigned).iter().map(|m| m.value).collect();
        let pairs = match_nearest(&assigned, &bench.targets);
        let close = pairs.iter().filter(|p| p.2 <= ASSIGNED_TOL).count();
        let shown: Vec<String> = pairs
            .iter()
            .map(|&(i, _, d)| format!("{:.6}{:+.6}i (off {d:.4})", assigned[i].re, assigned[i].im))
            .collect();
        r.check(
            close == 2,
            format!("assigned within {ASSIGNED_TOL} of +-i/2: {close} of 2 [{}]", shown.join(", ")),
        );

        let center = 1.0 - BENCH_EPSILON / 2.0;
        let delay = s.of_class(MultiplierClass::DelayInduced);
        let off = delay
            .iter()
            .map(|m| ((m.value - center).norm() - BENCH_EPSILON / 2.0).abs())
            .fold(0.0, f64::max);
        r.check(
            off <= CIRCLE_TOL,
            format!("{} delay-induced multipliers within {off:.2e} of the eps/2 circle (<= {CIRCLE_TOL})", delay.len()),
        );
        let m = s.max_nontrivial_modulus();
        r.check(m < 1.0, format!("max nontrivial modulus {m:.6} < 1"));
        r.check(took < SPECTRUM_RUNTIME, format!("runtime {took:.2?} < {SPECTRUM_RUNTIME:?}"));
        spectrum = Some(s);
    });
    (res, spectrum)
}

pub fn oracle_equivalence(bench: &Benchmark, char_spec: Option<&FloquetSpectrum>) -> CriterionResult {
    timed(4, "oracle equivalence", |r| {
        let Some(cs) = char_spec else {
            return r.fail("no characteristic-function spectrum available".into());
        };
        let mut ops = Vec::new();
        for n in OPERATOR_MESHES {
            match operator_spectrum(&bench.lin, &bench.design, n, &bench.opts) {
                Ok(s) => ops.push(s),
                Err(e) => return r.fail(format!("operator spectrum at N = {n}: {e}")),
            }
        }
        let fine = ops[OPERATOR_MESHES.iter().position(|&n| n == OPERATOR_MESH).unwrap_or(2)].values();
        let threshold = 1.0 - BENCH_EPSILON / 2.0;
        let big_char: Vec<Complex64> = cs.values().into_iter().filter(|z| z.norm() > threshold).collect();
        let big_op: Vec<Complex64> = fine.iter().copied().filter(|z| z.norm() > threshold).collect();
        let d = spectral_distance(&big_char, &big_op);
        r.check(
            d <= OPERATOR_MATCH_TOL,
            format!(
                "{} vs {} multipliers above |lambda| = {threshold}: max mismatch {d:.2e} <= {OPERATOR_MATCH_TOL:e}",
                big_char.len(),
                big_op.len()
            ),
        );
        // convergence order on every root the operator resolves
        let floor = (1.0 - BENCH_EPSILON) / 2.0;
        let nearest = |s: &FloquetSpectrum, z: Complex64| {
            s.values()
                .into_iter()
                .min_by(|a, b| (a - z).norm().total_cmp(&(b - z).norm()))
                .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
        };
        let mut count = 0;
        for m in cs.nontrivial().filter(|m| m.value.norm() >= floor) {
            let l: Vec<Complex64> = ops.iter().map(|s| nearest(s, m.value)).collect();
            let order = richardson_order(l[0], l[1], l[2]);
            count += 1;
            r.check(
                (order - ORDER_TARGET).abs() <= ORDER_TOL,
                format!(
                    "Richardson order at {:.6}{:+.6}i over N = {OPERATOR_MESHES:?}: {order:.3}",
                    m.value.re, m.value.im
                ),
            );
        }
        if count == 0 {
            r.fail("no nontrivial multiplier above the operator filter for the order check".into());
        }
    })
}

pub fn delta_limit(bench: &Benchmark) -> CriterionResult {
    timed(5, "delta-limit property", |r| {
        let limit = to_complex(&closed_loop_limit(&bench.p0, &bench.lin.b(0.0), &bench.gain));
        let opts = IntegratorOptions::default();
        let mut errs = Vec::new();
        for div in DELTA_DIVISORS {
            let d = bench.design.clone().with_delta(bench.lin.period() / div);
            match monodromy_parametrized(&bench.lin, Complex64::new(1.0, 0.0), &d, &opts) {
                Ok(p) => errs.push((&p - &limit).norm()),
                Err(e) => return r.fail(format!("P(1; T/{div}) failed: {e}")),
            }
        }
        for (w, div) in errs.windows(2).zip(DELTA_DIVISORS.windows(2)) {
            let ratio = w[1] / w[0];
            r.check(
                (ratio - HALVING_RATIO).abs() <= HALVING_TOL,
                format!(
                    "||P(1) - P0 exp(-bK^T)||: T/{} -> T/{}: {:.3e} -> {:.3e}, ratio {ratio:.4}",
                    div[0], div[1], w[0], w[1]
                ),
            );
        }
    })
}

pub fn nonlinear_stabilisation(bench: &Benchmark, char_spec: Option<&FloquetSpectrum>) -> CriterionResult {
    timed(6, "nonlinear stabilisation and non-invasiveness", |r| {
        let init = match HistoryState::displaced_state(&bench.orbit, SIM_HISTORY_POINTS, SIM_PERTURBATION) {
            Ok(h) => h,
            Err(e) => return r.fail(format!("initial history: {e}")),
        };
        let run = match simulate(
            &bench.system,
            &bench.orbit,
            &bench.design,
            &init,
            SIM_PERIODS,
            &SimOptions::default(),
        ) {
            Ok(run) => run,
            Err(e) => return r.fail(format!("simulation failed: {e}")),
        };
        let diag = &run.diagnostics;
        r.check(
            diag.converged(),
            format!(
                "converged over {} periods (diverged at {:?})",
                diag.periods(),
                diag.diverged_at
            ),
        );
        let ratio = diag.control_ratio().unwrap_or(f64::INFINITY);
        r.check(
            ratio < CONTROL_RATIO_MAX,
            format!("final/first period max|u| = {ratio:.2e} < {CONTROL_RATIO_MAX:e}"),
        );
        match (diag.decay, char_spec) {
            (Some(fit), Some(cs)) => {
                let predicted = cs.max_nontrivial_modulus();
                let dev = (fit.rate - predicted).abs();
                r.check(
                    dev <= DECAY_TOL,
                    format!(
                        "decay rate {:.5} (periods {}..{}) vs max nontrivial |lambda| {predicted:.5}: {dev:.2e} <= {DECAY_TOL}",
                        fit.rate, fit.first, fit.last
                    ),
                );
            }
            (None, _) => r.fail("no decay rate could be fitted".into()),
            (_, None) => r.fail("no characteristic-function spectrum to compare with".into()),
        }
    })
}

pub fn constant_gain_impossibility(bench: &Benchmark) -> CriterionResult {
    timed(7, "constant-gain impossibility", |r| {
        let opts = CharFnOptions::default();
        let mut unstable = 0;
        let mut total = 0;
        let mut worst = f64::INFINITY;
        for k1 in linspace(-1.0, 1.0, 5) {
            for k2 in linspace(-3.0, -1.0, 5) {
                total += 1;
                let d = GainDesign::new(DVector::from_row_slice(&[k1, k2]), bench.design.delta, CONSTANT_EPSILON)
                    .with_gating(Gating::Constant);
                match spectrum_char(&bench.lin, &d, &opts) {
                    Ok(s) => {
                        let m = s.max_nontrivial_modulus();
                        worst = worst.min(m);
                        if !s.is_stable() {
                            unstable += 1;
                        } else {
                            r.fail(format!("K = ({k1}, {k2}) reported stable, max modulus {m:.6}"));
                        }
                    }
                    Err(e) => r.fail(format!("K = ({k1}, {k2}): {e}")),
                }
            }
        }
        r.check(
            unstable == total,
            format!("{unstable} of {total} constant gains with K1 + K2 <= 0 unstable at eps = {CONSTANT_EPSILON} (smallest max modulus {worst:.4})"),
        );
        let io = IntegratorOptions::default();
        let mut agree = 0;
        let mut total = 0;
        for k1 in linspace(-1.0, 1.0, 5) {
            for k2 in linspace(-0.75, 1.25, 5) {
                total += 1;
                let k = DVector::from_row_slice(&[k1, k2]);
                match constant_gain_criterion(&bench.lin, &bench.orbit, &k, &io) {
                    Ok(ratio) if ratio.signum() == (k1 + k2).signum() => agree += 1,
                    Ok(ratio) => r.fail(format!("K = ({k1}, {k2}): ratio {ratio:.3e} has the wrong sign")),
                    Err(e) => r.fail(format!("K = ({k1}, {k2}): {e}")),
                }
            }
        }
        r.check(agree == total, format!("criterion sign matches sign(K1 + K2) on {agree} of {total} gains"));
    })
}

pub fn asymptotic_exactness() -> CriterionResult {
    timed(8, "asymptotic formula exactness", |r| {
        let cases = [(4.528, BENCH_EPSILON), (-2.5, 0.3), (0.7, 0.9), (30.0, 0.999), (1e-3, 0.01)];
        let zero_exact = cases.iter().all(|&(c, e)| asymptotic_multiplier(0, c, e) == Complex64::new(1.0, 0.0));
        r.check(zero_exact, "lambda_0 == 1 exactly".into());
        let mut worst: f64 = 0.0;
        for &(c, e) in &cases {
            for l in -50..=50 {
                let z = asymptotic_multiplier(l, c, e);
                worst = worst.max(((z - (1.0 - e / 2.0)).norm() - e / 2.0).abs());
            }
        }
        r.check(
            worst <= CIRCLE_EXACT_TOL,
            format!("max distance from the eps/2 circle over 505 multipliers: {worst:.1e} <= {CIRCLE_EXACT_TOL:.1e}"),
        );
        let b0 = DVector::from_element(2, 1.0);
        let kappa_exact = [PUBLISHED_GAIN.to_vec(), vec![1.0, -1.0], vec![-3.0, 0.5]].iter().all(|k| {
            let roots = kappa_roots(&DVector::from_row_slice(k), &b0);
            roots.roots.iter().any(|&(l, z)| l == 0 && z == Complex64::new(1.0, 0.0))
        });
        r.check(kappa_exact, "kappa_{0,0} == 1 exactly".into());
    })
}

/// Gains assigned to `±i/2` along the Hopf family.
pub fn hopf_gains(p: f64) -> Result<DVector<f64>> {
    let (_, _, lin) = hopf_system(p)?;
    let p0 = monodromy_uncontrolled(&lin, &IntegratorOptions::default())?;
    let targets = [Complex64::new(0.0, 0.5), Complex64::new(0.0, -0.5)];
    Ok(design_gains(&p0, &lin.b(0.0), &targets)?.gain)
}

pub fn gains_along_family() -> CriterionResult {
    timed(9, "gains along the Hopf family", |r| {
        let (a, b, n) = SWEEP_COARSE;
        let mut negative = 0;
        let mut largest_k1 = f64::NEG_INFINITY;
        for p in linspace(a, b, n) {
            match hopf_gains(p) {
                Ok(k) => {
                    largest_k1 = largest_k1.max(k[0]);
                    if k[0] < 0.0 {
                        negative += 1;
                    }
                }
                Err(e) => r.fail(format!("p = {p}: {e}")),
            }
        }
        r.check(
            negative == n,
            format!("K1 < 0 at {negative} of {n} points on p in [{a}, {b}] (largest K1 {largest_k1:.4})"),
        );
        let (a, b, n) = SWEEP_FINE;
        let norms: Vec<f64> = linspace(a, b, n).into_iter().filter_map(|p| hopf_gains(p).ok()).map(|k| k.norm()).collect();
        let increasing = norms.len() == n && norms.windows(2).all(|w| w[1] > w[0]);
        r.check(
            increasing,
            format!(
                "||K|| strictly increasing on p in [{a}, {b}]: {:.4} .. {:.4}",
                norms.first().copied().unwrap_or(f64::NAN),
                norms.last().copied().unwrap_or(f64::NAN)
            ),
        );
    })
}

pub fn classical_instability_persists(bench: &Benchmark) -> CriterionResult {
    timed(10, "classical instability persists under ETDF", |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(RANDOM_SEED);
        let io = IntegratorOptions::default();
        let design = bench.design.clone().with_gating(Gating::TimeGated).with_targets(Vec::new()).with_epsilon(LEMMA_EPSILON);
        let mut found = 0;
        let mut agree = 0;
        let mut drawn = 0;
        while found < RANDOM_GAINS && drawn < 1000 {
            drawn += 1;
            let k = DVector::from_fn(2, |_, _| rng.gen_range(-RANDOM_GAIN_RANGE..RANDOM_GAIN_RANGE));
            let d = design.clone().with_k0(k.clone());
            let classical = match classical_spectrum(&bench.lin, &d, &io) {
                Ok(s) => s,
                Err(e) => {
                    r.fail(format!("classical spectrum for K = ({:.4}, {:.4}): {e}", k[0], k[1]));
                    continue;
                }
            };
            if classical.is_stable() {
                continue;
            }
            found += 1;
            match spectrum_char(&bench.lin, &d, &bench.opts) {
                Ok(s) if !s.is_stable() => agree += 1,
                Ok(s) => r.fail(format!(
                    "K = ({:.4}, {:.4}): classical max {:.4}, ETDF max {:.4} (stable)",
                    k[0],
                    k[1],
                    classical.max_nontrivial_modulus(),
                    s.max_nontrivial_modulus()
                )),
                Err(e) => r.fail(format!("K = ({:.4}, {:.4}): {e}", k[0], k[1])),
            }
        }
        r.check(
            found == RANDOM_GAINS && agree == found,
            format!("{agree} of {found} classically unstable gains (from {drawn} draws) unstable at eps = {LEMMA_EPSILON}"),
        );
    })
}

/// All ten criteria in order. Criteria 4 and 6 reuse the spectrum of 3.
pub fn run_all() -> Vec<CriterionResult> {
    let bench = match Benchmark::new() {
        Ok(b) => b,
        Err(e) => {
            let mut r = CriterionResult::new(0, "benchmark setup");
            r.fail(format!("{e}"));
            return vec![r];
        }
    };
    let (c3, spec) = spectrum_reproduction(&bench);
    vec![
        gain_reproduction(&bench),
        monodromy_oracle(&bench),
        c3,
        oracle_equivalence(&bench, spec.as_ref()),
        delta_limit(&bench),
        nonlinear_stabilisation(&bench, spec.as_ref()),
        constant_gain_impossibility(&bench),
        asymptotic_exactness(),
        gains_along_family(),
        classical_instability_persists(&bench),
    ]
}
