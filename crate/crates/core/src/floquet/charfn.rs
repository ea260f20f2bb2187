use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::types::{FloquetSpectrum, Method, Multiplier, MultiplierClass, SpectrumNote};
use crate::control::GainDesign;
use crate::error::{EtdfError, Result};
use crate::linalg::eigenvalues_complex;
use crate::ode::{monodromy_parametrized, IntegratorOptions, Linearization};

/// Distance to `1 − ε` below which `h` is not evaluated.
pub const POLE_TOL: f64 = 1e-8;

const MAX_HALVINGS: usize = 12;

/// `(e^{μc} − 1)/c`, with the limit `μ` for `|c| < 1e−12`.
pub fn sigma(mu: Complex64, c: f64) -> Complex64 {
    if c.abs() < 1e-12 {
        mu
    } else {
        ((mu * c).exp() - 1.0) / c
    }
}

/// `μ(λ) = 1 − ε/(λ − (1 − ε))`.
pub fn mu_of_lambda(lambda: Complex64, epsilon: f64) -> Result<Complex64> {
    let d = lambda - (1.0 - epsilon);
    if d.norm() < POLE_TOL {
        return Err(EtdfError::PoleProximity {
            lambda,
            distance: d.norm(),
        });
    }
    Ok(1.0 - epsilon / d)
}

/// `h(λ) = det[λI − P(μ(λ); δ, K₀)]`.
pub fn char_fn(lambda: Complex64, lin: &Linearization, design: &GainDesign, opts: &IntegratorOptions) -> Result<Complex64> {
    let mu = mu_of_lambda(lambda, design.epsilon)?;
    char_fn_at(lambda, mu, lin, design, opts)
}

fn char_fn_at(
    lambda: Complex64,
    mu: Complex64,
    lin: &Linearization,
    design: &GainDesign,
    opts: &IntegratorOptions,
) -> Result<Complex64> {
    let p = monodromy_parametrized(lin, mu, design, opts)?;
    let n = p.nrows();
    let m = DMatrix::<Complex64>::identity(n, n) * lambda - p;
    Ok(m.determinant())
}

#[derive(Clone, Debug, PartialEq)]
pub struct KappaRoots {
    /// `(ℓ, κ_ℓ)` for `|ℓ| ≤ l_max`, ascending in `ℓ`.
    pub roots: Vec<(i64, Complex64)>,
    pub c: f64,
    pub l_max: i64,
}

/// `ℓ_max = (√3/2π)|c|`, floored.
pub fn l_max(c: f64) -> i64 {
    (3f64.sqrt() / (2.0 * PI) * c.abs()).floor() as i64
}

/// `κ_ℓ = 1 + 2πiℓ/c` for `|ℓ| ≤ ℓ_max + margin`; only `κ_0 = 1` when `c = 0`.
pub fn kappa_roots_with_margin(k0: &DVector<f64>, b0: &DVector<f64>, margin: i64) -> KappaRoots {
    let c = k0.dot(b0);
    if c == 0.0 {
        return KappaRoots {
            roots: vec![(0, Complex64::new(1.0, 0.0))],
            c,
            l_max: 0,
        };
    }
    let lm = l_max(c);
    let top = lm + margin;
    let roots = (-top..=top)
        .map(|l| {
            let k = if l == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(1.0, 2.0 * PI * l as f64 / c)
            };
            (l, k)
        })
        .collect();
    KappaRoots { roots, c, l_max: lm }
}

pub fn kappa_roots(k0: &DVector<f64>, b0: &DVector<f64>) -> KappaRoots {
    kappa_roots_with_margin(k0, b0, 0)
}

/// `λ_ℓ = 1 − ε/2 + (ε/2)(c − 2πiℓ)/(c + 2πiℓ)` with `λ_0 = 1`.
pub fn asymptotic_multiplier(l: i64, c: f64, epsilon: f64) -> Complex64 {
    if l == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let w = Complex64::new(0.0, 2.0 * PI * l as f64);
    let ratio = (c - w) / (c + w);
    (1.0 - epsilon / 2.0) + ratio * (epsilon / 2.0)
}

pub fn asymptotic_delay_multipliers_with_margin(
    k0: &DVector<f64>,
    b0: &DVector<f64>,
    epsilon: f64,
    margin: i64,
) -> Vec<(i64, Complex64)> {
    let kr = kappa_roots_with_margin(k0, b0, margin);
    kr.roots
        .iter()
        .map(|&(l, _)| (l, asymptotic_multiplier(l, kr.c, epsilon)))
        .collect()
}

/// Admissible `λ_ℓ`, `|ℓ| ≤ ℓ_max`.
pub fn asymptotic_delay_multipliers(k0: &DVector<f64>, b0: &DVector<f64>, epsilon: f64) -> Vec<(i64, Complex64)> {
    asymptotic_delay_multipliers_with_margin(k0, b0, epsilon, 0)
}

pub fn asymptotic_spectrum(lin: &Linearization, design: &GainDesign) -> FloquetSpectrum {
    let b0 = lin.b(0.0);
    let mut multipliers: Vec<Multiplier> = asymptotic_delay_multipliers(&design.k0, &b0, design.epsilon)
        .into_iter()
        .map(|(l, v)| Multiplier {
            value: v,
            class: if l == 0 {
                MultiplierClass::Trivial
            } else {
                MultiplierClass::DelayInduced
            },
            residual: 0.0,
            index: (l != 0).then_some(l),
        })
        .collect();
    for z in &design.targets {
        multipliers.push(Multiplier {
            value: *z,
            class: MultiplierClass::Assigned,
            residual: 0.0,
            index: None,
        });
    }
    let mut s = FloquetSpectrum {
        multipliers,
        method: Method::Asymptotic,
        epsilon: design.epsilon,
        delta: design.delta,
        notes: Vec::new(),
    };
    s.sort();
    s
}

#[derive(Clone, Debug)]
pub struct CharFnOptions {
    pub integrator: IntegratorOptions,
    /// Bound `C` on `|μ|` for evaluations of `h`.
    pub mu_bound: f64,
    pub max_iter: usize,
    pub dedup_tol: f64,
    pub trivial_tol: f64,
    /// Extra `ℓ` indices seeded beyond `ℓ_max`.
    pub seed_margin: i64,
    pub parallel: bool,
    /// Grid searched for roots when a seed fails to converge inside the
    /// domain; `None` disables the search.
    pub fallback_scan: Option<AnnulusScan>,
}

impl Default for CharFnOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorOptions::default(),
            mu_bound: 4.0,
            max_iter: 50,
            dedup_tol: 1e-8,
            trivial_tol: 1e-6,
            seed_margin: 2,
            parallel: true,
            fallback_scan: Some(AnnulusScan::default()),
        }
    }
}

/// Seeds of the three root families.
#[derive(Clone, Debug)]
pub struct Seeds {
    /// Eigenvalues of `P(1; δ, K₀)`.
    pub assigned: Vec<Complex64>,
    /// `(ℓ, λ_ℓ)`, `ℓ ≠ 0`.
    pub delay: Vec<(i64, Complex64)>,
}

impl Seeds {
    pub fn compute(lin: &Linearization, design: &GainDesign, opts: &CharFnOptions) -> Result<Self> {
        let p1 = monodromy_parametrized(lin, Complex64::new(1.0, 0.0), design, &opts.integrator)?;
        // P(1) is real; drop the rounding-level imaginary parts
        let assigned = eigenvalues_complex(&p1.map(|z| Complex64::new(z.re, 0.0)))?;
        let delay = asymptotic_delay_multipliers_with_margin(&design.k0, &lin.b(0.0), design.epsilon, opts.seed_margin)
            .into_iter()
            .filter(|(l, _)| *l != 0)
            .collect();
        Ok(Self { assigned, delay })
    }

    /// Trivial if within `trivial_tol` of 1, else the nearer seed family
    /// (ties go to delay-induced).
    pub fn classify(&self, value: Complex64, trivial_tol: f64) -> (MultiplierClass, Option<i64>) {
        if (value - 1.0).norm() <= trivial_tol {
            return (MultiplierClass::Trivial, None);
        }
        let da = self.assigned.iter().map(|s| (s - value).norm()).fold(f64::INFINITY, f64::min);
        let nearest = self
            .delay
            .iter()
            .map(|(l, s)| (*l, (s - value).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match nearest {
            Some((l, dd)) if dd <= da => (MultiplierClass::DelayInduced, Some(l)),
            _ => (MultiplierClass::Assigned, None),
        }
    }
}

enum NewtonOutcome {
    Root { value: Complex64, residual: f64 },
    /// The iterate left the region where `h` is evaluated.
    OutOfDomain(String),
    Unresolved(String),
}

/// Newton on `h(λ) / ∏ (λ − r)` over the known roots `r`, so a seed that
/// fell into the basin of a known root can still reach a new one. Steps
/// are halved until `|h|` decreases, since `h` varies over many orders of
/// magnitude near the pole at `1 − ε`.
fn newton(
    seed: Complex64,
    known: &[Complex64],
    lin: &Linearization,
    design: &GainDesign,
    opts: &CharFnOptions,
) -> NewtonOutcome {
    let raw = |z: Complex64| -> std::result::Result<Complex64, NewtonOutcome> {
        let mu = mu_of_lambda(z, design.epsilon).map_err(|e| NewtonOutcome::OutOfDomain(e.to_string()))?;
        if mu.norm() > opts.mu_bound {
            return Err(NewtonOutcome::OutOfDomain(
                EtdfError::MuOutOfBounds {
                    mu,
                    bound: opts.mu_bound,
                }
                .to_string(),
            ));
        }
        char_fn_at(z, mu, lin, design, &opts.integrator).map_err(|e| NewtonOutcome::Unresolved(e.to_string()))
    };
    let eval = |z: Complex64| raw(z).map(|h| known.iter().fold(h, |h, r| h / (z - r)));
    let mut z = seed;
    let mut h = match eval(z) {
        Ok(h) => h,
        Err(e) => return e,
    };
    let mut prev_step = f64::INFINITY;
    for it in 0..opts.max_iter {
        if h == Complex64::new(0.0, 0.0) {
            return NewtonOutcome::Root { value: z, residual: 0.0 };
        }
        let eta = 1e-6 * z.norm().max(1e-3);
        let hp = match (eval(z + eta), eval(z - eta)) {
            (Ok(a), Ok(b)) => (a - b) / (2.0 * eta),
            (Err(e), _) | (_, Err(e)) => return e,
        };
        if hp == Complex64::new(0.0, 0.0) || !hp.re.is_finite() || !hp.im.is_finite() {
            return NewtonOutcome::Unresolved("vanishing derivative".into());
        }
        let full = h / hp;
        let scale = z.norm().max(1.0);
        // halve until |h| drops; if it never does, keep the smallest trial
        let mut step = full;
        let mut trial = eval(z - step);
        for _ in 0..MAX_HALVINGS {
            let accepted = match &trial {
                Ok(ht) => ht.norm() < h.norm() || step.norm() <= 1e-8 * scale,
                Err(_) => false,
            };
            if accepted {
                break;
            }
            step *= 0.5;
            trial = eval(z - step);
        }
        h = match trial {
            Ok(ht) => ht,
            Err(e) => return e,
        };
        z -= step;
        let s = step.norm();
        // stop at the step tolerance or once the steps stall at the noise level
        if s <= 1e-12 * scale || (it >= 3 && s <= 1e-8 * scale && s >= 0.5 * prev_step) {
            return match raw(z) {
                Ok(h) => NewtonOutcome::Root {
                    value: z,
                    residual: h.norm(),
                },
                Err(e) => e,
            };
        }
        prev_step = s;
    }
    NewtonOutcome::Unresolved(format!("no convergence in {} iterations", opts.max_iter))
}

fn solve_seeds(
    seeds: &[Complex64],
    lin: &Linearization,
    design: &GainDesign,
    opts: &CharFnOptions,
) -> Vec<NewtonOutcome> {
    if !opts.parallel || seeds.len() < 2 {
        return seeds.iter().map(|&s| newton(s, &[], lin, design, opts)).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&s| scope.spawn(move || newton(s, &[], lin, design, opts)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| NewtonOutcome::Unresolved("solver thread panicked".into())))
            .collect()
    })
}

/// Floquet multipliers as roots of `h`, by Newton from the assigned,
/// delay-induced and trivial seed families.
pub fn spectrum_char(lin: &Linearization, design: &GainDesign, opts: &CharFnOptions) -> Result<FloquetSpectrum> {
    design.validate(lin.period())?;
    let seeds = Seeds::compute(lin, design, opts)?;
    // the trivial seed goes first so that 1 is never deflated away
    let mut all: Vec<Complex64> = vec![Complex64::new(1.0, 0.0)];
    // with vanishing gain one eigenvalue of P(1) is the trivial root itself
    let assigned: Vec<Complex64> = seeds
        .assigned
        .iter()
        .copied()
        .filter(|z| (z - 1.0).norm() > opts.trivial_tol)
        .collect();
    all.extend(assigned.iter().copied());
    all.extend(seeds.delay.iter().map(|(_, s)| *s));
    let outcomes = solve_seeds(&all, lin, design, opts);

    let mut notes = Vec::new();
    let mut roots: Vec<(Complex64, f64)> = Vec::new();
    let mut lost_seed = false;
    let is_new = |roots: &[(Complex64, f64)], v: Complex64| !roots.iter().any(|(r, _)| (r - v).norm() <= opts.dedup_tol);
    for (i, (seed, out)) in all.iter().zip(outcomes).enumerate() {
        let out = match out {
            NewtonOutcome::Root { value, .. } if i > 0 && !is_new(&roots, value) => {
                let known: Vec<Complex64> = roots.iter().map(|(r, _)| *r).collect();
                match newton(*seed, &known, lin, design, opts) {
                    NewtonOutcome::Root { value, .. } if !is_new(&roots, value) => {
                        NewtonOutcome::Unresolved("converged onto a known root".into())
                    }
                    other => other,
                }
            }
            other => other,
        };
        match out {
            NewtonOutcome::Root { value, residual } => {
                if is_new(&roots, value) {
                    roots.push((value, residual));
                }
            }
            NewtonOutcome::OutOfDomain(reason) => {
                // seeds placed beyond the bound are expected to fail
                lost_seed |= mu_of_lambda(*seed, design.epsilon).is_ok_and(|mu| mu.norm() <= opts.mu_bound);
                notes.push(SpectrumNote::UnresolvedSeed { seed: *seed, reason })
            }
            NewtonOutcome::Unresolved(reason) => {
                lost_seed = true;
                notes.push(SpectrumNote::UnresolvedSeed { seed: *seed, reason })
            }
        }
    }
    // a seed that failed inside the domain may hide a root; look for it on a grid
    if let (true, Some(scan)) = (lost_seed, &opts.fallback_scan) {
        for value in scan_annulus(lin, design, scan, opts)? {
            if is_new(&roots, value) {
                let residual = char_fn(value, lin, design, &opts.integrator).map_or(f64::NAN, |h| h.norm());
                roots.push((value, residual));
            }
        }
    }
    let multipliers: Vec<Multiplier> = roots
        .into_iter()
        .map(|(value, residual)| {
            let (class, index) = seeds.classify(value, opts.trivial_tol);
            Multiplier {
                value,
                class,
                residual,
                index,
            }
        })
        .collect();
    let mut spec = FloquetSpectrum {
        multipliers,
        method: Method::CharFn,
        epsilon: design.epsilon,
        delta: design.delta,
        notes,
    };
    spec.sort();
    let expected = assigned.len();
    let found = spec.of_class(MultiplierClass::Assigned).len();
    if found < expected {
        spec.notes.push(SpectrumNote::PossibleRootCoalescence {
            assigned_found: found,
            expected,
        });
    }
    let outside: Vec<Complex64> = spec.nontrivial().filter(|m| m.value.norm() >= 1.0).map(|m| m.value).collect();
    for value in outside {
        spec.notes.push(SpectrumNote::OutsideUnitCircle { value });
    }
    Ok(spec)
}

#[derive(Clone, Copy, Debug)]
pub struct AnnulusScan {
    /// Inner radius as a multiple of ε.
    pub inner: f64,
    /// `C₁`: the outer radius is `ε/C₁`.
    pub c1: f64,
    pub n_radial: usize,
    pub n_angular: usize,
}

impl Default for AnnulusScan {
    fn default() -> Self {
        Self {
            inner: 0.5,
            c1: 0.5,
            n_radial: 12,
            n_angular: 96,
        }
    }
}

/// Diagnostic grid scan of `|h|` over `inner·ε ≤ |λ − (1−ε)| ≤ ε/C₁`; local
/// minima are polished by Newton and returned (deduplicated, sorted).
pub fn scan_annulus(
    lin: &Linearization,
    design: &GainDesign,
    scan: &AnnulusScan,
    opts: &CharFnOptions,
) -> Result<Vec<Complex64>> {
    let eps = design.epsilon;
    let center = 1.0 - eps;
    let (r0, r1) = (scan.inner * eps, eps / scan.c1);
    let (nr, na) = (scan.n_radial.max(3), scan.n_angular.max(8));
    let point = |i: usize, j: usize| {
        let r = r0 + (r1 - r0) * i as f64 / (nr - 1) as f64;
        let th = 2.0 * PI * j as f64 / na as f64;
        Complex64::new(center, 0.0) + Complex64::from_polar(r, th)
    };
    let mut vals = vec![f64::INFINITY; nr * na];
    for i in 0..nr {
        for j in 0..na {
            let z = point(i, j);
            if let Ok(mu) = mu_of_lambda(z, eps) {
                if mu.norm() <= opts.mu_bound {
                    if let Ok(h) = char_fn_at(z, mu, lin, design, &opts.integrator) {
                        vals[i * na + j] = h.norm();
                    }
                }
            }
        }
    }
    let mut candidates = Vec::new();
    for i in 0..nr {
        for j in 0..na {
            let v = vals[i * na + j];
            if !v.is_finite() {
                continue;
            }
            let mut is_min = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ii = i as i64 + di;
                    if ii < 0 || ii >= nr as i64 {
                        continue;
                    }
                    let jj = (j as i64 + dj).rem_euclid(na as i64) as usize;
                    if vals[ii as usize * na + jj] < v {
                        is_min = false;
                    }
                }
            }
            if is_min {
                candidates.push(point(i, j));
            }
        }
    }
    let mut roots: Vec<Complex64> = Vec::new();
    for out in solve_seeds(&candidates, lin, design, opts) {
        if let NewtonOutcome::Root { value, .. } = out {
            if !roots.iter().any(|r| (r - value).norm() <= opts.dedup_tol) {
                roots.push(value);
            }
        }
    }
    crate::linalg::sort_complex(&mut roots);
    Ok(roots)
}
