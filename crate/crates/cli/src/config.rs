use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Hopf,
    Pendulum,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GatingName {
    Time,
    State,
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    /// Exact orbit history, current state pushed radially.
    Displaced,
    /// Whole history segment pushed radially, memory equal to the history.
    PerturbedHistory,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    CharFn,
    Operator,
    Asymptotic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub name: ModelName,
    /// Hopf bifurcation parameter.
    pub p: f64,
    pub damping: f64,
    pub amplitude: f64,
    pub frequency: f64,
    /// Right-hand sides of a custom model, in `x1..xn` and `u`.
    pub equations: Vec<String>,
    pub constants: BTreeMap<String, f64>,
    pub period_guess: Option<f64>,
    pub seed: Vec<f64>,
    pub shooting_tol: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            name: ModelName::Hopf,
            p: -0.25,
            damping: 0.1,
            amplitude: 0.3,
            frequency: 1.8,
            equations: Vec::new(),
            constants: BTreeMap::new(),
            period_guess: None,
            seed: Vec::new(),
            shooting_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    pub targets: Vec<String>,
    /// Inline gains; skips the assignment when present.
    pub gains: Option<Vec<f64>>,
    pub epsilon: f64,
    /// Impulse width. `None` means `period / delta_divisor`.
    pub delta: Option<f64>,
    pub delta_divisor: f64,
    pub rho: Option<f64>,
    pub gating: GatingName,
    pub regularised: bool,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            targets: vec!["0+0.5i".into(), "0-0.5i".into()],
            gains: None,
            epsilon: 0.04,
            delta: None,
            delta_divisor: 500.0,
            rho: None,
            gating: GatingName::Time,
            regularised: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub methods: Vec<SpectrumMethod>,
    pub mesh: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            methods: vec![SpectrumMethod::CharFn, SpectrumMethod::Operator, SpectrumMethod::Asymptotic],
            mesh: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub periods: usize,
    pub perturbation: f64,
    pub initial: InitialCondition,
    pub history_points: usize,
    /// Stored trajectory samples per period.
    pub samples_per_period: usize,
    pub window_intervals: usize,
    pub escape_radius: Option<f64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            periods: 400,
            perturbation: 1e-3,
            initial: InitialCondition::Displaced,
            history_points: 512,
            samples_per_period: 8,
            window_intervals: 64,
            escape_radius: None,
        }
    }
}

/// Either an explicit list or `count` evenly spaced points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub p: Option<Grid>,
    pub epsilon: Option<Grid>,
    pub delta: Option<Grid>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Bound on `|μ|` during root finding.
    pub mu_bound: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            mu_bound: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            format: Format::Csv,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub design: DesignConfig,
    pub spectrum: SpectrumConfig,
    pub simulate: SimulateConfig,
    pub sweep: SweepConfig,
    pub tolerances: Tolerances,
    pub output: OutputConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub model: Option<ModelName>,
    pub p: Option<f64>,
    pub targets: Option<String>,
    pub gains: Option<String>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub rho: Option<f64>,
    pub gating: Option<GatingName>,
    pub mesh: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(m) = o.model {
            self.model.name = m;
        }
        if let Some(p) = o.p {
            self.model.p = p;
        }
        if let Some(t) = &o.targets {
            self.design.targets = split_list(t);
        }
        if let Some(g) = &o.gains {
            let gains = split_list(g)
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| CliError::Config(format!("bad gain '{s}'"))))
                .collect::<Result<Vec<_>, _>>()?;
            self.design.gains = Some(gains);
        }
        if let Some(e) = o.epsilon {
            self.design.epsilon = e;
        }
        if let Some(d) = o.delta {
            self.design.delta = Some(d);
        }
        if let Some(r) = o.rho {
            self.design.rho = Some(r);
        }
        if let Some(g) = o.gating {
            self.design.gating = g;
        }
        if let Some(m) = o.mesh {
            self.spectrum.mesh = m;
        }
        if let Some(d) = &o.out {
            self.output.dir = Some(d.clone());
        }
        if let Some(f) = o.format {
            self.output.format = f;
        }
        Ok(())
    }

    /// Schema checks that need no numerics.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let m = &self.model;
        match m.name {
            ModelName::Hopf if !m.p.is_finite() => return bad(format!("model.p must be finite, got {}", m.p)),
            ModelName::Pendulum if !(m.frequency > 0.0) => {
                return bad(format!("model.frequency must be positive, got {}", m.frequency))
            }
            ModelName::Custom => {
                if m.equations.is_empty() {
                    return bad("custom model needs model.equations".into());
                }
                if m.seed.len() != m.equations.len() {
                    return bad(format!(
                        "model.seed has {} entries for {} equations",
                        m.seed.len(),
                        m.equations.len()
                    ));
                }
                if !m.period_guess.is_some_and(|t| t > 0.0) {
                    return bad("custom model needs a positive model.period_guess".into());
                }
            }
            _ => {}
        }
        if !(m.shooting_tol > 0.0) {
            return bad("model.shooting_tol must be positive".into());
        }
        let d = &self.design;
        if !(d.epsilon > 0.0 && d.epsilon < 1.0) {
            return bad(format!("design.epsilon must lie in (0, 1), got {}", d.epsilon));
        }
        if let Some(delta) = d.delta {
            if !(delta > 0.0 && delta.is_finite()) {
                return bad(format!("design.delta must be positive, got {delta}"));
            }
        }
        if !(d.delta_divisor > 2.0) {
            return bad(format!("design.delta_divisor must exceed 2, got {}", d.delta_divisor));
        }
        if d.rho.is_some_and(|r| !(r > 0.0 && r.is_finite())) {
            return bad("design.rho must be positive".into());
        }
        if d.gains.as_ref().is_some_and(|g| g.iter().any(|v| !v.is_finite())) {
            return bad("design.gains must be finite".into());
        }
        if d.gains.is_none() {
            if d.targets.is_empty() {
                return bad("design needs targets or inline gains".into());
            }
            self.targets()?;
        }
        if self.spectrum.mesh < 32 {
            return bad(format!("spectrum.mesh must be at least 32, got {}", self.spectrum.mesh));
        }
        let s = &self.simulate;
        if s.periods == 0 {
            return bad("simulate.periods must be positive".into());
        }
        if !(s.perturbation >= 0.0 && s.perturbation.is_finite()) {
            return bad(format!("simulate.perturbation must be finite and >= 0, got {}", s.perturbation));
        }
        if s.history_points < etdf::simulate::MIN_HISTORY_POINTS {
            return bad(format!(
                "simulate.history_points must be at least {}",
                etdf::simulate::MIN_HISTORY_POINTS
            ));
        }
        if s.samples_per_period == 0 || s.window_intervals < 4 {
            return bad("simulate.samples_per_period must be positive and window_intervals >= 4".into());
        }
        if s.escape_radius.is_some_and(|r| !(r > 0.0)) {
            return bad("simulate.escape_radius must be positive".into());
        }
        for (name, grid) in [("p", &self.sweep.p), ("epsilon", &self.sweep.epsilon), ("delta", &self.sweep.delta)] {
            if let Some(g) = grid {
                let pts = g.points();
                if pts.len() > 100_000 || pts.iter().any(|v| !v.is_finite()) {
                    return bad(format!("sweep.{name} must hold at most 100000 finite points"));
                }
            }
        }
        let t = &self.tolerances;
        if !(t.rtol > 0.0 && t.atol > 0.0 && t.mu_bound > 1.0) {
            return bad("tolerances: rtol and atol must be positive, mu_bound > 1".into());
        }
        Ok(())
    }

    pub fn targets(&self) -> Result<Vec<Complex64>, CliError> {
        self.design.targets.iter().map(|s| parse_complex(s)).collect()
    }

    /// Hex SHA-256 of the canonical JSON form. The output directory is left
    /// out so that the same run written elsewhere carries the same hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir = None;
        let json = serde_json::to_string(&c).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect()
}

/// `a`, `bi`, `a+bi`, `a-bi`, with exponents allowed in either part.
pub fn parse_complex(s: &str) -> Result<Complex64, CliError> {
    let err = || CliError::Config(format!("bad complex number '{s}'"));
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return t.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| err());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |s: &str| -> Result<f64, CliError> {
        match s {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            v => v.parse::<f64>().map_err(|_| err()),
        }
    };
    match split {
        Some(k) => {
            let re = body[..k].parse::<f64>().map_err(|_| err())?;
            Ok(Complex64::new(re, imag(&body[k..])?))
        }
        None => Ok(Complex64::new(0.0, imag(body)?)),
    }
}
