use std::cmp::Ordering;

use num_complex::Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MultiplierClass {
    Trivial,
    Assigned,
    DelayInduced,
}

impl MultiplierClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            MultiplierClass::Trivial => "trivial",
            MultiplierClass::Assigned => "assigned",
            MultiplierClass::DelayInduced => "delay_induced",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    CharFn,
    Operator,
    Asymptotic,
    Classical,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::CharFn => "char_fn",
            Method::Operator => "operator",
            Method::Asymptotic => "asymptotic",
            Method::Classical => "classical",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Multiplier {
    pub value: Complex64,
    pub class: MultiplierClass,
    /// `|h(λ)|` for characteristic-function roots, 0 otherwise.
    pub residual: f64,
    /// Index `ℓ` of the nearest delay-induced seed.
    pub index: Option<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SpectrumNote {
    /// Some classical multiplier has modulus > 1, so ETDF fails for small ε.
    EtdfMustFailForSmallEpsilon,
    PossibleRootCoalescence { assigned_found: usize, expected: usize },
    UnresolvedSeed { seed: Complex64, reason: String },
    OutsideUnitCircle { value: Complex64 },
}

impl std::fmt::Display for SpectrumNote {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpectrumNote::EtdfMustFailForSmallEpsilon => write!(f, "ETDF must fail for small epsilon"),
            SpectrumNote::PossibleRootCoalescence { assigned_found, expected } => write!(
                f,
                "possible root coalescence: {assigned_found} assigned roots found, {expected} expected"
            ),
            SpectrumNote::UnresolvedSeed { seed, reason } => write!(f, "unresolved seed {seed}: {reason}"),
            SpectrumNote::OutsideUnitCircle { value } => {
                write!(f, "nontrivial multiplier {value} (|λ| = {:.6}) outside the unit circle", value.norm())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FloquetSpectrum {
    pub multipliers: Vec<Multiplier>,
    pub method: Method,
    pub epsilon: f64,
    pub delta: f64,
    pub notes: Vec<SpectrumNote>,
}

impl FloquetSpectrum {
    pub fn values(&self) -> Vec<Complex64> {
        self.multipliers.iter().map(|m| m.value).collect()
    }

    pub fn of_class(&self, class: MultiplierClass) -> Vec<&Multiplier> {
        self.multipliers.iter().filter(|m| m.class == class).collect()
    }

    pub fn nontrivial(&self) -> impl Iterator<Item = &Multiplier> {
        self.multipliers.iter().filter(|m| m.class != MultiplierClass::Trivial)
    }

    /// Largest nontrivial modulus, 0 when there is none.
    pub fn max_nontrivial_modulus(&self) -> f64 {
        self.nontrivial().map(|m| m.value.norm()).fold(0.0, f64::max)
    }

    pub fn is_stable(&self) -> bool {
        self.max_nontrivial_modulus() < 1.0
    }

    pub fn has_note(&self, pred: impl Fn(&SpectrumNote) -> bool) -> bool {
        self.notes.iter().any(pred)
    }

    pub(crate) fn sort(&mut self) {
        self.multipliers.sort_by(multiplier_order);
    }
}

fn multiplier_order(a: &Multiplier, b: &Multiplier) -> Ordering {
    a.class
        .cmp(&b.class)
        .then(a.index.cmp(&b.index))
        .then(a.value.re.total_cmp(&b.value.re))
        .then(a.value.im.total_cmp(&b.value.im))
}
