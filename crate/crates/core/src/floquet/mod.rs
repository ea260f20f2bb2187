//! Floquet spectrum of the linearised closed loop.
//!
//! Two independent routes: roots of the characteristic function
//! `h(λ) = det[λI − P(1 − ε/(λ − (1 − ε)))]`, and eigenvalues of a
//! discretised period map acting on `(x(0), x̃)`. The short-impulse
//! asymptotics and the classical (memory-free) spectrum are provided for
//! comparison.

mod charfn;
mod classical;
mod operator;
mod types;

pub use charfn::{
    asymptotic_delay_multipliers, asymptotic_delay_multipliers_with_margin, asymptotic_multiplier, asymptotic_spectrum,
    char_fn, kappa_roots, kappa_roots_with_margin, l_max, mu_of_lambda, scan_annulus, sigma, spectrum_char,
    AnnulusScan, CharFnOptions, KappaRoots, Seeds, POLE_TOL,
};
pub use classical::{adjoint_eigenvector, classical_spectrum, constant_gain_criterion, Adjoint};
pub use operator::{operator_matrix, operator_mesh, operator_spectrum, richardson_order, ESSENTIAL_CLUSTER_TOL};
pub use types::{FloquetSpectrum, Method, Multiplier, MultiplierClass, SpectrumNote};

#[cfg(test)]
mod tests;
