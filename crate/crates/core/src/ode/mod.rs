//! Time stepping and fundamental/monodromy matrices.

mod fundamental;
mod integrator;

pub use fundamental::{
    fundamental_matrix, fundamental_matrix_complex, monodromy_parametrized, monodromy_uncontrolled,
    Linearization,
};
pub use integrator::{integrate, integrate_observed, Integration, IntegratorOptions, Trajectory};
