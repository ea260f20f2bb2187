//! Benchmark systems, periodic orbits and shooting.

mod expr;
mod hopf;
mod orbit;
mod pendulum;
mod shooting;
mod system;

pub use expr::{parse_expr, Expr, ExprSystem};
pub use hopf::{hopf_linearization, hopf_monodromy_closed_form, hopf_orbit, hopf_period, hopf_system, HopfSystem};
pub use orbit::{OrbitSource, PeriodicOrbit};
pub use pendulum::{PendulumParams, PendulumSystem};
pub use shooting::{find_orbit_shooting, linearize_along_orbit, ShootingResult, SHOOTING_MAX_ITER};
pub use system::{fd_jacobian_u, fd_jacobian_x, jacobian_mismatch, ControlledSystem, SharedSystem};
