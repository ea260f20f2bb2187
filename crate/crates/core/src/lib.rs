//! Impulse-gain design and Floquet analysis for extended time-delayed
//! feedback (ETDF) stabilisation of periodic orbits.
//!
//! The crate is organised bottom-up:
//!
//! * [`ode`] — adaptive Runge–Kutta integration with declared breakpoints,
//!   fundamental and monodromy matrices.
//! * [`control`] — controllability, exponential spectrum assignment, the
//!   impulse profile and the autonomous state gate.
//! * [`floquet`] — the Floquet spectrum of the delay-coupled closed loop,
//!   computed from the characteristic function and from a discretised
//!   time-`T` operator.
//! * [`simulate`] — nonlinear closed-loop simulation by the method of steps.
//! * [`models`] — benchmark systems and periodic-orbit shooting.
//! * [`verify`] — the acceptance checks shared by the test suite and the CLI.

pub mod control;
pub mod error;
pub mod floquet;
pub mod linalg;
pub mod models;
pub mod ode;
pub mod simulate;
pub mod verify;

pub use error::{EtdfError, Result};
pub use num_complex::Complex64;
