//! Controllability, exponential spectrum assignment, impulse profiles and
//! the autonomous state gate.

mod assign;
mod design;
mod gate;
mod impulse;

pub use assign::{
    ackermann, assign_spectrum_exp, assign_spectrum_exp_report, closed_loop_limit, controllability, design_gains,
    exp_rank_one, krylov_matrix, sigma_real, Assignment, Controllability, ASSIGNMENT_TOL,
};
pub use design::{check_targets, GainDesign, Gating, SectionMap};
pub use gate::{bump, default_rho, section_time, section_time_implicit, state_gate, StateGate, SECTION_MAX_ITER};
pub use impulse::{smoothstep, ImpulseProfile};
