//! Nonlinear closed-loop simulation by the method of steps.

mod diagnostics;
mod history;
mod run;

pub use diagnostics::{estimate_decay, fit_decay, phase_align, DecayEstimate, SimDiagnostics, DISTANCE_FLOOR};
pub use history::{HistoryState, MIN_HISTORY_POINTS};
pub use run::{simulate, SimOptions, SimResult, SimSample};
