//! Brute-force oracles: time-ordered propagation, exact OU noise paths and
//! Monte Carlo ensemble signals.

pub mod montecarlo;
pub mod ou;
pub mod propagate;

pub use montecarlo::{mc_signal, mc_signal_by_cycle, McConfig, Readout, TrajectoryResult};
pub use ou::{ou_path, OuNoise};
pub use propagate::{evolve_by_cycle, pi_pulse_x, propagate, SensedField};
