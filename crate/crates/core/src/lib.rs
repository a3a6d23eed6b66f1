//! AC magnetometry with a single two-level sensor under continuous (rotary
//! echo, constant drive, spin locking) and pulsed (PDD) dynamical decoupling.
//!
//! The crate provides closed-form sensitivities, weight functions and
//! Ornstein–Uhlenbeck decay envelopes, each paired with a brute-force
//! numerical oracle (time-ordered propagation, Monte Carlo ensembles,
//! double-quadrature cumulants).
//!
//! Conventions: spin operators S = σ/2; angular frequencies in rad/s; times
//! in seconds; fields in tesla. The dephasing noise δ(t) enters the
//! Hamiltonian as δ(t)σ_z.

pub mod decay;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod quad;
pub mod response;
pub mod sensitivity;
pub mod sequence;
pub mod spin;
pub mod table;

pub use error::{Error, Result};
pub use exec::Execution;
pub use sequence::{AcField, Scheme, SequenceSpec};
pub use spin::{Axis, Bloch, Spinor, TwoLevelOp};

/// Crate version, echoed into every exported file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
