//! Full quantum treatment of travelling radiation pulses interacting with a
//! local scatterer.
//!
//! An incoming wave packet u(t) and a chosen outgoing wave packet v(t) are
//! each represented by a virtual single-mode cavity with a time-dependent
//! mirror coupling; the cavity–scatterer–cavity chain evolves under a
//! cascaded Lindblad master equation. The density matrix of the joint
//! system gives the complete quantum state of the selected output mode,
//! not just its mean field or photon flux.
//!
//! Modules:
//! - [`hilbert`]: operators, tensor embeddings, partial trace.
//! - [`pulses`]: mode functions, virtual-cavity coupling schedules, the
//!   empty-cavity reflection filter.
//! - [`cascade`]: assembly of the cascaded Hamiltonian and collective
//!   decay operator, scatterer presets.
//! - [`evolve`]: master-equation integration and observable recording.
//! - [`analyze`]: expectation values, output flux, cat-state fidelity,
//!   Wigner functions, atomic post-selection.
//! - [`regression`]: two-time emitter autocorrelation and dominant output
//!   mode extraction.
//! - [`oracle`]: independent single-excitation amplitude solutions used
//!   for cross-checks.

pub mod analyze;
pub mod cascade;
pub mod error;
pub mod evolve;
pub mod hilbert;
pub mod oracle;
pub mod pulses;
pub mod regression;
pub mod sparse;

pub use error::{Error, Result};
pub use hilbert::{DensityMatrix, Operator, SpaceLayout};
pub use pulses::{CouplingSchedule, ModeFunction, TimeGrid};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
