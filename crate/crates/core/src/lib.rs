//! decolab: a phase-space laboratory for quantum states of a free particle
//! in a translation-invariant random environment.
//!
//! States are carried as characteristic functions phi(q, p); the dynamics is
//! the exact composition of a free shear with a noise multiplier, so time
//! evolution is closed-form and time series come from independent pointwise
//! evaluations. The crate computes coherence indices, decoherence power laws,
//! relaxation distances, and the classical (Wigner vs. Levy-process) limit.

// `!(x > 0.0)` deliberately rejects NaN alongside nonpositives
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod charfn;
pub mod classical;
pub mod coherence;
pub mod config;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod io;
pub mod noise;
pub mod propagator;
pub mod quad;
pub mod states;
pub mod transform;

pub use charfn::{CharFn, GaussianCharFn, SampledCharFn, C64};
pub use error::{Error, Result};
pub use grid::{GridAxis, PhaseGrid};
pub use noise::{Atom, JumpMeasure, NoiseSpec};
pub use states::{Gaussian1D, GaussianND};
