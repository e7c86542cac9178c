//! Steady-state cavity photon statistics for micromasers.
//!
//! Three pump models share one pipeline:
//!
//! ```text
//! sector (3x3 dressed eigensystem) -> gain (per-transit emission kernel)
//!   -> generator (banded rate matrix, gain + cavity loss)
//!   -> steady (truncated linear solve, adaptive n_max, moments)
//! ```
//!
//! * [`ModelVariant::DickePair`]: atoms injected in excited pairs, coupled to
//!   the mode as a J = 1 Dicke ladder.
//! * [`ModelVariant::OneAtom`]: the standard Jaynes-Cummings micromaser.
//! * [`ModelVariant::TwoPhotonDetuned`]: a single three-level atom with a
//!   one-photon detuning and two-photon resonance.
//!
//! Energies are measured in units of the atom-field coupling `g`, times in
//! units of the cavity photon lifetime (`2κ = 1`). The pump parameter is
//! `D = sqrt(N) * g * tau`.
//!
//! The [`oracle`] module holds the independent cross-checks: a product-form
//! detailed-balance solution for the one-atom maser, time relaxation of the
//! master equation and a Monte Carlo jump-process simulator.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gain;
pub mod generator;
pub mod oracle;
pub mod sector;
pub mod steady;

pub use error::{Error, Result};
pub use gain::{build_kernel, Emission, EmissionKernel};
pub use generator::{assemble, Generator, ModelSpec, ModelVariant};
pub use sector::{EigenSystem, SectorHamiltonian, SectorIndex};
pub use steady::{
    moments, solve_adaptive, solve_truncated, sweep, AdaptiveSettings, Moments, PhotonDistribution,
    RowStatus, SteadyState, SweepRow, SweepTemplate,
};
