//! Pilot-wave field theory laboratory.
//!
//! Bosonic fields are truncated to finitely many Fourier modes in a periodic
//! box; wave functionals live on the resulting real coordinates, beables move
//! under guidance velocities, and ensembles are checked against `|Psi|^2`.

pub mod cli_io;
pub mod dynamics;
pub mod ensemble_stats;
pub mod error;
pub mod experiments;
pub mod holland_angular;
pub mod mode_basis;
pub mod overlap_lab;
pub mod rng;
pub mod spectral;
pub mod theories;
pub mod wavefunctionals;

pub use error::{Error, Result};

/// The guide's chapters, compiled so their code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/modes.md")]
    mod modes {}
    #[doc = include_str!("../../../book/src/functionals.md")]
    mod functionals {}
    #[doc = include_str!("../../../book/src/theories.md")]
    mod theories {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/overlap.md")]
    mod overlap {}
    #[doc = include_str!("../../../book/src/angular.md")]
    mod angular {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
