//! Residual-verified spectral computations for Koopman and Perron–Frobenius
//! operators on reproducing kernel Hilbert spaces.
//!
//! The pipeline is: sample a [`dynamics::System`] into a
//! [`dynamics::SnapshotSet`], assemble a [`gram::GramTriple`] for a
//! [`kernels::KernelSpec`], then compute verified eigenpairs and
//! pseudospectra ([`spectra`]), smoothed spectral measures ([`measures`]) or
//! certified forecasts ([`forecast`]).

pub mod dynamics;
pub mod error;
pub mod forecast;
pub mod gram;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod measures;
pub mod spectra;

pub use error::{Error, Result};
pub use faer::c64;
pub use faer::Mat;
