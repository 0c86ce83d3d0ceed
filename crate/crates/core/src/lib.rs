//! Monte Carlo laboratory for nodal sets of random band-limited fields.
//!
//! The crate samples random fields built from Laplace eigenfunctions — 2d
//! arithmetic random waves, band-limited torus fields, random spherical
//! harmonics and planar monochromatic waves — under Gaussian and
//! non-Gaussian unit-variance coefficient laws, measures nodal length on
//! structured grids, and compares the results against closed-form
//! Kac-Rice expectations and isotropic covariance kernels.
//!
//! Module map:
//! - [`special`]: Bessel J, isotropic spectral kernels, normalized
//!   associated Legendre functions, Kac-Rice densities.
//! - [`laws`]: centred unit-variance coefficient laws with reproducible
//!   counter-based seed streams.
//! - [`spectra`]: frequency-set enumeration (lattice circles, annulus
//!   shells, spherical degrees).
//! - [`grid`]: grid geometries (torus, sphere, plane chart) and metrics.
//! - [`ensembles`]: field synthesis and empirical covariance.
//! - [`nodal`]: marching-squares nodal length, restricted nodal length,
//!   doubling index, small-ball probabilities.
//! - [`mcstats`]: Monte Carlo experiment driver, two-sample comparison,
//!   variance scans and the locality cross-check.

pub mod ensembles;
pub mod error;
pub mod grid;
pub mod laws;
pub mod mcstats;
pub mod nodal;
pub mod special;
pub mod spectra;

pub use error::{Error, Result};
