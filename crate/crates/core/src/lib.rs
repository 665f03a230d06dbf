//! opvd-core: a desk-scale numerical laboratory for functional integration
//! with distribution-valued fields smoothed by partition-of-unity test
//! functions.
//!
//! The crate is organised around seven subsystems:
//! - [`testfn`]: bumps, partitions of unity, Fourier transforms, projected
//!   tensor-valued test functions;
//! - [`convolve`]: convolution smoothing on flat and charted curved spaces,
//!   flow transport, recollection of local pieces;
//! - [`measure`]: Hausdorff/Lebesgue-Stieltjes measures, the Schwartz metric,
//!   positivity fingerprints of Gaussian generating functionals;
//! - [`integrator`]: finite-dimensional Gaussian integrators, change of
//!   variables, product measures, gauge-orbit factorization;
//! - [`scalar`]: the regularized free scalar field (dressed propagators,
//!   generating functional, n-point functions, loop finiteness);
//! - [`gauge`]: Lie algebras, horizontal/vertical projectors, background
//!   gauge fixing, frame fields and Hopf maps, a connection toy model;
//! - [`nuclearity`]: Hermite bases and translation-operator matrix elements.

pub mod convolve;
pub mod error;
pub mod fourier;
pub mod gauge;
pub mod grid;
pub mod integrator;
pub mod measure;
pub mod nuclearity;
pub mod quad;
pub mod scalar;
pub mod testfn;

pub use error::{LabError, Result};
