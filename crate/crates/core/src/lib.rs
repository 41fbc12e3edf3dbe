//! Spiked covariance laboratory.
//!
//! Analytic limit theory for the extreme eigenvalues of spiked sample
//! covariance matrices, together with the tooling needed to check it by
//! simulation:
//!
//! - [`spectra`]: Marčenko–Pastur law, Stieltjes transform, the spike maps
//!   `phi`/`psi` and the support of a generalized bulk.
//! - [`model`]: spiked population models and seeded data sampling.
//! - [`linalg`]: Hermitian eigendecomposition and resolvent statistics.
//! - [`limits`]: limiting fluctuation laws of packed sample eigenvalues.
//! - [`sesquiform`]: the CLT for random sesquilinear and quadratic forms.
//! - [`montecarlo`]: replication harness and goodness-of-fit reporting.
//! - [`infer`]: spike estimation with asymptotic confidence intervals.
//! - [`checks`]: numeric suites cross-checking the above by independent routes.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod error;
pub mod infer;
pub mod limits;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod sesquiform;
pub mod spectra;

pub use error::{Error, Result};
pub use spectra::{BulkSpectrum, MpParams, Side};
