//! Localized Hermite-kernel regression on unknown manifolds, applied to
//! blood-glucose time-series prediction, with a PRED-EGA clinical evaluation
//! engine.
//!
//! The estimator approximates an unknown function from scattered noisy
//! samples in ℝ^d that are assumed to lie on (or near) a q-dimensional
//! submanifold, without learning anything about the manifold beyond q:
//! a precomputed summability kernel built from weighted Hermite functions is
//! evaluated at scaled Euclidean distances and averaged against the observed
//! values. Training is data collection; prediction is a kernel sum.
//!
//! Module map:
//!
//! - [`hermite`] — orthonormalized Hermite recurrences, weighted Hermite
//!   functions ψ_k, and the smooth cutoff.
//! - [`kernel`] — projection coefficients, the kernel table Φ̃_{n,q}, and the
//!   estimator F̂_{n,α}.
//! - [`data`] — CGM series ingestion, sliding windows, patient-level splits,
//!   glycemic stratification, affine scaling, and a synthetic generator.
//! - [`pred_ega`] — rate-of-change computation, point/rate error zoning, and
//!   range-stratified Accurate/Benign/Erroneous grids.
//! - [`experiment`] — the end-to-end pipeline: seeded trials, cross-dataset
//!   runs, and parameter sweeps.
//! - [`report`] — deterministic CSV/JSON/text emission.

pub mod data;
pub mod error;
pub mod experiment;
pub mod hermite;
pub mod kernel;
pub mod pred_ega;
pub mod report;
pub mod seed;

pub use error::{Error, Result};
