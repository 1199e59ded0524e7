//! Behavioural-sensing analytics for hourly nearby-Bluetooth-device counts
//! (NBDC) and PHQ-8 depressive-symptom severity.
//!
//! The crate covers the full pipeline:
//!
//! 1. **Ingestion** ([`ingest`]): hourly binning in a local timezone, missing
//!    -hour interpolation, and assembly of 14-day pre-questionnaire intervals
//!    under explicit inclusion rules.
//! 2. **Features** ([`features`]): 49 descriptors per interval of second-order
//!    statistics, multiscale sample entropy, and the one-sided FFT spectrum.
//! 3. **Association analysis** ([`inference`]): per-feature random-intercept
//!    linear mixed models with Benjamini-Hochberg correction, nested
//!    likelihood-ratio tests, and a Spearman correlation matrix.
//! 4. **Prediction** ([`predict`], [`cv`]): hierarchical Bayesian linear
//!    regression via Gibbs sampling, a LASSO baseline, and a last-observation
//!    baseline, evaluated under leave-all-out and leave-one-out time-series
//!    cross-validation.
//! 5. **Synthetic cohorts** ([`synth`]): a generative model with planted
//!    ground truth for end-to-end validation.
//!
//! Entry points for whole-pipeline runs live in [`pipeline`]; the `examples/`
//! directory exercises each capability end to end.

pub mod cv;
pub mod domain;
pub mod error;
pub mod features;
pub mod ingest;
pub mod inference;
pub mod io;
pub mod pipeline;
pub mod predict;
pub mod report;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
