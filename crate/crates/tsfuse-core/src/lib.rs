//! Core library for regime-aware representation fusion on univariate time series.
//!
//! The crate is organised around the stages of the pipeline:
//!
//! * [`data`] — UCR-format loading, per-instance z-normalisation, stratified folds.
//! * [`sax`], [`sfa`], [`rocket`] — the three feature extractors.
//! * [`fusion`] — the gated fusion classifier (F3 and its F2/solo ablations).
//! * [`meta`] — the 13 dataset-level meta-features.
//! * [`regimes`] — Ward clustering of datasets into regimes plus stability diagnostics.
//! * [`stats`] — robust paired model comparison (Hodges–Lehmann, Wilcoxon, Bayes, ROPE).
//! * [`attribution`] — ridge surrogate with exact linear Shapley values.
//! * [`case_study`] — sample-level rescued/hurt analysis, confusion deltas, gate shifts.
//!
//! All randomness flows through seeded ChaCha12 generators (see [`rng`]) so every
//! result is reproducible bit-for-bit across platforms.

pub mod attribution;
pub mod case_study;
pub mod data;
pub mod error;
pub mod features;
pub mod fusion;
pub mod meta;
pub mod regimes;
pub mod rng;
pub mod rocket;
pub mod sax;
pub mod sfa;
pub mod stats;

pub use error::CoreError;
