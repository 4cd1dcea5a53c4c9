//! IO, file formats, experiment orchestration, and plotting for the
//! modulation-classification robustness experiments.
//!
//! Binary formats (all little-endian, magic-tagged): `MGD1` datasets,
//! `MGM1` model checkpoints, `MGS1` SVM checkpoints. Text artifacts (CSV
//! curves, PCA exports, JSON summaries, JSONL training logs) embed the
//! experiment's config hash and seed; binary artifacts carry them in a
//! `.meta.json` sidecar.

pub mod config;
pub mod csvio;
pub mod io;
pub mod parallel;
pub mod pipeline;
pub mod svg;
