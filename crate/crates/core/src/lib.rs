//! Desk-scale adversarial robustness toolkit for automatic modulation
//! classification.
//!
//! The crate is organized around the lifecycle of a robustness experiment:
//!
//! - [`signal`] — synthetic labeled IQ frames and l2 attack budgets derived
//!   from PNR/SNR power ratios,
//! - [`nn`] — a minimal dense/convolutional network with exact reverse-mode
//!   gradients with respect to parameters and inputs,
//! - [`train`] — standard, fixed-budget adversarial, customized adversarial
//!   (per-sample adaptive budget + adaptive label smoothing), and
//!   label-smoothing/Gaussian-noise training loops,
//! - [`reject`] — run-time defenses: a one-vs-all RBF-SVM rejection head on
//!   the network's last feature layer, and an autoencoder anomaly detector,
//! - [`attack`] — l2 PGD attacks against the bare classifier, the
//!   SVM-rejection defense, and the classifier+autoencoder baseline,
//! - [`eval`] — accuracy-vs-PNR security curves, PCA projections, and
//!   feature-separation scores.
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats, and CLI live
//! in the companion `modguard` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod attack;
pub mod eval;
pub mod nn;
pub mod reject;
pub mod rng;
pub mod signal;
pub mod tensor;
pub mod train;
