//! Agent-based cross-regulation classifier for streaming binary text
//! classification.
//!
//! The library models two populations of monospecific agents ("effector" and
//! "regulatory" cells) per textual feature. Documents are rendered as lists
//! of feature-pair slots on which agents bind and react; the resulting
//! population balance classifies unlabeled documents as relevant or
//! irrelevant. Around that core sit a text-preprocessing pipeline with
//! feature selection, a boolean naive Bayes baseline, evaluation metrics,
//! and an exhaustive grid-search experiment harness.
//!
//! All stochastic paths run on a pinned, portable generator (ChaCha12,
//! `rand_chacha`), with per-role seeds derived from a single master seed via
//! [`seed::derive_seed`], so any run is reproducible bit-for-bit from its
//! command line.

pub mod baselines;
pub mod corpus;
pub mod dynamics;
mod error;
pub mod features;
pub mod metrics;
pub mod search;
pub mod seed;

pub use error::{Error, Result};
