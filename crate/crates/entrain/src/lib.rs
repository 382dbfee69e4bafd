//! Turn-level vocal entrainment analysis.
//!
//! This crate implements a full pipeline for measuring how strongly one
//! speaker's vocal characteristics carry over into the next speaker's turn
//! in a dyadic conversation:
//!
//! 1. [`audio`] / [`dsp`] — WAV decoding and per-frame acoustic features
//!    (pitch, energy, MFCC/MFB, LSF, jitter/shimmer) with session-level
//!    normalization.
//! 2. [`segmentation`] — speaker turns, inter-pausal units (IPUs), and the
//!    228-dimensional turn-level vectors built from six statistical
//!    functionals over each IPU.
//! 3. [`neural`] — a from-scratch feed-forward encoder–decoder
//!    (dense + batch-norm + ReLU) trained with smooth-L1 loss and Adam to
//!    predict the next turn's vector from the previous one.
//! 4. [`ned`] — the neural entrainment distance: smooth-L1 between
//!    bottleneck embeddings of consecutive turn vectors, plus two
//!    reference baselines (raw-feature smooth-L1 and PCA cosine).
//! 5. [`eval`] — real-vs-fake session classification and correlation of
//!    session-level scores with ratings.
//! 6. [`synth`] — seeded synthetic corpora with controllable cross-turn
//!    coupling, at the feature-vector and audio level.

pub mod audio;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod io;
pub mod ned;
pub mod neural;
pub mod pca;
pub mod segmentation;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
