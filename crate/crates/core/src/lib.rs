//! Multi-speaker direction-of-arrival estimation for moving microphone arrays.
//!
//! The processing chain is:
//!
//! 1. [`stft`]: multichannel STFT and operating-band selection.
//! 2. [`spectrum`]: per-bin directional spectrum (cosine similarity against
//!    the steering manifold), time-frequency smoothing, per-bin DOA and
//!    direct-path-dominance (DPD) validity.
//! 3. [`udm`]: the array-derived reliability map, giving each bin the weight
//!    `w = α(φ̂, f) · ξ`.
//! 4. [`clustering`]: subtractive weighted clustering of the valid bins of each
//!    interval into `K` DOAs with qualities `Q(k) = W_k / W_{K+1}`.
//! 5. [`pipeline`]: interval segmentation, room-frame conversion, variant
//!    selection, evaluation metrics and reports.
//!
//! [`scene`] synthesizes STFT-domain scenes with moving sources and exact
//! ground truth for testing and parameter sweeps.

pub mod angle;
pub mod array;
pub mod clustering;
mod container;
pub mod error;
pub mod pipeline;
pub mod scene;
pub mod spectrum;
pub mod stft;
pub mod timeline;
pub mod udm;

pub use error::{Error, Result};
