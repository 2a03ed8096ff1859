//! Detection of in-distribution label noise and out-of-distribution samples
//! from unsupervised contrastive features.
//!
//! The pipeline embeds a feature matrix through a cosine kNN graph and its
//! normalized Laplacian ([`embed`]), clusters the embedding per class with a
//! multi-scale OPTICS ([`optics`]) or at dataset level with a two-component
//! Gaussian mixture ([`gmm`]), and labels every sample clean, ID-noisy or OOD
//! ([`detect`]). The training-side objectives (contrastive losses, label
//! guessing, equal sampling) live in [`robust`], and [`synth`] provides a
//! hypersphere data generator with scoring utilities.

pub mod data;
pub mod detect;
pub mod embed;
pub mod error;
pub mod gmm;
pub mod io;
pub mod optics;
pub mod rng;
pub mod robust;
pub mod synth;

pub use data::{
    cosine_sim, CovarianceKind, FeatureMatrix, LabelVector, PipelineConfig, Verdict, VerdictKind,
};
pub use error::{Error, Result};
