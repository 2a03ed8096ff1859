//! Hypersphere test fixtures and scoring.
//!
//! The generator places compact class clusters in one cap of the sphere and
//! diffuse OOD samples on the opposite side. It encodes the geometry the
//! detector expects, so it validates the pipeline, not that real contrastive
//! features look like this.

mod generate;
mod metrics;
mod probe;
mod vmf;

pub use generate::{generate, SynthDataset, SynthSpec};
pub use metrics::{score_detection, CategoryScore, DetectionScores};
pub use probe::{linear_probe, LEARNING_RATE, STEPS};
pub use vmf::{random_tangent, sample_vmf};
