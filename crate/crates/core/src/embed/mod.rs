//! Spectral embedding of feature rows: cosine kNN affinities, normalized
//! Laplacian, and its low eigenvectors.

mod affinity;
mod eigen;
mod laplacian;

pub use affinity::{build_affinity, SparseAffinity};
pub use eigen::{
    residual_norms, smallest_eigenpairs, spectral_embed, EigenOptions, EigenSolver, Embedding,
    DENSE_LIMIT,
};
pub use laplacian::{normalized_laplacian, NormalizedLaplacian, ISOLATED_DEGREE};

use crate::data::{FeatureMatrix, PipelineConfig};
use crate::error::Result;
use crate::rng::streams;

/// Affinity graph, Laplacian and eigenvectors with the settings in `cfg`.
pub fn embed_pipeline(m: &FeatureMatrix, cfg: &PipelineConfig) -> Result<Embedding> {
    embed_with(m, cfg.knn, cfg.gamma, cfg.k_eigen, cfg, streams::EIGEN_START)
}

pub(crate) fn embed_with(
    m: &FeatureMatrix,
    knn: usize,
    gamma: u32,
    k_eigen: usize,
    cfg: &PipelineConfig,
    stream: u64,
) -> Result<Embedding> {
    let features = if cfg.normalize_features && !m.is_normalized() {
        m.l2_normalize_rows()?
    } else {
        m.clone()
    };
    let s = build_affinity(&features, knn, gamma)?;
    log::debug!("affinity graph: {} nodes, {} stored edges", s.n(), s.nnz());
    let l = normalized_laplacian(&s);
    let opts = EigenOptions {
        seed: cfg.seed,
        stream,
        ..EigenOptions::default()
    };
    spectral_embed(&l, k_eigen, &opts)
}
