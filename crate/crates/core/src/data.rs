//! Shared data model: feature matrices, labels, verdicts and pipeline configuration.

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows within this distance of unit norm are considered normalized.
const UNIT_NORM_TOLERANCE: f64 = 1e-5;

/// N×d matrix of per-sample representations, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Array2<f64>,
    normalized: bool,
}

impl FeatureMatrix {
    /// Validates shape (n ≥ 1, d ≥ 2) and finiteness; the `normalized` flag is
    /// computed by inspecting the row norms.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (n, d) = data.dim();
        if n == 0 {
            return Err(Error::InvalidInput("feature matrix has no rows".into()));
        }
        if d < 2 {
            return Err(Error::InvalidInput(format!(
                "feature dimension must be at least 2, got {d}"
            )));
        }
        if let Some(((r, c), _)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite feature value at row {r}, column {c}"
            )));
        }
        let normalized = data
            .rows()
            .into_iter()
            .all(|row| (row.dot(&row).sqrt() - 1.0).abs() <= UNIT_NORM_TOLERANCE);
        Ok(Self { data, normalized })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::new(data)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    /// Sub-matrix made of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidInput("cannot select zero rows".into()));
        }
        Ok(Self {
            data: self.data.select(Axis(0), indices),
            normalized: self.normalized,
        })
    }

    /// Scales every row to unit L2 norm.
    pub fn l2_normalize_rows(&self) -> Result<Self> {
        let mut data = self.data.clone();
        for (i, mut row) in data.rows_mut().into_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            if norm == 0.0 {
                return Err(Error::InvalidInput(format!(
                    "row {i} is all zeros and cannot be normalized"
                )));
            }
            row.mapv_inplace(|v| v / norm);
        }
        Ok(Self {
            data,
            normalized: true,
        })
    }
}

/// Cosine of the angle between two nonzero vectors of equal length.
pub fn cosine_sim(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InvalidInput(format!(
            "vector lengths differ ({} vs {})",
            u.len(),
            v.len()
        )));
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::InvalidInput("cosine of a zero vector".into()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Observed class label per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    classes: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::InvalidInput("class count must be positive".into()));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::InvalidInput(format!(
                "label {l} at index {i} is outside [0, {classes})"
            )));
        }
        Ok(Self { labels, classes })
    }

    /// Class count inferred as `max(label) + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(labels, classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    /// Sample indices grouped by class, ascending within each class.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.classes];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Clean,
    IdNoisy,
    Ood,
}

impl VerdictKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictKind::Clean => "clean",
            VerdictKind::IdNoisy => "id_noisy",
            VerdictKind::Ood => "ood",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "clean" => Some(VerdictKind::Clean),
            "id_noisy" => Some(VerdictKind::IdNoisy),
            "ood" => Some(VerdictKind::Ood),
            _ => None,
        }
    }
}

/// Per-sample decision. OOD samples optionally belong to a discovered group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "VerdictRecord", try_from = "VerdictRecord")]
pub enum Verdict {
    Clean,
    IdNoisy,
    Ood(Option<usize>),
}

impl Verdict {
    pub fn kind(self) -> VerdictKind {
        match self {
            Verdict::Clean => VerdictKind::Clean,
            Verdict::IdNoisy => VerdictKind::IdNoisy,
            Verdict::Ood(_) => VerdictKind::Ood,
        }
    }

    /// Group id as written to tables: −1 for non-OOD and ungrouped OOD.
    pub fn group_id(self) -> i64 {
        match self {
            Verdict::Ood(Some(g)) => g as i64,
            _ => -1,
        }
    }

    pub fn from_parts(kind: VerdictKind, group: i64) -> Result<Self> {
        match kind {
            VerdictKind::Clean | VerdictKind::IdNoisy if group != -1 => Err(Error::InvalidInput(
                format!("{} verdict carries OOD group {group}", kind.as_str()),
            )),
            VerdictKind::Clean => Ok(Verdict::Clean),
            VerdictKind::IdNoisy => Ok(Verdict::IdNoisy),
            VerdictKind::Ood if group < -1 => {
                Err(Error::InvalidInput(format!("invalid OOD group {group}")))
            }
            VerdictKind::Ood => Ok(Verdict::Ood((group >= 0).then_some(group as usize))),
        }
    }
}

/// Flat form of a [`Verdict`] as stored in reports and tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub kind: VerdictKind,
    pub ood_group: i64,
}

impl From<Verdict> for VerdictRecord {
    fn from(v: Verdict) -> Self {
        Self {
            kind: v.kind(),
            ood_group: v.group_id(),
        }
    }
}

impl TryFrom<VerdictRecord> for Verdict {
    type Error = Error;

    fn try_from(r: VerdictRecord) -> Result<Self> {
        Verdict::from_parts(r.kind, r.ood_group)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    #[default]
    Full,
    Spherical,
}

/// Every tunable of detection and of the training-side objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Neighbors per sample in the affinity graph.
    pub knn: usize,
    /// Exponent applied to cosine affinities.
    pub gamma: u32,
    /// Retained Laplacian eigenvectors.
    pub k_eigen: usize,
    /// OPTICS MinPts values tried per class, strictly decreasing.
    pub optics_neighborhoods: Vec<usize>,
    pub min_cluster_size: usize,
    pub xi: f64,
    pub covariance_kind: CovarianceKind,
    /// Label-guessing sharpening exponent.
    pub tau1: f64,
    /// Contrastive temperature.
    pub tau2: f64,
    /// Weight of the guided contrastive term.
    pub beta: f64,
    pub mixup_alpha: f64,
    pub seed: u64,
    /// L2-normalize feature rows before embedding.
    pub normalize_features: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            knn: 50,
            gamma: 3,
            k_eigen: 20,
            optics_neighborhoods: vec![75, 50, 25],
            min_cluster_size: 75,
            xi: 0.01,
            covariance_kind: CovarianceKind::Full,
            tau1: 2.0,
            tau2: 0.2,
            beta: 1.0,
            mixup_alpha: 1.0,
            seed: 0,
            normalize_features: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.knn == 0 {
            return bad("knn must be positive".into());
        }
        if self.gamma == 0 {
            return bad("gamma must be positive".into());
        }
        if self.k_eigen == 0 {
            return bad("k_eigen must be positive".into());
        }
        if self.optics_neighborhoods.is_empty() {
            return bad("optics_neighborhoods must not be empty".into());
        }
        if self.optics_neighborhoods.contains(&0) {
            return bad("optics_neighborhoods entries must be positive".into());
        }
        if self.optics_neighborhoods.windows(2).any(|w| w[0] <= w[1]) {
            return bad(format!(
                "optics_neighborhoods must be strictly decreasing, got {:?}",
                self.optics_neighborhoods
            ));
        }
        if self.min_cluster_size == 0 {
            return bad("min_cluster_size must be positive".into());
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return bad(format!("xi must lie in (0, 1), got {}", self.xi));
        }
        for (name, v) in [
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("mixup_alpha", self.mixup_alpha),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return bad(format!("beta must be non-negative, got {}", self.beta));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn identity_rows_are_normalized() {
        let m = FeatureMatrix::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!((m.n(), m.d()), (2, 2));
        assert!(m.is_normalized());
        let m = FeatureMatrix::new(array![[3.0, 4.0], [0.0, 1.0]]).unwrap();
        assert!(!m.is_normalized());
    }

    #[test]
    fn rejects_degenerate_shapes_and_nan() {
        assert!(FeatureMatrix::new(Array2::zeros((0, 3))).is_err());
        assert!(FeatureMatrix::new(Array2::zeros((3, 1))).is_err());
        let err = FeatureMatrix::new(array![[1.0, f64::NAN]]).unwrap_err();
        assert!(err.to_string().contains("row 0, column 1"));
    }

    #[test]
    fn normalize_three_four_five() {
        let m = FeatureMatrix::new(array![[3.0, 4.0], [1.0, 0.0]]).unwrap();
        let n = m.l2_normalize_rows().unwrap();
        assert!((n.row(0)[0] - 0.6).abs() < 1e-15);
        assert!((n.row(0)[1] - 0.8).abs() < 1e-15);
        assert_eq!(n.row(1).to_vec(), vec![1.0, 0.0]);
        assert!(n.is_normalized());
    }

    #[test]
    fn normalize_zero_row_names_index() {
        let m = FeatureMatrix::new(array![[1.0, 1.0], [0.0, 0.0]]).unwrap();
        let err = m.l2_normalize_rows().unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_sim(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_sim(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
        assert!(cosine_sim(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(cosine_sim(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn labels_validate_range() {
        assert!(LabelVector::new(vec![0, 1, 2], 2).is_err());
        let l = LabelVector::from_labels(vec![1, 0, 1]).unwrap();
        assert_eq!(l.classes(), 2);
        assert_eq!(l.class_indices(), vec![vec![1], vec![0, 2]]);
    }

    #[test]
    fn verdict_group_invariant() {
        assert!(Verdict::from_parts(VerdictKind::Clean, 2).is_err());
        assert_eq!(Verdict::from_parts(VerdictKind::Ood, -1).unwrap(), Verdict::Ood(None));
        assert_eq!(Verdict::Ood(Some(4)).group_id(), 4);
        assert_eq!(Verdict::IdNoisy.group_id(), -1);
    }

    #[test]
    fn config_defaults_validate() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        let bad = PipelineConfig {
            optics_neighborhoods: vec![25, 50],
            ..cfg.clone()
        };
        assert!(bad.validate().is_err());
        let bad = PipelineConfig { xi: 1.0, ..cfg };
        assert!(bad.validate().is_err());
    }

    fn nonzero_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, len)
            .prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric((a, b) in (2usize..16).prop_flat_map(|n| (nonzero_vec(n), nonzero_vec(n)))) {
            prop_assert_eq!(cosine_sim(&a, &b).unwrap(), cosine_sim(&b, &a).unwrap());
        }

        #[test]
        fn cosine_scale_invariant(a in nonzero_vec(8), s in 0.01f64..100.0) {
            let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();
            prop_assert!((cosine_sim(&a, &scaled).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
