//! Clean / ID-noisy / OOD labeling of a feature dataset.
//!
//! Per-class mode embeds the whole dataset once, clusters each class's rows
//! of the embedding with multi-scale OPTICS, marks the least dense cluster of
//! each class as OOD and the outliers as ID-noisy. Dataset mode splits the
//! embedding with a two-component Gaussian mixture instead. Both finish by
//! re-embedding the OOD samples alone to group similar ones.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, LabelVector, PipelineConfig, Verdict, VerdictKind};
use crate::embed::{embed_pipeline, embed_with, Embedding};
use crate::error::{Error, Result};
use crate::gmm::{gmm_assign, gmm_fit, GmmModel};
use crate::optics::{multi_scale_select, ClusterExtraction};
use crate::rng::{streams, Rng, SplitRng};

/// Clusters larger than this estimate their density from random pairs.
pub const EXACT_DENSITY_LIMIT: usize = 2000;
pub const DENSITY_PAIRS: usize = 100_000;
/// Densities closer than this count as tied.
pub const DENSITY_TIE: f64 = 1e-12;
/// A dataset-level split is reported as low confidence when the mean distance
/// across its two components is below this factor times the OOD spread.
pub const LOW_CONFIDENCE_RATIO: f64 = 1.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectionMode {
    PerClass,
    DatasetGmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterLabel {
    Clean,
    Ood,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDiagnostics {
    pub class: usize,
    pub size: usize,
    /// OPTICS neighborhood whose extraction was kept.
    pub chosen_neighborhood: Option<usize>,
    pub clusters: usize,
    pub outliers: usize,
    /// No neighborhood produced two clusters.
    pub degraded: bool,
    /// Too few samples for OPTICS; passed through as clean.
    pub too_small: bool,
    /// Fewer than two clusters, so nothing was marked OOD.
    pub no_ood_cluster: bool,
    pub cluster_densities: Vec<f64>,
    pub ood_cluster: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmDiagnostics {
    pub model: GmmModel,
    pub component_sizes: Vec<usize>,
    pub component_densities: Vec<Option<f64>>,
    pub ood_component: Option<usize>,
    /// Mean cosine distance between members of different components.
    pub separation: Option<f64>,
    /// The OOD side is not set apart from the clean side; it may be spurious.
    pub low_confidence: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub clean: usize,
    pub id_noisy: usize,
    pub ood: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReembedDiagnostics {
    pub samples: usize,
    pub chosen_neighborhood: Option<usize>,
    pub groups: usize,
    /// OOD samples left without a group.
    pub ungrouped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub mode: DetectionMode,
    pub verdicts: Vec<Verdict>,
    pub counts: VerdictCounts,
    /// Detected OOD fraction, usable as the contrastive weight.
    pub estimated_ood_ratio: f64,
    pub ood_groups: usize,
    pub per_class: Vec<ClassDiagnostics>,
    pub gmm: Option<GmmDiagnostics>,
    pub reembedding: ReembedDiagnostics,
    pub config: PipelineConfig,
    pub seed: u64,
}

impl NoiseReport {
    fn assemble(
        mode: DetectionMode,
        verdicts: Vec<Verdict>,
        per_class: Vec<ClassDiagnostics>,
        gmm: Option<GmmDiagnostics>,
        reembedding: ReembedDiagnostics,
        cfg: &PipelineConfig,
    ) -> Self {
        let count = |k: VerdictKind| verdicts.iter().filter(|v| v.kind() == k).count();
        let counts = VerdictCounts {
            clean: count(VerdictKind::Clean),
            id_noisy: count(VerdictKind::IdNoisy),
            ood: count(VerdictKind::Ood),
        };
        Self {
            mode,
            estimated_ood_ratio: counts.ood as f64 / verdicts.len() as f64,
            ood_groups: reembedding.groups,
            counts,
            verdicts,
            per_class,
            gmm,
            reembedding,
            config: cfg.clone(),
            seed: cfg.seed,
        }
    }

    pub fn ood_indices(&self) -> Vec<usize> {
        (0..self.verdicts.len())
            .filter(|&i| self.verdicts[i].kind() == VerdictKind::Ood)
            .collect()
    }
}

/// Report together with the dataset embedding it was computed from.
#[derive(Debug, Clone)]
pub struct Detection {
    pub report: NoiseReport,
    pub embedding: Embedding,
}

fn unit_rows(raw: &FeatureMatrix) -> Result<Array2<f64>> {
    Ok(if raw.is_normalized() {
        raw.as_array().clone()
    } else {
        raw.l2_normalize_rows()?.into_array()
    })
}

fn density_of(members: &[usize], unit: ArrayView2<f64>, rng: &mut Rng) -> Result<f64> {
    let m = members.len();
    if m < 2 {
        return Err(Error::InvalidInput(format!("cluster density needs at least 2 members, got {m}")));
    }
    let dist = |a: usize, b: usize| 1.0 - unit.row(a).dot(&unit.row(b)).clamp(-1.0, 1.0);
    let mean = if m <= EXACT_DENSITY_LIMIT {
        let rows: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|i| ((i + 1)..m).map(|j| dist(members[i], members[j])).sum::<f64>())
            .collect();
        rows.iter().sum::<f64>() / (m * (m - 1) / 2) as f64
    } else {
        let mut total = 0.0;
        for _ in 0..DENSITY_PAIRS {
            let a = rng.random_range(0..m);
            let mut b = rng.random_range(0..m - 1);
            if b >= a {
                b += 1;
            }
            total += dist(members[a], members[b]);
        }
        total / DENSITY_PAIRS as f64
    };
    Ok(mean.max(0.0))
}

fn separation_of(a: &[usize], b: &[usize], unit: ArrayView2<f64>, rng: &mut Rng) -> f64 {
    let dist = |i: usize, j: usize| 1.0 - unit.row(i).dot(&unit.row(j)).clamp(-1.0, 1.0);
    let mean = if a.len() * b.len() <= EXACT_DENSITY_LIMIT * EXACT_DENSITY_LIMIT / 2 {
        let total: f64 = a.par_iter().map(|&i| b.iter().map(|&j| dist(i, j)).sum::<f64>()).sum();
        total / (a.len() * b.len()) as f64
    } else {
        let total: f64 = (0..DENSITY_PAIRS)
            .map(|_| dist(a[rng.random_range(0..a.len())], b[rng.random_range(0..b.len())]))
            .sum();
        total / DENSITY_PAIRS as f64
    };
    mean.max(0.0)
}

/// Mean pairwise cosine distance among `members` in the raw feature space;
/// smaller is denser. Clusters above [`EXACT_DENSITY_LIMIT`] members average
/// [`DENSITY_PAIRS`] random pairs drawn from `rng`.
pub fn cluster_density(members: &[usize], raw: &FeatureMatrix, rng: &mut Rng) -> Result<f64> {
    if let Some(&bad) = members.iter().find(|&&i| i >= raw.n()) {
        return Err(Error::InvalidInput(format!("member {bad} out of range for {} rows", raw.n())));
    }
    let unit = unit_rows(raw)?;
    density_of(members, unit.view(), rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLabels {
    pub labels: Vec<ClusterLabel>,
    pub densities: Vec<f64>,
    pub ood: Option<usize>,
}

/// Index of the least dense cluster; near ties go to the smaller cluster.
fn sparsest(densities: &[f64], sizes: &[usize]) -> usize {
    let mut best = 0;
    for c in 1..densities.len() {
        let (d, b) = (densities[c], densities[best]);
        if d > b + DENSITY_TIE || ((d - b).abs() <= DENSITY_TIE && sizes[c] < sizes[best]) {
            best = c;
        }
    }
    best
}

fn classify_members(members: &[Vec<usize>], unit: ArrayView2<f64>, rng: &mut Rng) -> Result<ClusterLabels> {
    if members.is_empty() {
        return Err(Error::InvalidInput("no clusters to classify".into()));
    }
    let densities = members.iter().map(|m| density_of(m, unit, rng)).collect::<Result<Vec<_>>>()?;
    let mut labels = vec![ClusterLabel::Clean; members.len()];
    let ood = (members.len() >= 2).then(|| {
        let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
        sparsest(&densities, &sizes)
    });
    if let Some(o) = ood {
        labels[o] = ClusterLabel::Ood;
    }
    Ok(ClusterLabels { labels, densities, ood })
}

/// Marks the single least dense cluster OOD and the rest clean; a lone
/// cluster stays clean. `extraction` indexes rows of `raw`.
pub fn classify_clusters(extraction: &ClusterExtraction, raw: &FeatureMatrix, rng: &mut Rng) -> Result<ClusterLabels> {
    if extraction.membership.len() != raw.n() {
        return Err(Error::InvalidInput(format!(
            "extraction covers {} points, features have {} rows",
            extraction.membership.len(),
            raw.n()
        )));
    }
    let unit = unit_rows(raw)?;
    classify_members(&extraction.members(), unit.view(), rng)
}

/// Per-class clustering of the rows of a fixed dataset embedding. Verdicts
/// carry no OOD groups yet.
pub fn per_class_stage(
    raw: &FeatureMatrix,
    labels: &LabelVector,
    coords: ArrayView2<f64>,
    cfg: &PipelineConfig,
) -> Result<(Vec<Verdict>, Vec<ClassDiagnostics>)> {
    if labels.len() != raw.n() || coords.nrows() != raw.n() {
        return Err(Error::InvalidInput(format!(
            "{} labels and {} embedded rows for {} samples",
            labels.len(),
            coords.nrows(),
            raw.n()
        )));
    }
    let unit = unit_rows(raw)?;
    let smallest = *cfg.optics_neighborhoods.iter().min().expect("validated config");
    let root = SplitRng::new(cfg.seed);

    let outcomes: Vec<(Vec<(usize, Verdict)>, ClassDiagnostics)> = labels
        .class_indices()
        .into_par_iter()
        .enumerate()
        .map(|(class, rows)| -> Result<_> {
            let mut diag = ClassDiagnostics {
                class,
                size: rows.len(),
                chosen_neighborhood: None,
                clusters: 0,
                outliers: 0,
                degraded: false,
                too_small: false,
                no_ood_cluster: true,
                cluster_densities: Vec::new(),
                ood_cluster: None,
            };
            if rows.len() < smallest + 1 {
                if !rows.is_empty() {
                    log::warn!("class {class} has {} samples; passed through as clean", rows.len());
                }
                diag.too_small = true;
                return Ok((rows.iter().map(|&i| (i, Verdict::Clean)).collect(), diag));
            }
            let points = coords.select(Axis(0), &rows);
            let sel = multi_scale_select(points.view(), &cfg.optics_neighborhoods, cfg.xi, cfg.min_cluster_size)?;
            let ex = &sel.extraction;
            diag.chosen_neighborhood = sel.min_pts;
            diag.clusters = ex.cluster_count();
            diag.outliers = ex.outlier_count;
            diag.degraded = sel.degraded;
            if ex.cluster_count() == 0 {
                log::warn!("class {class}: no cluster found at any scale; passed through as clean");
                return Ok((rows.iter().map(|&i| (i, Verdict::Clean)).collect(), diag));
            }
            let members: Vec<Vec<usize>> =
                ex.members().iter().map(|m| m.iter().map(|&p| rows[p]).collect()).collect();
            let mut rng = root.stream(streams::CLASS_DENSITY_BASE + class as u64);
            let labelled = classify_members(&members, unit.view(), &mut rng)?;
            diag.cluster_densities = labelled.densities.clone();
            diag.ood_cluster = labelled.ood;
            diag.no_ood_cluster = labelled.ood.is_none();
            let verdicts = rows
                .iter()
                .zip(&ex.membership)
                .map(|(&i, m)| {
                    let v = match m {
                        None => Verdict::IdNoisy,
                        Some(c) if labelled.labels[*c] == ClusterLabel::Ood => Verdict::Ood(None),
                        Some(_) => Verdict::Clean,
                    };
                    (i, v)
                })
                .collect();
            Ok((verdicts, diag))
        })
        .collect::<Result<_>>()?;

    let mut verdicts = vec![Verdict::Clean; raw.n()];
    let mut per_class = Vec::with_capacity(outcomes.len());
    for (vs, diag) in outcomes {
        for (i, v) in vs {
            verdicts[i] = v;
        }
        per_class.push(diag);
    }
    Ok((verdicts, per_class))
}

fn validate_inputs(features: &FeatureMatrix, cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    if features.n() < 2 {
        return Err(Error::InvalidInput("detection needs at least 2 samples".into()));
    }
    Ok(())
}

fn attach_groups(verdicts: &mut [Verdict], features: &FeatureMatrix, cfg: &PipelineConfig) -> Result<ReembedDiagnostics> {
    let ood: Vec<usize> = (0..verdicts.len()).filter(|&i| verdicts[i].kind() == VerdictKind::Ood).collect();
    let (groups, diag) = reembed_ood_with_diagnostics(features, &ood, cfg)?;
    for (&i, g) in ood.iter().zip(groups) {
        verdicts[i] = Verdict::Ood(g);
    }
    Ok(diag)
}

pub fn detect_per_class_full(features: &FeatureMatrix, labels: &LabelVector, cfg: &PipelineConfig) -> Result<Detection> {
    validate_inputs(features, cfg)?;
    if labels.len() != features.n() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} feature rows",
            labels.len(),
            features.n()
        )));
    }
    let embedding = embed_pipeline(features, cfg)?;
    let (mut verdicts, per_class) = per_class_stage(features, labels, embedding.coords.view(), cfg)?;
    let reembedding = attach_groups(&mut verdicts, features, cfg)?;
    let report = NoiseReport::assemble(DetectionMode::PerClass, verdicts, per_class, None, reembedding, cfg);
    Ok(Detection { report, embedding })
}

/// Per-class detection with OOD grouping.
pub fn detect_per_class(features: &FeatureMatrix, labels: &LabelVector, cfg: &PipelineConfig) -> Result<NoiseReport> {
    Ok(detect_per_class_full(features, labels, cfg)?.report)
}

pub fn detect_dataset_gmm_full(features: &FeatureMatrix, cfg: &PipelineConfig) -> Result<Detection> {
    validate_inputs(features, cfg)?;
    let embedding = embed_pipeline(features, cfg)?;
    let model = gmm_fit(embedding.coords.view(), cfg.covariance_kind, cfg.seed)?;
    let assignment = gmm_assign(&model, embedding.coords.view())?;
    let unit = unit_rows(features)?;
    let mut rng = SplitRng::new(cfg.seed).stream(streams::DATASET_DENSITY);
    let components: Vec<Vec<usize>> = (0..2)
        .map(|c| (0..features.n()).filter(|&i| assignment.labels[i] == c).collect())
        .collect();
    let densities: Vec<Option<f64>> = components
        .iter()
        .map(|m| if m.len() >= 2 { density_of(m, unit.view(), &mut rng).map(Some) } else { Ok(None) })
        .collect::<Result<_>>()?;
    let sizes: Vec<usize> = components.iter().map(Vec::len).collect();

    let (ood_component, separation, low_confidence) = match (densities[0], densities[1]) {
        (Some(a), Some(b)) => {
            let o = sparsest(&[a, b], &sizes);
            let apart = separation_of(&components[0], &components[1], unit.view(), &mut rng);
            (Some(o), Some(apart), model.degenerate || apart < LOW_CONFIDENCE_RATIO * a.max(b))
        }
        _ => (None, None, true),
    };
    if low_confidence {
        log::warn!("dataset-level split has low confidence; the OOD set may be spurious");
    }
    let mut verdicts: Vec<Verdict> = assignment
        .labels
        .iter()
        .map(|&c| if Some(c) == ood_component { Verdict::Ood(None) } else { Verdict::Clean })
        .collect();
    let reembedding = attach_groups(&mut verdicts, features, cfg)?;
    let gmm = GmmDiagnostics {
        model,
        component_sizes: sizes,
        component_densities: densities,
        ood_component,
        separation,
        low_confidence,
    };
    let report = NoiseReport::assemble(DetectionMode::DatasetGmm, verdicts, Vec::new(), Some(gmm), reembedding, cfg);
    Ok(Detection { report, embedding })
}

/// Dataset-level detection for data without ID noise; labels are not used.
pub fn detect_dataset_gmm(features: &FeatureMatrix, cfg: &PipelineConfig) -> Result<NoiseReport> {
    Ok(detect_dataset_gmm_full(features, cfg)?.report)
}

fn reembed_ood_with_diagnostics(
    features: &FeatureMatrix,
    ood: &[usize],
    cfg: &PipelineConfig,
) -> Result<(Vec<Option<usize>>, ReembedDiagnostics)> {
    let m = ood.len();
    let mut diag = ReembedDiagnostics {
        samples: m,
        chosen_neighborhood: None,
        groups: 0,
        ungrouped: m,
    };
    if m < 2 {
        return Ok((vec![None; m], diag));
    }
    let sub = features.select_rows(ood)?;
    let knn = cfg.knn.min(m - 1);
    let k_eigen = cfg.k_eigen.min(m - 1);
    let embedding = embed_with(&sub, knn, cfg.gamma, k_eigen, cfg, streams::OOD_EIGEN_START)?;
    let mut neighborhoods: Vec<usize> = cfg.optics_neighborhoods.iter().map(|&v| v.min(m - 1)).collect();
    neighborhoods.dedup();
    let sel = multi_scale_select(embedding.coords.view(), &neighborhoods, cfg.xi, cfg.min_cluster_size)?;
    diag.chosen_neighborhood = sel.min_pts;
    diag.groups = sel.extraction.cluster_count();
    diag.ungrouped = sel.extraction.outlier_count;
    Ok((sel.extraction.membership, diag))
}

/// Groups OOD samples by clustering a fresh embedding of their features
/// alone. Returns one group per entry of `ood` (`None` for outliers).
pub fn reembed_ood(features: &FeatureMatrix, ood: &[usize], cfg: &PipelineConfig) -> Result<Vec<Option<usize>>> {
    cfg.validate()?;
    if let Some(&bad) = ood.iter().find(|&&i| i >= features.n()) {
        return Err(Error::InvalidInput(format!("OOD index {bad} out of range for {} rows", features.n())));
    }
    Ok(reembed_ood_with_diagnostics(features, ood, cfg)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    fn rng() -> Rng {
        Rng::seed_from_u64(0)
    }

    #[test]
    fn density_examples() {
        let same = FeatureMatrix::new(array![[1.0, 2.0], [1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(cluster_density(&[0, 1, 2], &same, &mut rng()).unwrap().abs() < 1e-12);
        let ortho = FeatureMatrix::new(array![[1.0, 0.0], [0.0, 3.0]]).unwrap();
        assert!((cluster_density(&[0, 1], &ortho, &mut rng()).unwrap() - 1.0).abs() < 1e-12);
        assert!(cluster_density(&[0], &ortho, &mut rng()).is_err());
        assert!(cluster_density(&[0, 5], &ortho, &mut rng()).is_err());
    }

    #[test]
    fn sampled_density_is_close_to_exact() {
        let n = 2500;
        let f = FeatureMatrix::new(Array2::from_shape_fn((n, 3), |(i, j)| ((i * 7 + j * 13) % 17) as f64 + 0.5)).unwrap();
        let members: Vec<usize> = (0..n).collect();
        let sampled = cluster_density(&members, &f, &mut rng()).unwrap();
        let unit = unit_rows(&f).unwrap();
        let mut exact = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                exact += 1.0 - unit.row(i).dot(&unit.row(j));
            }
        }
        exact /= (n * (n - 1) / 2) as f64;
        assert!((sampled - exact).abs() < 0.01 * exact.max(1e-3), "{sampled} vs {exact}");
    }

    fn extraction(membership: Vec<Option<usize>>) -> ClusterExtraction {
        let clusters = membership.iter().flatten().max().map_or(0, |m| m + 1);
        ClusterExtraction {
            clusters: (0..clusters).map(|c| (c, c)).collect(),
            outlier_count: membership.iter().filter(|m| m.is_none()).count(),
            membership,
        }
    }

    #[test]
    fn classify_rules() {
        // cluster 0 tight around e1, cluster 1 spread, cluster 2 tight around e2
        let f = FeatureMatrix::new(array![
            [1.0, 0.01, 0.0],
            [1.0, -0.01, 0.0],
            [1.0, 0.0, 1.0],
            [-1.0, 0.5, 0.0],
            [0.01, 1.0, 0.0],
            [-0.01, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ])
        .unwrap();
        let ex = extraction(vec![Some(0), Some(0), Some(1), Some(1), Some(2), Some(2), None]);
        let c = classify_clusters(&ex, &f, &mut rng()).unwrap();
        assert_eq!(c.labels, vec![ClusterLabel::Clean, ClusterLabel::Ood, ClusterLabel::Clean]);
        assert_eq!(c.ood, Some(1));

        let single = extraction(vec![Some(0), Some(0), None, None, None, None, None]);
        let c = classify_clusters(&single, &f, &mut rng()).unwrap();
        assert_eq!(c.labels, vec![ClusterLabel::Clean]);
        assert_eq!(c.ood, None);
    }

    #[test]
    fn density_tie_goes_to_smaller_cluster() {
        assert_eq!(sparsest(&[0.5, 0.5], &[10, 4]), 1);
        assert_eq!(sparsest(&[0.5, 0.5 + 1e-13], &[4, 10]), 0);
        assert_eq!(sparsest(&[0.6, 0.5], &[10, 4]), 0);
    }

    #[test]
    fn reembed_degenerate_sizes() {
        let f = FeatureMatrix::new(array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let cfg = PipelineConfig::default();
        assert_eq!(reembed_ood(&f, &[1], &cfg).unwrap(), vec![None]);
        assert_eq!(reembed_ood(&f, &[], &cfg).unwrap(), Vec::<Option<usize>>::new());
        assert!(reembed_ood(&f, &[7], &cfg).is_err());
    }
}
