use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;
use sncf_core::detect::{detect_dataset_gmm_full, detect_per_class_full, NoiseReport};
use sncf_core::embed::embed_pipeline;
use sncf_core::gmm::{gmm_assign, gmm_fit, GmmModel};
use sncf_core::io::{load_features, load_labels, read_matrix, save_features, save_labels, write_matrix, MatrixFormat};
use sncf_core::optics::{extract_xi_clusters, optics_order};
use sncf_core::robust::gradcheck::{gradient_suite, MAX_RELATIVE_ERROR};
use sncf_core::synth::{generate, linear_probe, score_detection, DetectionScores, SynthSpec};
use sncf_core::{FeatureMatrix, VerdictKind};

use crate::config::{ConfigArgs, CovarianceArg};
use crate::error::{io_error, CliError, CliResult};
use crate::manifest::{ManifestBuilder, RunManifest};
use crate::tables::{emit_json, read_verdicts, write_rows, write_verdicts};

fn features(path: &Path) -> CliResult<FeatureMatrix> {
    Ok(load_features(path, MatrixFormat::from_path(path))?)
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub n_per_class: Option<usize>,
    #[arg(long)]
    pub r_in: Option<f64>,
    #[arg(long)]
    pub r_out: Option<f64>,
    #[arg(long)]
    pub kappa_id: Option<f64>,
    #[arg(long)]
    pub kappa_ood: Option<f64>,
    #[arg(long)]
    pub ood_modes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Feature matrix; `.npy` or CSV by extension.
    #[arg(long)]
    pub out_features: PathBuf,
    /// Observed labels, one per line.
    #[arg(long)]
    pub out_labels: PathBuf,
    /// Ground truth as `index,kind,ood_group`.
    #[arg(long)]
    pub out_truth: Option<PathBuf>,
}

pub fn synth(a: &SynthArgs) -> CliResult<()> {
    let base = SynthSpec::default();
    let spec = SynthSpec {
        d: a.d.unwrap_or(base.d),
        classes: a.classes.unwrap_or(base.classes),
        n_per_class: a.n_per_class.unwrap_or(base.n_per_class),
        r_in: a.r_in.unwrap_or(base.r_in),
        r_out: a.r_out.unwrap_or(base.r_out),
        kappa_id: a.kappa_id.unwrap_or(base.kappa_id),
        kappa_ood: a.kappa_ood.unwrap_or(base.kappa_ood),
        ood_modes: a.ood_modes.unwrap_or(base.ood_modes),
        seed: a.seed.unwrap_or(base.seed),
    };
    let ds = generate(&spec)?;
    save_features(&a.out_features, &ds.features, MatrixFormat::from_path(&a.out_features))?;
    save_labels(&a.out_labels, &ds.observed_labels)?;
    if let Some(p) = &a.out_truth {
        write_verdicts(p, &ds.truth)?;
    }
    let (clean, idn, ood) = spec.counts();
    log::info!("generated {} samples; per class {clean} clean, {idn} id-noisy, {ood} ood", ds.truth.len());
    Ok(())
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Output directory for embedding.npy, eigenvalues.csv and report.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct EmbedReport<'a> {
    manifest: RunManifest,
    embedding: EmbedSummary<'a>,
}

#[derive(Serialize)]
struct EmbedSummary<'a> {
    samples: usize,
    dimensions: usize,
    discarded_eigenvalue: f64,
    eigenvalues: &'a [f64],
    residuals: &'a [f64],
}

#[derive(Serialize)]
struct EigenRow {
    index: usize,
    eigenvalue: f64,
    residual: f64,
}

pub fn embed(a: &EmbedArgs, mut m: ManifestBuilder) -> CliResult<()> {
    let cfg = a.cfg.resolve()?;
    m.config(&cfg).input("features", &a.features)?;
    let x = features(&a.features)?;
    let e = embed_pipeline(&x, &cfg)?;
    create_dir(&a.out)?;
    write_matrix(&a.out.join("embedding.npy"), &e.coords, MatrixFormat::Npy)?;
    write_rows(
        &a.out.join("eigenvalues.csv"),
        e.eigenvalues.iter().zip(&e.residuals).enumerate().map(|(index, (&eigenvalue, &residual))| EigenRow {
            index,
            eigenvalue,
            residual,
        }),
    )?;
    let report = EmbedReport {
        manifest: m.finish(),
        embedding: EmbedSummary {
            samples: e.n(),
            dimensions: e.k(),
            discarded_eigenvalue: e.discarded_eigenvalue,
            eigenvalues: &e.eigenvalues,
            residuals: &e.residuals,
        },
    };
    emit_json(Some(&a.out.join("report.json")), &report)
}

#[derive(Debug, Args)]
pub struct OpticsArgs {
    /// Point matrix; `.npy` or CSV by extension.
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub min_pts: usize,
    #[arg(long, default_value_t = 0.01)]
    pub xi: f64,
    #[arg(long, default_value_t = 75)]
    pub min_cluster_size: usize,
    /// CSV of `position,index,reachability,core_distance,cluster` in visit order.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct OpticsRow {
    position: usize,
    index: usize,
    reachability: f64,
    core_distance: f64,
    cluster: i64,
}

pub fn optics(a: &OpticsArgs) -> CliResult<()> {
    let p = read_matrix(&a.points, MatrixFormat::from_path(&a.points))?;
    let r = optics_order(p.view(), a.min_pts)?;
    let ex = extract_xi_clusters(&r, a.xi, a.min_cluster_size)?;
    log::info!("{} clusters, {} outliers", ex.cluster_count(), ex.outlier_count);
    write_rows(
        &a.out,
        r.order.iter().enumerate().map(|(position, &index)| OpticsRow {
            position,
            index,
            reachability: r.reachability[index],
            core_distance: r.core_distance[index],
            cluster: ex.membership[index].map_or(-1, |c| c as i64),
        }),
    )
}

#[derive(Debug, Args)]
pub struct GmmArgs {
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long, value_enum, default_value_t = CovarianceArg::Full)]
    pub covariance: CovarianceArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for model.json and assignments.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct GmmReport<'a> {
    manifest: RunManifest,
    model: &'a GmmModel,
    component_sizes: Vec<usize>,
}

#[derive(Serialize)]
struct AssignmentRow {
    index: usize,
    component: usize,
    p0: f64,
    p1: f64,
}

pub fn gmm(a: &GmmArgs, mut m: ManifestBuilder) -> CliResult<()> {
    m.seed(a.seed).input("points", &a.points)?;
    let p = read_matrix(&a.points, MatrixFormat::from_path(&a.points))?;
    let model = gmm_fit(p.view(), a.covariance.into(), a.seed)?;
    let assignment = gmm_assign(&model, p.view())?;
    create_dir(&a.out)?;
    write_rows(
        &a.out.join("assignments.csv"),
        assignment.labels.iter().enumerate().map(|(index, &component)| AssignmentRow {
            index,
            component,
            p0: assignment.responsibilities[[index, 0]],
            p1: assignment.responsibilities[[index, 1]],
        }),
    )?;
    let mut component_sizes = vec![0; model.weights.len()];
    assignment.labels.iter().for_each(|&l| component_sizes[l] += 1);
    let report = GmmReport {
        manifest: m.finish(),
        model: &model,
        component_sizes,
    };
    emit_json(Some(&a.out.join("model.json")), &report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    PerClass,
    DatasetGmm,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Observed labels, one per line. Without labels the mode is dataset-gmm.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// JSON report; printed to standard output when omitted.
    #[arg(long)]
    pub out_report: Option<PathBuf>,
    /// CSV of `index,kind,ood_group`.
    #[arg(long)]
    pub out_verdicts: Option<PathBuf>,
    /// Spectral coordinates of the whole dataset as NPY.
    #[arg(long)]
    pub out_embedding: Option<PathBuf>,
}

#[derive(Serialize)]
struct DetectReport<'a> {
    manifest: RunManifest,
    report: &'a NoiseReport,
}

pub fn detect(a: &DetectArgs, mut m: ManifestBuilder) -> CliResult<()> {
    let mode = match (a.mode, &a.labels) {
        (Some(ModeArg::PerClass), None) => {
            return Err(CliError::validation("--mode per-class requires --labels"));
        }
        (Some(mode), _) => mode,
        (None, Some(_)) => ModeArg::PerClass,
        (None, None) => ModeArg::DatasetGmm,
    };
    let cfg = a.cfg.resolve()?;
    m.config(&cfg).input("features", &a.features)?;
    let x = features(&a.features)?;
    let detection = match mode {
        ModeArg::PerClass => {
            let path = a.labels.as_deref().expect("checked above");
            m.input("labels", path)?;
            let labels = load_labels(path)?;
            if labels.len() != x.n() {
                return Err(CliError::validation(format!(
                    "{} has {} labels for {} feature rows",
                    path.display(),
                    labels.len(),
                    x.n()
                )));
            }
            detect_per_class_full(&x, &labels, &cfg)?
        }
        ModeArg::DatasetGmm => {
            if a.labels.is_some() {
                log::warn!("labels are ignored in dataset-gmm mode");
            }
            detect_dataset_gmm_full(&x, &cfg)?
        }
    };
    let r = &detection.report;
    log::info!("{} clean, {} id-noisy, {} ood in {} groups", r.counts.clean, r.counts.id_noisy, r.counts.ood, r.ood_groups);
    if let Some(p) = &a.out_verdicts {
        write_verdicts(p, &r.verdicts)?;
    }
    if let Some(p) = &a.out_embedding {
        write_matrix(p, &detection.embedding.coords, MatrixFormat::Npy)?;
    }
    let report = DetectReport {
        manifest: m.finish(),
        report: r,
    };
    emit_json(a.out_report.as_deref(), &report)
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Ground truth as `index,kind,ood_group`; OOD rows are the positive class.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn probe(a: &ProbeArgs) -> CliResult<()> {
    let x = features(&a.features)?;
    let truth = read_verdicts(&a.truth)?;
    if truth.len() != x.n() {
        return Err(CliError::validation(format!("{} truth rows for {} feature rows", truth.len(), x.n())));
    }
    let is_ood: Vec<bool> = truth.iter().map(|v| v.kind() == VerdictKind::Ood).collect();
    let acc = linear_probe(&x, &is_ood, a.seed)?;
    println!("{acc}");
    Ok(())
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Predicted verdicts as `index,kind,ood_group`.
    #[arg(long)]
    pub verdicts: PathBuf,
    /// Ground truth in the same format.
    #[arg(long)]
    pub truth: PathBuf,
    /// JSON scores; printed to standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ScoreReport<'a> {
    manifest: RunManifest,
    scores: &'a DetectionScores,
}

pub fn score(a: &ScoreArgs, mut m: ManifestBuilder) -> CliResult<()> {
    m.input("verdicts", &a.verdicts)?.input("truth", &a.truth)?;
    let predicted = read_verdicts(&a.verdicts)?;
    let truth = read_verdicts(&a.truth)?;
    let scores = score_detection(&predicted, &truth)?;
    let report = ScoreReport {
        manifest: m.finish(),
        scores: &scores,
    };
    emit_json(a.out.as_deref(), &report)
}

#[derive(Debug, Args)]
pub struct LossesCheckArgs {
    #[arg(long, default_value_t = 100)]
    pub batches: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn losses_check(a: &LossesCheckArgs) -> CliResult<()> {
    let report = gradient_suite(a.batches, a.seed)?;
    for c in &report.checks {
        println!("{:<20} max relative error {:.3e}", c.name, c.max_relative_error);
    }
    println!("mixup identity       {}", report.mixup_identity);
    println!("sims identity        {}", report.sims_identity);
    println!("max relative error {:.3e} (limit {MAX_RELATIVE_ERROR:.0e})", report.max_relative_error());
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::numerical(format!(
            "gradient suite failed: max relative error {:.3e}, mixup identity {}, sims identity {}",
            report.max_relative_error(),
            report.mixup_identity,
            report.sims_identity
        )))
    }
}
