use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use sncf_core::{CovarianceKind, PipelineConfig};

use crate::error::{io_error, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CovarianceArg {
    Full,
    Spherical,
}

impl From<CovarianceArg> for CovarianceKind {
    fn from(c: CovarianceArg) -> Self {
        match c {
            CovarianceArg::Full => CovarianceKind::Full,
            CovarianceArg::Spherical => CovarianceKind::Spherical,
        }
    }
}

/// Pipeline settings: a TOML file overridden by individual flags.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML file with pipeline settings; unknown keys are rejected.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub knn: Option<usize>,
    #[arg(long)]
    pub gamma: Option<u32>,
    #[arg(long)]
    pub k_eigen: Option<usize>,
    /// Comma-separated, strictly decreasing OPTICS MinPts values.
    #[arg(long, value_delimiter = ',')]
    pub optics_neighborhoods: Option<Vec<usize>>,
    #[arg(long)]
    pub min_cluster_size: Option<usize>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long, value_enum)]
    pub covariance: Option<CovarianceArg>,
    #[arg(long)]
    pub tau1: Option<f64>,
    #[arg(long)]
    pub tau2: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub mixup_alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub normalize_features: Option<bool>,
}

/// Reads `path` (if any), applies the flag overrides and validates the result.
pub fn load_config(path: Option<&Path>, overrides: &ConfigArgs) -> CliResult<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            toml::from_str::<PipelineConfig>(&text)
                .map_err(|e| CliError::validation(format!("{}: {}", p.display(), e.message())))?
        }
        None => PipelineConfig::default(),
    };
    let o = overrides;
    macro_rules! set {
        ($($field:ident),*) => {
            $(if let Some(v) = o.$field.clone() { cfg.$field = v; })*
        };
    }
    set!(knn, gamma, k_eigen, optics_neighborhoods, min_cluster_size, xi, tau1, tau2, beta, mixup_alpha, seed, normalize_features);
    if let Some(c) = o.covariance {
        cfg.covariance_kind = c.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

impl ConfigArgs {
    pub fn resolve(&self) -> CliResult<PipelineConfig> {
        load_config(self.config.as_deref(), self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn empty_file_gives_defaults() {
        let f = file("");
        assert_eq!(load_config(Some(f.path()), &ConfigArgs::default()).unwrap(), PipelineConfig::default());
    }

    #[test]
    fn flag_beats_file() {
        let f = file("xi = 0.01\nknn = 30\n");
        let flags = ConfigArgs {
            xi: Some(0.02),
            ..ConfigArgs::default()
        };
        let cfg = load_config(Some(f.path()), &flags).unwrap();
        assert_eq!(cfg.xi, 0.02);
        assert_eq!(cfg.knn, 30);
    }

    #[test]
    fn unknown_key_and_bad_values_rejected() {
        let f = file("knnn = 3\n");
        assert!(load_config(Some(f.path()), &ConfigArgs::default()).is_err());
        let f = file("optics_neighborhoods = [25, 50]\n");
        assert!(load_config(Some(f.path()), &ConfigArgs::default()).is_err());
        let f = file("covariance_kind = \"spherical\"\n");
        let cfg = load_config(Some(f.path()), &ConfigArgs::default()).unwrap();
        assert_eq!(cfg.covariance_kind, CovarianceKind::Spherical);
    }
}
