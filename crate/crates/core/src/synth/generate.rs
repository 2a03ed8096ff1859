use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::vmf::{random_tangent, sample_vmf};
use crate::data::{FeatureMatrix, LabelVector, Verdict};
use crate::error::{Error, Result};
use crate::rng::{streams, SplitRng};

/// Parameters of the hypersphere fixture.
///
/// Concentrations are dimension-normalized: a value `κ` is sampled as a vMF
/// with concentration `κ·(d−1)/2`, so the mean cosine to the mode is close to
/// `1 − 1/κ` whatever the dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub d: usize,
    pub classes: usize,
    pub n_per_class: usize,
    pub r_in: f64,
    pub r_out: f64,
    pub kappa_id: f64,
    pub kappa_ood: f64,
    /// 1 puts a single diffuse OOD mode at `−e₁`; more spreads modes over the `−e₁` cap.
    pub ood_modes: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            d: 128,
            classes: 10,
            n_per_class: 500,
            r_in: 0.2,
            r_out: 0.2,
            kappa_id: 30.0,
            kappa_ood: 2.0,
            ood_modes: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    /// Unit-norm rows.
    pub features: FeatureMatrix,
    pub observed_labels: LabelVector,
    /// Ground truth; OOD samples carry their generating mode.
    pub truth: Vec<Verdict>,
    /// True class of ID samples, `None` for OOD.
    pub true_class: Vec<Option<usize>>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.d < 3 {
            return bad(format!("dimension must be at least 3, got {}", self.d));
        }
        if self.classes == 0 || self.n_per_class == 0 || self.ood_modes == 0 {
            return bad("classes, n_per_class and ood_modes must be positive".into());
        }
        for (name, r) in [("r_in", self.r_in), ("r_out", self.r_out)] {
            if !(0.0..1.0).contains(&r) {
                return bad(format!("{name} must lie in [0, 1), got {r}"));
            }
        }
        if self.r_in + self.r_out >= 1.0 {
            return bad(format!("r_in + r_out must be below 1, got {}", self.r_in + self.r_out));
        }
        if self.r_in > 0.0 && self.classes < 2 {
            return bad("ID noise needs at least 2 classes".into());
        }
        for (name, k) in [("kappa_id", self.kappa_id), ("kappa_ood", self.kappa_ood)] {
            if !(k >= 0.0 && k.is_finite()) {
                return bad(format!("{name} must be finite and ≥ 0, got {k}"));
            }
        }
        Ok(())
    }

    /// Per-class sample counts `(clean, id_noisy, ood)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        let n = self.n_per_class as f64;
        let idn = (self.r_in * n).round() as usize;
        let ood = (self.r_out * n).round() as usize;
        (self.n_per_class - idn - ood, idn, ood)
    }
}

fn cap_direction(d: usize, pole: f64, polar: f64, rng: &mut crate::rng::Rng) -> Vec<f64> {
    let mut axis = vec![0.0; d];
    axis[0] = pole;
    let t = random_tangent(&axis, rng);
    axis.iter().zip(&t).map(|(a, b)| polar.cos() * a + polar.sin() * b).collect()
}

/// Draws a labeled dataset with clean ID clusters in the `+e₁` cap, ID
/// noise from label flips, and OOD samples on the opposite side.
pub fn generate(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let d = spec.d;
    let root = SplitRng::new(spec.seed).child(streams::SYNTH);
    let mut layout_rng = root.stream(0);

    let class_means: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            let polar = layout_rng.random_range(30f64..=60.0).to_radians();
            cap_direction(d, 1.0, polar, &mut layout_rng)
        })
        .collect();
    let ood_means: Vec<Vec<f64>> = if spec.ood_modes == 1 {
        let mut m = vec![0.0; d];
        m[0] = -1.0;
        vec![m]
    } else {
        (0..spec.ood_modes)
            .map(|_| cap_direction(d, -1.0, 45f64.to_radians(), &mut layout_rng))
            .collect()
    };

    let (n_clean, n_idn, n_ood) = spec.counts();
    // (observed label, true verdict, true class, generating mean)
    let mut plan: Vec<(usize, Verdict, Option<usize>, usize)> = Vec::new();
    for c in 0..spec.classes {
        for _ in 0..n_clean {
            plan.push((c, Verdict::Clean, Some(c), c));
        }
        for _ in 0..n_idn {
            let other = (c + 1 + layout_rng.random_range(0..spec.classes - 1)) % spec.classes;
            plan.push((other, Verdict::IdNoisy, Some(c), c));
        }
        for _ in 0..n_ood {
            let mode = layout_rng.random_range(0..spec.ood_modes);
            plan.push((c, Verdict::Ood(Some(mode)), None, spec.classes + mode));
        }
    }
    plan.shuffle(&mut layout_rng);

    let scale = (d - 1) as f64 / 2.0;
    let rows: Vec<Vec<f64>> = plan
        .par_iter()
        .enumerate()
        .map(|(i, &(_, _, _, mean))| {
            let mut rng = root.stream(1 + i as u64);
            if mean < spec.classes {
                sample_vmf(&class_means[mean], spec.kappa_id * scale, &mut rng)
            } else {
                sample_vmf(&ood_means[mean - spec.classes], spec.kappa_ood * scale, &mut rng)
            }
        })
        .collect::<Result<_>>()?;

    let n = rows.len();
    let data = Array2::from_shape_fn((n, d), |(i, j)| rows[i][j]);
    Ok(SynthDataset {
        features: FeatureMatrix::new(data)?,
        observed_labels: LabelVector::new(plan.iter().map(|p| p.0).collect(), spec.classes)?,
        truth: plan.iter().map(|p| p.1).collect(),
        true_class: plan.iter().map(|p| p.2).collect(),
    })
}
