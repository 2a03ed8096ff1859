use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Verdict, VerdictKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True members of the category.
    pub support: usize,
    /// Samples predicted as the category.
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionScores {
    pub clean: CategoryScore,
    pub id_noisy: CategoryScore,
    pub ood: CategoryScore,
    /// Discovered OOD groups.
    pub ood_groups: usize,
    /// Mean over discovered groups of the largest share of one true OOD mode;
    /// absent when no group was discovered.
    pub ood_group_purity: Option<f64>,
}

impl DetectionScores {
    pub fn category(&self, kind: VerdictKind) -> &CategoryScore {
        match kind {
            VerdictKind::Clean => &self.clean,
            VerdictKind::IdNoisy => &self.id_noisy,
            VerdictKind::Ood => &self.ood,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn score(predicted: &[Verdict], truth: &[Verdict], kind: VerdictKind) -> CategoryScore {
    let mut tp = 0;
    let mut pred = 0;
    let mut support = 0;
    for (p, t) in predicted.iter().zip(truth) {
        let (p, t) = (p.kind() == kind, t.kind() == kind);
        tp += usize::from(p && t);
        pred += usize::from(p);
        support += usize::from(t);
    }
    if pred == 0 && support == 0 {
        return CategoryScore {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
            support,
            predicted: pred,
        };
    }
    let precision = ratio(tp, pred);
    let recall = ratio(tp, support);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    CategoryScore {
        precision,
        recall,
        f1,
        support,
        predicted: pred,
    }
}

/// One-vs-rest precision, recall and F1 per verdict kind, plus OOD group purity.
/// A kind absent from both inputs scores 1.
pub fn score_detection(predicted: &[Verdict], truth: &[Verdict]) -> Result<DetectionScores> {
    if predicted.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "{} verdicts against {} ground-truth entries",
            predicted.len(),
            truth.len()
        )));
    }
    let mut groups: BTreeMap<usize, BTreeMap<Option<usize>, usize>> = BTreeMap::new();
    for (p, t) in predicted.iter().zip(truth) {
        if let Verdict::Ood(Some(g)) = p {
            let mode = match t {
                Verdict::Ood(Some(m)) => Some(*m),
                _ => None,
            };
            *groups.entry(*g).or_default().entry(mode).or_default() += 1;
        }
    }
    let purities: Vec<f64> = groups
        .values()
        .map(|modes| {
            let size: usize = modes.values().sum();
            let best = modes.iter().filter(|(m, _)| m.is_some()).map(|(_, &c)| c).max().unwrap_or(0);
            best as f64 / size as f64
        })
        .collect();
    Ok(DetectionScores {
        clean: score(predicted, truth, VerdictKind::Clean),
        id_noisy: score(predicted, truth, VerdictKind::IdNoisy),
        ood: score(predicted, truth, VerdictKind::Ood),
        ood_groups: groups.len(),
        ood_group_purity: (!purities.is_empty()).then(|| purities.iter().sum::<f64>() / purities.len() as f64),
    })
}
