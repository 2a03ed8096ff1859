use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::SplitRng;

/// Index draws for one mini-batch, `B/3` from each group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchIndices {
    pub clean: Vec<usize>,
    pub idn: Vec<usize>,
    pub ood: Vec<usize>,
}

impl BatchIndices {
    /// Cross-entropy batch: two views of the clean draw and one of the ID-noisy draw.
    pub fn supervised_layout(&self) -> Vec<usize> {
        [&self.clean[..], &self.clean[..], &self.idn[..]].concat()
    }

    /// Guided contrastive batch: clean, ID-noisy and OOD draws.
    pub fn contrastive_layout(&self) -> Vec<usize> {
        [&self.clean[..], &self.idn[..], &self.ood[..]].concat()
    }
}

/// Equal-share batch builder over the clean, ID-noisy and OOD index sets.
///
/// An epoch walks the largest set once; smaller sets are over-sampled by
/// cycling through freshly shuffled copies, so within an epoch the visit
/// counts of any one set differ by at most one.
#[derive(Debug, Clone)]
pub struct EqualSampler {
    groups: [Vec<usize>; 3],
    per_group: usize,
    seed: u64,
}

impl EqualSampler {
    pub fn new(clean: Vec<usize>, idn: Vec<usize>, ood: Vec<usize>, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 || !batch_size.is_multiple_of(3) {
            return Err(Error::InvalidInput(format!(
                "batch size must be a positive multiple of 3, got {batch_size}"
            )));
        }
        for (name, g) in [("clean", &clean), ("ID-noisy", &idn), ("OOD", &ood)] {
            if g.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "{name} set is empty; without ID noise build the sampler with \
                     EqualSampler::clean_fills_idn"
                )));
            }
        }
        Ok(Self {
            groups: [clean, idn, ood],
            per_group: batch_size / 3,
            seed,
        })
    }

    /// Sampler for data without ID noise: the ID-noisy slot draws clean samples.
    pub fn clean_fills_idn(clean: Vec<usize>, ood: Vec<usize>, batch_size: usize, seed: u64) -> Result<Self> {
        Self::new(clean.clone(), clean, ood, batch_size, seed)
    }

    pub fn batches_per_epoch(&self) -> usize {
        let largest = self.groups.iter().map(Vec::len).max().unwrap_or(0);
        largest.div_ceil(self.per_group)
    }

    /// All batches of the given epoch.
    pub fn epoch(&self, epoch: u64) -> Vec<BatchIndices> {
        let nb = self.batches_per_epoch();
        let need = nb * self.per_group;
        let root = SplitRng::new(self.seed);
        let streams: Vec<Vec<usize>> = self
            .groups
            .iter()
            .enumerate()
            .map(|(g, set)| {
                let mut rng = root.stream(epoch * 3 + g as u64);
                let mut out = Vec::with_capacity(need + set.len());
                while out.len() < need {
                    let mut copy = set.clone();
                    copy.shuffle(&mut rng);
                    out.extend(copy);
                }
                out.truncate(need);
                out
            })
            .collect();
        let slice = |g: usize, b: usize| streams[g][b * self.per_group..(b + 1) * self.per_group].to_vec();
        (0..nb)
            .map(|b| BatchIndices {
                clean: slice(0, b),
                idn: slice(1, b),
                ood: slice(2, b),
            })
            .collect()
    }
}
