use std::cmp::Ordering;

use ndarray::{s, Array2};
use rayon::prelude::*;

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};

/// Query rows scored against the whole dataset per block.
const QUERY_BLOCK: usize = 128;

/// Symmetric kNN cosine affinity graph in compressed sparse row form.
///
/// Rows are sorted by column. The diagonal is never stored (it is zero).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAffinity {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    degrees: Vec<f64>,
}

impl SparseAffinity {
    /// Builds the graph from unordered weighted edges; duplicate and mirrored
    /// pairs are merged with `max`, self loops are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut triplets = Vec::new();
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!("edge ({i}, {j}) outside {n} nodes")));
            }
            if !(w.is_finite() && (0.0..=1.0).contains(&w)) {
                return Err(Error::InvalidInput(format!("edge weight {w} outside [0, 1]")));
            }
            if i != j {
                triplets.push((i, j, w));
                triplets.push((j, i, w));
            }
        }
        triplets.sort_unstable_by_key(|t| (t.0, t.1));

        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, w) in triplets {
            if last == Some((i, j)) {
                let v = values.last_mut().expect("previous edge exists");
                *v = v.max(w);
                continue;
            }
            last = Some((i, j));
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(w);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let degrees = (0..n)
            .map(|i| values[row_ptr[i]..row_ptr[i + 1]].iter().sum())
            .collect();
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
            degrees,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `D_ii = Σ_j S_ij`.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Neighbors and weights of node `i`, sorted by neighbor index.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(pos) => self.values[r.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, w) in self.row(i) {
                m[[i, j]] = w;
            }
        }
        m
    }
}

/// Connects each row to its `knn` most cosine-similar rows (self excluded)
/// with weight `max(cos, 0)^gamma`, then symmetrizes by elementwise max.
///
/// Ties in similarity are broken toward the lower row index.
pub fn build_affinity(m: &FeatureMatrix, knn: usize, gamma: u32) -> Result<SparseAffinity> {
    let n = m.n();
    if knn == 0 || knn >= n {
        return Err(Error::Config(format!(
            "knn must be in [1, {}) for {n} samples, got {knn}",
            n
        )));
    }
    let unit = if m.is_normalized() {
        m.as_array().clone()
    } else {
        m.l2_normalize_rows()?.into_array()
    };

    let starts: Vec<usize> = (0..n).step_by(QUERY_BLOCK).collect();
    let neighbor_lists: Vec<Vec<(usize, f64)>> = starts
        .par_iter()
        .flat_map_iter(|&start| {
            let end = (start + QUERY_BLOCK).min(n);
            let sims = unit.slice(s![start..end, ..]).dot(&unit.t());
            (start..end)
                .map(|i| top_k(sims.row(i - start).as_slice().expect("standard layout"), i, knn))
                .collect::<Vec<_>>()
        })
        .collect();

    let edges = neighbor_lists.into_iter().enumerate().flat_map(|(i, list)| {
        list.into_iter()
            .map(move |(j, c)| (i, j, c.clamp(0.0, 1.0).powi(gamma as i32)))
    });
    SparseAffinity::from_edges(n, edges)
}

fn by_similarity(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then(a.0.cmp(&b.0))
}

fn top_k(sims: &[f64], exclude: usize, k: usize) -> Vec<(usize, f64)> {
    let mut candidates: Vec<(usize, f64)> = sims
        .iter()
        .copied()
        .enumerate()
        .filter(|&(j, _)| j != exclude)
        .collect();
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, by_similarity);
    }
    let mut kept = candidates[..k.min(candidates.len())].to_vec();
    kept.sort_unstable_by(by_similarity);
    kept
}
