use ndarray::{Array2, ArrayView1, ArrayViewMut1};

use super::affinity::SparseAffinity;

/// Degree substituted for isolated nodes.
pub const ISOLATED_DEGREE: f64 = 1e-12;

/// `L = I − D^{-1/2} S D^{-1/2}` stored in CSR form with the diagonal included.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedLaplacian {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    sqrt_degrees: Vec<f64>,
}

pub fn normalized_laplacian(s: &SparseAffinity) -> NormalizedLaplacian {
    let n = s.n();
    let inv_sqrt: Vec<f64> = s
        .degrees()
        .iter()
        .map(|&d| 1.0 / (if d > 0.0 { d } else { ISOLATED_DEGREE }).sqrt())
        .collect();

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(s.nnz() + n);
    let mut values = Vec::with_capacity(s.nnz() + n);
    row_ptr.push(0);
    for i in 0..n {
        let mut diagonal_done = false;
        for (j, w) in s.row(i) {
            if !diagonal_done && j > i {
                col_idx.push(i);
                values.push(1.0);
                diagonal_done = true;
            }
            col_idx.push(j);
            values.push(-w * (inv_sqrt[i] * inv_sqrt[j]));
        }
        if !diagonal_done {
            col_idx.push(i);
            values.push(1.0);
        }
        row_ptr.push(col_idx.len());
    }
    NormalizedLaplacian {
        n,
        row_ptr,
        col_idx,
        values,
        sqrt_degrees: inv_sqrt.iter().map(|v| 1.0 / v).collect(),
    }
}

impl NormalizedLaplacian {
    /// Wraps a dense symmetric matrix; entries with magnitude zero are skipped.
    /// Degrees are unknown and taken as one.
    pub fn from_dense(m: &Array2<f64>) -> Self {
        let n = m.nrows();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if m[[i, j]] != 0.0 {
                    col_idx.push(j);
                    values.push(m[[i, j]]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
            sqrt_degrees: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `√D_ii`, spanning the null space of a graph without isolated nodes.
    pub fn sqrt_degrees(&self) -> &[f64] {
        &self.sqrt_degrees
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
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[[i, self.col_idx[k]]] = self.values[k];
            }
        }
        m
    }

    /// `y = L x`.
    pub fn apply(&self, x: ArrayView1<f64>, mut y: ArrayViewMut1<f64>) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }
}
