//! Smallest eigenpairs of the normalized Laplacian.
//!
//! Small graphs are solved densely. Larger ones use a restarted block Krylov
//! method: the basis `[X, LX, L²X, …]` is built with full reorthogonalization,
//! a Rayleigh–Ritz step extracts the smallest Ritz pairs, and the best `p`
//! Ritz vectors seed the next cycle. The block size exceeds the number of
//! wanted pairs, so repeated eigenvalues (disconnected components) are found.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::laplacian::NormalizedLaplacian;
use crate::error::{Error, Result};
use crate::rng::{Rng, SplitRng};

/// Largest graph handed to the dense solver under [`EigenSolver::Auto`].
pub const DENSE_LIMIT: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenSolver {
    #[default]
    Auto,
    Dense,
    Krylov,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub solver: EigenSolver,
    /// Absolute residual `‖Lv − λv‖₂` required of every returned pair.
    pub tolerance: f64,
    /// Cap on block expansion steps of the Krylov solver.
    pub max_iterations: usize,
    pub seed: u64,
    pub stream: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            solver: EigenSolver::Auto,
            tolerance: 1e-8,
            max_iterations: 10_000,
            seed: 0,
            stream: crate::rng::streams::EIGEN_START,
        }
    }
}

/// Spectral coordinates: the retained eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub coords: Array2<f64>,
    /// Ascending eigenvalues of the retained columns.
    pub eigenvalues: Vec<f64>,
    /// The smallest eigenvalue, which is dropped.
    pub discarded_eigenvalue: f64,
    /// `‖Lv − λv‖₂` per retained column.
    pub residuals: Vec<f64>,
}

impl Embedding {
    pub fn n(&self) -> usize {
        self.coords.nrows()
    }

    pub fn k(&self) -> usize {
        self.coords.ncols()
    }
}

/// Eigenpairs with the `count` algebraically smallest eigenvalues, ascending.
pub fn smallest_eigenpairs(
    l: &NormalizedLaplacian,
    count: usize,
    opts: &EigenOptions,
) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = l.n();
    if count == 0 || count > n {
        return Err(Error::Config(format!(
            "cannot compute {count} eigenpairs of a {n}-node graph"
        )));
    }
    let dense = match opts.solver {
        EigenSolver::Dense => true,
        EigenSolver::Krylov => false,
        EigenSolver::Auto => n <= DENSE_LIMIT,
    };
    if dense {
        Ok(dense_smallest(&l.to_dense(), count))
    } else {
        krylov_smallest(l, count, opts)
    }
}

/// Drops the smallest eigenpair and keeps the next `k`, with each vector's
/// largest-magnitude entry made positive.
pub fn spectral_embed(l: &NormalizedLaplacian, k: usize, opts: &EigenOptions) -> Result<Embedding> {
    let n = l.n();
    if k == 0 || k + 1 > n {
        return Err(Error::Config(format!(
            "k_eigen = {k} needs at least {} samples, got {n}",
            k + 1
        )));
    }
    let (values, mut vectors) = smallest_eigenpairs(l, k + 1, opts)?;
    align_null_space(&mut vectors, &values, l.sqrt_degrees());
    let mut coords = vectors.slice(s![.., 1..]).to_owned();
    for mut col in coords.columns_mut() {
        let peak = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lead = col
            .iter()
            .position(|v| v.abs() >= peak * (1.0 - SIGN_TIE))
            .unwrap_or(0);
        if col[lead] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
    // roundoff can push eigenvalues a hair outside the spectrum bound
    let eigenvalues: Vec<f64> = values[1..].iter().map(|v| v.clamp(0.0, 2.0)).collect();
    let residuals = residual_norms(l, &coords, &values[1..]);
    Ok(Embedding {
        coords,
        eigenvalues,
        discarded_eigenvalue: values[0],
        residuals,
    })
}

/// Eigenvalues closer than this to the smallest one share its eigenspace.
const DEGENERACY: f64 = 1e-9;
/// Relative slack when locating the largest-magnitude entry for the sign rule.
const SIGN_TIE: f64 = 1e-9;

/// When the smallest eigenvalue is repeated, rotates its eigenspace so the
/// first (discarded) vector is the projection of `√D`, leaving the others
/// orthogonal to the trivial component.
fn align_null_space(vectors: &mut Array2<f64>, values: &[f64], sqrt_degrees: &[f64]) {
    let m = values.iter().take_while(|v| **v - values[0] <= DEGENERACY).count();
    if m < 2 {
        return;
    }
    let block = vectors.slice(s![.., ..m]).to_owned();
    let target = Array1::from(sqrt_degrees.to_vec());
    let coef = block.t().dot(&target);
    let norm = coef.dot(&coef).sqrt();
    if norm < 1e-12 * target.dot(&target).sqrt() {
        return;
    }
    // Householder reflection in coefficient space mapping e0 onto coef/|coef|.
    let mut h = Array2::<f64>::eye(m);
    let mut u = coef.mapv(|c| c / norm);
    u[0] -= 1.0;
    let un = u.dot(&u);
    if un > 1e-30 {
        for i in 0..m {
            for j in 0..m {
                h[[i, j]] -= 2.0 * u[i] * u[j] / un;
            }
        }
    }
    let rotated = block.dot(&h);
    vectors.slice_mut(s![.., ..m]).assign(&rotated);
}

/// `‖L v_j − λ_j v_j‖₂` for every column.
pub fn residual_norms(l: &NormalizedLaplacian, vectors: &Array2<f64>, values: &[f64]) -> Vec<f64> {
    let mut out = Array1::zeros(l.n());
    vectors
        .columns()
        .into_iter()
        .zip(values)
        .map(|(v, &lambda)| {
            l.apply(v, out.view_mut());
            out.iter()
                .zip(v.iter())
                .map(|(a, b)| (a - lambda * b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

fn dense_smallest(m: &Array2<f64>, count: usize) -> (Vec<f64>, Array2<f64>) {
    let n = m.nrows();
    let dm = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[[i, j]] + m[[j, i]]));
    let (values, vectors) = sorted_eigen(dm);
    let out = Array2::from_shape_fn((n, count), |(i, j)| vectors[(i, j)]);
    (values[..count].to_vec(), out)
}

fn apply_block(l: &NormalizedLaplacian, x: ArrayView2<f64>) -> Array2<f64> {
    let mut y = Array2::zeros(x.raw_dim());
    for (xc, yc) in x.columns().into_iter().zip(y.columns_mut()) {
        l.apply(xc, yc);
    }
    y
}

fn random_block(rng: &mut Rng, n: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, cols), |_| rng.sample::<f64, _>(StandardNormal))
}

/// Orthonormalizes the columns of `r` against `basis` and against each other.
/// Columns that vanish are replaced by fresh random directions.
fn orthonormalize_block(basis: ArrayView2<f64>, r: &mut Array2<f64>, rng: &mut Rng) {
    let n = r.nrows();
    let project = |r: &mut Array2<f64>| {
        if basis.ncols() > 0 {
            let c = basis.t().dot(&*r);
            *r -= &basis.dot(&c);
        }
    };
    project(r);
    project(r);
    for j in 0..r.ncols() {
        let mut attempts = 0;
        loop {
            let before = r.column(j).dot(&r.column(j)).sqrt();
            for _ in 0..2 {
                for i in 0..j {
                    let (done, mut rest) = r.view_mut().split_at(Axis(1), j);
                    let qi = done.column(i);
                    let coef = qi.dot(&rest.column(0));
                    rest.column_mut(0).scaled_add(-coef, &qi);
                }
            }
            let norm = r.column(j).dot(&r.column(j)).sqrt();
            if norm > 1e-10 * before.max(1e-300) && norm > 1e-300 {
                r.column_mut(j).mapv_inplace(|v| v / norm);
                break;
            }
            attempts += 1;
            assert!(attempts < 8, "cannot complete an orthonormal basis");
            let mut fresh = random_block(rng, n, 1);
            if basis.ncols() > 0 {
                for _ in 0..2 {
                    let c = basis.t().dot(&fresh);
                    fresh -= &basis.dot(&c);
                }
            }
            r.column_mut(j).assign(&fresh.column(0));
        }
    }
}

fn krylov_smallest(
    l: &NormalizedLaplacian,
    count: usize,
    opts: &EigenOptions,
) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = l.n();
    let mut rng = SplitRng::new(opts.seed).stream(opts.stream);
    let block = (count + (count / 2).max(8)).min(n);
    let capacity = (block * 6).max(block + 1).min(n);

    let mut x = random_block(&mut rng, n, block);
    orthonormalize_block(Array2::<f64>::zeros((n, 0)).view(), &mut x, &mut rng);
    let mut ax = apply_block(l, x.view());

    let mut q = Array2::<f64>::zeros((n, capacity));
    let mut w = Array2::<f64>::zeros((n, capacity));
    let mut iterations = 0;
    loop {
        q.slice_mut(s![.., ..block]).assign(&x);
        w.slice_mut(s![.., ..block]).assign(&ax);
        let mut cur = block;
        let mut last = 0..block;
        while cur < capacity {
            let cols = last.len().min(capacity - cur);
            let mut r = w.slice(s![.., last.start..last.start + cols]).to_owned();
            orthonormalize_block(q.slice(s![.., ..cur]), &mut r, &mut rng);
            let ar = apply_block(l, r.view());
            q.slice_mut(s![.., cur..cur + cols]).assign(&r);
            w.slice_mut(s![.., cur..cur + cols]).assign(&ar);
            last = cur..cur + cols;
            cur += cols;
            iterations += 1;
        }

        let qv = q.slice(s![.., ..cur]);
        let wv = w.slice(s![.., ..cur]);
        let t = qv.t().dot(&wv);
        let tm = DMatrix::from_fn(cur, cur, |i, j| 0.5 * (t[[i, j]] + t[[j, i]]));
        let (theta, s_vecs) = sorted_eigen(tm);
        let s_block = Array2::from_shape_fn((cur, block), |(i, j)| s_vecs[(i, j)]);
        let y = qv.dot(&s_block);
        let ay = wv.dot(&s_block);

        let max_residual = (0..count)
            .map(|j| {
                ay.column(j)
                    .iter()
                    .zip(y.column(j).iter())
                    .map(|(a, b)| (a - theta[j] * b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);

        if max_residual <= opts.tolerance || cur == n {
            let vectors = y.slice(s![.., ..count]).to_owned();
            let values = theta[..count].to_vec();
            let check = residual_norms(l, &vectors, &values)
                .into_iter()
                .fold(0.0, f64::max);
            if check <= opts.tolerance.max(1e-12) * 10.0 || cur == n {
                return Ok((values, vectors));
            }
        }
        if iterations >= opts.max_iterations {
            return Err(Error::NoConvergence {
                iterations,
                residual: max_residual,
            });
        }
        log::trace!("krylov restart after {iterations} steps, residual {max_residual:.3e}");
        x = y;
        ax = ay;
    }
}
