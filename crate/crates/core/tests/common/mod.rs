#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sncf_core::embed::SparseAffinity;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All eigenvalues (ascending) and eigenvectors (columns) of a symmetric
/// matrix by cyclic Jacobi rotations.
pub fn jacobi_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[[i, i]].total_cmp(&a[[j, j]]));
    let values = idx.iter().map(|&i| a[[i, i]]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[[r, idx[c]]]);
    (values, vectors)
}

/// Dense `I − D^{-1/2} S D^{-1/2}` straight from the definition.
pub fn dense_laplacian(s: &Array2<f64>) -> Array2<f64> {
    let n = s.nrows();
    let deg: Vec<f64> = (0..n).map(|i| s.row(i).sum()).collect();
    let inv: Vec<f64> = deg.iter().map(|&d| 1.0 / d.max(1e-12).sqrt()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| f64::from(u8::from(i == j)) - inv[i] * s[[i, j]] * inv[j])
}

/// A random symmetric graph: a ring for connectivity (optional) plus random
/// extra edges, weights in (0, 1].
pub fn random_affinity(n: usize, extra: usize, connected: bool, rng: &mut ChaCha8Rng) -> SparseAffinity {
    let mut edges = Vec::new();
    if connected {
        for i in 0..n {
            edges.push((i, (i + 1) % n, rng.random_range(0.05..=1.0)));
        }
    }
    for _ in 0..extra {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        edges.push((i, j, rng.random_range(0.05..=1.0)));
    }
    SparseAffinity::from_edges(n, edges).unwrap()
}

pub fn random_points(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0))
}

/// Clustered point cloud: `centers` Gaussian-ish blobs of uniform jitter.
pub fn blob_points(n: usize, d: usize, centers: usize, spread: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let c = random_points(centers, d, rng) * 5.0;
    let mut out = Array2::zeros((n, d));
    for i in 0..n {
        let k = rng.random_range(0..centers);
        for j in 0..d {
            out[[i, j]] = c[[k, j]] + spread * rng.random_range(-1.0..1.0);
        }
    }
    out
}

pub struct BruteOptics {
    pub order: Vec<usize>,
    pub reachability: Vec<f64>,
    pub core_distance: Vec<f64>,
}

fn dist(p: &Array2<f64>, i: usize, j: usize) -> f64 {
    p.row(i)
        .iter()
        .zip(p.row(j).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// OPTICS with infinite generating distance, from the definitions: core
/// distance is the `min_pts`-th smallest distance to another point; the next
/// point is the unprocessed one of least reachability, lowest index first.
pub fn brute_optics(p: &Array2<f64>, min_pts: usize) -> BruteOptics {
    let n = p.nrows();
    let core_distance: Vec<f64> = (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist(p, i, j)).collect();
            d.sort_by(f64::total_cmp);
            d[min_pts - 1]
        })
        .collect();
    let mut reach = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut order = Vec::new();
    while order.len() < n {
        let next = (0..n)
            .filter(|&o| !done[o])
            .min_by(|&a, &b| reach[a].total_cmp(&reach[b]).then(a.cmp(&b)))
            .unwrap();
        done[next] = true;
        order.push(next);
        for o in 0..n {
            if !done[o] {
                reach[o] = reach[o].min(core_distance[next].max(dist(p, next, o)));
            }
        }
    }
    BruteOptics {
        order,
        reachability: reach,
        core_distance,
    }
}
