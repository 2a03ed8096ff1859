mod common;

use common::*;
use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::Rng;
use sncf_core::embed::*;
use sncf_core::{FeatureMatrix, PipelineConfig};

fn solvers() -> [EigenOptions; 2] {
    [
        EigenOptions {
            solver: EigenSolver::Dense,
            ..EigenOptions::default()
        },
        EigenOptions {
            solver: EigenSolver::Krylov,
            ..EigenOptions::default()
        },
    ]
}

#[test]
fn retained_pairs_match_jacobi() {
    let mut r = rng(11);
    for case in 0..50 {
        let n = r.random_range(10..=200);
        let connected = case % 5 != 0;
        let s = random_affinity(n, 3 * n, connected, &mut r);
        let l = normalized_laplacian(&s);
        let k = r.random_range(1..=10.min(n - 2));
        let (oracle, _) = jacobi_eigen(&l.to_dense());
        for opts in solvers() {
            let e = spectral_embed(&l, k, &opts).unwrap();
            assert_eq!(e.k(), k);
            for j in 0..k {
                assert!(
                    (e.eigenvalues[j] - oracle[j + 1]).abs() <= 1e-6,
                    "case {case} {:?}: λ{} = {} vs {}",
                    opts.solver,
                    j + 1,
                    e.eigenvalues[j],
                    oracle[j + 1]
                );
                assert!(e.residuals[j] <= 1e-6);
            }
            let gram = e.coords.t().dot(&e.coords);
            for a in 0..k {
                for b in 0..k {
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((gram[[a, b]] - want).abs() <= 1e-6);
                }
            }
        }
    }
}

#[test]
fn isolated_eigenvectors_match_jacobi_up_to_sign() {
    let mut r = rng(12);
    for _ in 0..20 {
        let n = r.random_range(20..=120);
        let s = random_affinity(n, 2 * n, true, &mut r);
        let l = normalized_laplacian(&s);
        let (vals, vecs) = jacobi_eigen(&l.to_dense());
        let e = spectral_embed(&l, 4, &EigenOptions::default()).unwrap();
        for j in 0..4 {
            let gap = (vals[j + 1] - vals[j]).min(vals[j + 2] - vals[j + 1]);
            if gap < 1e-3 {
                continue;
            }
            let overlap = e.coords.column(j).dot(&vecs.column(j + 1)).abs();
            assert!((overlap - 1.0).abs() <= 1e-6, "overlap {overlap}");
        }
    }
}

#[test]
fn laplacian_matches_definition() {
    let mut r = rng(13);
    for _ in 0..10 {
        let n = r.random_range(5..=60);
        let s = random_affinity(n, n, false, &mut r);
        let got = normalized_laplacian(&s).to_dense();
        let want = dense_laplacian(&s.to_dense());
        for ((i, j), v) in want.indexed_iter() {
            // isolated nodes keep a unit diagonal
            let isolated = s.degrees()[i] == 0.0;
            let w = if isolated && i == j { 1.0 } else { *v };
            assert!((got[[i, j]] - w).abs() <= 1e-12);
        }
    }
}

#[test]
fn connected_null_space_is_sqrt_degree() {
    let mut r = rng(14);
    for _ in 0..20 {
        let n = r.random_range(10..=150);
        let s = random_affinity(n, 2 * n, true, &mut r);
        let l = normalized_laplacian(&s);
        let (oracle, _) = jacobi_eigen(&l.to_dense());
        let e = spectral_embed(&l, 2, &EigenOptions::default()).unwrap();
        assert!(e.discarded_eigenvalue.abs() <= 1e-8);
        assert!(oracle[0].abs() <= 1e-8);
        let (_, v) = smallest_eigenpairs(&l, 1, &EigenOptions::default()).unwrap();
        let sd: Vec<f64> = s.degrees().iter().map(|d| d.sqrt()).collect();
        let norm = sd.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dot: f64 = v.column(0).iter().zip(&sd).map(|(a, b)| a * b).sum::<f64>() / norm;
        assert!((dot.abs() - 1.0).abs() <= 1e-8);
    }
}

fn brute_affinity(m: &Array2<f64>, knn: usize, gamma: i32) -> Array2<f64> {
    let n = m.nrows();
    let unit: Vec<Vec<f64>> = m
        .rows()
        .into_iter()
        .map(|row| {
            let norm = row.dot(&row).sqrt();
            row.iter().map(|v| v / norm).collect()
        })
        .collect();
    let cos = |i: usize, j: usize| unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum::<f64>();
    let mut s = Array2::zeros((n, n));
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| cos(i, b).total_cmp(&cos(i, a)));
        for &j in &others[..knn] {
            s[[i, j]] = cos(i, j).max(0.0).powi(gamma);
        }
    }
    let t = s.t().to_owned();
    ndarray::Zip::from(&mut s).and(&t).for_each(|a, &b| *a = a.max(b));
    s
}

#[test]
fn affinity_matches_brute_force_knn() {
    let mut r = rng(15);
    for _ in 0..10 {
        let n = r.random_range(10..=80);
        let d = r.random_range(2..=12);
        let m = random_points(n, d, &mut r);
        let knn = r.random_range(1..n);
        let s = build_affinity(&FeatureMatrix::new(m.clone()).unwrap(), knn, 3).unwrap();
        let want = brute_affinity(&m, knn, 3);
        let got = s.to_dense();
        for ((i, j), v) in want.indexed_iter() {
            assert!((got[[i, j]] - v).abs() <= 1e-12, "({i},{j}) {} vs {v}", got[[i, j]]);
        }
        for i in 0..n {
            assert_eq!(got[[i, i]], 0.0);
            assert!((s.degrees()[i] - got.row(i).sum()).abs() <= 1e-12);
        }
    }
}

#[test]
fn permuting_rows_permutes_embedding() {
    let mut r = rng(16);
    let m = random_points(90, 6, &mut r);
    let cfg = PipelineConfig {
        knn: 8,
        k_eigen: 4,
        ..PipelineConfig::default()
    };
    let base = embed_pipeline(&FeatureMatrix::new(m.clone()).unwrap(), &cfg).unwrap();
    let mut perm: Vec<usize> = (0..90).collect();
    perm.reverse();
    perm.rotate_left(17);
    let shuffled = m.select(Axis(0), &perm);
    let moved = embed_pipeline(&FeatureMatrix::new(shuffled).unwrap(), &cfg).unwrap();
    for j in 0..4 {
        assert!((base.eigenvalues[j] - moved.eigenvalues[j]).abs() <= 1e-9);
    }
    for (new_row, &old_row) in perm.iter().enumerate() {
        for j in 0..4 {
            assert!((moved.coords[[new_row, j]] - base.coords[[old_row, j]]).abs() <= 1e-7);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn spectrum_stays_in_bounds(seed in 0u64..10_000, n in 5usize..80, density in 0usize..4) {
        let mut r = rng(seed);
        let s = random_affinity(n, density * n, density % 2 == 0, &mut r);
        let l = normalized_laplacian(&s);
        let e = spectral_embed(&l, (n - 1).min(6), &EigenOptions::default()).unwrap();
        for v in e.eigenvalues {
            prop_assert!((0.0..=2.0 + 1e-9).contains(&v));
        }
    }

    #[test]
    fn affinity_is_symmetric_and_bounded(seed in 0u64..10_000, n in 3usize..50, d in 2usize..8) {
        let mut r = rng(seed);
        let m = random_points(n, d, &mut r);
        let knn = r.random_range(1..n);
        let s = build_affinity(&FeatureMatrix::new(m).unwrap(), knn, 3).unwrap();
        let dense = s.to_dense();
        for ((i, j), v) in dense.indexed_iter() {
            prop_assert_eq!(*v, dense[[j, i]]);
            prop_assert!((0.0..=1.0).contains(v));
        }
    }
}
