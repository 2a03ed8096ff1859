mod common;

use std::collections::BTreeMap;

use common::*;
use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use sncf_core::optics::*;

/// Points on a coarse integer grid so that distance ties are common.
fn grid_points(n: usize, d: usize, r: &mut rand_chacha::ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| f64::from(r.random_range(0..4u8)))
}

fn instance(case: usize, r: &mut rand_chacha::ChaCha8Rng) -> Array2<f64> {
    let n = r.random_range(5..=300);
    let d = r.random_range(1..=6);
    match case % 3 {
        0 => random_points(n, d, r),
        1 => blob_points(n, d, r.random_range(1..=4), 0.3, r),
        _ => grid_points(n, d, r),
    }
}

#[test]
fn ordering_matches_brute_force_exactly() {
    let mut r = rng(21);
    for case in 0..50 {
        let p = instance(case, &mut r);
        let min_pts = r.random_range(1..p.nrows().min(80));
        let got = optics_order(p.view(), min_pts).unwrap();
        let want = brute_optics(&p, min_pts);
        assert_eq!(got.order, want.order, "case {case}");
        assert_eq!(got.core_distance, want.core_distance, "case {case}");
        for i in 0..p.nrows() {
            let (a, b) = (got.reachability[i], want.reachability[i]);
            assert!(a == b || (a.is_infinite() && b.is_infinite()), "case {case} point {i}: {a} vs {b}");
        }
        assert!(got.reachability[got.order[0]].is_infinite());
    }
}

fn same_partition(a: &[Option<usize>], b: &[Option<usize>]) -> bool {
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    let mut back: BTreeMap<usize, usize> = BTreeMap::new();
    a.iter().zip(b).all(|(x, y)| match (x, y) {
        (None, None) => true,
        (Some(x), Some(y)) => *map.entry(*x).or_insert(*y) == *y && *back.entry(*y).or_insert(*x) == *x,
        _ => false,
    })
}

fn gaussian_blobs(sizes: &[usize], centers: &[[f64; 2]], sigma: f64, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let n: usize = sizes.iter().sum();
    let mut p = Array2::zeros((n, 2));
    let mut row = 0;
    for (&size, c) in sizes.iter().zip(centers) {
        for _ in 0..size {
            p[[row, 0]] = c[0] + noise.sample(&mut r);
            p[[row, 1]] = c[1] + noise.sample(&mut r);
            row += 1;
        }
    }
    p
}

#[test]
fn two_gaussian_blobs_give_two_clusters() {
    let p = gaussian_blobs(&[200, 200], &[[-5.0, 0.0], [5.0, 0.0]], 0.5, 22);
    let sel = multi_scale_select(p.view(), &[75, 50, 25], 0.01, 75).unwrap();
    assert_eq!(sel.extraction.cluster_count(), 2);
    assert!(!sel.degraded);
    assert!(sel.extraction.outlier_count as f64 <= 0.05 * 400.0, "{}", sel.extraction.outlier_count);
    let truth: Vec<Option<usize>> = (0..400).map(|i| Some(i / 200)).collect();
    let clustered: Vec<usize> = (0..400).filter(|&i| sel.extraction.membership[i].is_some()).collect();
    let a: Vec<Option<usize>> = clustered.iter().map(|&i| sel.extraction.membership[i]).collect();
    let b: Vec<Option<usize>> = clustered.iter().map(|&i| truth[i]).collect();
    assert!(same_partition(&a, &b));
}

#[test]
fn uniform_noise_is_degraded() {
    let mut r = rng(23);
    let p = random_points(400, 2, &mut r);
    let sel = multi_scale_select(p.view(), &[75, 50, 25], 0.01, 75).unwrap();
    assert!(sel.degraded);
}

#[test]
fn permuted_input_gives_same_partition() {
    let p = gaussian_blobs(&[150, 120, 100], &[[-6.0, 0.0], [6.0, 0.0], [0.0, 8.0]], 0.6, 24);
    let base = multi_scale_select(p.view(), &[75, 50, 25], 0.01, 75).unwrap().extraction;
    let mut r = rng(25);
    for _ in 0..3 {
        let mut perm: Vec<usize> = (0..p.nrows()).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let moved = multi_scale_select(p.select(Axis(0), &perm).view(), &[75, 50, 25], 0.01, 75)
            .unwrap()
            .extraction;
        let mut back = vec![None; p.nrows()];
        for (new, &old) in perm.iter().enumerate() {
            back[old] = moved.membership[new];
        }
        assert_eq!(base.cluster_count(), moved.cluster_count());
        assert!(same_partition(&base.membership, &back));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn core_distance_grows_with_min_pts(seed in 0u64..10_000, n in 4usize..60) {
        let p = random_points(n, 3, &mut rng(seed));
        let mut prev = vec![0.0; n];
        for m in 1..n {
            let r = optics_order(p.view(), m).unwrap();
            for (now, before) in r.core_distance.iter().zip(&prev) {
                prop_assert!(now >= before);
            }
            prev = r.core_distance;
        }
    }

    #[test]
    fn extraction_partitions_points(seed in 0u64..10_000, n in 10usize..200, grid in any::<bool>(),
                                    min_size in 2usize..30, xi in 0.001f64..0.3) {
        let mut r = rng(seed);
        let p = if grid { grid_points(n, 2, &mut r) } else { blob_points(n, 2, 3, 0.4, &mut r) };
        let min_pts = r.random_range(1..n.min(20));
        let ex = extract_xi_clusters(&optics_order(p.view(), min_pts).unwrap(), xi, min_size).unwrap();
        let mut seen = vec![0usize; n];
        let mut covered = vec![false; n];
        for &(s, e) in &ex.clusters {
            prop_assert!(e + 1 - s >= min_size);
            for c in &mut covered[s..=e] {
                prop_assert!(!*c);
                *c = true;
            }
        }
        for m in ex.membership.iter().flatten() {
            seen[*m] += 1;
        }
        let clustered: usize = ex.clusters.iter().map(|(s, e)| e + 1 - s).sum();
        prop_assert_eq!(ex.outlier_count, n - clustered);
        prop_assert_eq!(ex.membership.iter().filter(|m| m.is_none()).count(), ex.outlier_count);
        for (id, &(s, e)) in ex.clusters.iter().enumerate() {
            prop_assert_eq!(seen[id], e + 1 - s);
        }
    }
}
