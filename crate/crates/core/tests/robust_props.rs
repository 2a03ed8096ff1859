mod common;

use common::rng;
use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use sncf_core::robust::gradcheck::{gradient_suite, MAX_RELATIVE_ERROR};
use sncf_core::robust::*;

fn gaussian(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(&mut r))
}

fn simplex(len: usize, r: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| r.random::<f64>() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

#[test]
fn gradient_suite_on_many_batches() {
    let report = gradient_suite(100, 41).unwrap();
    assert!(report.mixup_identity);
    assert!(report.sims_identity);
    for c in &report.checks {
        assert!(c.max_relative_error <= MAX_RELATIVE_ERROR, "{}: {}", c.name, c.max_relative_error);
    }
}

#[test]
fn mixup_weight_zero_uses_partner_targets() {
    let a = gaussian(6, 5, 1);
    let k = gaussian(6, 5, 2);
    let perm = pair_permutation(6, 3);
    let mixed = loss_unsup_mixup(a.view(), k.view(), 0.0, &perm, 0.2).unwrap();
    let plain = loss_unsup(a.view(), k.select(Axis(0), &perm).view(), 0.2).unwrap();
    assert!((mixed.value - plain.value).abs() <= 1e-12);
}

#[test]
fn beta_one_is_uniform() {
    let mut r = sncf_core::rng::SplitRng::new(42).stream(0);
    let n = 100_000;
    let mut draws: Vec<f64> = (0..n).map(|_| mixup_draw_with(1.0, &mut r).unwrap()).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    assert!((mean - 0.5).abs() <= 0.01);
    draws.sort_by(f64::total_cmp);
    let ks = draws
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - x))
        .fold(0.0, f64::max);
    // asymptotic Kolmogorov critical value at the 1% level
    assert!(ks <= 1.6276 / (n as f64).sqrt(), "KS statistic {ks}");
}

#[test]
fn larger_alpha_concentrates_near_half() {
    let var = |alpha: f64| {
        let mut r = sncf_core::rng::SplitRng::new(43).stream(0);
        let d: Vec<f64> = (0..20_000).map(|_| mixup_draw_with(alpha, &mut r).unwrap()).collect();
        let m = d.iter().sum::<f64>() / d.len() as f64;
        d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / d.len() as f64
    };
    assert!(var(5.0) < var(1.0));
    assert_eq!(mixup_draw(1.0, 9).unwrap(), mixup_draw(1.0, 9).unwrap());
}

#[test]
fn sampler_counts_on_uneven_sets() {
    let s = EqualSampler::new((0..90).collect(), (100..130).collect(), (200..230).collect(), 9, 4).unwrap();
    let batches = s.epoch(0);
    assert_eq!(batches.len(), 30);
    let mut clean_hits = vec![0; 90];
    for b in &batches {
        assert_eq!((b.clean.len(), b.idn.len(), b.ood.len()), (3, 3, 3));
        b.clean.iter().for_each(|&i| clean_hits[i] += 1);
        assert_eq!(b.supervised_layout().len(), 9);
        assert_eq!(&b.contrastive_layout()[3..6], &b.idn[..]);
    }
    assert!(clean_hits.iter().all(|&c| c == 1));

    let equal = EqualSampler::new((0..30).collect(), (30..60).collect(), (60..90).collect(), 9, 4).unwrap();
    let mut seen: Vec<usize> = equal.epoch(1).iter().flat_map(|b| b.contrastive_layout()).collect();
    seen.sort_unstable();
    assert_eq!(seen, (0..90).collect::<Vec<_>>());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unsup_loss_ignores_row_scale(seed in 0u64..10_000, row in 0usize..6, scale in 0.01f64..100.0, strong in any::<bool>()) {
        let a = gaussian(6, 4, seed);
        let k = gaussian(6, 4, seed + 1);
        let base = loss_unsup(a.view(), k.view(), 0.2).unwrap().value;
        let (mut a2, mut k2) = (a.clone(), k.clone());
        if strong {
            a2.row_mut(row).mapv_inplace(|v| v * scale);
        } else {
            k2.row_mut(row).mapv_inplace(|v| v * scale);
        }
        let scaled = loss_unsup(a2.view(), k2.view(), 0.2).unwrap().value;
        prop_assert!((base - scaled).abs() <= 1e-10 * base.abs().max(1.0));
    }

    #[test]
    fn mixup_at_one_is_bitwise_plain(seed in 0u64..10_000, b in 1usize..10) {
        let a = gaussian(b, 5, seed);
        let k = gaussian(b, 5, seed + 7);
        let perm = pair_permutation(b, seed);
        let m = loss_unsup_mixup(a.view(), k.view(), 1.0, &perm, 0.2).unwrap();
        let u = loss_unsup(a.view(), k.view(), 0.2).unwrap();
        prop_assert_eq!(m.value.to_bits(), u.value.to_bits());
        prop_assert_eq!(m.grad_a, u.grad_a);
        prop_assert_eq!(m.grad_b, u.grad_b);
    }

    #[test]
    fn self_pair_sims_are_bitwise_plain(seed in 0u64..10_000, b in 1usize..10) {
        let weak = gaussian(b, 5, seed);
        let strong = gaussian(b, 5, seed + 3);
        let sims = SimMatrix::new(Array2::eye(b)).unwrap();
        let g = loss_guided_contrastive(weak.view(), strong.view(), &sims, 0.2).unwrap();
        let u = loss_unsup(strong.view(), weak.view(), 0.2).unwrap();
        prop_assert_eq!(g.value.to_bits(), u.value.to_bits());
    }

    #[test]
    fn sharpening_never_raises_entropy(seed in 0u64..10_000, c in 2usize..12, tau1 in 1.0f64..6.0) {
        let mut r = rng(seed);
        let (p1, p2) = (simplex(c, &mut r), simplex(c, &mut r));
        let avg: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| 0.5 * (a + b)).collect();
        let y = guess_label(&p1, &p2, tau1).unwrap();
        prop_assert!((y.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(entropy(&y) <= entropy(&avg) + 1e-12);
    }

    #[test]
    fn sims_depend_only_on_equivalence(seed in 0u64..10_000, b in 1usize..16) {
        let mut r = rng(seed);
        let tags: Vec<SampleTag> = (0..b)
            .map(|_| if r.random_bool(0.5) {
                SampleTag::Id(r.random_range(0..4))
            } else {
                SampleTag::Ood([None, Some(0), Some(1), Some(2)][r.random_range(0..4)])
            })
            .collect();
        // any injective relabeling of classes and groups
        let class_map = [7, 3, 11, 0];
        let group_map = [5, 9, 2];
        let relabeled: Vec<SampleTag> = tags
            .iter()
            .map(|t| match *t {
                SampleTag::Id(c) => SampleTag::Id(class_map[c]),
                SampleTag::Ood(g) => SampleTag::Ood(g.map(|g| group_map[g])),
            })
            .collect();
        prop_assert_eq!(compute_sims(&tags), compute_sims(&relabeled));
    }

    #[test]
    fn sampler_appearances_differ_by_at_most_one(seed in 0u64..10_000, nc in 1usize..60, ni in 1usize..60,
                                                  no in 1usize..60, third in 1usize..6, epoch in 0u64..4) {
        let s = EqualSampler::new((0..nc).collect(), (0..ni).collect(), (0..no).collect(), 3 * third, seed).unwrap();
        let batches = s.epoch(epoch);
        let largest = nc.max(ni).max(no);
        prop_assert_eq!(batches.len(), largest.div_ceil(third));
        for (size, pick) in [(nc, 0), (ni, 1), (no, 2)] {
            let mut hits = vec![0usize; size];
            for b in &batches {
                let draw = [&b.clean, &b.idn, &b.ood][pick];
                prop_assert_eq!(draw.len(), third);
                draw.iter().for_each(|&i| hits[i] += 1);
            }
            let (lo, hi) = (hits.iter().min().unwrap(), hits.iter().max().unwrap());
            prop_assert!(hi - lo <= 1, "group {} counts {}..{}", pick, lo, hi);
        }
    }
}
