//! Central finite-difference checks for the analytic loss gradients.

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::labels::pair_permutation;
use super::losses::{loss_ce_mixup, loss_guided_contrastive, loss_unsup, loss_unsup_mixup};
use super::sims::{compute_sims, SampleTag};
use crate::error::Result;
use crate::rng::SplitRng;

pub const STEP: f64 = 1e-3;
pub const MAX_RELATIVE_ERROR: f64 = 1e-4;

/// Central-difference gradient of `f` at `x`.
pub fn numeric_gradient(x: ArrayView2<f64>, step: f64, f: impl Fn(ArrayView2<f64>) -> Result<f64>) -> Result<Array2<f64>> {
    let mut probe = x.to_owned();
    let mut g = Array2::zeros(x.dim());
    for idx in ndarray::indices(x.dim()) {
        let orig = probe[idx];
        probe[idx] = orig + step;
        let up = f(probe.view())?;
        probe[idx] = orig - step;
        let down = f(probe.view())?;
        probe[idx] = orig;
        g[idx] = (up - down) / (2.0 * step);
    }
    Ok(g)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let diff = (&a - &b).mapv(|v| v * v).sum().sqrt();
    let scale = a.mapv(|v| v * v).sum().sqrt().max(b.mapv(|v| v * v).sum().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub checks: Vec<CheckResult>,
    /// Mixup at μ=1 equals the plain loss bit for bit.
    pub mixup_identity: bool,
    /// Guided loss with self-pair-only similarities equals the plain loss bit for bit.
    pub sims_identity: bool,
}

impl SuiteReport {
    pub fn max_relative_error(&self) -> f64 {
        self.checks.iter().map(|c| c.max_relative_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.mixup_identity && self.sims_identity && self.max_relative_error() <= MAX_RELATIVE_ERROR
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut crate::rng::Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

fn simplex_rows(rows: usize, cols: usize, floor: f64, rng: &mut crate::rng::Rng) -> Array2<f64> {
    let mut m = Array2::from_shape_fn((rows, cols), |_| rng.random_range(floor..1.0));
    for mut r in m.rows_mut() {
        let s = r.sum();
        r /= s;
    }
    m
}

/// Runs every loss gradient against finite differences on `batches` random
/// batches (B=8, d=16, C=5, τ₂=0.2) plus the two exact identities.
/// Predictions for the cross-entropy check have entries of at least about 0.1.
pub fn gradient_suite(batches: usize, seed: u64) -> Result<SuiteReport> {
    let (b, d, c, tau) = (8, 16, 5, 0.2);
    let root = SplitRng::new(seed);
    let mut worst = [0.0f64; 4];
    let mut mixup_identity = true;
    let mut sims_identity = true;
    for t in 0..batches as u64 {
        let mut rng = root.stream(t);
        let a = gaussian(b, d, &mut rng);
        let k = gaussian(b, d, &mut rng);
        let perm = pair_permutation(b, seed ^ t);
        let mu: f64 = rng.random_range(0.05..0.95);
        let tags: Vec<SampleTag> = (0..b)
            .map(|_| {
                if rng.random_bool(0.6) {
                    SampleTag::Id(rng.random_range(0..3))
                } else {
                    SampleTag::Ood([None, Some(0), Some(1)][rng.random_range(0..3)])
                }
            })
            .collect();
        let sims = compute_sims(&tags);

        let mut record = |slot: usize, analytic: &Array2<f64>, numeric: Array2<f64>| {
            worst[slot] = worst[slot].max(relative_error(analytic.view(), numeric.view()));
        };

        let u = loss_unsup(a.view(), k.view(), tau)?;
        record(0, &u.grad_a, numeric_gradient(a.view(), STEP, |x| Ok(loss_unsup(x, k.view(), tau)?.value))?);
        record(0, &u.grad_b, numeric_gradient(k.view(), STEP, |x| Ok(loss_unsup(a.view(), x, tau)?.value))?);

        let m = loss_unsup_mixup(a.view(), k.view(), mu, &perm, tau)?;
        record(1, &m.grad_a, numeric_gradient(a.view(), STEP, |x| Ok(loss_unsup_mixup(x, k.view(), mu, &perm, tau)?.value))?);
        record(1, &m.grad_b, numeric_gradient(k.view(), STEP, |x| Ok(loss_unsup_mixup(a.view(), x, mu, &perm, tau)?.value))?);

        let g = loss_guided_contrastive(k.view(), a.view(), &sims, tau)?;
        record(2, &g.grad_a, numeric_gradient(k.view(), STEP, |x| Ok(loss_guided_contrastive(x, a.view(), &sims, tau)?.value))?);
        record(2, &g.grad_b, numeric_gradient(a.view(), STEP, |x| Ok(loss_guided_contrastive(k.view(), x, &sims, tau)?.value))?);

        // predictions stay well inside the simplex so the ±step probes resolve log p
        let p = simplex_rows(b, c, 0.5, &mut rng);
        let y = simplex_rows(b, c, 0.0, &mut rng);
        let ce = loss_ce_mixup(p.view(), y.view(), mu, &perm)?;
        record(3, &ce.grad_a, numeric_gradient(p.view(), STEP, |x| Ok(loss_ce_mixup(x, y.view(), mu, &perm)?.value))?);

        let one = loss_unsup_mixup(a.view(), k.view(), 1.0, &perm, tau)?;
        mixup_identity &= one == u;
        let delta = compute_sims(&vec![SampleTag::Ood(None); b]);
        let gd = loss_guided_contrastive(k.view(), a.view(), &delta, tau)?;
        sims_identity &= gd.value.to_bits() == u.value.to_bits() && gd.grad_b == u.grad_a && gd.grad_a == u.grad_b;
    }
    let names = ["unsupervised", "unsupervised mixup", "guided contrastive", "cross-entropy mixup"];
    Ok(SuiteReport {
        checks: names
            .iter()
            .zip(worst)
            .map(|(&name, e)| CheckResult {
                name,
                max_relative_error: e,
            })
            .collect(),
        mixup_identity,
        sims_identity,
    })
}
