use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::sims::SimMatrix;
use crate::error::{Error, Result};

/// A loss value with gradients for each input matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    /// Gradient with respect to the first matrix argument.
    pub grad_a: Array2<f64>,
    /// Gradient with respect to the second matrix argument (empty when the
    /// loss has a single differentiable input).
    pub grad_b: Array2<f64>,
}

fn log_sum_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Unit rows and their original norms.
fn normalize(x: ArrayView2<f64>, what: &str) -> Result<(Array2<f64>, Array1<f64>)> {
    let mut out = x.to_owned();
    let mut norms = Array1::zeros(x.nrows());
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let n = row.dot(&row).sqrt();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::InvalidInput(format!("{what} row {i} has zero or non-finite norm")));
        }
        row /= n;
        norms[i] = n;
    }
    Ok((out, norms))
}

/// Maps a gradient with respect to unit rows back to the raw rows.
fn through_normalization(g: Array2<f64>, unit: &Array2<f64>, norms: &Array1<f64>) -> Array2<f64> {
    let mut out = g;
    for ((mut row, n), &norm) in out.rows_mut().into_iter().zip(unit.rows()).zip(norms) {
        let radial = row.dot(&n);
        row.scaled_add(-radial, &n);
        row /= norm;
    }
    out
}

fn check_pair(a: ArrayView2<f64>, b: ArrayView2<f64>, tau: f64) -> Result<()> {
    if a.nrows() == 0 {
        return Err(Error::InvalidInput("batch is empty".into()));
    }
    if a.dim() != b.dim() {
        return Err(Error::InvalidInput(format!(
            "representation shapes differ: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!("temperature must be positive, got {tau}")));
    }
    Ok(())
}

/// Shared cosine-softmax machinery. `row_loss` receives the logits of one
/// anchor with their log-sum-exp and returns the row loss and `∂loss/∂z`.
fn contrastive(
    anchors: ArrayView2<f64>,
    keys: ArrayView2<f64>,
    tau: f64,
    row_loss: impl Fn(usize, &[f64], f64) -> (f64, Vec<f64>),
) -> Result<LossGrad> {
    check_pair(anchors, keys, tau)?;
    let b = anchors.nrows();
    let (na, norms_a) = normalize(anchors, "anchor")?;
    let (nk, norms_k) = normalize(keys, "key")?;
    let z = na.dot(&nk.t()) / tau;

    let mut value = 0.0;
    let mut dz = Array2::zeros((b, b));
    for i in 0..b {
        let zi = z.row(i).to_vec();
        let lse = log_sum_exp(zi.iter().copied());
        let (l, g) = row_loss(i, &zi, lse);
        value += l;
        for (k, gk) in g.into_iter().enumerate() {
            dz[[i, k]] = gk / b as f64;
        }
    }
    value /= b as f64;

    let g_na = dz.dot(&nk) / tau;
    let g_nk = dz.t().dot(&na) / tau;
    Ok(LossGrad {
        value,
        grad_a: through_normalization(g_na, &na, &norms_a),
        grad_b: through_normalization(g_nk, &nk, &norms_k),
    })
}

fn softmax(z: &[f64], lse: f64) -> Vec<f64> {
    z.iter().map(|v| (v - lse).exp()).collect()
}

/// Unsupervised N-pairs loss with anchors `u_strong` and keys `u_weak`.
/// `grad_a` is taken with respect to the anchors, `grad_b` the keys.
pub fn loss_unsup(u_strong: ArrayView2<f64>, u_weak: ArrayView2<f64>, tau2: f64) -> Result<LossGrad> {
    contrastive(u_strong, u_weak, tau2, |i, z, lse| {
        let mut g = softmax(z, lse);
        g[i] -= 1.0;
        (lse - z[i], g)
    })
}

fn check_perm(perm: &[usize], b: usize) -> Result<()> {
    let mut seen = vec![false; b];
    if perm.len() != b {
        return Err(Error::InvalidInput(format!("pairing has length {}, batch has {b}", perm.len())));
    }
    for &j in perm {
        if j >= b || std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidInput("pairing is not a permutation".into()));
        }
    }
    Ok(())
}

fn check_mu(mu: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidInput(format!("mixing weight {mu} outside [0, 1]")));
    }
    Ok(())
}

/// N-pairs loss for mixed anchors `u_mix = μ·x_i + (1−μ)·x_perm(i)`:
/// `−log(μ·P_ii + (1−μ)·P_ij)` averaged over the batch, evaluated in the log domain.
pub fn loss_unsup_mixup(
    u_mix: ArrayView2<f64>,
    u_keys: ArrayView2<f64>,
    mu: f64,
    pair_perm: &[usize],
    tau2: f64,
) -> Result<LossGrad> {
    check_mu(mu)?;
    check_perm(pair_perm, u_mix.nrows())?;
    let (ln_mu, ln_rest) = (mu.ln(), (1.0 - mu).ln());
    contrastive(u_mix, u_keys, tau2, |i, z, lse| {
        let j = pair_perm[i];
        let a = ln_mu + z[i];
        let c = ln_rest + z[j];
        let m = a.max(c);
        let mixed = m + ((a - m).exp() + (c - m).exp()).ln();
        let w = (a - mixed).exp();
        let mut g = softmax(z, lse);
        g[i] -= w;
        g[j] -= 1.0 - w;
        (lse - mixed, g)
    })
}

/// Guided contrastive loss with anchors `r_strong` and keys `r_weak`:
/// `(1/B)·Σ_i Σ_b e_ib·(−log P_ib)`. `grad_a` is with respect to `r_weak`,
/// `grad_b` with respect to `r_strong`.
pub fn loss_guided_contrastive(
    r_weak: ArrayView2<f64>,
    r_strong: ArrayView2<f64>,
    sims: &SimMatrix,
    tau2: f64,
) -> Result<LossGrad> {
    if sims.len() != r_weak.nrows() {
        return Err(Error::InvalidInput(format!(
            "similarity matrix is {0}×{0}, batch has {1} rows",
            sims.len(),
            r_weak.nrows()
        )));
    }
    let e = sims.as_array();
    let out = contrastive(r_strong, r_weak, tau2, |i, z, lse| {
        let row = e.row(i);
        let weight: f64 = row.sum();
        let mut l = 0.0;
        let mut g = softmax(z, lse);
        g.iter_mut().for_each(|v| *v *= weight);
        for (k, &ek) in row.iter().enumerate() {
            if ek != 0.0 {
                l += ek * (lse - z[k]);
                g[k] -= ek;
            }
        }
        (l, g)
    })?;
    Ok(LossGrad {
        value: out.value,
        grad_a: out.grad_b,
        grad_b: out.grad_a,
    })
}

/// Mixup cross-entropy: mean over rows of `μ·CE(p_i, y_i) + (1−μ)·CE(p_i, y_perm(i))`.
/// Predictions are clamped below at 1e-12. Only `grad_a` (with respect to `p`) is filled.
pub fn loss_ce_mixup(p: ArrayView2<f64>, y: ArrayView2<f64>, mu: f64, pair_perm: &[usize]) -> Result<LossGrad> {
    if p.dim() != y.dim() || p.nrows() == 0 {
        return Err(Error::InvalidInput(format!(
            "prediction shape {:?} does not match target shape {:?}",
            p.dim(),
            y.dim()
        )));
    }
    check_mu(mu)?;
    check_perm(pair_perm, p.nrows())?;
    super::labels::check_stochastic(y, "target")?;
    let b = p.nrows() as f64;
    let mut value = 0.0;
    let mut grad = Array2::zeros(p.dim());
    for (i, prow) in p.axis_iter(Axis(0)).enumerate() {
        let (yi, yj) = (y.row(i), y.row(pair_perm[i]));
        for (c, &pc) in prow.iter().enumerate() {
            let t = mu * yi[c] + (1.0 - mu) * yj[c];
            if t == 0.0 {
                continue;
            }
            value -= t * pc.max(1e-12).ln();
            if pc > 1e-12 {
                grad[[i, c]] = -t / (pc * b);
            }
        }
    }
    Ok(LossGrad {
        value: value / b,
        grad_a: grad,
        grad_b: Array2::zeros((0, 0)),
    })
}

/// `l_ce + β·l_cont`.
pub fn total_loss(l_ce: f64, l_cont: f64, beta: f64) -> Result<f64> {
    if !(l_ce.is_finite() && l_cont.is_finite() && beta.is_finite()) {
        return Err(Error::InvalidInput("loss terms and weight must be finite".into()));
    }
    Ok(l_ce + beta * l_cont)
}
