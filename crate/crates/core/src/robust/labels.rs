use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::rng::{Rng, SplitRng};

const STOCHASTIC_TOL: f64 = 1e-9;

fn check_simplex(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() || p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidInput(format!("{what} has negative or non-finite entries")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidInput(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

pub(crate) fn check_stochastic(m: ArrayView2<f64>, what: &str) -> Result<()> {
    for (i, row) in m.rows().into_iter().enumerate() {
        check_simplex(&row.to_vec(), &format!("{what} row {i}"))?;
    }
    Ok(())
}

/// Sharpened average of two predictions: `((p1 + p2)/2)^τ₁`, renormalized.
pub fn guess_label(p1: &[f64], p2: &[f64], tau1: f64) -> Result<Vec<f64>> {
    if p1.len() != p2.len() {
        return Err(Error::InvalidInput(format!("prediction lengths {} and {} differ", p1.len(), p2.len())));
    }
    check_simplex(p1, "first prediction")?;
    check_simplex(p2, "second prediction")?;
    if !(tau1 > 0.0 && tau1.is_finite()) {
        return Err(Error::InvalidInput(format!("sharpening exponent must be positive, got {tau1}")));
    }
    let avg: Vec<f64> = p1.iter().zip(p2).map(|(a, b)| 0.5 * (a + b)).collect();
    if tau1 == 1.0 {
        return Ok(avg);
    }
    let m = avg.iter().copied().fold(0.0, f64::max);
    // scale by the max before the power so small entries do not underflow together
    let powered: Vec<f64> = avg.iter().map(|v| (v / m).powf(tau1)).collect();
    let s: f64 = powered.iter().sum();
    Ok(powered.into_iter().map(|v| v / s).collect())
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// One mixing weight `μ ~ Beta(α, α)` from a seeded generator.
pub fn mixup_draw(alpha: f64, seed: u64) -> Result<f64> {
    let mut rng = SplitRng::new(seed).stream(0);
    mixup_draw_with(alpha, &mut rng)
}

pub fn mixup_draw_with(alpha: f64, rng: &mut Rng) -> Result<f64> {
    let beta = Beta::new(alpha, alpha)
        .map_err(|e| Error::InvalidInput(format!("mixup alpha {alpha}: {e}")))?;
    Ok(beta.sample(rng))
}

/// Seeded pairing permutation for mixup partners.
pub fn pair_permutation(b: usize, seed: u64) -> Vec<usize> {
    let mut rng = SplitRng::new(seed).stream(1);
    let mut perm: Vec<usize> = (0..b).collect();
    perm.shuffle(&mut rng);
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guess_examples() {
        assert_eq!(guess_label(&[0.5, 0.5], &[0.5, 0.5], 2.0).unwrap(), vec![0.5, 0.5]);
        let g = guess_label(&[0.8, 0.2], &[0.8, 0.2], 2.0).unwrap();
        assert!((g[0] - 0.941176).abs() < 1e-6 && (g[1] - 0.058824).abs() < 1e-6);
        let avg = guess_label(&[0.7, 0.3], &[0.1, 0.9], 1.0).unwrap();
        assert_eq!(avg, vec![0.5 * (0.7 + 0.1), 0.5 * (0.3 + 0.9)]);
        assert!(guess_label(&[0.7, 0.2], &[0.5, 0.5], 2.0).is_err());
        assert!(guess_label(&[1.2, -0.2], &[0.5, 0.5], 2.0).is_err());
    }

    #[test]
    fn mixup_is_seeded() {
        assert_eq!(mixup_draw(1.0, 5).unwrap(), mixup_draw(1.0, 5).unwrap());
        assert_ne!(mixup_draw(1.0, 5).unwrap(), mixup_draw(1.0, 6).unwrap());
        assert!(mixup_draw(0.0, 1).is_err());
        let p = pair_permutation(10, 3);
        let mut s = p.clone();
        s.sort_unstable();
        assert_eq!(s, (0..10).collect::<Vec<_>>());
    }
}
