use rand::Rng as _;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Uniform unit vector orthogonal to the unit vector `mu`.
pub fn random_tangent(mu: &[f64], rng: &mut Rng) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..mu.len()).map(|_| StandardNormal.sample(rng)).collect();
        let along: f64 = v.iter().zip(mu).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(mu).for_each(|(a, b)| *a -= along * b);
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-12 {
            v.iter_mut().for_each(|a| *a /= n);
            return v;
        }
    }
}

/// One draw from the von Mises–Fisher distribution on the unit sphere in
/// `mu.len()` dimensions, by Wood's rejection sampler for the component
/// along `mu`.
pub fn sample_vmf(mu: &[f64], kappa: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    let d = mu.len();
    if d < 2 {
        return Err(Error::InvalidInput(format!("vMF needs at least 2 dimensions, got {d}")));
    }
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidInput(format!("vMF concentration must be finite and ≥ 0, got {kappa}")));
    }
    let m = (d - 1) as f64;
    let b = m / (2.0 * kappa + (4.0 * kappa * kappa + m * m).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + m * (1.0 - x0 * x0).ln();
    let beta = Beta::new(m / 2.0, m / 2.0).map_err(|e| Error::Numerical(e.to_string()))?;
    let w = loop {
        let z: f64 = beta.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.random();
        if kappa * w + m * (1.0 - x0 * w).ln() - c >= u.ln() {
            break w;
        }
    };
    let v = random_tangent(mu, rng);
    let s = (1.0 - w * w).max(0.0).sqrt();
    Ok(mu.iter().zip(&v).map(|(a, t)| w * a + s * t).collect())
}
