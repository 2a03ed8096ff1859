use ndarray::Array1;
use rand_distr::{Distribution, Normal};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::rng::SplitRng;

pub const LEARNING_RATE: f64 = 0.1;
pub const STEPS: usize = 500;

/// Training accuracy of a logistic-regression separator of `is_ood`
/// (full-batch gradient descent with bias, no regularization).
pub fn linear_probe(features: &FeatureMatrix, is_ood: &[bool], seed: u64) -> Result<f64> {
    let x = features.as_array();
    let n = x.nrows();
    if is_ood.len() != n {
        return Err(Error::InvalidInput(format!("{} targets for {n} samples", is_ood.len())));
    }
    let positives = is_ood.iter().filter(|&&b| b).count();
    if positives == 0 || positives == n {
        return Err(Error::InvalidInput("probe needs both ID and OOD samples".into()));
    }
    let y = Array1::from_iter(is_ood.iter().map(|&b| f64::from(u8::from(b))));

    let mut rng = SplitRng::new(seed).stream(0);
    let init = Normal::new(0.0, 0.01).expect("valid normal");
    let mut w = Array1::from_shape_fn(x.ncols(), |_| init.sample(&mut rng));
    let mut bias = 0.0;
    for _ in 0..STEPS {
        let logits = x.dot(&w) + bias;
        let residual = logits.mapv(|z| 1.0 / (1.0 + (-z).exp())) - &y;
        w.scaled_add(-LEARNING_RATE / n as f64, &x.t().dot(&residual));
        bias -= LEARNING_RATE * residual.sum() / n as f64;
    }
    let logits = x.dot(&w) + bias;
    let correct = logits.iter().zip(is_ood).filter(|(z, &t)| (**z > 0.0) == t).count();
    Ok(correct as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn antipodal_pair_is_separable() {
        let f = FeatureMatrix::new(array![[1.0, 0.0], [-1.0, 0.0]]).unwrap();
        assert_eq!(linear_probe(&f, &[false, true], 0).unwrap(), 1.0);
    }

    #[test]
    fn single_class_is_rejected() {
        let f = FeatureMatrix::new(array![[1.0, 0.0], [-1.0, 0.0]]).unwrap();
        assert!(linear_probe(&f, &[true, true], 0).is_err());
        assert!(linear_probe(&f, &[true], 0).is_err());
    }
}
