use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// What a batch row is known to be after detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SampleTag {
    /// In-distribution sample with its (corrected) class.
    Id(usize),
    /// OOD sample with its discovered group, if any.
    Ood(Option<usize>),
}

/// Binary positive-pair indicators `e_ib` between the anchor view `i` and
/// the key view `b` of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMatrix {
    e: Array2<f64>,
}

impl SimMatrix {
    /// Validates a 0/1 matrix whose diagonal (the cross-view self pairs) is set.
    pub fn new(e: Array2<f64>) -> Result<Self> {
        if e.nrows() != e.ncols() {
            return Err(Error::InvalidInput(format!("similarity matrix is {:?}, not square", e.dim())));
        }
        if e.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidInput("similarity entries must be 0 or 1".into()));
        }
        if let Some(i) = e.rows().into_iter().position(|r| r.sum() == 0.0) {
            return Err(Error::InvalidInput(format!("similarity row {i} has no positive pair")));
        }
        if let Some(i) = (0..e.nrows()).find(|&i| e[[i, i]] != 1.0) {
            return Err(Error::InvalidInput(format!("similarity row {i} is missing its self pair")));
        }
        Ok(Self { e })
    }

    pub fn len(&self) -> usize {
        self.e.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.e.nrows() == 0
    }

    pub fn get(&self, i: usize, b: usize) -> bool {
        self.e[[i, b]] == 1.0
    }

    pub fn as_array(&self) -> ArrayView2<'_, f64> {
        self.e.view()
    }
}

/// `e_ib = 1` for same-class ID pairs, same-group OOD pairs (ungrouped OOD
/// samples only match themselves) and every self pair.
pub fn compute_sims(tags: &[SampleTag]) -> SimMatrix {
    let b = tags.len();
    let e = Array2::from_shape_fn((b, b), |(i, k)| {
        let similar = i == k
            || match (tags[i], tags[k]) {
                (SampleTag::Id(x), SampleTag::Id(y)) => x == y,
                (SampleTag::Ood(Some(x)), SampleTag::Ood(Some(y))) => x == y,
                _ => false,
            };
        f64::from(u8::from(similar))
    });
    SimMatrix { e }
}
