//! Two-component Gaussian mixture fitted by expectation–maximization.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::CovarianceKind;
use crate::error::{Error, Result};
use crate::rng::{streams, SplitRng};

pub const COMPONENTS: usize = 2;
/// Added to every covariance diagonal (and the spherical variance floor).
pub const REGULARIZATION: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 200;
/// EM stops once the log-likelihood improves by less than this.
pub const TOLERANCE: f64 = 1e-6;
const LLOYD_ITERATIONS: usize = 10;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariances {
    Full(Vec<Vec<Vec<f64>>>),
    Spherical(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Covariances,
    /// Total log-likelihood of the fitted data under the returned parameters.
    pub log_likelihood: f64,
    /// Log-likelihood after every E-step, oldest first.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// All points coincided; the model sits at the regularization floor.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub labels: Vec<usize>,
    /// N×2 posterior component probabilities.
    pub responsibilities: Array2<f64>,
}

/// Component densities in a form ready for repeated evaluation.
enum Prepared {
    Full(Vec<(DVector<f64>, Cholesky<f64, Dyn>, f64)>),
    Spherical(Vec<(DVector<f64>, f64)>),
}

impl GmmModel {
    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn kind(&self) -> CovarianceKind {
        match self.covariances {
            Covariances::Full(_) => CovarianceKind::Full,
            Covariances::Spherical(_) => CovarianceKind::Spherical,
        }
    }

    fn prepare(&self) -> Result<Prepared> {
        let mean = |c: usize| DVector::from_vec(self.means[c].clone());
        Ok(match &self.covariances {
            Covariances::Full(covs) => Prepared::Full(
                covs.iter()
                    .enumerate()
                    .map(|(c, rows)| {
                        let k = rows.len();
                        let m = DMatrix::from_fn(k, k, |i, j| rows[i][j]);
                        let chol = Cholesky::new(m).ok_or_else(|| {
                            Error::Numerical(format!("covariance {c} is not positive definite"))
                        })?;
                        let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                        Ok((mean(c), chol, log_det))
                    })
                    .collect::<Result<_>>()?,
            ),
            Covariances::Spherical(vars) => {
                Prepared::Spherical(vars.iter().enumerate().map(|(c, &v)| (mean(c), v)).collect())
            }
        })
    }

    /// Per-component `ln w_c + ln N(x | μ_c, Σ_c)`.
    fn weighted_log_densities(&self, prepared: &Prepared, x: &DVector<f64>) -> [f64; COMPONENTS] {
        let k = x.len() as f64;
        let mut out = [0.0; COMPONENTS];
        for (c, slot) in out.iter_mut().enumerate() {
            let log_n = match prepared {
                Prepared::Full(parts) => {
                    let (mu, chol, log_det) = &parts[c];
                    let diff = x - mu;
                    let z = chol
                        .l()
                        .solve_lower_triangular(&diff)
                        .expect("cholesky factor has a positive diagonal");
                    -0.5 * (k * LN_2PI + log_det + z.norm_squared())
                }
                Prepared::Spherical(parts) => {
                    let (mu, var) = &parts[c];
                    let d2 = (x - mu).norm_squared();
                    -0.5 * (k * (LN_2PI + var.ln()) + d2 / var)
                }
            };
            *slot = self.weights[c].ln() + log_n;
        }
        out
    }

    /// Log-likelihood total and responsibilities for every row.
    fn e_step(&self, points: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
        let prepared = self.prepare()?;
        let rows: Vec<([f64; COMPONENTS], f64)> = (0..points.nrows())
            .into_par_iter()
            .map(|i| {
                let x = DVector::from_iterator(points.ncols(), points.row(i).iter().copied());
                let lp = self.weighted_log_densities(&prepared, &x);
                let m = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + lp.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                (lp.map(|v| (v - lse).exp()), lse)
            })
            .collect();
        let mut resp = Array2::zeros((points.nrows(), COMPONENTS));
        let mut total = 0.0;
        for (i, (r, lse)) in rows.iter().enumerate() {
            resp[[i, 0]] = r[0];
            resp[[i, 1]] = r[1];
            total += lse;
        }
        if !total.is_finite() {
            return Err(Error::Numerical("mixture log-likelihood is not finite".into()));
        }
        Ok((total, resp))
    }
}

fn sq_dist(a: ndarray::ArrayView1<f64>, b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Weighted means and covariances from responsibilities.
fn m_step(points: ArrayView2<f64>, resp: &Array2<f64>, kind: CovarianceKind, previous: Option<&GmmModel>) -> GmmModel {
    let (n, k) = points.dim();
    let mut weights = Vec::with_capacity(COMPONENTS);
    let mut means = Vec::with_capacity(COMPONENTS);
    let mut full = Vec::new();
    let mut spherical = Vec::new();
    for c in 0..COMPONENTS {
        let nk: f64 = resp.column(c).sum();
        let usable = nk > 1e-10 * n as f64;
        weights.push((nk / n as f64).clamp(1e-12, 1.0 - 1e-12));

        let mean: Vec<f64> = if usable {
            (0..k)
                .map(|j| (0..n).map(|i| resp[[i, c]] * points[[i, j]]).sum::<f64>() / nk)
                .collect()
        } else {
            previous.map_or_else(|| points.row(0).to_vec(), |p| p.means[c].clone())
        };
        match kind {
            CovarianceKind::Full => {
                let mut cov = vec![vec![0.0; k]; k];
                if usable {
                    for i in 0..n {
                        let r = resp[[i, c]];
                        let diff: Vec<f64> = (0..k).map(|j| points[[i, j]] - mean[j]).collect();
                        for a in 0..k {
                            let ra = r * diff[a];
                            for b in 0..=a {
                                cov[a][b] += ra * diff[b];
                            }
                        }
                    }
                    for a in 0..k {
                        for b in 0..=a {
                            cov[a][b] /= nk;
                            cov[b][a] = cov[a][b];
                        }
                    }
                } else if let Some(Covariances::Full(prev)) = previous.map(|p| &p.covariances) {
                    cov = prev[c].clone();
                    for (a, row) in cov.iter_mut().enumerate() {
                        row[a] -= REGULARIZATION;
                    }
                }
                for (a, row) in cov.iter_mut().enumerate() {
                    row[a] += REGULARIZATION;
                }
                full.push(cov);
            }
            CovarianceKind::Spherical => {
                let var = if usable {
                    (0..n).map(|i| resp[[i, c]] * sq_dist(points.row(i), &mean)).sum::<f64>()
                        / (nk * k as f64)
                } else if let Some(Covariances::Spherical(prev)) = previous.map(|p| &p.covariances) {
                    prev[c] - REGULARIZATION
                } else {
                    0.0
                };
                spherical.push(var.max(0.0) + REGULARIZATION);
            }
        }
        means.push(mean);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    GmmModel {
        weights,
        means,
        covariances: match kind {
            CovarianceKind::Full => Covariances::Full(full),
            CovarianceKind::Spherical => Covariances::Spherical(spherical),
        },
        log_likelihood: f64::NAN,
        history: Vec::new(),
        iterations: 0,
        converged: false,
        degenerate: false,
    }
}

/// Farthest-point seeding (the first center drawn from the seeded stream)
/// refined by a few Lloyd iterations; returns hard responsibilities.
fn initial_responsibilities(points: ArrayView2<f64>, seed: u64) -> Option<Array2<f64>> {
    let n = points.nrows();
    let mut rng = SplitRng::new(seed).stream(streams::GMM_INIT);
    let first = rng.random_range(0..n);
    let c0 = points.row(first).to_vec();
    let (far, far_d) = (0..n)
        .map(|i| (i, sq_dist(points.row(i), &c0)))
        .fold((first, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    if far_d == 0.0 {
        return None;
    }
    let mut centers = [c0, points.row(far).to_vec()];
    let mut labels = vec![0usize; n];
    for _ in 0..LLOYD_ITERATIONS {
        for (i, l) in labels.iter_mut().enumerate() {
            let d0 = sq_dist(points.row(i), &centers[0]);
            let d1 = sq_dist(points.row(i), &centers[1]);
            *l = usize::from(d1 < d0);
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            for (j, v) in center.iter_mut().enumerate() {
                *v = members.iter().map(|&i| points[[i, j]]).sum::<f64>() / members.len() as f64;
            }
        }
    }
    let mut resp = Array2::zeros((n, COMPONENTS));
    for (i, &l) in labels.iter().enumerate() {
        resp[[i, l]] = 1.0;
    }
    Some(resp)
}

pub fn gmm_fit(points: ArrayView2<f64>, kind: CovarianceKind, seed: u64) -> Result<GmmModel> {
    let (n, k) = points.dim();
    if n < 4 {
        return Err(Error::InvalidInput(format!("mixture fit needs at least 4 points, got {n}")));
    }
    if k == 0 {
        return Err(Error::InvalidInput("points have zero dimensions".into()));
    }
    if let Some(((r, c), _)) = points.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite coordinate at row {r}, column {c}")));
    }

    let Some(resp0) = initial_responsibilities(points, seed) else {
        // every point coincides
        let resp = Array2::from_elem((n, COMPONENTS), 0.5);
        let mut model = m_step(points, &resp, kind, None);
        let (ll, _) = model.e_step(points)?;
        model.log_likelihood = ll;
        model.history = vec![ll];
        model.converged = true;
        model.degenerate = true;
        return Ok(model);
    };

    let mut model = m_step(points, &resp0, kind, None);
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let (ll, resp) = model.e_step(points)?;
        if let Some(&prev) = history.last() {
            if ll - prev < TOLERANCE {
                history.push(ll);
                converged = true;
                break;
            }
        }
        history.push(ll);
        if iterations == MAX_ITERATIONS {
            break;
        }
        model = m_step(points, &resp, kind, Some(&model));
        iterations += 1;
    }
    model.log_likelihood = *history.last().expect("at least one E-step");
    model.history = history;
    model.iterations = iterations;
    model.converged = converged;
    Ok(model)
}

/// Most probable component per point, with responsibilities.
pub fn gmm_assign(model: &GmmModel, points: ArrayView2<f64>) -> Result<Assignment> {
    if points.ncols() != model.dim() {
        return Err(Error::InvalidInput(format!(
            "points have {} dimensions, model has {}",
            points.ncols(),
            model.dim()
        )));
    }
    let (_, responsibilities) = model.e_step(points)?;
    let labels = responsibilities
        .rows()
        .into_iter()
        .map(|r| usize::from(r[1] > r[0]))
        .collect();
    Ok(Assignment {
        labels,
        responsibilities,
    })
}
