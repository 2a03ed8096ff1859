//! OPTICS ordering, ξ-steep cluster extraction and multi-scale selection.
//!
//! The ordering uses an unbounded generating distance and Euclidean distance.
//! Among unprocessed points the one with the smallest reachability is expanded
//! next; ties go to the lower index. Core distance is the distance to the
//! `min_pts`-th nearest other point.

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReachabilityOrdering {
    /// Visit order: `order[pos]` is a point index.
    pub order: Vec<usize>,
    /// Per point (indexed by point, not position). `+∞` for the first point
    /// of each connected run.
    pub reachability: Vec<f64>,
    pub core_distance: Vec<f64>,
    pub min_pts: usize,
}

impl ReachabilityOrdering {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Reachability in visit order, as drawn in a reachability plot.
    pub fn plot(&self) -> Vec<f64> {
        self.order.iter().map(|&p| self.reachability[p]).collect()
    }
}

/// Leaf clusters of a ξ extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterExtraction {
    /// Inclusive `(start, end)` positions into the visit order, ascending.
    pub clusters: Vec<(usize, usize)>,
    /// Cluster id per point; `None` marks an outlier.
    pub membership: Vec<Option<usize>>,
    pub outlier_count: usize,
}

impl ClusterExtraction {
    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    /// Point indices of every cluster, ascending within each cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.clusters.len()];
        for (i, m) in self.membership.iter().enumerate() {
            if let Some(c) = m {
                out[*c].push(i);
            }
        }
        out
    }

    fn all_outliers(n: usize) -> Self {
        Self {
            clusters: Vec::new(),
            membership: vec![None; n],
            outlier_count: n,
        }
    }
}

pub fn euclidean(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn optics_order(points: ArrayView2<f64>, min_pts: usize) -> Result<ReachabilityOrdering> {
    let n = points.nrows();
    if min_pts == 0 || min_pts >= n {
        return Err(Error::Config(format!(
            "min_pts must be in [1, {n}) for {n} points, got {min_pts}"
        )));
    }

    let core_distance: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| euclidean(points.row(i), points.row(j)))
                .collect();
            let (_, kth, _) = d.select_nth_unstable_by(min_pts - 1, f64::total_cmp);
            *kth
        })
        .collect();

    let mut reachability = vec![f64::INFINITY; n];
    let mut processed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut next = usize::MAX;
        for o in 0..n {
            if !processed[o] && (next == usize::MAX || reachability[o] < reachability[next]) {
                next = o;
            }
        }
        processed[next] = true;
        order.push(next);
        let core = core_distance[next];
        let row = points.row(next);
        for o in 0..n {
            if !processed[o] {
                let candidate = core.max(euclidean(row, points.row(o)));
                if candidate < reachability[o] {
                    reachability[o] = candidate;
                }
            }
        }
    }

    Ok(ReachabilityOrdering {
        order,
        reachability,
        core_distance,
        min_pts,
    })
}

#[derive(Debug, Clone)]
struct SteepDownArea {
    start: usize,
    end: usize,
    mib: f64,
}

/// Extends a steep region starting at `start` while points stay steep, or
/// remain non-`xward` for at most `min_pts` consecutive positions.
fn extend_region(steep: &[bool], xward: &[bool], start: usize, min_pts: usize) -> usize {
    let mut non_xward = 0;
    let mut end = start;
    for idx in start..steep.len() {
        if steep[idx] {
            non_xward = 0;
            end = idx;
        } else if !xward[idx] {
            non_xward += 1;
            if non_xward > min_pts {
                break;
            }
        } else {
            return end;
        }
    }
    end
}

fn filter_sdas(sdas: Vec<SteepDownArea>, mib: f64, xi_complement: f64, plot: &[f64]) -> Vec<SteepDownArea> {
    if mib.is_infinite() {
        return Vec::new();
    }
    sdas.into_iter()
        .filter(|sda| mib <= plot[sda.start] * xi_complement)
        .map(|mut sda| {
            sda.mib = sda.mib.max(mib);
            sda
        })
        .collect()
}

/// All ξ-clusters as inclusive position ranges, inner clusters before the
/// clusters that enclose them. Follows the steep-area bookkeeping of the
/// original OPTICS ξ method with the end-of-plot corrections used by common
/// implementations, without predecessor correction.
fn xi_clusters(plot_in: &[f64], min_pts: usize, min_cluster_size: usize, xi: f64) -> Vec<(usize, usize)> {
    let n = plot_in.len();
    // Both ends of the plot, and undefined (infinite) entries, sit at the
    // highest observed reachability: a valley must be bounded by real walls.
    let Some(wall) = plot_in.iter().copied().filter(|v| v.is_finite()).reduce(f64::max) else {
        return Vec::new();
    };
    let mut plot: Vec<f64> = plot_in.iter().map(|&v| if v.is_finite() { v } else { wall }).collect();
    plot.push(wall);
    let xi_complement = 1.0 - xi;

    let ratio: Vec<f64> = (0..n).map(|i| plot[i] / plot[i + 1]).collect();
    let steep_up: Vec<bool> = ratio.iter().map(|&r| r <= xi_complement).collect();
    let steep_down: Vec<bool> = ratio.iter().map(|&r| r >= 1.0 / xi_complement).collect();
    let downward: Vec<bool> = ratio.iter().map(|&r| r > 1.0).collect();
    let upward: Vec<bool> = ratio.iter().map(|&r| r < 1.0).collect();

    let mut sdas: Vec<SteepDownArea> = Vec::new();
    let mut clusters = Vec::new();
    let mut index = 0;
    let mut mib = 0.0f64;

    for steep_index in 0..n {
        if !(steep_up[steep_index] || steep_down[steep_index]) || steep_index < index {
            continue;
        }
        mib = plot[index..=steep_index].iter().fold(mib, |m, &v| m.max(v));

        if steep_down[steep_index] {
            sdas = filter_sdas(sdas, mib, xi_complement, &plot);
            let d_start = steep_index;
            let d_end = extend_region(&steep_down, &upward, d_start, min_pts);
            sdas.push(SteepDownArea {
                start: d_start,
                end: d_end,
                mib: 0.0,
            });
            index = d_end + 1;
            mib = plot[index];
        } else {
            sdas = filter_sdas(sdas, mib, xi_complement, &plot);
            let u_start = steep_index;
            let u_end = extend_region(&steep_up, &downward, u_start, min_pts);
            index = u_end + 1;
            mib = plot[index];

            let mut found = Vec::new();
            for d in &sdas {
                let mut c_start = d.start;
                let mut c_end = u_end;
                if plot[c_end + 1] * xi_complement < d.mib {
                    continue;
                }
                let d_max = plot[d.start];
                if d_max * xi_complement >= plot[c_end + 1] {
                    while plot[c_start + 1] > plot[c_end + 1] && c_start < d.end {
                        c_start += 1;
                    }
                } else if plot[c_end + 1] * xi_complement >= d_max {
                    while c_end > u_start && plot[c_end - 1] > d_max {
                        c_end -= 1;
                    }
                }
                if (c_end + 1).saturating_sub(c_start) < min_cluster_size {
                    continue;
                }
                if c_start > d.end || c_end < u_start {
                    continue;
                }
                found.push((c_start, c_end));
            }
            found.reverse();
            clusters.extend(found);
        }
    }
    clusters
}

/// ξ-steepness extraction. Nested clusters are resolved to their innermost
/// leaves; every point outside a leaf is an outlier.
pub fn extract_xi_clusters(
    r: &ReachabilityOrdering,
    xi: f64,
    min_cluster_size: usize,
) -> Result<ClusterExtraction> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::Config(format!("xi must lie in (0, 1), got {xi}")));
    }
    let n = r.len();
    let all = xi_clusters(&r.plot(), r.min_pts, min_cluster_size.max(2), xi);

    let mut taken = vec![false; n];
    let mut leaves = Vec::new();
    for (start, end) in all {
        if taken[start..=end].iter().any(|&t| t) {
            continue;
        }
        taken[start..=end].iter_mut().for_each(|t| *t = true);
        leaves.push((start, end));
    }
    leaves.sort_unstable();

    let mut membership = vec![None; n];
    for (id, &(start, end)) in leaves.iter().enumerate() {
        for &p in &r.order[start..=end] {
            membership[p] = Some(id);
        }
    }
    let clustered: usize = leaves.iter().map(|(s, e)| e + 1 - s).sum();
    Ok(ClusterExtraction {
        clusters: leaves,
        membership,
        outlier_count: n - clustered,
    })
}

/// Outcome of [`multi_scale_select`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSelection {
    pub extraction: ClusterExtraction,
    /// The neighborhood size whose extraction was kept; `None` when no scale
    /// produced a cluster.
    pub min_pts: Option<usize>,
    /// Set when no scale found at least two clusters.
    pub degraded: bool,
    /// Neighborhood sizes skipped because they were not below the point count.
    pub skipped: Vec<usize>,
}

/// Runs OPTICS and ξ extraction at every neighborhood size and keeps the
/// extraction with the fewest outliers among those with at least two
/// clusters (ties favor the larger neighborhood).
pub fn multi_scale_select(
    points: ArrayView2<f64>,
    neighborhoods: &[usize],
    xi: f64,
    min_cluster_size: usize,
) -> Result<ScaleSelection> {
    if neighborhoods.is_empty() {
        return Err(Error::Config("no OPTICS neighborhood sizes given".into()));
    }
    let n = points.nrows();
    let (usable, skipped): (Vec<usize>, Vec<usize>) =
        neighborhoods.iter().partition(|&&v| v > 0 && v < n);
    for v in &skipped {
        log::warn!("skipping OPTICS neighborhood {v}: only {n} points");
    }

    let runs: Vec<(usize, ClusterExtraction)> = usable
        .par_iter()
        .map(|&v| {
            let ordering = optics_order(points, v)?;
            Ok((v, extract_xi_clusters(&ordering, xi, min_cluster_size)?))
        })
        .collect::<Result<_>>()?;

    let best = |min_clusters: usize| {
        runs.iter()
            .filter(|(_, e)| e.cluster_count() >= min_clusters)
            .min_by(|(va, ea), (vb, eb)| ea.outlier_count.cmp(&eb.outlier_count).then(vb.cmp(va)))
    };

    Ok(match (best(2), best(1)) {
        (Some((v, e)), _) => ScaleSelection {
            extraction: e.clone(),
            min_pts: Some(*v),
            degraded: false,
            skipped,
        },
        (None, Some((v, e))) => ScaleSelection {
            extraction: e.clone(),
            min_pts: Some(*v),
            degraded: true,
            skipped,
        },
        (None, None) => ScaleSelection {
            extraction: ClusterExtraction::all_outliers(n),
            min_pts: None,
            degraded: true,
            skipped,
        },
    })
}
