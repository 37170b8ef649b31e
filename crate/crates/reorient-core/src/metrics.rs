//! Distances and losses over point sets and pose sets.
//!
//! The pose-set losses treat poses as literal coordinate points: a 6D pose
//! contributes its translation (m) and Euler angles (rad) as plain reals.
//! Angle coordinates are compared without wrap-around, matching the loss
//! definitions these metrics implement.

use nalgebra::Point3;
use thiserror::Error;

use crate::scene::{farthest_point_indices, Pose6D};

/// Clouds larger than this are reduced by farthest-point sampling before the
/// exact assignment solve in [`diversity_distance`].
pub const EMD_SUBSAMPLE: usize = 64;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("point set is empty")]
    EmptySet,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("support diameter must be positive, got {0}")]
    NonpositiveDiameter(f64),
}

/// Weights for the combined stability/penetration score; must sum to one.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScoreWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl ScoreWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, String> {
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
            return Err(format!("weights must lie in [0,1]: alpha={alpha} beta={beta}"));
        }
        if (alpha + beta - 1.0).abs() > 1e-9 {
            return Err(format!("alpha + beta must equal 1, got {}", alpha + beta));
        }
        Ok(ScoreWeights { alpha, beta })
    }
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            alpha: 0.5,
            beta: 0.5,
        }
    }
}

/// A set of 6-DOF poses with coordinate-point views.
#[derive(Clone, Debug, Default)]
pub struct PoseSet {
    pub poses: Vec<Pose6D>,
}

impl PoseSet {
    pub fn new(poses: Vec<Pose6D>) -> Self {
        PoseSet { poses }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// 3D translation projection.
    pub fn translations(&self) -> Vec<[f64; 3]> {
        self.poses.iter().map(|p| [p.t.x, p.t.y, p.t.z]).collect()
    }

    /// 3D orientation projection.
    pub fn orientations(&self) -> Vec<[f64; 3]> {
        self.poses.iter().map(|p| [p.o.x, p.o.y, p.o.z]).collect()
    }

    /// Concatenated 6D coordinates with the angle block scaled by `w_o`.
    pub fn coords6(&self, w_o: f64) -> Vec<[f64; 6]> {
        self.poses
            .iter()
            .map(|p| {
                [
                    p.t.x,
                    p.t.y,
                    p.t.z,
                    p.o.x * w_o,
                    p.o.y * w_o,
                    p.o.z * w_o,
                ]
            })
            .collect()
    }
}

/// Symmetric Chamfer distance: for each point the squared distance to its
/// nearest neighbor in the other set, summed over both directions.
pub fn chamfer<P, Q>(s1: &[P], s2: &[Q]) -> Result<f64, MetricsError>
where
    P: AsRef<[f64]>,
    Q: AsRef<[f64]>,
{
    if s1.is_empty() || s2.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let dim = s1[0].as_ref().len();
    for p in s1.iter().map(AsRef::as_ref) {
        if p.len() != dim {
            return Err(MetricsError::DimensionMismatch(dim, p.len()));
        }
    }
    for q in s2.iter().map(AsRef::as_ref) {
        if q.len() != dim {
            return Err(MetricsError::DimensionMismatch(dim, q.len()));
        }
    }
    let sq = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
    };
    let one_way = |from: &[P], to: &[Q]| -> f64 {
        from.iter()
            .map(|p| {
                to.iter()
                    .map(|q| sq(p.as_ref(), q.as_ref()))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
    };
    let fwd = one_way(s1, s2);
    let bwd: f64 = s2
        .iter()
        .map(|q| {
            s1.iter()
                .map(|p| sq(p.as_ref(), q.as_ref()))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(fwd + bwd)
}

/// Pipeline stage selector for [`stage_loss`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    One,
    Two,
}

/// Stage-1 loss couples the translation view with the full 6D view; stage-2
/// swaps the translation view for the orientation view. `w_o` rescales the
/// angle block of the 6D term only.
pub fn stage_loss(
    pred: &PoseSet,
    gt: &PoseSet,
    stage: Stage,
    w_o: f64,
) -> Result<f64, MetricsError> {
    if pred.is_empty() || gt.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let six = chamfer(&pred.coords6(w_o), &gt.coords6(w_o))?;
    let three = match stage {
        Stage::One => chamfer(&pred.translations(), &gt.translations())?,
        Stage::Two => chamfer(&pred.orientations(), &gt.orientations())?,
    };
    Ok(three + six)
}

/// Two-class cross entropy from raw logits: −x[l] + log(e^x0 + e^x1),
/// computed with max-shifted log-sum-exp.
pub fn cross_entropy(x: [f64; 2], l: usize) -> f64 {
    assert!(l < 2, "label index must be 0 or 1");
    let m = x[0].max(x[1]);
    let lse = m + ((x[0] - m).exp() + (x[1] - m).exp()).ln();
    -x[l] + lse
}

/// Exact minimum-cost perfect matching on a square cost matrix by the
/// potentials form of the Hungarian algorithm, O(n^3).
/// Returns (total cost, row assigned to each column).
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = cost.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = 0.0;
    let mut row_of_col = vec![0usize; n];
    for j in 1..=n {
        row_of_col[j - 1] = p[j] - 1;
        total += cost[p[j] - 1][j - 1];
    }
    (total, row_of_col)
}

/// Earth Mover's distance between equal-size clouds: the minimum over
/// bijections of summed (linear) Euclidean distances.
pub fn emd(a: &[Point3<f64>], b: &[Point3<f64>]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    if a.len() != b.len() {
        return Err(MetricsError::SizeMismatch(a.len(), b.len()));
    }
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|p| b.iter().map(|q| (p - q).norm()).collect())
        .collect();
    Ok(min_cost_assignment(&cost).0)
}

fn subsample(cloud: &[Point3<f64>]) -> Vec<Point3<f64>> {
    if cloud.len() <= EMD_SUBSAMPLE {
        cloud.to_vec()
    } else {
        farthest_point_indices(cloud, EMD_SUBSAMPLE)
            .expect("k <= len checked")
            .into_iter()
            .map(|i| cloud[i])
            .collect()
    }
}

/// Normalized EMD between two transformed copies of the same object:
/// d = EMD(p', p'') / (n · L). Clouds above [`EMD_SUBSAMPLE`] points are
/// first reduced by farthest-point sampling (deterministic per cloud, so the
/// distance stays symmetric) and n becomes the reduced size.
pub fn diversity_distance(
    pq1: &[Point3<f64>],
    pq2: &[Point3<f64>],
    n_obj: usize,
    support_diameter: f64,
) -> Result<f64, MetricsError> {
    if pq1.len() != n_obj || pq2.len() != n_obj {
        return Err(MetricsError::SizeMismatch(pq1.len(), pq2.len()));
    }
    if pq1.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    if support_diameter <= 0.0 {
        return Err(MetricsError::NonpositiveDiameter(support_diameter));
    }
    let s1 = subsample(pq1);
    let s2 = subsample(pq2);
    let n = s1.len();
    Ok(emd(&s1, &s2)? / (n as f64 * support_diameter))
}

/// Decide `d > delta` for two pre-subsampled clouds, skipping the exact
/// assignment when a cheap bound already settles it. The centroid gap is a
/// lower bound on d (triangle inequality over the matching); the identity
/// matching is an upper bound.
fn diverse_enough(
    s1: &[Point3<f64>],
    s2: &[Point3<f64>],
    support_diameter: f64,
    delta: f64,
) -> bool {
    let n = s1.len() as f64;
    let mut c1 = nalgebra::Vector3::zeros();
    let mut c2 = nalgebra::Vector3::zeros();
    for p in s1 {
        c1 += p.coords;
    }
    for p in s2 {
        c2 += p.coords;
    }
    let lower = (c1 - c2).norm() / (n * support_diameter);
    if lower > delta {
        return true;
    }
    let ident: f64 = s1.iter().zip(s2).map(|(p, q)| (p - q).norm()).sum();
    let upper = ident / (n * support_diameter);
    if upper <= delta {
        return false;
    }
    let (total, _) = min_cost_assignment(
        &s1.iter()
            .map(|p| s2.iter().map(|q| (p - q).norm()).collect())
            .collect::<Vec<_>>(),
    );
    total / (n * support_diameter) > delta
}

/// Greedy diversity filter over score-ordered clouds: keep an entry iff its
/// diversity distance to every kept entry exceeds `delta`. Returns kept
/// indices in input order. All clouds must share one size.
pub fn dedup_indices<C: AsRef<[Point3<f64>]>>(
    clouds: &[C],
    delta: f64,
    support_diameter: f64,
) -> Result<Vec<usize>, MetricsError> {
    if clouds.is_empty() {
        return Ok(Vec::new());
    }
    if support_diameter <= 0.0 {
        return Err(MetricsError::NonpositiveDiameter(support_diameter));
    }
    let n0 = clouds[0].as_ref().len();
    for c in clouds {
        if c.as_ref().len() != n0 {
            return Err(MetricsError::SizeMismatch(n0, c.as_ref().len()));
        }
    }
    if n0 == 0 {
        return Err(MetricsError::EmptySet);
    }
    let subs: Vec<Vec<Point3<f64>>> = clouds.iter().map(|c| subsample(c.as_ref())).collect();
    let mut kept: Vec<usize> = Vec::new();
    for i in 0..clouds.len() {
        let fresh = kept
            .iter()
            .all(|&j| diverse_enough(&subs[i], &subs[j], support_diameter, delta));
        if fresh {
            kept.push(i);
        }
    }
    Ok(kept)
}
