//! Slow, independent reference computations used to check the engine.

use std::collections::{HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::metric::{Euclidean, Metric, PointId, PointRecord};

/// Largest instance [`brute_force_opt`] accepts.
pub const BRUTE_FORCE_MAX_POINTS: usize = 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("the center set is empty")]
    NoCenters,
    #[error("the point set is empty")]
    NoPoints,
    #[error("center {0} is not one of the points")]
    UnknownCenter(PointId),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("brute force is limited to {max} points, got {got}")]
    TooLarge { max: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostReport {
    /// `max_x min_c d(x, c)`.
    pub phi: f64,
    /// A point attaining `phi`; the smallest id among ties.
    pub argmax_point: PointId,
}

fn d(a: &PointRecord, b: &PointRecord) -> f64 {
    Euclidean.distance(a.coords(), b.coords())
}

/// Exact k-center objective of `centers` over `points`, in `O(n·k)`.
pub fn eval_cost(points: &[PointRecord], centers: &[PointId]) -> Result<CostReport, OracleError> {
    if centers.is_empty() {
        return Err(OracleError::NoCenters);
    }
    if points.is_empty() {
        return Err(OracleError::NoPoints);
    }
    let by_id: HashMap<PointId, &PointRecord> = points.iter().map(|p| (p.id, p)).collect();
    let centers: Vec<&PointRecord> = centers
        .iter()
        .map(|c| by_id.get(c).copied().ok_or(OracleError::UnknownCenter(*c)))
        .collect::<Result<_, _>>()?;
    let mut best: Option<(f64, PointId)> = None;
    for p in points {
        let r = centers
            .iter()
            .map(|c| d(p, c))
            .fold(f64::INFINITY, f64::min);
        let better = match best {
            None => true,
            Some((phi, id)) => r > phi || (r == phi && p.id < id),
        };
        if better {
            best = Some((r, p.id));
        }
    }
    let (phi, argmax_point) = best.expect("points are nonempty");
    Ok(CostReport { phi, argmax_point })
}

/// Farthest-first traversal: returns up to `count` picks, each with its distance
/// to the earlier picks at the time it was chosen (infinity for the first).
fn farthest_first(points: &[PointRecord], count: usize) -> Vec<(PointId, f64)> {
    if points.is_empty() || count == 0 {
        return Vec::new();
    }
    let first = (0..points.len())
        .min_by_key(|&i| points[i].id)
        .expect("nonempty");
    let mut picks = vec![(points[first].id, f64::INFINITY)];
    let mut gap: Vec<f64> = points.iter().map(|p| d(p, &points[first])).collect();
    while picks.len() < count.min(points.len()) {
        let mut far: Option<usize> = None;
        for i in 0..points.len() {
            far = match far {
                None => Some(i),
                Some(j) if gap[i] > gap[j] || (gap[i] == gap[j] && points[i].id < points[j].id) => {
                    Some(i)
                }
                keep => keep,
            };
        }
        let far = far.expect("nonempty");
        if gap[far] == 0.0 {
            break;
        }
        picks.push((points[far].id, gap[far]));
        for i in 0..points.len() {
            gap[i] = gap[i].min(d(&points[i], &points[far]));
        }
    }
    picks
}

/// Gonzalez's greedy 2-approximation, starting from the smallest id.
pub fn gonzalez(points: &[PointRecord], k: usize) -> Result<Vec<PointId>, OracleError> {
    if k == 0 {
        return Err(OracleError::InvalidK);
    }
    Ok(farthest_first(points, k)
        .into_iter()
        .map(|(id, _)| id)
        .collect())
}

/// Exact optimum over all `C(n, k)` center subsets drawn from the points.
pub fn brute_force_opt(points: &[PointRecord], k: usize) -> Result<f64, OracleError> {
    if k == 0 {
        return Err(OracleError::InvalidK);
    }
    let n = points.len();
    if n > BRUTE_FORCE_MAX_POINTS {
        return Err(OracleError::TooLarge {
            max: BRUTE_FORCE_MAX_POINTS,
            got: n,
        });
    }
    if n <= k {
        return Ok(0.0);
    }
    let dm: Vec<Vec<f64>> = points
        .iter()
        .map(|a| points.iter().map(|b| d(a, b)).collect())
        .collect();
    let mut best = f64::INFINITY;
    // subsets of size k as bitmasks
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let mut phi = 0.0f64;
        for row in &dm {
            let mut r = f64::INFINITY;
            for (c, &dc) in row.iter().enumerate() {
                if mask & (1 << c) != 0 && dc < r {
                    r = dc;
                }
            }
            phi = phi.max(r);
            if phi >= best {
                break;
            }
        }
        best = best.min(phi);
    }
    Ok(best)
}

/// Lower bound on the optimum: run farthest-first to `k + 1` picks; two of
/// them share an optimal center, so half the last pick distance is at most OPT.
pub fn opt_lower_bound(points: &[PointRecord], k: usize) -> Result<f64, OracleError> {
    if k == 0 {
        return Err(OracleError::InvalidK);
    }
    if points.len() <= k {
        return Ok(0.0);
    }
    let picks = farthest_first(points, k + 1);
    Ok(if picks.len() == k + 1 {
        picks[k].1 / 2.0
    } else {
        0.0
    })
}

/// Outcome of [`check_rnet`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RnetCheck {
    pub not_in_ground: Vec<PointId>,
    /// Pairs of candidates closer than `r`.
    pub too_close: Vec<(PointId, PointId)>,
    /// Ground points farther than `r` from every candidate.
    pub uncovered: Vec<PointId>,
}

impl RnetCheck {
    pub fn is_valid(&self) -> bool {
        self.not_in_ground.is_empty() && self.too_close.is_empty() && self.uncovered.is_empty()
    }
}

/// Checks that `candidate` is an `r`-net of `ground`: pairwise at least `r`
/// apart and covering every ground point within `r`.
pub fn check_rnet(candidate: &[PointId], ground: &[PointRecord], r: f64) -> RnetCheck {
    let by_id: HashMap<PointId, &PointRecord> = ground.iter().map(|p| (p.id, p)).collect();
    let mut out = RnetCheck::default();
    let mut members = Vec::new();
    let mut seen = HashSet::new();
    for &c in candidate {
        match by_id.get(&c) {
            Some(p) if seen.insert(c) => members.push(*p),
            Some(_) => {}
            None => out.not_in_ground.push(c),
        }
    }
    for (i, a) in members.iter().enumerate() {
        for b in &members[i + 1..] {
            if d(a, b) < r {
                out.too_close.push((a.id.min(b.id), a.id.max(b.id)));
            }
        }
    }
    for p in ground {
        if !members.iter().any(|c| d(p, c) <= r) {
            out.uncovered.push(p.id);
        }
    }
    out
}

/// Scan in order, keeping each point at least `r` from every point kept so far.
pub fn greedy_rnet(points: &[PointRecord], r: f64) -> Vec<PointId> {
    let mut kept: Vec<&PointRecord> = Vec::new();
    for p in points {
        if kept.iter().all(|c| d(p, c) >= r) {
            kept.push(p);
        }
    }
    kept.into_iter().map(|p| p.id).collect()
}
