//! Points, the distance oracle and brute-force distance statistics.

use std::cell::Cell;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("point {0} has no coordinates")]
    EmptyPoint(PointId),
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(PointId),
    #[error("need at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("points {0} and {1} have identical coordinates")]
    DuplicateCoordinates(PointId, PointId),
}

/// Identifier of a point. Never reused within one engine lifetime.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct PointId(pub u64);

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for PointId {
    fn from(v: u64) -> Self {
        PointId(v)
    }
}

/// A point identity plus its coordinates. Cloning shares the coordinate buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub id: PointId,
    coords: Arc<[f64]>,
}

impl PointRecord {
    pub fn new(id: impl Into<PointId>, coords: impl Into<Vec<f64>>) -> Result<Self, MetricError> {
        let id = id.into();
        let coords: Vec<f64> = coords.into();
        if coords.is_empty() {
            return Err(MetricError::EmptyPoint(id));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(MetricError::NonFinite(id));
        }
        Ok(PointRecord {
            id,
            coords: coords.into(),
        })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Bit pattern of the coordinates with `-0.0` folded onto `0.0`; equal keys
    /// mean distance zero.
    pub fn coord_key(&self) -> Vec<u64> {
        self.coords.iter().map(|c| (c + 0.0).to_bits()).collect()
    }
}

thread_local! {
    static DISTANCE_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Number of distance evaluations performed on the current thread.
pub fn distance_calls() -> u64 {
    DISTANCE_CALLS.with(|c| c.get())
}

pub fn reset_distance_calls() {
    DISTANCE_CALLS.with(|c| c.set(0));
}

/// Distance oracle. Inputs are assumed to have equal length; callers validate
/// dimensions at the boundary.
pub trait Metric: Send + Sync {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Euclidean;

impl Metric for Euclidean {
    #[inline]
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        DISTANCE_CALLS.with(|c| c.set(c.get() + 1));
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

/// Checked Euclidean distance between two records.
pub fn distance(a: &PointRecord, b: &PointRecord) -> Result<f64, MetricError> {
    if a.dim() != b.dim() {
        return Err(MetricError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(Euclidean.distance(a.coords(), b.coords()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub d_min: f64,
    pub d_max: f64,
    pub aspect_ratio: f64,
}

/// Smallest and largest pairwise distance by an O(n²) scan.
pub fn pairwise_extremes(points: &[PointRecord]) -> Result<MetricStats, MetricError> {
    if points.len() < 2 {
        return Err(MetricError::TooFewPoints(points.len()));
    }
    let mut d_min = f64::INFINITY;
    let mut d_max = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = distance(a, b)?;
            if d == 0.0 {
                return Err(MetricError::DuplicateCoordinates(a.id, b.id));
            }
            d_min = d_min.min(d);
            d_max = d_max.max(d);
        }
    }
    Ok(MetricStats {
        d_min,
        d_max,
        aspect_ratio: d_max / d_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(id: u64, c: &[f64]) -> PointRecord {
        PointRecord::new(id, c.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(
            distance(&p(0, &[0.0, 0.0]), &p(1, &[3.0, 4.0])).unwrap(),
            5.0
        );
        assert_eq!(
            distance(&p(0, &[1.0, 1.0]), &p(1, &[1.0, 1.0])).unwrap(),
            0.0
        );
        assert_eq!(
            distance(&p(0, &[0.0, 0.0]), &p(1, &[1.0, 0.0])).unwrap(),
            1.0
        );
    }

    #[test]
    fn distance_rejects_dimension_mismatch() {
        let err = distance(&p(0, &[0.0, 0.0]), &p(1, &[1.0])).unwrap_err();
        assert_eq!(err, MetricError::DimensionMismatch { left: 2, right: 1 });
    }

    #[test]
    fn record_rejects_bad_coords() {
        assert!(PointRecord::new(0, vec![]).is_err());
        assert!(PointRecord::new(0, vec![f64::NAN, 1.0]).is_err());
        assert!(PointRecord::new(0, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn negative_zero_shares_key() {
        assert_eq!(
            p(0, &[-0.0, 1.0]).coord_key(),
            p(1, &[0.0, 1.0]).coord_key()
        );
    }

    #[test]
    fn extremes_examples() {
        let s =
            pairwise_extremes(&[p(0, &[0.0, 0.0]), p(1, &[1.0, 0.0]), p(2, &[3.0, 0.0])]).unwrap();
        assert_eq!((s.d_min, s.d_max, s.aspect_ratio), (1.0, 3.0, 3.0));
        let s = pairwise_extremes(&[p(0, &[0.0, 0.0]), p(1, &[0.0, 2.0])]).unwrap();
        assert_eq!((s.d_min, s.d_max, s.aspect_ratio), (2.0, 2.0, 1.0));
    }

    #[test]
    fn extremes_errors() {
        assert_eq!(
            pairwise_extremes(&[p(0, &[0.0])]).unwrap_err(),
            MetricError::TooFewPoints(1)
        );
        assert!(matches!(
            pairwise_extremes(&[p(0, &[0.0]), p(1, &[2.0]), p(2, &[0.0])]).unwrap_err(),
            MetricError::DuplicateCoordinates(PointId(0), PointId(2))
        ));
    }

    #[test]
    fn distance_counter_counts_this_thread() {
        reset_distance_calls();
        let a = p(0, &[0.0]);
        let b = p(1, &[1.0]);
        for _ in 0..3 {
            distance(&a, &b).unwrap();
        }
        assert_eq!(distance_calls(), 3);
    }

    fn coords() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0f64..100.0, 3)
    }

    proptest! {
        #[test]
        fn euclidean_is_a_metric(a in coords(), b in coords(), c in coords()) {
            let (a, b, c) = (p(0, &a), p(1, &b), p(2, &c));
            let ab = distance(&a, &b).unwrap();
            let ba = distance(&b, &a).unwrap();
            let bc = distance(&b, &c).unwrap();
            let ac = distance(&a, &c).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab >= 0.0);
            // Rounding slack on the triangle inequality only.
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert_eq!(ab == 0.0, a.coords() == b.coords());
        }

        #[test]
        fn extremes_are_order_independent(
            pts in prop::collection::hash_set((-50i32..50, -50i32..50), 2..40),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut recs: Vec<PointRecord> = pts
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| p(i as u64, &[x as f64, y as f64]))
                .collect();
            let a = pairwise_extremes(&recs).unwrap();
            recs.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = pairwise_extremes(&recs).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a.d_min <= a.d_max && a.aspect_ratio >= 1.0);
        }
    }
}
