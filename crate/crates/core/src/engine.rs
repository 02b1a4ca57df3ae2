//! The ensemble of `m` navigating nets whose scale grids are offset by
//! `α^{1/m}` from one another, and the two k-center queries on top of it.

use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{PointId, PointRecord};
use crate::navnet::{Mode, NavigatingNet, NetConfig, NetError, ScaleIndex, ValidationReport};

/// Default navigation-list radius multiplier.
pub const DEFAULT_PSI: f64 = 4.0;

/// Upper limit on the number of nets tried by [`EnsembleConfig::derive`].
pub const MAX_NETS: u32 = 256;

/// Geometric α grid resolution: `α_j = 2^{j / GRID_STEPS_PER_OCTAVE}`.
const GRID_STEPS_PER_OCTAVE: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("epsilon must be a finite number > 0, got {0}")]
    InvalidEpsilon(f64),
    #[error("no (alpha, m) with m <= {max_m} reaches ratio 2 + {epsilon}")]
    Infeasible { epsilon: f64, max_m: u32 },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("the engine holds no points")]
    Empty,
    #[error("point {0} was already used in this engine")]
    IdReused(PointId),
    #[error("point {id} has the same coordinates as live point {existing}")]
    DuplicatePoint { id: PointId, existing: PointId },
    #[error("point {id} has dimension {got}, the engine holds dimension {expected}")]
    Dimension {
        id: PointId,
        expected: usize,
        got: usize,
    },
    #[error("point {0} is not live")]
    UnknownPoint(PointId),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// `2α·α^{1/m} / (α − 1)`: the approximation ratio reachable with `m` nets of base `α`.
pub fn approximation_ratio(alpha: f64, m: u32) -> f64 {
    2.0 * alpha * alpha.powf(1.0 / m as f64) / (alpha - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub epsilon: f64,
    pub alpha: f64,
    pub m: u32,
    pub psi: f64,
    pub mode: Mode,
}

impl EnsembleConfig {
    /// Picks `(α, m)` with `approximation_ratio(α, m) ≤ 2 + ε`.
    ///
    /// For `ε ≤ 1` the closed form `α = 2/ε`, `m = ⌈ε⁻¹ ln 2 + ε⁻¹ ln ε⁻¹⌉` is
    /// tried first. Otherwise, or when it misses the target, `m` is scanned
    /// upward and for each `m` the best `α` on a geometric grid is used.
    pub fn derive(epsilon: f64, psi: f64, mode: Mode) -> Result<Self, EngineError> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(EngineError::InvalidEpsilon(epsilon));
        }
        let target = 2.0 + epsilon;
        let make = |alpha, m| EnsembleConfig {
            epsilon,
            alpha,
            m,
            psi,
            mode,
        };
        if epsilon <= 1.0 {
            let alpha = 2.0 / epsilon;
            let inv = 1.0 / epsilon;
            let m = ((inv * 2f64.ln() + inv * inv.ln()).ceil() as u32).max(1);
            if alpha > 1.0 && m <= MAX_NETS && approximation_ratio(alpha, m) <= target {
                return Ok(make(alpha, m));
            }
            log::debug!("closed form alpha={alpha} m={m} misses 2+{epsilon}; scanning");
        }
        for m in 1..=MAX_NETS {
            let (alpha, ratio) = best_alpha(m);
            if ratio <= target {
                return Ok(make(alpha, m));
            }
        }
        Err(EngineError::Infeasible {
            epsilon,
            max_m: MAX_NETS,
        })
    }

    pub fn ratio(&self) -> f64 {
        approximation_ratio(self.alpha, self.m)
    }

    pub fn net_config(&self, p: u32) -> NetConfig {
        NetConfig::new(self.alpha, p, self.m, self.psi, self.mode)
    }
}

/// Minimizes the ratio over `α ∈ (1, max(16, 2(m+1))]` on the geometric grid.
/// Ties keep the smaller `α`.
fn best_alpha(m: u32) -> (f64, f64) {
    let upper = 16f64.max(2.0 * (m as f64 + 1.0));
    let steps = (upper.log2() * GRID_STEPS_PER_OCTAVE as f64).floor() as u32;
    (1..=steps)
        .map(|j| {
            let alpha = 2f64.powf(j as f64 / GRID_STEPS_PER_OCTAVE as f64);
            (alpha, approximation_ratio(alpha, m))
        })
        .fold((f64::NAN, f64::INFINITY), |best, cur| {
            if cur.1 < best.1 {
                cur
            } else {
                best
            }
        })
}

/// A k-center solution read from one net of the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub k: usize,
    /// 1-based index of the net the solution comes from.
    pub p_star: u32,
    pub i_star: ScaleIndex,
    /// Sorted by id.
    pub centers: Vec<PointId>,
    /// `α/(α−1) · scale_{p*}(i*)`, or 0 when every point is a center.
    pub cost_bound: f64,
    pub epoch: u64,
}

impl Solution {
    /// Whether every live point is a center.
    pub fn is_trivial(&self) -> bool {
        self.cost_bound == 0.0
    }
}

/// Fully dynamic k-center engine. Updates never look at `k`; any `k` can be
/// queried at any time.
pub struct Engine {
    config: EnsembleConfig,
    nets: Vec<NavigatingNet>,
    points: HashMap<PointId, PointRecord>,
    coords: HashMap<Vec<u64>, PointId>,
    used_ids: HashSet<PointId>,
    dim: Option<usize>,
    epoch: u64,
    parallel: bool,
    cache: Mutex<Option<Arc<Solution>>>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("config", &self.config)
            .field("len", &self.points.len())
            .field("epoch", &self.epoch)
            .finish_non_exhaustive()
    }
}

impl Engine {
    /// Builds an engine for ratio `2 + ε` with the default `ψ`. `k_hint` is only
    /// checked; `k` is supplied per query.
    pub fn new(epsilon: f64, k_hint: Option<usize>, mode: Mode) -> Result<Self, EngineError> {
        if k_hint == Some(0) {
            return Err(EngineError::InvalidK);
        }
        Self::with_config(EnsembleConfig::derive(epsilon, DEFAULT_PSI, mode)?)
    }

    pub fn with_config(config: EnsembleConfig) -> Result<Self, EngineError> {
        let nets = (1..=config.m)
            .map(|p| NavigatingNet::new(config.net_config(p)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Engine {
            config,
            nets,
            points: HashMap::default(),
            coords: HashMap::default(),
            used_ids: HashSet::default(),
            dim: None,
            epoch: 0,
            parallel: true,
            cache: Mutex::new(None),
        })
    }

    /// Turns the per-net parallel update on or off (on by default).
    pub fn set_parallel(&mut self, parallel: bool) {
        self.parallel = parallel;
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn nets(&self) -> &[NavigatingNet] {
        &self.nets
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, id: PointId) -> bool {
        self.points.contains_key(&id)
    }

    pub fn point(&self, id: PointId) -> Option<&PointRecord> {
        self.points.get(&id)
    }

    /// Live points in id order.
    pub fn live_points(&self) -> Vec<PointRecord> {
        let mut v: Vec<PointRecord> = self.points.values().cloned().collect();
        v.sort_unstable_by_key(|p| p.id);
        v
    }

    /// Number of updates applied so far.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn insert(&mut self, point: PointRecord) -> Result<(), EngineError> {
        let id = point.id;
        if self.used_ids.contains(&id) {
            return Err(EngineError::IdReused(id));
        }
        if let Some(expected) = self.dim {
            if expected != point.dim() {
                return Err(EngineError::Dimension {
                    id,
                    expected,
                    got: point.dim(),
                });
            }
        }
        let key = point.coord_key();
        if let Some(&existing) = self.coords.get(&key) {
            return Err(EngineError::DuplicatePoint { id, existing });
        }
        let apply = |net: &mut NavigatingNet| net.insert(point.clone());
        if self.parallel {
            self.nets.par_iter_mut().try_for_each(apply)?;
        } else {
            self.nets.iter_mut().try_for_each(apply)?;
        }
        self.dim = Some(point.dim());
        self.used_ids.insert(id);
        self.coords.insert(key, id);
        self.points.insert(id, point);
        self.bump();
        Ok(())
    }

    /// Removes a live point. Unknown ids are ignored with a warning and report
    /// `false`.
    pub fn delete(&mut self, id: PointId) -> Result<bool, EngineError> {
        let Some(point) = self.points.remove(&id) else {
            log::warn!("delete of unknown point {id} ignored");
            return Ok(false);
        };
        self.coords.remove(&point.coord_key());
        let apply = |net: &mut NavigatingNet| net.delete(id).map(|_| ());
        if self.parallel {
            self.nets.par_iter_mut().try_for_each(apply)?;
        } else {
            self.nets.iter_mut().try_for_each(apply)?;
        }
        self.bump();
        Ok(true)
    }

    fn bump(&mut self) {
        self.epoch += 1;
        *self.cache.get_mut().unwrap_or_else(|e| e.into_inner()) = None;
    }

    /// The best solution across the nets for this `k`. Cached until the next update.
    pub fn solution(&self, k: usize) -> Result<Arc<Solution>, EngineError> {
        if k == 0 {
            return Err(EngineError::InvalidK);
        }
        if self.points.is_empty() {
            return Err(EngineError::Empty);
        }
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(sol) = cache.as_ref() {
            if sol.epoch == self.epoch && sol.k == k {
                return Ok(Arc::clone(sol));
            }
        }
        let sol = Arc::new(self.compute_solution(k)?);
        *cache = Some(Arc::clone(&sol));
        Ok(sol)
    }

    fn compute_solution(&self, k: usize) -> Result<Solution, EngineError> {
        if self.points.len() <= k {
            let mut centers: Vec<PointId> = self.points.keys().copied().collect();
            centers.sort_unstable();
            let i_star = self.nets[0].bounds().map(|b| b.0).unwrap_or(0);
            return Ok(Solution {
                k,
                p_star: 1,
                i_star,
                centers,
                cost_bound: 0.0,
                epoch: self.epoch,
            });
        }
        let a = self.config.alpha;
        let factor = a / (a - 1.0);
        let mut best: Option<(usize, ScaleIndex, f64)> = None;
        for (p, net) in self.nets.iter().enumerate() {
            let i = net.smallest_scale_with_at_most(k)?;
            let cost = factor * net.scale(i);
            if best.is_none_or(|b| cost < b.2) {
                best = Some((p, i, cost));
            }
        }
        let (p, i_star, cost_bound) = best.expect("at least one net");
        let net = &self.nets[p];
        let centers = match self.config.mode {
            Mode::Tree => net.centers_top_down(i_star),
            Mode::List => net.centers_at_scale(i_star),
        };
        Ok(Solution {
            k,
            p_star: p as u32 + 1,
            i_star,
            centers,
            cost_bound,
            epoch: self.epoch,
        })
    }

    /// Whether `x` is a center of the current solution for `k`. With a fresh
    /// cached solution this is a constant-time lookup. Unknown points are never
    /// centers.
    pub fn is_center(&self, x: PointId, k: usize) -> Result<bool, EngineError> {
        if !self.points.contains_key(&x) {
            return Ok(false);
        }
        let sol = self.solution(k)?;
        if sol.is_trivial() {
            return Ok(true);
        }
        Ok(self.nets[sol.p_star as usize - 1].is_center_at(x, sol.i_star))
    }

    /// The center serving `x` in the current solution for `k`.
    pub fn cluster_of(&self, x: PointId, k: usize) -> Result<PointId, EngineError> {
        Ok(*self.cluster_path(x, k)?.last().expect("path contains x"))
    }

    /// The climb from `x` to its center; the hop count is `len − 1`.
    pub fn cluster_path(&self, x: PointId, k: usize) -> Result<Vec<PointId>, EngineError> {
        if !self.points.contains_key(&x) {
            return Err(EngineError::UnknownPoint(x));
        }
        let sol = self.solution(k)?;
        if sol.is_trivial() {
            return Ok(vec![x]);
        }
        Ok(self.nets[sol.p_star as usize - 1].climb_path(x, sol.i_star)?)
    }

    /// Validates every net against the live point set; returns the failing nets
    /// as `(p, report)`.
    pub fn validate(&self) -> Vec<(u32, ValidationReport)> {
        let live = self.live_points();
        self.nets
            .par_iter()
            .enumerate()
            .map(|(p, net)| (p as u32 + 1, net.validate(&live)))
            .filter(|(_, r)| !r.is_valid())
            .collect()
    }

    /// Fault injection for validator tests: overwrites one counter of net `p`.
    #[doc(hidden)]
    pub fn corrupt_counter(&mut self, p: u32, level: ScaleIndex, value: usize) {
        self.nets[p as usize - 1].corrupt_counter(level, value);
    }
}
