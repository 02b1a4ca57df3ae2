//! A single navigating net over the scales `α^{i + p/m − 1}`, `i ∈ Z`.
//!
//! Every point stores the highest scale index at which it is a center (its
//! *top*); it is a center at every lower index as well, so the per-scale
//! center sets `Y_i = { x : top(x) ≥ i }` are nested by construction. One point,
//! the root, is a center at every scale.
//!
//! Two link layouts sit on top of the center sets:
//!
//! * [`Mode::List`]: for every point `x` and every index `i` in `[β_x, top_x]`
//!   the navigation list `L_{x,i} = { z ∈ Y_{i−1} : d(z,x) ≤ ψ·scale(i) }`, and
//!   for every list membership the reverse entry in the min-heap `M_{z,i−1}`.
//!   The root keeps lists up to `r_max`.
//! * [`Mode::Tree`]: every non-root point keeps exactly one parent one level
//!   above its top (a cover tree), and parents index their children.

mod update;
mod validate;

use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::FxHashMap as HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heap::IndexedMinHeap;
use crate::metric::{Euclidean, Metric, PointId, PointRecord};

pub use validate::{ValidationReport, Violation};

/// Signed index of a scale; the scale value is `α^{i + p/m − 1}`.
pub type ScaleIndex = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    List,
    Tree,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::List => "list",
            Mode::Tree => "tree",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "list" => Ok(Mode::List),
            "tree" => Ok(Mode::Tree),
            other => Err(format!("unknown mode `{other}` (expected list or tree)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Scale base, `> 1`.
    pub alpha: f64,
    /// Net index in `1..=m`.
    pub p: u32,
    pub m: u32,
    /// Navigation-list radius multiplier; at least 4 in list mode.
    pub psi: f64,
    pub mode: Mode,
}

impl NetConfig {
    pub fn new(alpha: f64, p: u32, m: u32, psi: f64, mode: Mode) -> Self {
        NetConfig {
            alpha,
            p,
            m,
            psi,
            mode,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.alpha.is_finite() && self.alpha > 1.0) {
            return Err(NetError::Config(format!(
                "alpha must be a finite number > 1, got {}",
                self.alpha
            )));
        }
        if self.m == 0 || self.p == 0 || self.p > self.m {
            return Err(NetError::Config(format!(
                "net index p={} must lie in 1..={}",
                self.p, self.m
            )));
        }
        if self.mode == Mode::List && !(self.psi.is_finite() && self.psi >= 4.0) {
            return Err(NetError::Config(format!(
                "psi must be finite and >= 4 in list mode, got {}",
                self.psi
            )));
        }
        Ok(())
    }

    /// Exponent offset `p/m − 1`.
    pub fn offset(&self) -> f64 {
        self.p as f64 / self.m as f64 - 1.0
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("invalid net configuration: {0}")]
    Config(String),
    #[error("point {0} is already in the net")]
    DuplicateId(PointId),
    #[error("point {id} has the same coordinates as point {existing}")]
    DuplicatePoint { id: PointId, existing: PointId },
    #[error("point {id} has dimension {got}, the net holds dimension {expected}")]
    Dimension {
        id: PointId,
        expected: usize,
        got: usize,
    },
    #[error("point {0} is not in the net")]
    UnknownPoint(PointId),
    #[error("the net is empty")]
    Empty,
    #[error("k must be at least 1")]
    InvalidK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Top {
    Level(ScaleIndex),
    Root,
}

impl Top {
    #[inline]
    pub(crate) fn reaches(self, i: ScaleIndex) -> bool {
        match self {
            Top::Root => true,
            Top::Level(t) => t >= i,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub(crate) point: PointRecord,
    pub(crate) top: Top,
    // list mode
    pub(crate) beta: ScaleIndex,
    pub(crate) lists: BTreeMap<ScaleIndex, Vec<(PointId, f64)>>,
    pub(crate) heaps: BTreeMap<ScaleIndex, IndexedMinHeap>,
    // tree mode: parent sits at index top + 1; children keyed by their own top
    pub(crate) parent: Option<(PointId, f64)>,
    pub(crate) children: BTreeMap<ScaleIndex, Vec<(PointId, f64)>>,
}

impl Node {
    fn new(point: PointRecord, top: Top) -> Self {
        Node {
            point,
            top,
            beta: 0,
            lists: BTreeMap::new(),
            heaps: BTreeMap::new(),
            parent: None,
            children: BTreeMap::new(),
        }
    }

    fn clear_links(&mut self) {
        self.beta = 0;
        self.lists.clear();
        self.heaps.clear();
        self.parent = None;
        self.children.clear();
    }
}

/// Per-point view of a net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PointNetState {
    pub id: PointId,
    /// Lowest stored list index (list mode with at least two points).
    pub beta: Option<ScaleIndex>,
    /// Highest index at which the point is a center; `None` for the root.
    pub top: Option<ScaleIndex>,
}

#[derive(Debug, Clone)]
pub struct NavigatingNet<M: Metric = Euclidean> {
    config: NetConfig,
    metric: M,
    offset: f64,
    ln_alpha: f64,
    dim: Option<usize>,
    nodes: HashMap<PointId, Node>,
    root: Option<PointId>,
    by_top: BTreeMap<ScaleIndex, BTreeSet<PointId>>,
    counters: BTreeMap<ScaleIndex, usize>,
}

impl NavigatingNet<Euclidean> {
    pub fn new(config: NetConfig) -> Result<Self, NetError> {
        Self::with_metric(config, Euclidean)
    }
}

impl<M: Metric> NavigatingNet<M> {
    pub fn with_metric(config: NetConfig, metric: M) -> Result<Self, NetError> {
        config.validate()?;
        Ok(NavigatingNet {
            config,
            metric,
            offset: config.offset(),
            ln_alpha: config.alpha.ln(),
            dim: None,
            nodes: HashMap::default(),
            root: None,
            by_top: BTreeMap::new(),
            counters: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: PointId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn point(&self, id: PointId) -> Option<&PointRecord> {
        self.nodes.get(&id).map(|n| &n.point)
    }

    pub fn ids(&self) -> impl Iterator<Item = PointId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn root(&self) -> Option<PointId> {
        self.root
    }

    /// Scale value at index `i`.
    #[inline]
    pub fn scale(&self, i: ScaleIndex) -> f64 {
        self.config.alpha.powf(i as f64 + self.offset)
    }

    /// Smallest index whose scale is at least `d` (`d > 0`).
    pub fn level_for(&self, d: f64) -> ScaleIndex {
        debug_assert!(d > 0.0 && d.is_finite());
        let mut i = (d.ln() / self.ln_alpha - self.offset).ceil() as ScaleIndex;
        while self.scale(i - 1) >= d {
            i -= 1;
        }
        while self.scale(i) < d {
            i += 1;
        }
        i
    }

    /// `(r_min, r_max)`: below `r_min` every point is a center, above `r_max`
    /// only the root is. A single-point net reports `(0, 0)`.
    pub fn bounds(&self) -> Option<(ScaleIndex, ScaleIndex)> {
        match self.nodes.len() {
            0 => None,
            1 => Some((0, 0)),
            _ => {
                let lo = *self.by_top.keys().next().expect("non-root points exist");
                let hi = *self
                    .by_top
                    .keys()
                    .next_back()
                    .expect("non-root points exist")
                    + 1;
                Some((lo, hi))
            }
        }
    }

    /// Stored counter `c_i = |Y_i|` for the nontrivial indices `[r_min, r_max]`.
    pub fn counters(&self) -> &BTreeMap<ScaleIndex, usize> {
        &self.counters
    }

    /// `|Y_i|` read from the maintained counters.
    pub fn count_at(&self, i: ScaleIndex) -> usize {
        let n = self.nodes.len();
        if n < 2 {
            return n;
        }
        let (lo, hi) = self.bounds().expect("nonempty");
        if i < lo {
            n
        } else if i > hi {
            1
        } else {
            self.counters.get(&i).copied().unwrap_or(0)
        }
    }

    /// `Y_i`, sorted by id.
    pub fn centers_at_scale(&self, i: ScaleIndex) -> Vec<PointId> {
        let mut out: Vec<PointId> = self.root.into_iter().collect();
        for ids in self.by_top.range(i..).map(|(_, ids)| ids) {
            out.extend(ids.iter().copied());
        }
        out.sort_unstable();
        out
    }

    /// `Y_i` gathered by walking the hierarchy downwards from the root. In tree
    /// mode this follows child links; in list mode it follows navigation lists.
    pub fn centers_top_down(&self, i: ScaleIndex) -> Vec<PointId> {
        let Some(root) = self.root else {
            return Vec::new();
        };
        let (lo, hi) = self.bounds().expect("nonempty");
        if self.nodes.len() == 1 || i >= hi {
            return vec![root];
        }
        let target = i.max(lo);
        let mut level: BTreeSet<PointId> = BTreeSet::from([root]);
        let mut j = hi;
        while j > target {
            let mut next = level.clone();
            for &y in &level {
                let node = &self.nodes[&y];
                let links = match self.config.mode {
                    Mode::Tree => node.children.get(&(j - 1)),
                    Mode::List => node.lists.get(&j),
                };
                for &(z, _) in links.into_iter().flatten() {
                    if self.nodes[&z].top == Top::Level(j - 1) {
                        next.insert(z);
                    }
                }
            }
            level = next;
            j -= 1;
        }
        level.into_iter().collect()
    }

    /// Whether `x` is a center at index `i`. Constant time.
    pub fn is_center_at(&self, x: PointId, i: ScaleIndex) -> bool {
        self.nodes.get(&x).is_some_and(|n| n.top.reaches(i))
    }

    /// The index `i*` with `c_{i*} ≤ k < c_{i*−1}`; `r_min` when the net holds
    /// at most `k` points.
    pub fn smallest_scale_with_at_most(&self, k: usize) -> Result<ScaleIndex, NetError> {
        if k == 0 {
            return Err(NetError::InvalidK);
        }
        let (lo, hi) = self.bounds().ok_or(NetError::Empty)?;
        if self.nodes.len() <= k {
            return Ok(lo);
        }
        Ok(self
            .counters
            .iter()
            .find(|&(_, &c)| c <= k)
            .map(|(&i, _)| i)
            .unwrap_or(hi))
    }

    /// Walks upward from `x` until reaching a center at index `target`.
    pub fn climb_to_scale(&self, x: PointId, target: ScaleIndex) -> Result<PointId, NetError> {
        Ok(*self.climb_path(x, target)?.last().expect("path contains x"))
    }

    /// The sequence of points visited by [`climb_to_scale`](Self::climb_to_scale),
    /// starting with `x`. Each hop goes to the nearest center one level above the
    /// current point's top.
    pub fn climb_path(&self, x: PointId, target: ScaleIndex) -> Result<Vec<PointId>, NetError> {
        let mut cur = x;
        let mut path = vec![x];
        loop {
            let node = self.nodes.get(&cur).ok_or(NetError::UnknownPoint(cur))?;
            let t = match node.top {
                Top::Root => return Ok(path),
                Top::Level(t) if t >= target => return Ok(path),
                Top::Level(t) => t,
            };
            cur = match self.config.mode {
                Mode::List => {
                    node.heaps
                        .get(&t)
                        .and_then(|h| h.peek())
                        .expect("covering keeps an upper neighbour in the reverse heap")
                        .1
                }
                Mode::Tree => node.parent.expect("non-root points have a parent").0,
            };
            path.push(cur);
        }
    }

    pub fn point_state(&self, x: PointId) -> Option<PointNetState> {
        let node = self.nodes.get(&x)?;
        let beta = (self.config.mode == Mode::List && self.nodes.len() >= 2).then_some(node.beta);
        let top = match node.top {
            Top::Root => None,
            Top::Level(t) => Some(t),
        };
        Some(PointNetState { id: x, beta, top })
    }

    /// Overwrites a stored counter. Only meant for fault-injection tests of the
    /// validator.
    #[doc(hidden)]
    pub fn corrupt_counter(&mut self, i: ScaleIndex, value: usize) {
        self.counters.insert(i, value);
    }

    #[inline]
    pub(crate) fn dist(&self, a: PointId, b: PointId) -> f64 {
        self.metric
            .distance(self.nodes[&a].point.coords(), self.nodes[&b].point.coords())
    }

    /// Highest index at which `x` keeps links: its top, or `r_max` for the root.
    pub(crate) fn hi_of(&self, x: PointId) -> ScaleIndex {
        match self.nodes[&x].top {
            Top::Level(t) => t,
            Top::Root => self.bounds().map(|b| b.1).unwrap_or(0),
        }
    }

    /// `|Y_i|` counted from the membership index, ignoring stored counters.
    pub(crate) fn true_count(&self, i: ScaleIndex) -> usize {
        self.root.iter().count() + self.by_top.range(i..).map(|(_, s)| s.len()).sum::<usize>()
    }
}

#[cfg(test)]
mod tests;
