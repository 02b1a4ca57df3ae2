use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use super::{Mode, NavigatingNet, ScaleIndex, Top};
use crate::metric::{Metric, PointId, PointRecord};

/// One broken invariant found by [`NavigatingNet::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    PointSet {
        missing: Vec<PointId>,
        unexpected: Vec<PointId>,
        moved: Vec<PointId>,
    },
    Membership {
        point: Option<PointId>,
        detail: String,
    },
    Separation {
        level: ScaleIndex,
        a: PointId,
        b: PointId,
        distance: f64,
        scale: f64,
    },
    Covering {
        level: ScaleIndex,
        point: PointId,
        nearest: f64,
        scale: f64,
    },
    Nesting {
        level: ScaleIndex,
        detail: String,
    },
    Counter {
        level: ScaleIndex,
        stored: Option<usize>,
        actual: Option<usize>,
    },
    ListRange {
        point: PointId,
        expected: (ScaleIndex, ScaleIndex),
        stored: Option<(ScaleIndex, ScaleIndex)>,
        contiguous: bool,
    },
    Beta {
        point: PointId,
        stored: ScaleIndex,
        expected: ScaleIndex,
    },
    ListMismatch {
        point: PointId,
        level: ScaleIndex,
        missing: Vec<PointId>,
        extra: Vec<PointId>,
        wrong_distance: Vec<PointId>,
    },
    HeapMismatch {
        point: PointId,
        level: ScaleIndex,
        missing: Vec<PointId>,
        extra: Vec<PointId>,
    },
    HeapOrder {
        point: PointId,
        level: ScaleIndex,
    },
    Parent {
        point: PointId,
        detail: String,
    },
    Children {
        point: PointId,
        detail: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PointSet {
                missing,
                unexpected,
                moved,
            } => write!(
                f,
                "point set: missing {missing:?}, unexpected {unexpected:?}, changed coordinates {moved:?}"
            ),
            Violation::Membership { point, detail } => match point {
                Some(p) => write!(f, "membership of {p}: {detail}"),
                None => write!(f, "membership: {detail}"),
            },
            Violation::Separation {
                level,
                a,
                b,
                distance,
                scale,
            } => write!(
                f,
                "separation at level {level}: d({a},{b}) = {distance} < {scale}"
            ),
            Violation::Covering {
                level,
                point,
                nearest,
                scale,
            } => write!(
                f,
                "covering at level {level}: {point} is {nearest} from the nearest center, scale {scale}"
            ),
            Violation::Nesting { level, detail } => write!(f, "nesting at level {level}: {detail}"),
            Violation::Counter {
                level,
                stored,
                actual,
            } => write!(f, "counter at level {level}: stored {stored:?}, actual {actual:?}"),
            Violation::ListRange {
                point,
                expected,
                stored,
                contiguous,
            } => write!(
                f,
                "list range of {point}: expected {expected:?}, stored {stored:?} (contiguous: {contiguous})"
            ),
            Violation::Beta {
                point,
                stored,
                expected,
            } => write!(f, "beta of {point}: stored {stored}, expected {expected}"),
            Violation::ListMismatch {
                point,
                level,
                missing,
                extra,
                wrong_distance,
            } => write!(
                f,
                "list of {point} at level {level}: missing {missing:?}, extra {extra:?}, wrong distance {wrong_distance:?}"
            ),
            Violation::HeapMismatch {
                point,
                level,
                missing,
                extra,
            } => write!(
                f,
                "heap of {point} at level {level}: missing {missing:?}, extra {extra:?}"
            ),
            Violation::HeapOrder { point, level } => {
                write!(f, "heap of {point} at level {level} is not heap-ordered")
            }
            Violation::Parent { point, detail } => write!(f, "parent of {point}: {detail}"),
            Violation::Children { point, detail } => write!(f, "children of {point}: {detail}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("no violations");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Dense snapshot used by the checks: ids sorted, tops, pairwise distances.
struct Snapshot {
    ids: Vec<PointId>,
    /// `i64::MAX` stands for the root.
    tops: Vec<i64>,
    dist: Vec<f64>,
}

impl Snapshot {
    fn d(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.ids.len() + b]
    }
}

impl<M: Metric> NavigatingNet<M> {
    /// Checks every invariant of the net and that it holds exactly `points`.
    pub fn validate(&self, points: &[PointRecord]) -> ValidationReport {
        let mut v = Vec::new();
        let expected: HashMap<PointId, &PointRecord> = points.iter().map(|p| (p.id, p)).collect();
        let mut missing: Vec<PointId> = expected
            .keys()
            .filter(|id| !self.nodes.contains_key(id))
            .copied()
            .collect();
        let mut unexpected = Vec::new();
        let mut moved = Vec::new();
        for (id, node) in &self.nodes {
            match expected.get(id) {
                None => unexpected.push(*id),
                Some(p) if p.coords() != node.point.coords() => moved.push(*id),
                Some(_) => {}
            }
        }
        if !(missing.is_empty() && unexpected.is_empty() && moved.is_empty()) {
            missing.sort_unstable();
            unexpected.sort_unstable();
            moved.sort_unstable();
            v.push(Violation::PointSet {
                missing,
                unexpected,
                moved,
            });
        }
        self.check_structure(&mut v);
        ValidationReport { violations: v }
    }

    /// Checks every invariant without comparing against an expected point set.
    pub fn validate_structure(&self) -> ValidationReport {
        let mut v = Vec::new();
        self.check_structure(&mut v);
        ValidationReport { violations: v }
    }

    fn check_structure(&self, v: &mut Vec<Violation>) {
        if !self.check_membership(v) {
            return;
        }
        self.check_counters(v);
        if self.nodes.len() < 2 {
            for (id, node) in &self.nodes {
                if !(node.lists.is_empty()
                    && node.heaps.is_empty()
                    && node.children.is_empty()
                    && node.parent.is_none())
                {
                    v.push(Violation::Membership {
                        point: Some(*id),
                        detail: "a lone root keeps links".into(),
                    });
                }
            }
            return;
        }
        let snap = self.snapshot();
        self.check_separation(&snap, v);
        self.check_covering(&snap, v);
        self.check_nesting(v);
        match self.config.mode {
            Mode::List => {
                self.check_lists(&snap, v);
                self.check_heaps(v);
            }
            Mode::Tree => self.check_tree(v),
        }
    }

    /// Root and top buckets agree with per-point tops. Later checks rely on it.
    fn check_membership(&self, v: &mut Vec<Violation>) -> bool {
        let before = v.len();
        let roots: Vec<PointId> = self
            .nodes
            .iter()
            .filter(|(_, n)| n.top == Top::Root)
            .map(|(&id, _)| id)
            .collect();
        let root_ok = match (self.root, roots.as_slice()) {
            (None, []) => self.nodes.is_empty(),
            (Some(r), [only]) => r == *only,
            _ => false,
        };
        if !root_ok {
            v.push(Violation::Membership {
                point: self.root,
                detail: format!(
                    "root pointer {:?} but points marked root {roots:?}",
                    self.root
                ),
            });
        }
        for (&t, ids) in &self.by_top {
            if ids.is_empty() {
                v.push(Violation::Membership {
                    point: None,
                    detail: format!("empty bucket at level {t}"),
                });
            }
            for id in ids {
                match self.nodes.get(id) {
                    Some(n) if n.top == Top::Level(t) => {}
                    _ => v.push(Violation::Membership {
                        point: Some(*id),
                        detail: format!("listed at level {t} with a different top"),
                    }),
                }
            }
        }
        for (id, node) in &self.nodes {
            if let Top::Level(t) = node.top {
                if !self.by_top.get(&t).is_some_and(|s| s.contains(id)) {
                    v.push(Violation::Membership {
                        point: Some(*id),
                        detail: format!("top {t} missing from its bucket"),
                    });
                }
            }
        }
        v.len() == before
    }

    fn check_counters(&self, v: &mut Vec<Violation>) {
        let mut actual: BTreeMap<ScaleIndex, usize> = BTreeMap::new();
        if self.nodes.len() >= 2 {
            let (lo, hi) = self.bounds().expect("nonempty");
            for i in lo..=hi {
                actual.insert(i, self.true_count(i));
            }
        }
        let levels: BTreeSet<ScaleIndex> =
            actual.keys().chain(self.counters.keys()).copied().collect();
        for level in levels {
            let stored = self.counters.get(&level).copied();
            let real = actual.get(&level).copied();
            if stored != real {
                v.push(Violation::Counter {
                    level,
                    stored,
                    actual: real,
                });
            }
        }
    }

    fn snapshot(&self) -> Snapshot {
        let mut ids: Vec<PointId> = self.nodes.keys().copied().collect();
        ids.sort_unstable();
        let n = ids.len();
        let tops = ids
            .iter()
            .map(|id| match self.nodes[id].top {
                Top::Root => i64::MAX,
                Top::Level(t) => t,
            })
            .collect();
        let mut dist = vec![0.0; n * n];
        for a in 0..n {
            for b in a + 1..n {
                let d = self.dist(ids[a], ids[b]);
                dist[a * n + b] = d;
                dist[b * n + a] = d;
            }
        }
        Snapshot { ids, tops, dist }
    }

    /// Each pair is checked at the highest level holding both points; lower
    /// levels have smaller scales.
    fn check_separation(&self, s: &Snapshot, v: &mut Vec<Violation>) {
        let n = s.ids.len();
        for a in 0..n {
            for b in a + 1..n {
                let level = s.tops[a].min(s.tops[b]);
                let scale = self.scale(level);
                let d = s.d(a, b);
                if d < scale {
                    v.push(Violation::Separation {
                        level,
                        a: s.ids[a],
                        b: s.ids[b],
                        distance: d,
                        scale,
                    });
                }
            }
        }
    }

    /// Every point leaving the center set at level `t + 1` has a center of that
    /// level within `scale(t + 1)`.
    fn check_covering(&self, s: &Snapshot, v: &mut Vec<Violation>) {
        let n = s.ids.len();
        for z in 0..n {
            let t = s.tops[z];
            if t == i64::MAX {
                continue;
            }
            let level = t + 1;
            let nearest = (0..n)
                .filter(|&y| s.tops[y] >= level)
                .map(|y| s.d(z, y))
                .fold(f64::INFINITY, f64::min);
            let scale = self.scale(level);
            if nearest.is_nan() || nearest > scale {
                v.push(Violation::Covering {
                    level,
                    point: s.ids[z],
                    nearest,
                    scale,
                });
            }
        }
    }

    /// Walking the links downward from the root reproduces every center set.
    fn check_nesting(&self, v: &mut Vec<Violation>) {
        let (lo, hi) = self.bounds().expect("nonempty");
        for level in lo..=hi {
            let walked = self.centers_top_down(level);
            let direct = self.centers_at_scale(level);
            if walked != direct {
                let walked_set: BTreeSet<PointId> = walked.iter().copied().collect();
                let unreachable: Vec<PointId> = direct
                    .iter()
                    .filter(|p| !walked_set.contains(p))
                    .copied()
                    .collect();
                v.push(Violation::Nesting {
                    level,
                    detail: format!(
                        "{} centers reachable from the root, {} expected; unreachable {unreachable:?}",
                        walked.len(),
                        direct.len()
                    ),
                });
            }
        }
    }

    fn check_lists(&self, s: &Snapshot, v: &mut Vec<Violation>) {
        let n = s.ids.len();
        let (r_min, r_max) = self.bounds().expect("nonempty");
        let psi = self.config.psi;
        for x in 0..n {
            let id = s.ids[x];
            let node = &self.nodes[&id];
            let hi = if s.tops[x] == i64::MAX {
                r_max
            } else {
                s.tops[x]
            };
            let mut neighbours: Vec<(f64, usize)> =
                (0..n).filter(|&z| z != x).map(|z| (s.d(x, z), z)).collect();
            neighbours.sort_by(|a, b| a.0.total_cmp(&b.0));
            let definitional = |l: ScaleIndex| -> BTreeMap<PointId, f64> {
                let r = psi * self.scale(l);
                let mut out: BTreeMap<PointId, f64> = BTreeMap::from([(id, 0.0)]);
                for &(d, z) in neighbours.iter().take_while(|e| e.0 <= r) {
                    if s.tops[z] >= l - 1 {
                        out.insert(s.ids[z], d);
                    }
                }
                out
            };

            // β: one below the lowest level with a non-singleton list
            let mut lowest = None;
            let mut l = hi;
            while l > r_min {
                if definitional(l).len() > 1 {
                    lowest = Some(l);
                }
                l -= 1;
            }
            let nn = neighbours
                .first()
                .map(|e| e.0)
                .expect("at least two points");
            let l0 = self.level_for(nn / psi);
            if l0 <= r_min.min(hi) {
                lowest = Some(l0);
            }
            let beta = lowest.map(|l| l - 1).unwrap_or(hi);
            if node.beta != beta {
                v.push(Violation::Beta {
                    point: id,
                    stored: node.beta,
                    expected: beta,
                });
            }
            let keys: Vec<ScaleIndex> = node.lists.keys().copied().collect();
            let stored = keys.first().zip(keys.last()).map(|(&a, &b)| (a, b));
            let contiguous = keys.windows(2).all(|w| w[1] == w[0] + 1);
            if stored != Some((beta, hi)) || !contiguous {
                v.push(Violation::ListRange {
                    point: id,
                    expected: (beta, hi),
                    stored,
                    contiguous,
                });
            }
            for (&level, list) in &node.lists {
                let want = definitional(level);
                let have: BTreeMap<PointId, f64> = list.iter().copied().collect();
                let missing: Vec<PointId> = want
                    .keys()
                    .filter(|z| !have.contains_key(z))
                    .copied()
                    .collect();
                let mut extra: Vec<PointId> = have
                    .keys()
                    .filter(|z| !want.contains_key(z))
                    .copied()
                    .collect();
                if have.len() != list.len() {
                    extra.push(id);
                }
                let wrong_distance: Vec<PointId> = have
                    .iter()
                    .filter(|(z, d)| want.get(z).is_some_and(|w| w != *d))
                    .map(|(&z, _)| z)
                    .collect();
                if !(missing.is_empty() && extra.is_empty() && wrong_distance.is_empty()) {
                    v.push(Violation::ListMismatch {
                        point: id,
                        level,
                        missing,
                        extra,
                        wrong_distance,
                    });
                }
            }
        }
    }

    /// Heaps mirror list membership exactly and are heap-ordered.
    fn check_heaps(&self, v: &mut Vec<Violation>) {
        let mut expected: BTreeMap<(PointId, ScaleIndex), BTreeMap<PointId, f64>> = BTreeMap::new();
        for (&y, node) in &self.nodes {
            for (&l, list) in &node.lists {
                for &(z, d) in list {
                    expected.entry((z, l - 1)).or_default().insert(y, d);
                }
            }
        }
        let mut stored_keys = BTreeSet::new();
        for (&z, node) in &self.nodes {
            for (&l, heap) in &node.heaps {
                stored_keys.insert((z, l));
                if !heap.is_well_formed() {
                    v.push(Violation::HeapOrder { point: z, level: l });
                }
                let have: BTreeMap<PointId, f64> = heap.iter().map(|(d, y)| (y, d)).collect();
                let want = expected.get(&(z, l)).cloned().unwrap_or_default();
                if have != want {
                    v.push(Violation::HeapMismatch {
                        point: z,
                        level: l,
                        missing: want
                            .iter()
                            .filter(|(y, d)| have.get(y) != Some(d))
                            .map(|(&y, _)| y)
                            .collect(),
                        extra: have
                            .iter()
                            .filter(|(y, d)| want.get(y) != Some(d))
                            .map(|(&y, _)| y)
                            .collect(),
                    });
                }
            }
        }
        for ((z, l), want) in expected {
            if !stored_keys.contains(&(z, l)) {
                v.push(Violation::HeapMismatch {
                    point: z,
                    level: l,
                    missing: want.keys().copied().collect(),
                    extra: Vec::new(),
                });
            }
        }
    }

    fn check_tree(&self, v: &mut Vec<Violation>) {
        for (&x, node) in &self.nodes {
            if !(node.lists.is_empty() && node.heaps.is_empty()) {
                v.push(Violation::Parent {
                    point: x,
                    detail: "navigation lists stored in tree mode".into(),
                });
            }
            match (node.top, node.parent) {
                (Top::Root, None) => {}
                (Top::Root, Some(p)) => v.push(Violation::Parent {
                    point: x,
                    detail: format!("root has parent {}", p.0),
                }),
                (Top::Level(_), None) => v.push(Violation::Parent {
                    point: x,
                    detail: "missing parent".into(),
                }),
                (Top::Level(t), Some((p, d))) => {
                    let problem = match self.nodes.get(&p) {
                        None => Some(format!("parent {p} is not in the net")),
                        Some(pn) if !pn.top.reaches(t + 1) => {
                            Some(format!("parent {p} is not a center at level {}", t + 1))
                        }
                        Some(_) if self.dist(x, p) != d => {
                            Some(format!("cached distance {d} to {p} is stale"))
                        }
                        Some(_) if d > self.scale(t + 1) => Some(format!(
                            "parent {p} at {d} exceeds scale {}",
                            self.scale(t + 1)
                        )),
                        Some(pn) if !pn.children.get(&t).is_some_and(|c| c.contains(&(x, d))) => {
                            Some(format!("parent {p} does not list it as a child"))
                        }
                        Some(_) => None,
                    };
                    if let Some(detail) = problem {
                        v.push(Violation::Parent { point: x, detail });
                    }
                }
            }
            for (&l, kids) in &node.children {
                if kids.is_empty() {
                    v.push(Violation::Children {
                        point: x,
                        detail: format!("empty child list at level {l}"),
                    });
                }
                for &(c, d) in kids {
                    let ok = self
                        .nodes
                        .get(&c)
                        .is_some_and(|cn| cn.top == Top::Level(l) && cn.parent == Some((x, d)));
                    if !ok {
                        v.push(Violation::Children {
                            point: x,
                            detail: format!("child {c} at level {l} does not point back"),
                        });
                    }
                }
            }
        }
    }
}
