use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::FxHashMap as HashMap;

use super::{Mode, NavigatingNet, NetError, Node, ScaleIndex, Top};
use crate::metric::{Metric, PointId, PointRecord};

/// Relative slack on search radii and triangle-inequality pruning, so rounding
/// never drops a point sitting exactly on a radius. Searches only collect
/// candidates; membership is always decided by exact comparisons.
const PRUNE_SLACK: f64 = 1e-12;

type Level = BTreeMap<PointId, f64>;

/// Result of a top-down descent towards a query point `q`.
#[derive(Debug, Default)]
struct Descent {
    /// `Y_j ∩ B(q, γ·scale(j))` for every visited `j`, with distances to `q`.
    near: BTreeMap<ScaleIndex, Level>,
    /// Key `j`: points of `Y_{j−1}` reached while expanding level `j`, within
    /// the candidate radius of that step.
    cands: BTreeMap<ScaleIndex, Vec<(PointId, f64)>>,
    /// Lowest `j` at which some point of `Y_j` lies within `scale(j)` of `q`.
    lowest_covered: ScaleIndex,
    duplicate: Option<PointId>,
}

impl<M: Metric> NavigatingNet<M> {
    fn insert_gamma(&self) -> f64 {
        let a = self.config.alpha;
        match self.config.mode {
            Mode::List => (self.config.psi + 1.0).max(a / (a - 1.0)),
            Mode::Tree => a / (a - 1.0),
        }
    }

    fn delete_gamma(&self) -> f64 {
        let a = self.config.alpha;
        match self.config.mode {
            Mode::List => ((self.config.psi + 1.0) * a).max(a / (a - 1.0)),
            Mode::Tree => (a / (a - 1.0)).max(2.0),
        }
    }

    /// Links from `y` at level `j` into `Y_{j−1}`.
    fn down_links(&self, y: PointId, j: ScaleIndex) -> &[(PointId, f64)] {
        let node = &self.nodes[&y];
        let links = match self.config.mode {
            Mode::List => node.lists.get(&j),
            Mode::Tree => node.children.get(&(j - 1)),
        };
        links.map(Vec::as_slice).unwrap_or(&[])
    }

    /// Lowest `j` with a non-empty `down_links(x, j)`.
    fn lowest_link(&self, x: PointId) -> Option<ScaleIndex> {
        let node = &self.nodes[&x];
        match self.config.mode {
            Mode::List => node.lists.keys().next().copied(),
            Mode::Tree => node.children.keys().next().map(|l| l + 1),
        }
    }

    fn descend(
        &self,
        q: &[f64],
        exclude: Option<PointId>,
        gamma: f64,
        list_psi: Option<f64>,
    ) -> Descent {
        let root = self.root.expect("descent needs a nonempty net");
        let mut out = Descent::default();
        let d_root = if exclude == Some(root) {
            0.0
        } else {
            self.metric.distance(q, self.nodes[&root].point.coords())
        };
        if exclude.is_none() && d_root == 0.0 {
            out.duplicate = Some(root);
            return out;
        }
        let (_, r_max) = self.bounds().expect("nonempty");
        let mut j = if d_root > 0.0 {
            r_max.max(self.level_for(d_root))
        } else {
            r_max
        };
        let q_floor = exclude.and_then(|e| self.lowest_link(e));
        out.lowest_covered = j;
        let mut frontier = vec![(root, d_root)];
        out.near.insert(
            j,
            frontier
                .iter()
                .copied()
                .filter(|e| Some(e.0) != exclude)
                .collect(),
        );
        loop {
            let keep_r = gamma * self.scale(j - 1) * (1.0 + PRUNE_SLACK);
            let cand_r = match list_psi {
                Some(psi) => keep_r.max(psi * self.scale(j) * (1.0 + PRUNE_SLACK)),
                None => keep_r,
            };
            let prune_r = cand_r * (1.0 + PRUNE_SLACK);
            let mut seen: HashMap<PointId, f64> = frontier.iter().copied().collect();
            for &(y, dy) in &frontier {
                for &(z, dyz) in self.down_links(y, j) {
                    if (dy - dyz).abs() > prune_r || seen.contains_key(&z) {
                        continue;
                    }
                    let dz = if Some(z) == exclude {
                        0.0
                    } else {
                        self.metric.distance(q, self.nodes[&z].point.coords())
                    };
                    seen.insert(z, dz);
                }
            }
            let mut cand: Vec<(PointId, f64)> =
                seen.into_iter().filter(|&(_, d)| d <= cand_r).collect();
            cand.sort_unstable_by_key(|e| e.0);
            if exclude.is_none() {
                if let Some(&(z, _)) = cand.iter().find(|e| e.1 == 0.0) {
                    out.duplicate = Some(z);
                    return out;
                }
            }
            let next: Vec<(PointId, f64)> =
                cand.iter().copied().filter(|&(_, d)| d <= keep_r).collect();
            let others: Level = next
                .iter()
                .copied()
                .filter(|e| Some(e.0) != exclude)
                .collect();
            let excluded_alive = exclude.is_some_and(|e| next.iter().any(|n| n.0 == e))
                && q_floor.is_some_and(|f| j > f);
            out.cands.insert(
                j,
                cand.into_iter().filter(|e| Some(e.0) != exclude).collect(),
            );
            if others.is_empty() && !excluded_alive {
                break;
            }
            j -= 1;
            let s = self.scale(j);
            if others.values().any(|&d| d <= s) {
                out.lowest_covered = j;
            }
            out.near.insert(j, others);
            frontier = next;
        }
        out
    }

    /// Adds a point. Its id and its coordinates must both be new to the net.
    pub fn insert(&mut self, point: PointRecord) -> Result<(), NetError> {
        let id = point.id;
        if self.nodes.contains_key(&id) {
            return Err(NetError::DuplicateId(id));
        }
        match self.dim {
            Some(expected) if expected != point.dim() => {
                return Err(NetError::Dimension {
                    id,
                    expected,
                    got: point.dim(),
                });
            }
            _ => self.dim = Some(point.dim()),
        }
        if self.nodes.is_empty() {
            self.nodes.insert(id, Node::new(point, Top::Root));
            self.root = Some(id);
            self.recount();
            return Ok(());
        }
        let list_psi = (self.config.mode == Mode::List).then_some(self.config.psi);
        let descent = self.descend(point.coords(), None, self.insert_gamma(), list_psi);
        if let Some(existing) = descent.duplicate {
            return Err(NetError::DuplicatePoint { id, existing });
        }
        let top = descent.lowest_covered - 1;
        self.nodes.insert(id, Node::new(point, Top::Level(top)));
        self.by_top.entry(top).or_default().insert(id);
        match self.config.mode {
            Mode::List => self.link_inserted_list(id, top, &descent),
            Mode::Tree => self.link_inserted_tree(id, top, &descent),
        }
        self.recount();
        Ok(())
    }

    fn link_inserted_list(&mut self, q: PointId, top: ScaleIndex, descent: &Descent) {
        let psi = self.config.psi;
        let mut touched: BTreeSet<PointId> = BTreeSet::new();
        // q's own lists
        for (&j, cand) in descent.cands.range(..=top) {
            let r = psi * self.scale(j);
            let mut members = vec![(q, 0.0)];
            members.extend(cand.iter().copied().filter(|&(_, d)| d <= r));
            for &(z, d) in &members {
                self.nodes
                    .get_mut(&z)
                    .expect("list member exists")
                    .heaps
                    .entry(j - 1)
                    .or_default()
                    .push(q, d);
            }
            self.node_mut(q).lists.insert(j, members);
        }
        // q joins L_{y,j} for centers y one level up
        for (&j, level) in descent.near.range(..=top + 1) {
            let r = psi * self.scale(j);
            for (&y, &d) in level {
                if d <= r {
                    self.list_add(y, j, q, d);
                    touched.insert(y);
                }
            }
        }
        touched.insert(q);
        touched.extend(self.root);
        for x in touched {
            self.normalize_list(x);
        }
    }

    fn link_inserted_tree(&mut self, q: PointId, top: ScaleIndex, descent: &Descent) {
        let s = self.scale(top + 1);
        let parent = descent
            .near
            .get(&(top + 1))
            .into_iter()
            .flatten()
            .filter(|&(_, &d)| d <= s)
            .map(|(&y, &d)| (y, d))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("the covering level contains a cover");
        self.attach_child(q, top, parent);
    }

    fn attach_child(&mut self, x: PointId, top: ScaleIndex, (p, d): (PointId, f64)) {
        self.node_mut(x).parent = Some((p, d));
        self.node_mut(p)
            .children
            .entry(top)
            .or_default()
            .push((x, d));
    }

    /// Removes a point. Unknown ids are ignored with a warning and report `false`.
    pub fn delete(&mut self, id: PointId) -> Result<bool, NetError> {
        if !self.nodes.contains_key(&id) {
            log::warn!("delete of unknown point {id} ignored");
            return Ok(false);
        }
        match self.nodes.len() {
            1 => {
                self.nodes.clear();
                self.by_top.clear();
                self.root = None;
                self.recount();
                return Ok(true);
            }
            2 => {
                self.nodes.remove(&id);
                let last = *self.nodes.keys().next().expect("one point left");
                self.reset_single(last);
                return Ok(true);
            }
            _ => {}
        }
        let point = self.nodes[&id].point.clone();
        let descent = self.descend(point.coords(), Some(id), self.delete_gamma(), None);
        let mut near = descent.near;
        let q_top = self.nodes[&id].top;

        // points whose top sits right below a level where q may be their only cover
        let mut pending: BTreeMap<ScaleIndex, BTreeSet<PointId>> = BTreeMap::new();
        let mut dq: HashMap<PointId, f64> = HashMap::default();
        let mut touched: BTreeSet<PointId> = BTreeSet::new();
        match self.config.mode {
            Mode::List => {
                let node = &self.nodes[&id];
                for (&j, list) in &node.lists {
                    let s = self.scale(j);
                    for &(z, d) in list {
                        if z != id && d <= s && self.nodes[&z].top == Top::Level(j - 1) {
                            pending.entry(j).or_default().insert(z);
                            dq.insert(z, d);
                        }
                    }
                }
                self.detach_list(id, &mut touched);
            }
            Mode::Tree => {
                let children = std::mem::take(&mut self.node_mut(id).children);
                for (l, kids) in children {
                    for (z, d) in kids {
                        self.node_mut(z).parent = None;
                        pending.entry(l + 1).or_default().insert(z);
                        dq.insert(z, d);
                    }
                }
                if let Some((p, _)) = self.nodes[&id].parent {
                    let Top::Level(t) = q_top else {
                        unreachable!("the root has no parent")
                    };
                    self.remove_child(p, t, id);
                }
            }
        }
        self.nodes.remove(&id);
        match q_top {
            Top::Root => self.root = None,
            Top::Level(t) => self.remove_from_bucket(t, id),
        }

        let mut promoted: BTreeSet<PointId> = BTreeSet::new();
        while let Some((j, set)) = pending.pop_first() {
            if self.root.is_none() && self.true_count(j) == 0 {
                let below = self.by_top.get(&(j - 1)).map(|s| s.len()).unwrap_or(0);
                if below == 1 {
                    let x = *self.by_top[&(j - 1)].iter().next().expect("one point");
                    self.make_root(x);
                    touched.insert(x);
                    continue;
                }
            }
            let mut order: Vec<PointId> = set.into_iter().collect();
            order.sort_by(|a, b| dq[a].total_cmp(&dq[b]).then(a.cmp(b)));
            for x in order {
                if self.nodes[&x].top != Top::Level(j - 1) {
                    continue;
                }
                if self.find_cover(x, j, dq[&x], &near) {
                    continue;
                }
                self.promote(x, j, dq[&x], &mut near, &mut touched);
                promoted.insert(x);
                pending.entry(j + 1).or_default().insert(x);
            }
        }

        if self.config.mode == Mode::List {
            touched.extend(promoted);
            touched.extend(self.root);
            for x in touched {
                if self.nodes.contains_key(&x) {
                    self.normalize_list(x);
                }
            }
        }
        self.recount();
        Ok(true)
    }

    /// Removes every list and heap entry that refers to `q` from other points.
    fn detach_list(&mut self, q: PointId, touched: &mut BTreeSet<PointId>) {
        let node = self.nodes.get_mut(&q).expect("q exists");
        let heaps = std::mem::take(&mut node.heaps);
        let lists = std::mem::take(&mut node.lists);
        for (l, heap) in heaps {
            for (_, y) in heap.iter() {
                if y == q {
                    continue;
                }
                if let Some(list) = self.node_mut(y).lists.get_mut(&(l + 1)) {
                    list.retain(|e| e.0 != q);
                }
                touched.insert(y);
            }
        }
        for (j, list) in lists {
            for (z, _) in list {
                if z != q {
                    self.heap_remove(z, j - 1, q);
                }
            }
        }
    }

    /// Looks for a center at level `j` within `scale(j)` of `x`. In tree mode
    /// the nearest one becomes the parent of `x`.
    fn find_cover(
        &mut self,
        x: PointId,
        j: ScaleIndex,
        dqx: f64,
        near: &BTreeMap<ScaleIndex, Level>,
    ) -> bool {
        let s = self.scale(j);
        match self.config.mode {
            Mode::List => self.nodes[&x]
                .heaps
                .get(&(j - 1))
                .and_then(|h| h.peek())
                .is_some_and(|(d, _)| d <= s),
            Mode::Tree => {
                let prune = s * (1.0 + PRUNE_SLACK);
                let mut best: Option<(PointId, f64)> = None;
                for (&y, &dqy) in near.get(&j).into_iter().flatten() {
                    if y == x || (dqx - dqy).abs() > prune {
                        continue;
                    }
                    let d = self.dist(x, y);
                    if d <= s && best.is_none_or(|(by, bd)| (d, y) < (bd, by)) {
                        best = Some((y, d));
                    }
                }
                match best {
                    Some(parent) => {
                        self.attach_child(x, j - 1, parent);
                        true
                    }
                    None => false,
                }
            }
        }
    }

    /// Extends `near` upward so it holds every level up to `l`.
    fn extend_near(&self, near: &mut BTreeMap<ScaleIndex, Level>, l: ScaleIndex) {
        let (&top, _) = near.last_key_value().expect("descent visits a level");
        for level in top + 1..=l {
            let carried: Level = near[&(level - 1)]
                .iter()
                .filter(|(y, _)| self.nodes[y].top.reaches(level))
                .map(|(&y, &d)| (y, d))
                .collect();
            near.insert(level, carried);
        }
    }

    fn promote(
        &mut self,
        x: PointId,
        j: ScaleIndex,
        dqx: f64,
        near: &mut BTreeMap<ScaleIndex, Level>,
        touched: &mut BTreeSet<PointId>,
    ) {
        self.extend_near(near, j + 1);
        self.remove_from_bucket(j - 1, x);
        self.by_top.entry(j).or_default().insert(x);
        self.node_mut(x).top = Top::Level(j);
        near.entry(j).or_default().insert(x, dqx);
        if self.config.mode == Mode::Tree {
            return;
        }
        let psi = self.config.psi;
        // L_{x,j} from the centers one level down
        let r = psi * self.scale(j);
        let mut members = vec![(x, 0.0)];
        for (&z, &dqz) in near.get(&(j - 1)).into_iter().flatten() {
            if z == x || (dqx - dqz).abs() > r * (1.0 + PRUNE_SLACK) {
                continue;
            }
            let d = self.dist(x, z);
            if d <= r {
                members.push((z, d));
            }
        }
        for &(z, d) in &members {
            self.node_mut(z).heaps.entry(j - 1).or_default().push(x, d);
        }
        self.node_mut(x).lists.insert(j, members);
        // x joins the lists of centers one level up
        let r = psi * self.scale(j + 1);
        let above: Vec<(PointId, f64)> = near[&(j + 1)].iter().map(|(&y, &d)| (y, d)).collect();
        for (y, dqy) in above {
            if y == x || (dqx - dqy).abs() > r * (1.0 + PRUNE_SLACK) {
                continue;
            }
            let d = self.dist(x, y);
            if d <= r {
                self.list_add(y, j + 1, x, d);
                touched.insert(y);
            }
        }
        touched.insert(x);
    }

    fn make_root(&mut self, x: PointId) {
        let Top::Level(t) = self.nodes[&x].top else {
            return;
        };
        self.remove_from_bucket(t, x);
        let node = self.node_mut(x);
        node.top = Top::Root;
        node.parent = None;
        self.root = Some(x);
    }

    fn reset_single(&mut self, x: PointId) {
        self.by_top.clear();
        let node = self.node_mut(x);
        node.top = Top::Root;
        node.clear_links();
        self.root = Some(x);
        self.recount();
    }

    fn remove_from_bucket(&mut self, t: ScaleIndex, x: PointId) {
        if let Some(set) = self.by_top.get_mut(&t) {
            set.remove(&x);
            if set.is_empty() {
                self.by_top.remove(&t);
            }
        }
    }

    fn remove_child(&mut self, p: PointId, level: ScaleIndex, x: PointId) {
        let node = self.node_mut(p);
        if let Some(kids) = node.children.get_mut(&level) {
            kids.retain(|e| e.0 != x);
            if kids.is_empty() {
                node.children.remove(&level);
            }
        }
    }

    pub(super) fn node_mut(&mut self, id: PointId) -> &mut Node {
        self.nodes.get_mut(&id).expect("node exists")
    }

    /// Materializes `L_{x,l}` as the singleton `{x}` if it is not stored yet.
    fn ensure_list(&mut self, x: PointId, l: ScaleIndex) {
        let node = self.node_mut(x);
        if node.lists.contains_key(&l) {
            return;
        }
        node.lists.insert(l, vec![(x, 0.0)]);
        node.heaps.entry(l - 1).or_default().push(x, 0.0);
    }

    fn list_add(&mut self, y: PointId, l: ScaleIndex, z: PointId, d: f64) {
        self.ensure_list(y, l);
        self.node_mut(y)
            .lists
            .get_mut(&l)
            .expect("ensured")
            .push((z, d));
        self.node_mut(z).heaps.entry(l - 1).or_default().push(y, d);
    }

    fn heap_remove(&mut self, z: PointId, l: ScaleIndex, y: PointId) {
        let node = self.node_mut(z);
        if let Some(h) = node.heaps.get_mut(&l) {
            h.remove(y);
            if h.is_empty() {
                node.heaps.remove(&l);
            }
        }
    }

    fn drop_list(&mut self, x: PointId, l: ScaleIndex) {
        if let Some(list) = self.node_mut(x).lists.remove(&l) {
            for (z, _) in list {
                self.heap_remove(z, l - 1, x);
            }
        }
    }

    /// Restores the stored list range of `x` to exactly `[β_x, hi_x]`.
    fn normalize_list(&mut self, x: PointId) {
        if self.nodes.len() < 2 {
            return;
        }
        let hi = self.hi_of(x);
        let above: Vec<ScaleIndex> = self.nodes[&x]
            .lists
            .range(hi + 1..)
            .map(|(&l, _)| l)
            .collect();
        for l in above {
            debug_assert_eq!(
                self.nodes[&x].lists[&l].len(),
                1,
                "only singletons above hi"
            );
            self.drop_list(x, l);
        }
        let lo = self.nodes[&x]
            .lists
            .keys()
            .next()
            .copied()
            .unwrap_or(hi)
            .min(hi);
        for l in lo..=hi {
            self.ensure_list(x, l);
        }
        let beta = self.nodes[&x]
            .lists
            .iter()
            .find(|(_, v)| v.len() > 1)
            .map(|(&l, _)| l - 1)
            .unwrap_or(hi);
        for l in beta..lo {
            self.ensure_list(x, l);
        }
        let below: Vec<ScaleIndex> = self.nodes[&x]
            .lists
            .range(..beta)
            .map(|(&l, _)| l)
            .collect();
        for l in below {
            self.drop_list(x, l);
        }
        self.node_mut(x).beta = beta;
    }

    /// Recomputes the counters `c_i` over `[r_min, r_max]`.
    pub(super) fn recount(&mut self) {
        self.counters.clear();
        if self.nodes.len() < 2 {
            if let Some(root) = self.root {
                self.node_mut(root).clear_links();
            }
            return;
        }
        let (lo, hi) = self.bounds().expect("nonempty");
        let mut c = 1;
        for i in (lo..=hi).rev() {
            c += self.by_top.get(&i).map(|s| s.len()).unwrap_or(0);
            self.counters.insert(i, c);
        }
    }
}
