//! Binary min-heap over `(distance, PointId)` with a position index, so that
//! arbitrary members can be removed in logarithmic time.

use rustc_hash::FxHashMap as HashMap;
use std::cmp::Ordering;

use crate::metric::PointId;

#[derive(Debug, Clone, Default)]
pub struct IndexedMinHeap {
    items: Vec<(f64, PointId)>,
    pos: HashMap<PointId, usize>,
}

#[inline]
fn less(a: &(f64, PointId), b: &(f64, PointId)) -> bool {
    match a.0.partial_cmp(&b.0) {
        Some(Ordering::Less) => true,
        Some(Ordering::Equal) => a.1 < b.1,
        _ => false,
    }
}

impl IndexedMinHeap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, id: PointId) -> bool {
        self.pos.contains_key(&id)
    }

    /// Smallest `(distance, id)`; ties on distance go to the smaller id.
    pub fn peek(&self) -> Option<(f64, PointId)> {
        self.items.first().copied()
    }

    /// Inserts `id`, or updates its key if already present.
    pub fn push(&mut self, id: PointId, dist: f64) {
        if let Some(&i) = self.pos.get(&id) {
            self.items[i].0 = dist;
            self.sift_up(i);
            let i = self.pos[&id];
            self.sift_down(i);
            return;
        }
        self.items.push((dist, id));
        let i = self.items.len() - 1;
        self.pos.insert(id, i);
        self.sift_up(i);
    }

    pub fn remove(&mut self, id: PointId) -> Option<f64> {
        let i = self.pos.remove(&id)?;
        let last = self.items.len() - 1;
        let removed = self.items.swap_remove(i);
        if i != last {
            let moved = self.items[i].1;
            self.pos.insert(moved, i);
            self.sift_up(i);
            let j = self.pos[&moved];
            self.sift_down(j);
        }
        Some(removed.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, PointId)> + '_ {
        self.items.iter().copied()
    }

    /// Whether the array satisfies the heap order and the index is consistent.
    pub fn is_well_formed(&self) -> bool {
        if self.pos.len() != self.items.len() {
            return false;
        }
        for (i, item) in self.items.iter().enumerate() {
            if self.pos.get(&item.1) != Some(&i) {
                return false;
            }
            if i > 0 && less(item, &self.items[(i - 1) / 2]) {
                return false;
            }
        }
        true
    }

    fn sift_up(&mut self, mut i: usize) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if !less(&self.items[i], &self.items[parent]) {
                break;
            }
            self.swap(i, parent);
            i = parent;
        }
    }

    fn sift_down(&mut self, mut i: usize) {
        let n = self.items.len();
        loop {
            let l = 2 * i + 1;
            let r = l + 1;
            let mut smallest = i;
            if l < n && less(&self.items[l], &self.items[smallest]) {
                smallest = l;
            }
            if r < n && less(&self.items[r], &self.items[smallest]) {
                smallest = r;
            }
            if smallest == i {
                break;
            }
            self.swap(i, smallest);
            i = smallest;
        }
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.items.swap(a, b);
        self.pos.insert(self.items[a].1, a);
        self.pos.insert(self.items[b].1, b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn min_with_id_tiebreak() {
        let mut h = IndexedMinHeap::new();
        h.push(PointId(5), 2.0);
        h.push(PointId(3), 2.0);
        h.push(PointId(9), 7.0);
        assert_eq!(h.peek(), Some((2.0, PointId(3))));
        assert_eq!(h.remove(PointId(3)), Some(2.0));
        assert_eq!(h.peek(), Some((2.0, PointId(5))));
        assert_eq!(h.remove(PointId(3)), None);
        assert!(h.is_well_formed());
    }

    proptest! {
        #[test]
        fn matches_sorted_model(ops in prop::collection::vec((0u64..20, 0u32..50, any::<bool>()), 0..200)) {
            let mut h = IndexedMinHeap::new();
            let mut model: std::collections::BTreeMap<u64, f64> = Default::default();
            for (id, d, insert) in ops {
                if insert {
                    h.push(PointId(id), d as f64);
                    model.insert(id, d as f64);
                } else {
                    prop_assert_eq!(h.remove(PointId(id)), model.remove(&id));
                }
                prop_assert!(h.is_well_formed());
                let expect = model
                    .iter()
                    .map(|(&i, &d)| (d, PointId(i)))
                    .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                prop_assert_eq!(h.peek(), expect);
                prop_assert_eq!(h.len(), model.len());
            }
        }
    }
}
