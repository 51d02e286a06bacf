//! Cumulative-weight structures for drawing attachment targets.
//!
//! Two layouts share one interface:
//!
//! * `Fenwick`: binary-indexed partial sums; `O(log n)` point updates and
//!   searches. Used when only a few weights change per step.
//! * `Dense`: a plain prefix-sum array recomputed lazily in one pass before a
//!   search. Used when `Θ(n)` weights change per step anyway.
//!
//! Searches return the first index whose cumulative weight exceeds the
//! threshold, so zero-weight entries are never selected.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Fenwick,
    Dense,
}

#[derive(Clone, Debug)]
pub struct WeightIndex {
    layout: Layout,
    weights: Vec<f64>,
    /// Fenwick partial sums (1-based, slot 0 unused) or prefix sums, by layout.
    tree: Vec<f64>,
    dirty: bool,
}

impl WeightIndex {
    pub fn new(layout: Layout, capacity: usize) -> Self {
        let mut tree = Vec::with_capacity(capacity + 1);
        if layout == Layout::Fenwick {
            tree.push(0.0);
        }
        WeightIndex {
            layout,
            weights: Vec::with_capacity(capacity),
            tree,
            dirty: false,
        }
    }

    pub fn from_weights(layout: Layout, weights: &[f64]) -> Self {
        let mut idx = WeightIndex::new(layout, weights.len());
        idx.weights.extend_from_slice(weights);
        idx.rebuild();
        idx
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Direct write access for bulk updates; the structure is rebuilt before
    /// the next query.
    pub fn weights_mut(&mut self) -> &mut [f64] {
        self.dirty = true;
        &mut self.weights
    }

    /// Replaces every weight from `new` (same length) and rebuilds; one pass
    /// for the dense layout.
    pub fn assign<I: IntoIterator<Item = f64>>(&mut self, new: I) {
        match self.layout {
            Layout::Dense => {
                self.tree.clear();
                let mut acc = 0.0;
                for (w, x) in self.weights.iter_mut().zip(new) {
                    *w = x;
                    acc += x;
                    self.tree.push(acc);
                }
                self.dirty = false;
            }
            Layout::Fenwick => {
                for (w, x) in self.weights.iter_mut().zip(new) {
                    *w = x;
                }
                self.rebuild();
            }
        }
    }

    /// Recomputes all partial sums exactly from the stored weights.
    pub fn rebuild(&mut self) {
        let n = self.weights.len();
        match self.layout {
            Layout::Fenwick => {
                self.tree.clear();
                self.tree.push(0.0);
                self.tree.extend_from_slice(&self.weights);
                for i in 1..=n {
                    let j = i + (i & i.wrapping_neg());
                    if j <= n {
                        let v = self.tree[i];
                        self.tree[j] += v;
                    }
                }
            }
            Layout::Dense => {
                self.tree.clear();
                let mut acc = 0.0;
                for &w in &self.weights {
                    acc += w;
                    self.tree.push(acc);
                }
            }
        }
        self.dirty = false;
    }

    fn refresh(&mut self) {
        if self.dirty {
            self.rebuild();
        }
    }

    /// Appends a weight for a new node.
    pub fn push(&mut self, w: f64) {
        self.weights.push(w);
        let n = self.weights.len();
        match self.layout {
            Layout::Fenwick if !self.dirty => {
                // tree[n] covers (n − lowbit(n), n]
                let low = n & n.wrapping_neg();
                let covered = self.prefix_fenwick(n - 1) - self.prefix_fenwick(n - low);
                self.tree.push(w + covered);
            }
            Layout::Dense if !self.dirty => {
                let last = self.tree.last().copied().unwrap_or(0.0);
                self.tree.push(last + w);
            }
            _ => {}
        }
    }

    pub fn set(&mut self, i: usize, w: f64) {
        let old = std::mem::replace(&mut self.weights[i], w);
        match self.layout {
            Layout::Fenwick if !self.dirty => {
                let delta = w - old;
                let mut k = i + 1;
                while k < self.tree.len() {
                    self.tree[k] += delta;
                    k += k & k.wrapping_neg();
                }
            }
            _ => self.dirty = true,
        }
    }

    fn prefix_fenwick(&self, mut k: usize) -> f64 {
        let mut s = 0.0;
        while k > 0 {
            s += self.tree[k];
            k &= k - 1;
        }
        s
    }

    /// Sum of all weights as tracked by the structure (`Z_t`).
    pub fn total(&mut self) -> f64 {
        self.refresh();
        match self.layout {
            Layout::Fenwick => self.prefix_fenwick(self.weights.len()),
            Layout::Dense => self.tree.last().copied().unwrap_or(0.0),
        }
    }

    /// Exact left-to-right sum of the stored weights.
    pub fn exact_total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Index `j` with probability `w_j / Σw`, given `u` uniform on `[0, 1)`.
    pub fn sample(&mut self, u: f64) -> Result<usize> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::AllWeightsZero { t: self.weights.len() });
        }
        let threshold = u * total;
        let n = self.weights.len();
        let found = match self.layout {
            Layout::Fenwick => {
                // largest position whose prefix sum is ≤ threshold
                let mut pos = 0;
                let mut rem = threshold;
                let mut step = if n == 0 { 0 } else { 1usize << (usize::BITS - 1 - n.leading_zeros()) };
                while step > 0 {
                    let next = pos + step;
                    if next <= n && self.tree[next] <= rem {
                        pos = next;
                        rem -= self.tree[next];
                    }
                    step >>= 1;
                }
                pos
            }
            Layout::Dense => self.tree.partition_point(|&c| c <= threshold),
        };
        // rounding can push the threshold past the last positive weight
        if found < n && self.weights[found] > 0.0 {
            return Ok(found);
        }
        let fallback = if found >= n {
            self.weights.iter().rposition(|&w| w > 0.0)
        } else {
            self.weights[found..]
                .iter()
                .position(|&w| w > 0.0)
                .map(|p| p + found)
                .or_else(|| self.weights[..found].iter().rposition(|&w| w > 0.0))
        };
        fallback.ok_or(Error::AllWeightsZero { t: n })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(weights: &[f64], u: f64) -> usize {
        let total: f64 = weights.iter().sum();
        let thr = u * total;
        let mut acc = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            acc += w;
            if acc > thr {
                return i;
            }
        }
        weights.len() - 1
    }

    #[test]
    fn single_positive_weight() {
        for layout in [Layout::Fenwick, Layout::Dense] {
            let mut idx = WeightIndex::from_weights(layout, &[0.0, 0.0, 3.0, 0.0]);
            for k in 0..100 {
                assert_eq!(idx.sample(k as f64 / 100.0).unwrap(), 2);
            }
            assert_eq!(idx.sample(0.999_999_999_999).unwrap(), 2);
        }
    }

    #[test]
    fn all_zero_is_an_error() {
        for layout in [Layout::Fenwick, Layout::Dense] {
            let mut idx = WeightIndex::from_weights(layout, &[0.0, 0.0]);
            assert!(matches!(idx.sample(0.5), Err(Error::AllWeightsZero { .. })));
        }
    }

    #[test]
    fn zero_weights_are_never_chosen() {
        for layout in [Layout::Fenwick, Layout::Dense] {
            let mut idx = WeightIndex::from_weights(layout, &[1.0, 0.0, 1.0, 0.0]);
            assert_eq!(idx.sample(0.0).unwrap(), 0);
            assert_eq!(idx.sample(0.5).unwrap(), 2);
            assert_eq!(idx.sample(0.499_999).unwrap(), 0);
        }
    }

    #[test]
    fn assign_matches_fresh_index() {
        for layout in [Layout::Fenwick, Layout::Dense] {
            let mut idx = WeightIndex::from_weights(layout, &[5.0, 1.0, 2.0]);
            idx.assign([0.0, 4.0, 1.0]);
            let mut fresh = WeightIndex::from_weights(layout, &[0.0, 4.0, 1.0]);
            assert_eq!(idx.weights(), fresh.weights());
            assert_eq!(idx.total(), 5.0);
            for k in 0..20 {
                let u = k as f64 / 20.0;
                assert_eq!(idx.sample(u).unwrap(), fresh.sample(u).unwrap());
            }
        }
    }

    proptest! {
        #[test]
        fn search_matches_linear_scan(
            weights in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..10.0], 1..200),
            updates in prop::collection::vec((0usize..200, 0.0f64..10.0), 0..50),
            extra in prop::collection::vec(0.0f64..10.0, 0..30),
            us in prop::collection::vec(0.0f64..1.0, 1..20),
        ) {
            for layout in [Layout::Fenwick, Layout::Dense] {
                let mut idx = WeightIndex::from_weights(layout, &weights);
                let mut mirror = weights.clone();
                for &(i, w) in &updates {
                    let i = i % mirror.len();
                    idx.set(i, w);
                    mirror[i] = w;
                }
                for &w in &extra {
                    idx.push(w);
                    mirror.push(w);
                }
                let exact: f64 = mirror.iter().sum();
                let tracked = idx.total();
                prop_assert!((tracked - exact).abs() <= 1e-9 * exact.max(1.0));
                if exact > 0.0 {
                    for &u in &us {
                        let got = idx.sample(u).unwrap();
                        prop_assert!(mirror[got] > 0.0);
                        // the threshold must fall inside the chosen cell, up to rounding
                        let before: f64 = mirror[..got].iter().sum();
                        let thr = u * exact;
                        let eps = 1e-9 * exact;
                        prop_assert!(before - eps <= thr && thr < before + mirror[got] + eps);
                        let want = brute(&mirror, u);
                        if got != want {
                            let edge: f64 = mirror[..=got.min(want)].iter().sum();
                            prop_assert!((thr - edge).abs() < eps, "got {got} want {want}");
                        }
                    }
                }
            }
        }
    }
}
