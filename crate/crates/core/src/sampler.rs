//! Dynamic weighted sampling over agent indices.
//!
//! A complete binary sum tree: leaves hold per-agent weights, every inner node
//! holds the sum of its two children. Updates rewrite the path to the root from
//! the children, so internal sums never accumulate drift from repeated
//! add/subtract cycles.

use rand::Rng;

#[derive(Debug, Clone)]
pub(crate) struct SumTree {
    /// Number of leaves (power of two).
    cap: usize,
    /// Number of leaves in use.
    len: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub(crate) fn new() -> Self {
        Self {
            cap: 1,
            len: 0,
            nodes: vec![0.0; 2],
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    pub(crate) fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub(crate) fn get(&self, i: usize) -> f64 {
        self.nodes[self.cap + i]
    }

    pub(crate) fn push(&mut self, weight: f64) {
        if self.len == self.cap {
            self.grow();
        }
        self.len += 1;
        self.set(self.len - 1, weight);
    }

    pub(crate) fn set(&mut self, i: usize, weight: f64) {
        debug_assert!(i < self.len);
        debug_assert!(weight >= 0.0 && weight.is_finite());
        let mut node = self.cap + i;
        self.nodes[node] = weight;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Draws a leaf index with probability proportional to its weight.
    /// Returns `None` when the total weight is zero.
    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        let total = self.total();
        if total <= 0.0 {
            return None;
        }
        let mut u = rng.gen::<f64>() * total;
        let mut node = 1;
        while node < self.cap {
            let left = self.nodes[2 * node];
            let right = self.nodes[2 * node + 1];
            // A node with positive sum has at least one positive child, so this
            // never walks into an all-zero subtree even when `u` rounds up.
            if u < left || right <= 0.0 {
                node *= 2;
            } else {
                u -= left;
                node = 2 * node + 1;
            }
        }
        Some(node - self.cap)
    }

    fn grow(&mut self) {
        let cap = self.cap * 2;
        let mut nodes = vec![0.0; 2 * cap];
        nodes[cap..cap + self.len].copy_from_slice(&self.nodes[self.cap..self.cap + self.len]);
        for node in (1..cap).rev() {
            nodes[node] = nodes[2 * node] + nodes[2 * node + 1];
        }
        self.cap = cap;
        self.nodes = nodes;
    }
}
