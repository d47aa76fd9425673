/// Fenwick tree over nonnegative integer weights with prefix-sum search.
#[derive(Debug, Clone)]
pub(crate) struct SumTree {
    tree: Vec<u64>,
    weights: Vec<u64>,
    total: u64,
}

impl SumTree {
    pub fn new(len: usize) -> Self {
        SumTree { tree: vec![0; len + 1], weights: vec![0; len], total: 0 }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn weight(&self, i: usize) -> u64 {
        self.weights[i]
    }

    pub fn set(&mut self, i: usize, w: u64) {
        let old = self.weights[i];
        if old == w {
            return;
        }
        self.weights[i] = w;
        self.total = self.total - old + w;
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] = self.tree[k] - old + w;
            k += k & k.wrapping_neg();
        }
    }

    /// Index `i` such that `prefix(i) <= target < prefix(i + 1)`.
    /// Requires `target < total`.
    pub fn find(&self, mut target: u64) -> usize {
        debug_assert!(target < self.total);
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}
