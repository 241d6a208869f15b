use super::RngState;
use crate::error::{Error, Result};
use crate::numeric::Scalar;

const REBUILD_EVERY: u64 = 1 << 20;
const DRIFT_TOL: f64 = 1e-9;

fn check_weight<T: Scalar>(w: T) -> Result<()> {
    if w.is_finite() && w >= T::zero() {
        Ok(())
    } else {
        Err(Error::Domain(format!("weight must be finite and nonnegative, got {w}")))
    }
}

/// Complete binary tree of partial sums supporting O(log n) updates and proportional draws.
#[derive(Debug, Clone)]
pub struct SumTree<T> {
    n: usize,
    cap: usize,
    nodes: Vec<T>,
    updates: u64,
}

impl<T: Scalar> SumTree<T> {
    pub fn new(weights: &[T]) -> Result<Self> {
        for w in weights {
            check_weight(*w)?;
        }
        let n = weights.len();
        let cap = n.max(1).next_power_of_two();
        let mut nodes = vec![T::zero(); 2 * cap];
        nodes[cap..cap + n].copy_from_slice(weights);
        let mut tree = Self {
            n,
            cap,
            nodes,
            updates: 0,
        };
        tree.rebuild();
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn capacity(&self) -> usize {
        self.cap
    }

    #[inline]
    pub fn total(&self) -> T {
        self.nodes[1]
    }

    #[inline]
    pub fn weight(&self, i: usize) -> T {
        self.nodes[self.cap + i]
    }

    pub fn weights(&self) -> &[T] {
        &self.nodes[self.cap..self.cap + self.n]
    }

    /// Recomputes every internal node from the leaves.
    pub fn rebuild(&mut self) {
        for idx in (1..self.cap).rev() {
            self.nodes[idx] = self.nodes[2 * idx] + self.nodes[2 * idx + 1];
        }
        self.updates = 0;
    }

    /// Largest relative mismatch between an internal node and the sum of its children.
    pub fn max_drift(&self) -> T {
        (1..self.cap)
            .map(|idx| {
                let node = self.nodes[idx];
                (node - (self.nodes[2 * idx] + self.nodes[2 * idx + 1])).abs() / (T::one() + node.abs())
            })
            .fold(T::zero(), T::max)
    }

    pub fn update(&mut self, i: usize, w: T) -> Result<()> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, len: self.n });
        }
        check_weight(w)?;
        self.set(i, w);
        Ok(())
    }

    /// Unchecked update used on the solver hot path.
    #[inline]
    pub(crate) fn set(&mut self, i: usize, w: T) {
        let mut idx = self.cap + i;
        self.nodes[idx] = w;
        while idx > 1 {
            idx >>= 1;
            self.nodes[idx] = self.nodes[2 * idx] + self.nodes[2 * idx + 1];
        }
        self.updates += 1;
        if self.updates >= REBUILD_EVERY {
            if self.max_drift() > T::of(DRIFT_TOL) {
                log::debug!("sum tree drift above tolerance, rebuilding");
            }
            self.rebuild();
        }
    }

    pub fn sample(&self, rng: &mut RngState) -> Result<usize> {
        self.sample_with(rng.uniform())
    }

    /// Cumulative walk for a uniform `u ∈ [0,1)`: returns the leaf whose interval contains `u·total`.
    pub fn sample_with(&self, u: f64) -> Result<usize> {
        let total = self.total();
        if !(total > T::zero()) {
            return Err(Error::EmptyDistribution);
        }
        Ok(self.descend(T::of(u) * total))
    }

    #[inline]
    fn descend(&self, mut target: T) -> usize {
        let mut idx = 1;
        while idx < self.cap {
            let left = 2 * idx;
            if target < self.nodes[left] {
                idx = left;
            } else {
                target -= self.nodes[left];
                idx = left + 1;
            }
        }
        let leaf = idx - self.cap;
        if leaf < self.n && self.nodes[idx] > T::zero() {
            leaf
        } else {
            self.nearest_positive(leaf)
        }
    }

    // rounding can push the walk onto an empty leaf; fall back to the closest positive one
    fn nearest_positive(&self, leaf: usize) -> usize {
        let w = self.weights();
        let start = leaf.min(self.n - 1);
        (0..=start)
            .rev()
            .find(|&i| w[i] > T::zero())
            .or_else(|| (start..self.n).find(|&i| w[i] > T::zero()))
            .expect("positive total implies a positive leaf")
    }
}

/// Reference sampler: linear cumulative scan over the weights.
#[derive(Debug, Clone)]
pub struct LinearScan<T> {
    weights: Vec<T>,
    total: T,
    updates: u64,
}

impl<T: Scalar> LinearScan<T> {
    pub fn new(weights: &[T]) -> Result<Self> {
        for w in weights {
            check_weight(*w)?;
        }
        Ok(Self {
            weights: weights.to_vec(),
            total: weights.iter().copied().sum(),
            updates: 0,
        })
    }

    pub fn total(&self) -> T {
        self.total
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights[i]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub(crate) fn set(&mut self, i: usize, w: T) {
        self.total += w - self.weights[i];
        self.weights[i] = w;
        self.updates += 1;
        if self.updates % 1024 == 0 {
            self.total = self.weights.iter().copied().sum();
        }
    }

    pub fn sample_with(&self, u: f64) -> Result<usize> {
        if !(self.total > T::zero()) {
            return Err(Error::EmptyDistribution);
        }
        let target = T::of(u) * self.total;
        let mut acc = T::zero();
        let mut last_positive = None;
        for (i, w) in self.weights.iter().enumerate() {
            if *w > T::zero() {
                acc += *w;
                last_positive = Some(i);
                if target < acc {
                    return Ok(i);
                }
            }
        }
        last_positive.ok_or(Error::EmptyDistribution)
    }
}

/// Which weighted sampler backs the dual block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerKind {
    #[default]
    SumTree,
    LinearScan,
}

/// Dynamic weights with proportional sampling, backed by either sampler.
#[derive(Debug, Clone)]
pub enum WeightSampler<T> {
    Tree(SumTree<T>),
    Linear(LinearScan<T>),
}

impl<T: Scalar> WeightSampler<T> {
    pub fn new(kind: SamplerKind, weights: &[T]) -> Result<Self> {
        Ok(match kind {
            SamplerKind::SumTree => Self::Tree(SumTree::new(weights)?),
            SamplerKind::LinearScan => Self::Linear(LinearScan::new(weights)?),
        })
    }

    #[inline]
    pub fn total(&self) -> T {
        match self {
            Self::Tree(t) => t.total(),
            Self::Linear(l) => l.total(),
        }
    }

    #[inline]
    pub fn weight(&self, i: usize) -> T {
        match self {
            Self::Tree(t) => t.weight(i),
            Self::Linear(l) => l.weight(i),
        }
    }

    pub fn weights(&self) -> &[T] {
        match self {
            Self::Tree(t) => t.weights(),
            Self::Linear(l) => l.weights(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, w: T) {
        match self {
            Self::Tree(t) => t.set(i, w),
            Self::Linear(l) => l.set(i, w),
        }
    }

    /// Replaces all weights at once.
    pub(crate) fn reset(&mut self, weights: &[T]) {
        match self {
            Self::Tree(t) => {
                t.nodes[t.cap..t.cap + t.n].copy_from_slice(weights);
                t.rebuild();
            }
            Self::Linear(l) => {
                l.weights.copy_from_slice(weights);
                l.total = weights.iter().copied().sum();
            }
        }
    }

    #[inline]
    pub fn sample(&self, rng: &mut RngState) -> Result<usize> {
        self.sample_with(rng.uniform())
    }

    #[inline]
    pub fn sample_with(&self, u: f64) -> Result<usize> {
        match self {
            Self::Tree(t) => t.sample_with(u),
            Self::Linear(l) => l.sample_with(u),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Stream;

    #[test]
    fn update_changes_total() {
        let mut t = SumTree::new(&[1.0, 3.0]).unwrap();
        t.update(0, 3.0).unwrap();
        assert_eq!(t.total(), 6.0);
        assert!(matches!(t.update(2, 1.0), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn zero_weight_never_drawn() {
        let mut t = SumTree::new(&[1.0, 1.0, 1.0]).unwrap();
        t.update(1, 0.0).unwrap();
        let mut rng = RngState::for_role(4, Stream::Test);
        assert!((0..100_000).all(|_| t.sample(&mut rng).unwrap() != 1));
    }

    #[test]
    fn cumulative_walk_examples() {
        let t = SumTree::new(&[1.0, 3.0]).unwrap();
        assert_eq!(t.sample_with(0.5).unwrap(), 1);
        let t = SumTree::new(&[1.0, 0.0, 0.0]).unwrap();
        for u in [0.0, 0.3, 0.999_999] {
            assert_eq!(t.sample_with(u).unwrap(), 0);
        }
        let t = SumTree::new(&[0.0, 0.0]).unwrap();
        assert!(matches!(t.sample_with(0.5), Err(Error::EmptyDistribution)));
    }

    #[test]
    fn empirical_frequencies() {
        let t = SumTree::new(&[2.0, 1.0, 1.0]).unwrap();
        let mut rng = RngState::for_role(5, Stream::Test);
        let n = 1_000_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[t.sample(&mut rng).unwrap()] += 1;
        }
        for (c, p) in counts.iter().zip([0.5, 0.25, 0.25]) {
            assert!((*c as f64 / n as f64 - p).abs() < 0.002);
        }
    }

    #[test]
    fn replayed_updates_match_rebuild() {
        let mut rng = RngState::for_role(6, Stream::Test);
        let n = 37;
        let mut t = SumTree::new(&vec![1.0; n]).unwrap();
        let mut scan = LinearScan::new(&vec![1.0; n]).unwrap();
        for _ in 0..10_000 {
            let i = rng.below(n);
            let w = rng.uniform() * 10.0;
            t.update(i, w).unwrap();
            scan.set(i, w);
        }
        let fresh = SumTree::new(t.weights()).unwrap();
        assert!((t.total() - fresh.total()).abs() < 1e-9);
        assert!((scan.total() - fresh.total()).abs() < 1e-9);
        assert!(t.max_drift() < 1e-9);
    }
}
