use crate::error::Result;
use crate::numeric::{DenseVector, Scalar};
use crate::sampling::{RngState, SamplerKind, WeightSampler};

/// Norm in which an estimator's second moment is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `‖g‖₂²`
    Euclidean,
    /// `Σ y_i g_i²` at the current simplex iterate
    LocalSimplex,
    /// `Σ s_k g_k²` at the current capped-orthant iterate
    LocalCapped,
}

/// Declared bounds of a stochastic gradient: max entry `c`, second moment `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorBounds<T> {
    pub c: T,
    pub v: T,
    pub norm: NormKind,
}

/// Sparse stochastic gradient: a few `(index, value)` pairs plus a constant added to every coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGradient<T> {
    entries: Vec<(usize, T)>,
    shift: T,
}

impl<T: Scalar> Default for SparseGradient<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> SparseGradient<T> {
    pub fn new() -> Self {
        Self {
            entries: Vec::with_capacity(4),
            shift: T::zero(),
        }
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.shift = T::zero();
    }

    /// Adds `value` at `index`, merging with an existing entry so indices stay distinct.
    #[inline]
    pub fn push(&mut self, index: usize, value: T) {
        for e in self.entries.iter_mut() {
            if e.0 == index {
                e.1 += value;
                return;
            }
        }
        self.entries.push((index, value));
    }

    pub fn set_shift(&mut self, shift: T) {
        self.shift = shift;
    }

    pub fn shift(&self) -> T {
        self.shift
    }

    pub fn entries(&self) -> &[(usize, T)] {
        &self.entries
    }

    pub fn is_finite(&self) -> bool {
        self.shift.is_finite() && self.entries.iter().all(|(_, v)| v.is_finite())
    }

    pub fn to_dense(&self, n: usize) -> DenseVector<T> {
        let mut out = DenseVector::filled(n, self.shift);
        for (i, v) in &self.entries {
            out[*i] += *v;
        }
        out
    }

    /// Largest absolute coordinate of the dense gradient of dimension `n`.
    pub fn max_abs(&self, n: usize) -> T {
        let mut m = if self.entries.len() < n {
            self.shift.abs()
        } else {
            T::zero()
        };
        for (_, v) in &self.entries {
            m = m.max((*v + self.shift).abs());
        }
        m
    }
}

/// Unnormalized simplex weights with proportional sampling.
#[derive(Debug, Clone)]
pub struct DualWeights<T> {
    sampler: WeightSampler<T>,
}

impl<T: Scalar> DualWeights<T> {
    pub fn new(kind: SamplerKind, weights: &[T]) -> Result<Self> {
        Ok(Self {
            sampler: WeightSampler::new(kind, weights)?,
        })
    }

    pub fn uniform(kind: SamplerKind, m: usize) -> Result<Self> {
        Self::new(kind, &vec![T::one(); m])
    }

    pub fn dim(&self) -> usize {
        self.sampler.len()
    }

    #[inline]
    pub fn total(&self) -> T {
        self.sampler.total()
    }

    #[inline]
    pub fn weight(&self, k: usize) -> T {
        self.sampler.weight(k)
    }

    pub fn weights(&self) -> &[T] {
        self.sampler.weights()
    }

    /// Normalized probability of coordinate `k`.
    #[inline]
    pub fn prob(&self, k: usize) -> T {
        self.sampler.weight(k) / self.sampler.total()
    }

    pub fn probabilities(&self) -> DenseVector<T> {
        let total = self.total();
        self.weights().iter().map(|w| *w / total).collect()
    }

    /// Draws `k` with probability `prob(k)`.
    #[inline]
    pub fn sample(&self, rng: &mut RngState) -> usize {
        self.sampler.sample(rng).expect("dual weights keep a positive total")
    }

    #[inline]
    pub(crate) fn set(&mut self, k: usize, w: T) {
        self.sampler.set(k, w);
    }

    pub(crate) fn reset(&mut self, weights: &[T]) {
        self.sampler.reset(weights);
    }
}

/// Read-only view of the current iterate handed to estimators.
#[derive(Debug, Clone, Copy)]
pub struct IterateView<'a, T> {
    pub x: &'a [T],
    /// Empty when the problem has no slack block.
    pub s: &'a [T],
    pub y: &'a DualWeights<T>,
}

/// Sampling procedure that returns an unbiased gradient with declared bounds.
pub trait BoundedEstimator<T: Scalar> {
    fn bounds(&self) -> EstimatorBounds<T>;

    /// Writes one stochastic gradient into `out` (which arrives cleared) and
    /// returns how many oracle samples the draw consumed.
    fn draw(&self, it: &IterateView<'_, T>, rng: &mut RngState, out: &mut SparseGradient<T>) -> u64;
}
