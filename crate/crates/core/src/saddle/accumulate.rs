use super::DualWeights;
use crate::numeric::{DenseVector, Scalar};

/// How running averages of the iterates are maintained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    /// Add the whole iterate every iteration.
    Dense,
    /// Only touch coordinates that change; settle the rest on read.
    #[default]
    Lazy,
}

/// Running sum `Σ_t x_t` for the box block.
#[derive(Debug, Clone)]
pub struct BoxAverager<T> {
    mode: Averaging,
    sums: Vec<T>,
    // last iteration whose contribution is already in `sums`
    last: Vec<u64>,
}

impl<T: Scalar> BoxAverager<T> {
    pub fn new(mode: Averaging, n: usize) -> Self {
        Self {
            mode,
            sums: vec![T::zero(); n],
            last: vec![0; n],
        }
    }

    /// Must be called at iteration `t` before coordinate `j` changes from `old`.
    #[inline]
    pub fn before_change(&mut self, j: usize, old: T, t: u64) {
        if self.mode == Averaging::Lazy {
            let held = t - 1 - self.last[j];
            if held > 0 {
                self.sums[j] += old * T::from_u64(held).unwrap();
            }
            self.last[j] = t - 1;
        }
    }

    /// Must be called once the iterate of iteration `t` is final.
    #[inline]
    pub fn end_iteration(&mut self, x: &[T]) {
        if self.mode == Averaging::Dense {
            for (s, v) in self.sums.iter_mut().zip(x) {
                *s += *v;
            }
        }
    }

    /// `(1/t) Σ_{τ<=t} x_τ` given the current iterate `x = x_t`.
    pub fn average(&self, x: &[T], t: u64) -> DenseVector<T> {
        let tt = T::from_u64(t.max(1)).unwrap();
        match self.mode {
            Averaging::Dense => self.sums.iter().map(|s| *s / tt).collect(),
            Averaging::Lazy => self
                .sums
                .iter()
                .zip(x)
                .zip(&self.last)
                .map(|((s, v), l)| (*s + *v * T::from_u64(t - l).unwrap()) / tt)
                .collect(),
        }
    }
}

// Compensated running sum (value = hi + lo).
#[derive(Debug, Clone, Copy, Default)]
struct Compensated<T> {
    hi: T,
    lo: T,
}

impl<T: Scalar> Compensated<T> {
    #[inline]
    fn add(&mut self, x: T) {
        let s = self.hi + x;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (x - bb);
        self.hi = s;
        self.lo += err;
    }

    #[inline]
    fn since(&self, earlier: &Self) -> T {
        (self.hi - earlier.hi) + (self.lo - earlier.lo)
    }
}

/// Running sum `Σ_t y_t` for the simplex block, where `y_t = w_t / S_t`.
///
/// In lazy mode a weight untouched since a flush at prefix value `H_τ` contributes
/// `w (H_t − H_τ)` with `H_t = Σ_{τ<=t} 1/S_τ`.
#[derive(Debug, Clone)]
pub struct SimplexAverager<T> {
    mode: Averaging,
    sums: Vec<T>,
    snap: Vec<Compensated<T>>,
    h: Compensated<T>,
}

impl<T: Scalar> SimplexAverager<T> {
    pub fn new(mode: Averaging, m: usize) -> Self {
        let zero = Compensated {
            hi: T::zero(),
            lo: T::zero(),
        };
        Self {
            mode,
            sums: vec![T::zero(); m],
            snap: vec![zero; m],
            h: zero,
        }
    }

    /// Must be called before weight `k` changes from `old` during the current iteration.
    #[inline]
    pub fn before_change(&mut self, k: usize, old: T) {
        if self.mode == Averaging::Lazy {
            self.sums[k] += old * self.h.since(&self.snap[k]);
            self.snap[k] = self.h;
        }
    }

    /// Settles every coordinate, e.g. before all weights are rescaled, and restarts the prefix
    /// sum at zero. Increments `1/S` far below the resolution of `H` would otherwise be lost once
    /// the total weight has drifted by many orders of magnitude.
    pub fn flush_all(&mut self, weights: &[T]) {
        if self.mode == Averaging::Lazy {
            for (k, w) in weights.iter().enumerate() {
                self.before_change(k, *w);
            }
            let zero = Compensated {
                hi: T::zero(),
                lo: T::zero(),
            };
            self.h = zero;
            self.snap.iter_mut().for_each(|s| *s = zero);
        }
    }

    /// Must be called once the weights of the current iteration are final.
    #[inline]
    pub fn end_iteration(&mut self, y: &DualWeights<T>) {
        let total = y.total();
        match self.mode {
            Averaging::Lazy => self.h.add(T::one() / total),
            Averaging::Dense => {
                for (s, w) in self.sums.iter_mut().zip(y.weights()) {
                    *s += *w / total;
                }
            }
        }
    }

    /// `(1/t) Σ_{τ<=t} y_τ` given the current weights.
    pub fn average(&self, y: &DualWeights<T>, t: u64) -> DenseVector<T> {
        let tt = T::from_u64(t.max(1)).unwrap();
        match self.mode {
            Averaging::Dense => self.sums.iter().map(|s| *s / tt).collect(),
            Averaging::Lazy => self
                .sums
                .iter()
                .zip(y.weights())
                .zip(&self.snap)
                .map(|((s, w), snap)| (*s + *w * self.h.since(snap)) / tt)
                .collect(),
        }
    }
}
