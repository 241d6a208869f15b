use super::Scalar;
use serde::{Deserialize, Serialize};
use std::ops::{Deref, DerefMut};

/// Owned dense vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DenseVector<T>(Vec<T>);

impl<T: Scalar> DenseVector<T> {
    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    pub fn filled(n: usize, value: T) -> Self {
        Self(vec![value; n])
    }

    /// Uniform distribution over `n` coordinates.
    pub fn uniform(n: usize) -> Self {
        Self::filled(n, T::one() / T::from_usize(n).unwrap())
    }

    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = T::one();
        v
    }

    pub fn from_slice(xs: &[T]) -> Self {
        Self(xs.to_vec())
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn dot(&self, other: &[T]) -> T {
        dot(&self.0, other)
    }

    pub fn sum(&self) -> T {
        self.0.iter().copied().sum()
    }

    pub fn norm1(&self) -> T {
        self.0.iter().map(|x| x.abs()).sum()
    }

    pub fn norm2(&self) -> T {
        self.0.iter().map(|x| *x * *x).sum::<T>().sqrt()
    }

    pub fn norm_inf(&self) -> T {
        self.0.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn max(&self) -> T {
        self.0.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.0.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn scaled(&self, a: T) -> Self {
        Self(self.0.iter().map(|x| *x * a).collect())
    }

    pub fn add(&self, other: &[T]) -> Self {
        assert_eq!(self.len(), other.len());
        Self(self.0.iter().zip(other).map(|(a, b)| *a + *b).collect())
    }

    pub fn sub(&self, other: &[T]) -> Self {
        assert_eq!(self.len(), other.len());
        Self(self.0.iter().zip(other).map(|(a, b)| *a - *b).collect())
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: T, x: &[T]) {
        assert_eq!(self.len(), x.len());
        for (s, xi) in self.0.iter_mut().zip(x) {
            *s += a * *xi;
        }
    }

    /// Largest absolute coordinate difference.
    pub fn dist_inf(&self, other: &[T]) -> T {
        assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(other)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

impl<T> From<Vec<T>> for DenseVector<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

impl<T> Deref for DenseVector<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> DerefMut for DenseVector<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.0
    }
}

impl<T> FromIterator<T> for DenseVector<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}
