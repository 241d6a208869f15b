use super::Scalar;

/// Sum tolerance for simplex membership.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// The box `[-b, b]^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain<T> {
    pub dim: usize,
    pub radius: T,
}

impl<T: Scalar> BoxDomain<T> {
    pub fn new(dim: usize, radius: T) -> Self {
        Self { dim, radius }
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim && x.iter().all(|v| v.abs() <= self.radius)
    }

    /// Vertices of the box, in binary counting order. Only sensible for small `dim`.
    pub fn vertices(&self) -> Vec<Vec<T>> {
        (0..1usize << self.dim)
            .map(|mask| {
                (0..self.dim)
                    .map(|j| if mask >> j & 1 == 1 { self.radius } else { -self.radius })
                    .collect()
            })
            .collect()
    }
}

/// The probability simplex over `dim` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimplexDomain {
    pub dim: usize,
}

impl SimplexDomain {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    pub fn contains<T: Scalar>(&self, y: &[T]) -> bool {
        y.len() == self.dim
            && y.iter().all(|v| *v >= T::zero())
            && (y.iter().copied().sum::<T>() - T::one()).abs() <= T::of(SIMPLEX_TOL)
    }
}

/// `{ s >= 0 : sum(s) <= cap }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CappedOrthantDomain<T> {
    pub dim: usize,
    pub cap: T,
}

impl<T: Scalar> CappedOrthantDomain<T> {
    pub fn new(dim: usize, cap: T) -> Self {
        Self { dim, cap }
    }

    pub fn contains(&self, s: &[T]) -> bool {
        s.len() == self.dim
            && s.iter().all(|v| *v >= T::zero())
            && s.iter().copied().sum::<T>() <= self.cap + T::of(SIMPLEX_TOL)
    }

    /// Extreme points: the origin and `cap * e_k`.
    pub fn vertices(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.dim]];
        for k in 0..self.dim {
            let mut v = vec![T::zero(); self.dim];
            v[k] = self.cap;
            out.push(v);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership() {
        let b = BoxDomain::new(2, 1.0);
        assert!(b.contains(&[1.0, -1.0]) && !b.contains(&[1.1, 0.0]));
        assert_eq!(b.vertices().len(), 4);
        let s = SimplexDomain::new(2);
        assert!(s.contains(&[0.5, 0.5 + 5e-10]) && !s.contains(&[0.5, 0.6]) && !s.contains(&[-0.1, 1.1]));
        let c = CappedOrthantDomain::new(2, 2.0);
        assert!(c.contains(&[1.0, 1.0]) && c.contains(&[0.0, 0.0]) && !c.contains(&[1.5, 1.0]));
        assert_eq!(c.vertices(), vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0]]);
    }
}
