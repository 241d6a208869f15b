use crate::error::{Error, Result};
use crate::numeric::{BoxDomain, CappedOrthantDomain, DenseMatrix, DenseVector, Scalar, SimplexDomain};

/// Exact gradients of a saddle objective: `∇_x f`, `∇_s f` and `−∇_y f`
/// (the dual block descends on the negated gradient).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGradients<T> {
    pub x: DenseVector<T>,
    pub s: Option<DenseVector<T>>,
    pub y: DenseVector<T>,
}

/// A convex-concave problem `min_{x, s} max_y f(x, s, y)` over box × capped orthant × simplex.
pub trait SaddleProblem<T: Scalar> {
    fn primal(&self) -> BoxDomain<T>;

    fn slack(&self) -> Option<CappedOrthantDomain<T>> {
        None
    }

    fn dual(&self) -> SimplexDomain;

    fn gradients(&self, x: &[T], s: &[T], y: &[T]) -> BlockGradients<T>;

    /// `max_{y'} f(x, s, y') − min_{x', s'} f(x', s', y)`.
    fn gap(&self, x: &[T], s: &[T], y: &[T]) -> T;
}

/// `f(x, y) = yᵀ M x + bᵀ x − cᵀ y` over `[-radius, radius]^n × Δ^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearProblem<T> {
    pub matrix: DenseMatrix<T>,
    pub b: DenseVector<T>,
    pub c: DenseVector<T>,
    pub radius: T,
}

impl<T: Scalar> BilinearProblem<T> {
    pub fn new(matrix: DenseMatrix<T>, b: DenseVector<T>, c: DenseVector<T>, radius: T) -> Result<Self> {
        if b.len() != matrix.cols() || c.len() != matrix.rows() {
            return Err(Error::DimensionMismatch(format!(
                "matrix {}x{} with b of length {} and c of length {}",
                matrix.rows(),
                matrix.cols(),
                b.len(),
                c.len()
            )));
        }
        if !(radius >= T::zero()) || !matrix.is_finite() || !b.is_finite() || !c.is_finite() {
            return Err(Error::Domain(
                "bilinear problem needs finite data and radius >= 0".into(),
            ));
        }
        Ok(Self { matrix, b, c, radius })
    }

    pub fn objective(&self, x: &[T], y: &[T]) -> T {
        let mx = self.matrix.matvec(x);
        mx.dot(y) + self.b.dot(x) - self.c.dot(y)
    }

    fn gap_unchecked(&self, x: &[T], y: &[T]) -> T {
        let mx = self.matrix.matvec(x);
        let best_response_y = mx
            .iter()
            .zip(self.c.iter())
            .map(|(a, c)| *a - *c)
            .fold(T::neg_infinity(), T::max);
        let mty = self.matrix.tmatvec(y).add(&self.b);
        best_response_y + self.b.dot(x) + self.c.dot(y) + self.radius * mty.norm1()
    }
}

fn feasible_box<T: Scalar>(x: &[T], radius: T) -> bool {
    let slack = T::of(1e-12) * (T::one() + radius);
    x.iter().all(|v| v.is_finite() && v.abs() <= radius + slack)
}

/// Closed-form duality gap of the bilinear problem at a feasible pair.
pub fn exact_gap<T: Scalar>(problem: &BilinearProblem<T>, x: &[T], y: &[T]) -> Result<T> {
    if x.len() != problem.matrix.cols() || y.len() != problem.matrix.rows() {
        return Err(Error::DimensionMismatch("gap arguments".into()));
    }
    if !feasible_box(x, problem.radius) || !SimplexDomain::new(y.len()).contains(y) {
        return Err(Error::Domain("gap evaluated at an infeasible pair".into()));
    }
    Ok(problem.gap_unchecked(x, y))
}

impl<T: Scalar> SaddleProblem<T> for BilinearProblem<T> {
    fn primal(&self) -> BoxDomain<T> {
        BoxDomain::new(self.matrix.cols(), self.radius)
    }

    fn dual(&self) -> SimplexDomain {
        SimplexDomain::new(self.matrix.rows())
    }

    fn gradients(&self, x: &[T], _s: &[T], y: &[T]) -> BlockGradients<T> {
        let gx = self.matrix.tmatvec(y).add(&self.b);
        let gy = self.c.sub(&self.matrix.matvec(x));
        BlockGradients { x: gx, s: None, y: gy }
    }

    fn gap(&self, x: &[T], _s: &[T], y: &[T]) -> T {
        self.gap_unchecked(x, y)
    }
}
