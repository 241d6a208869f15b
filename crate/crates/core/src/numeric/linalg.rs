use super::{DenseMatrix, DenseVector, Scalar};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-12;

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<DenseVector<T>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "solve_linear needs a square system, got {}x{} with rhs {}",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    let tol = T::of(PIVOT_TOL) * T::one().max(a.max_abs());
    let mut m = a.clone();
    let mut x: Vec<T> = b.to_vec();
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, m[(r, col)].abs()))
            .fold((col, T::zero()), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if !(best > tol) {
            return Err(Error::SingularMatrix);
        }
        if piv != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(piv, j)];
                m[(piv, j)] = tmp;
            }
            x.swap(col, piv);
        }
        let p = m[(col, col)];
        for r in col + 1..n {
            let f = m[(r, col)] / p;
            if f == T::zero() {
                continue;
            }
            for j in col..n {
                let v = m[(col, j)];
                m[(r, j)] -= f * v;
            }
            let v = x[col];
            x[r] -= f * v;
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for j in col + 1..n {
            acc -= m[(col, j)] * x[j];
        }
        x[col] = acc / m[(col, col)];
    }
    Ok(x.into())
}

/// Inverse by solving against each unit vector.
pub fn invert<T: Scalar>(a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let n = a.rows();
    let mut inv = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = solve_linear(a, &DenseVector::basis(n, j))?;
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    Ok(inv)
}

/// Operator norm induced by the sup norm: the largest absolute row sum.
pub fn inf_operator_norm<T: Scalar>(a: &DenseMatrix<T>) -> T {
    (0..a.rows())
        .map(|i| a.row(i).iter().map(|x| x.abs()).sum::<T>())
        .fold(T::zero(), T::max)
}
