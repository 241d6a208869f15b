use super::{DenseVector, Scalar};
use crate::error::{Error, Result};

/// Euclidean projection onto `[-b, b]^n`, i.e. a coordinatewise clamp.
pub fn project_box<T: Scalar>(v: &[T], b: T) -> Result<DenseVector<T>> {
    if !(b >= T::zero()) {
        return Err(Error::Domain(format!("box radius must be nonnegative, got {b}")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite input to project_box".into()));
    }
    Ok(v.iter().map(|x| x.max(-b).min(b)).collect())
}

fn check_finite<T: Scalar>(xs: &[T], what: &str) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("non-finite entry in {what}")))
    }
}

/// Multiplicative weights step on the simplex: `out ∝ mu * exp(-eta_g)`.
///
/// Zero coordinates of `mu` stay zero. Large exponents are handled by shifting in log space.
pub fn entropic_step<T: Scalar>(mu: &[T], eta_g: &[T]) -> Result<DenseVector<T>> {
    if mu.len() != eta_g.len() {
        return Err(Error::DimensionMismatch("entropic_step lengths differ".into()));
    }
    check_finite(mu, "mu")?;
    check_finite(eta_g, "eta_g")?;
    if mu.iter().any(|m| *m < T::zero()) {
        return Err(Error::Domain("mu has a negative entry".into()));
    }
    let support = || mu.iter().zip(eta_g).filter(|(m, _)| **m > T::zero());
    let hi = support().map(|(_, g)| -*g).fold(T::neg_infinity(), T::max);
    let lo = support().map(|(_, g)| -*g).fold(T::infinity(), T::min);
    if hi == T::neg_infinity() {
        return Err(Error::Domain("mu has empty support".into()));
    }
    let limit = T::of(500.0);
    let shift = if hi > limit || lo < -limit { hi } else { T::zero() };
    let floor = T::weight_floor();
    let mut out: DenseVector<T> = mu
        .iter()
        .zip(eta_g)
        .map(|(m, g)| {
            if *m > T::zero() {
                (*m * (-*g - shift).exp()).max(floor)
            } else {
                T::zero()
            }
        })
        .collect();
    let total = out.sum();
    for o in out.iter_mut() {
        *o /= total;
    }
    Ok(out)
}

/// Prox step for the rescaled KL divergence on `{s >= 0, sum(s) <= cap}`.
pub fn capped_entropic_step<T: Scalar>(s: &[T], eta_g: &[T], cap: T) -> Result<DenseVector<T>> {
    if s.len() != eta_g.len() {
        return Err(Error::DimensionMismatch("capped_entropic_step lengths differ".into()));
    }
    check_finite(s, "s")?;
    check_finite(eta_g, "eta_g")?;
    if s.iter().any(|x| *x < T::zero()) || !(cap > T::zero()) {
        return Err(Error::Domain("s must be nonnegative and cap positive".into()));
    }
    let mut out: DenseVector<T> = s.iter().zip(eta_g).map(|(x, g)| *x * (-*g).exp()).collect();
    check_finite(&out, "capped step output")?;
    let total = out.sum();
    if total > cap {
        let scale = cap / total;
        for o in out.iter_mut() {
            *o *= scale;
        }
    }
    Ok(out)
}
