//! Monte Carlo checks of an estimator's unbiasedness, second moment and max entry at a frozen iterate.

use super::{BoundedEstimator, IterateView, NormKind, SparseGradient};
use crate::numeric::Scalar;
use crate::sampling::RngState;

/// Empirical behavior of an estimator over many draws at one iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorStats {
    pub draws: u64,
    pub mean: Vec<f64>,
    /// `max_k |mean_k − exact_k|`
    pub max_mean_error: f64,
    /// Second moment in the declared norm at each supplied probe point.
    pub probe_moments: Vec<f64>,
    /// Supremum of the second moment over the whole probe domain.
    pub moment_sup: f64,
    pub max_entry: f64,
    /// Draws whose largest entry exceeded the supplied bound.
    pub entry_violations: u64,
}

/// Draws `draws` gradients at `view` and summarizes them against `exact`.
///
/// For local norms `probes` are points of the simplex (or capped orthant) at which
/// `E Σ_k p_k g_k²` is reported; `cap` is the total mass allowed in the probe domain
/// (1 on the simplex), used for the supremum. Euclidean estimators ignore both.
#[allow(clippy::too_many_arguments)]
pub fn estimator_statistics<T: Scalar>(
    est: &dyn BoundedEstimator<T>,
    view: &IterateView<'_, T>,
    exact: &[f64],
    draws: u64,
    probes: &[Vec<f64>],
    cap: f64,
    entry_bound: f64,
    rng: &mut RngState,
) -> EstimatorStats {
    let dim = exact.len();
    let norm = est.bounds().norm;
    let mut sums = vec![0.0; dim];
    let mut squares = vec![0.0; dim];
    let mut shift_sum = 0.0;
    let mut euclid = 0.0;
    let mut max_entry: f64 = 0.0;
    let mut violations = 0;
    let mut g = SparseGradient::new();
    let limit = entry_bound * (1.0 + 1e-12);
    for _ in 0..draws {
        g.clear();
        est.draw(view, rng, &mut g);
        let shift = g.shift().to_f();
        let entry = g.max_abs(dim).to_f();
        max_entry = max_entry.max(entry);
        if entry > limit {
            violations += 1;
        }
        if shift != 0.0 {
            let dense = g.to_dense(dim);
            for (k, v) in dense.iter().enumerate() {
                let v = v.to_f();
                squares[k] += v * v;
                euclid += v * v;
            }
            shift_sum += shift;
            for &(k, v) in g.entries() {
                sums[k] += v.to_f();
            }
        } else {
            for &(k, v) in g.entries() {
                let v = v.to_f();
                sums[k] += v;
                squares[k] += v * v;
                euclid += v * v;
            }
        }
    }
    let nd = draws.max(1) as f64;
    let mean: Vec<f64> = sums.iter().map(|s| (s + shift_sum) / nd).collect();
    let max_mean_error = mean.iter().zip(exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let per_coord: Vec<f64> = squares.iter().map(|s| s / nd).collect();
    let (probe_moments, moment_sup) = match norm {
        NormKind::Euclidean => (vec![euclid / nd], euclid / nd),
        NormKind::LocalSimplex | NormKind::LocalCapped => {
            let pm = probes
                .iter()
                .map(|p| p.iter().zip(&per_coord).map(|(a, b)| a * b).sum())
                .collect();
            let sup = cap * per_coord.iter().copied().fold(0.0, f64::max);
            (pm, sup)
        }
    };
    EstimatorStats {
        draws,
        mean,
        max_mean_error,
        probe_moments,
        moment_sup,
        max_entry,
        entry_violations: violations,
    }
}
