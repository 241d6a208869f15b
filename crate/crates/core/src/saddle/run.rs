use super::{
    Averaging, BoundedEstimator, BoxAverager, DualWeights, IterateView, NormKind, SaddleProblem, SimplexAverager,
    SmdSchedule, SparseGradient,
};
use crate::error::{Error, Result};
use crate::numeric::{DenseVector, Scalar};
use crate::sampling::{RngState, SamplerKind, Stream};
use serde::{Deserialize, Serialize};

/// Knobs that change how a run is executed but not what it computes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SmdOptions {
    pub averaging: Averaging,
    pub sampler: SamplerKind,
    /// Keep every iterate and stochastic gradient (desk-scale runs only).
    pub record_trace: bool,
}

/// One estimator per block.
pub struct Estimators<'a, T> {
    pub x: &'a dyn BoundedEstimator<T>,
    pub s: Option<&'a dyn BoundedEstimator<T>>,
    pub y: &'a dyn BoundedEstimator<T>,
}

/// Averaged iterates after `t` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct Averages<T> {
    pub t: u64,
    pub x: DenseVector<T>,
    pub s: Option<DenseVector<T>>,
    pub y: DenseVector<T>,
}

/// Gap (and optionally policy suboptimality) of the averaged iterates at iteration `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: u64,
    pub samples: u64,
    pub gap: f64,
    pub subopt: Option<f64>,
}

/// Iterate before an update together with the stochastic gradients drawn there.
#[derive(Debug, Clone)]
pub struct TraceStep<T> {
    pub x: DenseVector<T>,
    pub gx: SparseGradient<T>,
    pub s: DenseVector<T>,
    pub gs: Option<SparseGradient<T>>,
    pub y: DenseVector<T>,
    pub gy: SparseGradient<T>,
}

/// Output of [`run_smd`].
#[derive(Debug, Clone)]
pub struct SmdRun<T> {
    pub averages: Averages<T>,
    pub last_x: DenseVector<T>,
    pub last_s: DenseVector<T>,
    pub last_y: DenseVector<T>,
    pub iterations: u64,
    pub samples: u64,
    pub checkpoints: Vec<Checkpoint>,
    pub trace: Vec<TraceStep<T>>,
}

const STEP_LIMIT: f64 = 0.5;
// dual weights are rescaled to unit mass once the total leaves [1/RENORM_BAND, RENORM_BAND]
const RENORM_BAND: f64 = 1048576.0;

fn advisory_check<T: Scalar>(name: &str, est: &dyn BoundedEstimator<T>, eps: f64) {
    let b = est.bounds();
    if b.norm != NormKind::Euclidean && b.c.to_f() > 2.0 * b.v.to_f() / eps {
        log::warn!(
            "{name} estimator has max entry {} above 2v/eps = {}; the step guard may trip",
            b.c,
            2.0 * b.v.to_f() / eps
        );
    }
}

/// Runs stochastic mirror descent for `schedule.iterations` steps.
///
/// Box coordinates take projected gradient steps, the slack block (if any) takes capped
/// multiplicative steps and the dual block takes multiplicative-weights steps on
/// unnormalized weights. `observer` is called at each checkpoint with the averaged iterates
/// and may return a suboptimality figure to record next to the gap.
pub fn run_smd<T, P>(
    problem: &P,
    est: &Estimators<'_, T>,
    schedule: &SmdSchedule,
    seed: u64,
    opts: &SmdOptions,
    observer: &mut dyn FnMut(&Averages<T>) -> Option<f64>,
) -> Result<SmdRun<T>>
where
    T: Scalar,
    P: SaddleProblem<T> + ?Sized,
{
    let primal = problem.primal();
    let dual = problem.dual();
    let slack = problem.slack();
    if slack.is_some() != est.s.is_some() || slack.is_some() != schedule.eta_s.is_some() {
        return Err(Error::Config(
            "slack block, slack estimator and slack step size must all be present or all absent".into(),
        ));
    }
    if dual.dim == 0 {
        return Err(Error::Config("dual simplex must be nonempty".into()));
    }
    advisory_check("dual", est.y, schedule.eps);
    if let Some(es) = est.s {
        advisory_check("slack", es, schedule.eps);
    }

    let n = primal.dim;
    let radius = primal.radius;
    let eta_x = T::of(schedule.eta_x);
    let eta_y = T::of(schedule.eta_y);
    let eta_s = T::of(schedule.eta_s.unwrap_or(0.0));
    let half = T::of(STEP_LIMIT);
    let floor = T::weight_floor();
    let renorm_hi = T::of(RENORM_BAND);
    let renorm_lo = T::one() / renorm_hi;

    let mut x = DenseVector::<T>::zeros(n);
    let k = slack.map_or(0, |d| d.dim);
    let cap = slack.map_or(T::zero(), |d| d.cap);
    let mut s = if k > 0 {
        DenseVector::<T>::uniform(k)
    } else {
        DenseVector::zeros(0)
    };
    let mut y = DualWeights::<T>::uniform(opts.sampler, dual.dim)?;

    let mut rng_x = RngState::for_role(seed, Stream::Primal);
    let mut rng_s = RngState::for_role(seed, Stream::Slack);
    let mut rng_y = RngState::for_role(seed, Stream::Dual);
    let (mut gx, mut gs, mut gy) = (SparseGradient::new(), SparseGradient::new(), SparseGradient::new());
    let mut dense_s = vec![T::zero(); k];

    let mut box_avg = BoxAverager::new(opts.averaging, n);
    let mut simplex_avg = SimplexAverager::new(opts.averaging, dual.dim);
    let mut s_sum = vec![T::zero(); k];

    let total = schedule.iterations;
    let cps = schedule.checkpoints.times(total);
    let mut next_cp = 0;
    let mut checkpoints = Vec::with_capacity(cps.len());
    let mut trace = Vec::new();
    let mut samples: u64 = 0;

    for t in 1..=total {
        gx.clear();
        gs.clear();
        gy.clear();
        {
            let view = IterateView { x: &x, s: &s, y: &y };
            samples += est.x.draw(&view, &mut rng_x, &mut gx);
            if let Some(es) = est.s {
                samples += es.draw(&view, &mut rng_s, &mut gs);
            }
            samples += est.y.draw(&view, &mut rng_y, &mut gy);
        }
        if opts.record_trace {
            trace.push(TraceStep {
                x: x.clone(),
                gx: gx.clone(),
                s: s.clone(),
                gs: est.s.map(|_| gs.clone()),
                y: y.probabilities(),
                gy: gy.clone(),
            });
        }

        // box block
        if !gx.is_finite() {
            return Err(Error::NonFiniteIterate("primal"));
        }
        if gx.shift() != T::zero() {
            let g = gx.to_dense(n);
            for j in 0..n {
                box_avg.before_change(j, x[j], t);
                x[j] = (x[j] - eta_x * g[j]).max(-radius).min(radius);
            }
        } else {
            for &(j, g) in gx.entries() {
                box_avg.before_change(j, x[j], t);
                x[j] = (x[j] - eta_x * g).max(-radius).min(radius);
            }
        }

        // slack block
        if k > 0 {
            if !gs.is_finite() {
                return Err(Error::NonFiniteIterate("slack"));
            }
            dense_s.iter_mut().for_each(|v| *v = gs.shift());
            for &(i, g) in gs.entries() {
                dense_s[i] += g;
            }
            let mut sum = T::zero();
            for i in 0..k {
                let step = eta_s * dense_s[i];
                if step.abs() > half {
                    return Err(Error::StepBoundViolation {
                        block: "slack",
                        value: step.abs().to_f(),
                    });
                }
                s[i] *= (-step).exp();
                sum += s[i];
            }
            if sum > cap {
                let scale = cap / sum;
                s.iter_mut().for_each(|v| *v *= scale);
            }
            if !s.is_finite() {
                return Err(Error::NonFiniteIterate("slack"));
            }
            for (acc, v) in s_sum.iter_mut().zip(s.iter()) {
                *acc += *v;
            }
        }

        // dual block; a constant shift is a no-op for the normalized iterate
        for &(i, g) in gy.entries() {
            let step = eta_y * g;
            if !step.is_finite() {
                return Err(Error::NonFiniteIterate("dual"));
            }
            if step.abs() > half {
                return Err(Error::StepBoundViolation {
                    block: "dual",
                    value: step.abs().to_f(),
                });
            }
            let old = y.weight(i);
            simplex_avg.before_change(i, old);
            y.set(i, (old * (-step).exp()).max(floor));
        }

        box_avg.end_iteration(&x);
        simplex_avg.end_iteration(&y);

        let mass = y.total();
        if !(mass.is_finite() && mass > T::zero()) {
            return Err(Error::NonFiniteIterate("dual"));
        }
        if mass > renorm_hi || mass < renorm_lo {
            simplex_avg.flush_all(y.weights());
            let w: Vec<T> = y.weights().iter().map(|w| (*w / mass).max(floor)).collect();
            y.reset(&w);
        }

        if next_cp < cps.len() && cps[next_cp] == t {
            next_cp += 1;
            let avg = Averages {
                t,
                x: box_avg.average(&x, t),
                s: (k > 0).then(|| s_sum.iter().map(|v| *v / T::from_u64(t).unwrap()).collect()),
                y: simplex_avg.average(&y, t),
            };
            let empty: [T; 0] = [];
            let gap = problem.gap(&avg.x, avg.s.as_deref().unwrap_or(&empty), &avg.y).to_f();
            let subopt = observer(&avg);
            checkpoints.push(Checkpoint {
                t,
                samples,
                gap,
                subopt,
            });
        }
    }

    let tt = T::from_u64(total.max(1)).unwrap();
    let averages = Averages {
        t: total,
        x: box_avg.average(&x, total),
        s: (k > 0).then(|| s_sum.iter().map(|v| *v / tt).collect()),
        y: simplex_avg.average(&y, total),
    };
    Ok(SmdRun {
        averages,
        last_x: x,
        last_s: s,
        last_y: y.probabilities(),
        iterations: total,
        samples,
        checkpoints,
        trace,
    })
}
