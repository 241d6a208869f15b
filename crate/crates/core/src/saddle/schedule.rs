use crate::error::{Error, Result};

/// Leading constants of the step-size and horizon rules.
///
/// `eta = eps / (step_divisor * v)` per block; the horizon is the largest of
/// `box_factor * n b² / (eps eta_x)` and `simplex_factor * R / (eps eta)` over the entropic blocks,
/// where `R` is the divergence range (`ln m` on the simplex).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConstants {
    pub step_divisor: f64,
    pub box_factor: f64,
    pub simplex_factor: f64,
}

impl Default for ScheduleConstants {
    fn default() -> Self {
        Self {
            step_divisor: 4.0,
            box_factor: 16.0,
            simplex_factor: 8.0,
        }
    }
}

impl ScheduleConstants {
    /// The same derivation with three blocks sharing the error budget: every block gets `eps/6`.
    pub fn three_block() -> Self {
        Self {
            step_divisor: 6.0,
            box_factor: 24.0,
            simplex_factor: 12.0,
        }
    }
}

/// Where averaged iterates get evaluated during a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum CheckpointPlan {
    #[default]
    None,
    /// `count` points ending at `T`, each half the next.
    Geometric(usize),
    /// Every `k` iterations and at `T`.
    Every(u64),
    /// Explicit iteration counts; those beyond `T` are dropped and `T` is always added.
    At(Vec<u64>),
}

impl CheckpointPlan {
    /// Sorted, distinct checkpoint iterations in `1..=total`.
    pub fn times(&self, total: u64) -> Vec<u64> {
        let mut out: Vec<u64> = match self {
            CheckpointPlan::None => Vec::new(),
            CheckpointPlan::Geometric(count) => (0..*count)
                .map(|i| {
                    let shift = (*count - 1 - i).min(63) as u32;
                    (total >> shift).max(1)
                })
                .collect(),
            CheckpointPlan::Every(k) => {
                let k = (*k).max(1);
                (1..=total / k).map(|i| i * k).chain(std::iter::once(total)).collect()
            }
            CheckpointPlan::At(ts) => ts
                .iter()
                .copied()
                .filter(|t| *t >= 1 && *t <= total)
                .chain(std::iter::once(total))
                .collect(),
        };
        out.sort_unstable();
        out.dedup();
        if total == 0 {
            out.clear();
        }
        out
    }
}

/// Step sizes, horizon and checkpoints of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SmdSchedule {
    pub eps: f64,
    pub eta_x: f64,
    pub eta_s: Option<f64>,
    pub eta_y: f64,
    pub iterations: u64,
    pub checkpoints: CheckpointPlan,
}

impl SmdSchedule {
    pub fn with_checkpoints(mut self, plan: CheckpointPlan) -> Self {
        self.checkpoints = plan;
        self
    }

    pub fn with_iterations(mut self, iterations: u64) -> Self {
        self.iterations = iterations;
        self
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("accuracy must lie in (0,1), got {eps}")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

// ceil that ignores the last few ulps of rounding noise
fn horizon(x: f64) -> u64 {
    (x * (1.0 - 1e-12)).ceil().max(1.0) as u64
}

/// Two-block schedule with the default constants.
pub fn schedule_for(eps: f64, n: usize, b: f64, m: usize, vx: f64, vy: f64) -> Result<SmdSchedule> {
    schedule_with(&ScheduleConstants::default(), eps, n, b, m, vx, vy)
}

/// Two-block schedule (box primal, simplex dual) with explicit constants.
pub fn schedule_with(
    k: &ScheduleConstants,
    eps: f64,
    n: usize,
    b: f64,
    m: usize,
    vx: f64,
    vy: f64,
) -> Result<SmdSchedule> {
    check_eps(eps)?;
    check_positive("vx", vx)?;
    check_positive("vy", vy)?;
    if m == 0 {
        return Err(Error::Config("dual dimension must be positive".into()));
    }
    let eta_x = eps / (k.step_divisor * vx);
    let eta_y = eps / (k.step_divisor * vy);
    let box_term = k.box_factor * n as f64 * b * b / (eps * eta_x);
    let simplex_term = k.simplex_factor * (m as f64).ln() / (eps * eta_y);
    Ok(SmdSchedule {
        eps,
        eta_x,
        eta_s: None,
        eta_y,
        iterations: horizon(box_term.max(simplex_term)),
        checkpoints: CheckpointPlan::None,
    })
}

/// Largest rescaled-KL divergence from the uniform point `1/K` to the capped orthant `{s >= 0, Σs <= cap}`.
///
/// The divergence is convex in its second argument, so the max sits at a vertex: `0` gives 1,
/// `cap·e_k` gives `cap·ln(cap·K) − cap + 1`.
pub fn capped_divergence_bound(k: usize, cap: f64) -> f64 {
    let vertex = cap * (cap * k as f64).ln() - cap + 1.0;
    vertex.max(1.0)
}

/// Three-block schedule: box primal, capped-orthant slack, simplex dual.
#[allow(clippy::too_many_arguments)]
pub fn schedule_three_block(
    consts: &ScheduleConstants,
    eps: f64,
    n: usize,
    b: f64,
    k: usize,
    cap: f64,
    m: usize,
    vx: f64,
    vs: f64,
    vy: f64,
) -> Result<SmdSchedule> {
    let mut sched = schedule_with(consts, eps, n, b, m, vx, vy)?;
    check_positive("vs", vs)?;
    if k == 0 {
        return Err(Error::Config("slack dimension must be positive".into()));
    }
    let eta_s = eps / (consts.step_divisor * vs);
    let slack_term = consts.simplex_factor * capped_divergence_bound(k, cap) / (eps * eta_s);
    sched.eta_s = Some(eta_s);
    sched.iterations = sched.iterations.max(horizon(slack_term));
    Ok(sched)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_example() {
        let s = schedule_for(0.5, 1, 1.0, 2, 2.0, 2.0).unwrap();
        assert_eq!(s.eta_x, 1.0 / 16.0);
        assert_eq!(s.eta_y, 1.0 / 16.0);
        assert_eq!(s.iterations, 512);
    }

    #[test]
    fn halving_eps_quadruples_horizon() {
        let a = schedule_for(0.2, 3, 2.0, 5, 2.0, 7.0).unwrap();
        let b = schedule_for(0.1, 3, 2.0, 5, 2.0, 7.0).unwrap();
        assert_eq!(b.iterations, 4 * a.iterations);
    }

    #[test]
    fn lemma_constant_step() {
        let vy = 9.0 * (2.0f64 * 2.0 + 1.0) * 4.0;
        let s = schedule_for(0.1, 2, 4.0, 4, 2.0, vy).unwrap();
        assert!((s.eta_y - 0.1 / 720.0).abs() < 1e-18);
    }

    #[test]
    fn rejects_bad_eps() {
        assert!(schedule_for(0.0, 1, 1.0, 2, 1.0, 1.0).is_err());
        assert!(schedule_for(1.0, 1, 1.0, 2, 1.0, 1.0).is_err());
        assert!(schedule_for(0.5, 1, 1.0, 2, 0.0, 1.0).is_err());
    }

    #[test]
    fn checkpoint_plans() {
        assert_eq!(CheckpointPlan::Geometric(4).times(80), vec![10, 20, 40, 80]);
        assert_eq!(CheckpointPlan::Every(30).times(80), vec![30, 60, 80]);
        assert_eq!(CheckpointPlan::At(vec![5, 0, 500, 5]).times(80), vec![5, 80]);
        assert!(CheckpointPlan::None.times(80).is_empty());
    }

    #[test]
    fn divergence_bound_at_vertices() {
        assert_eq!(capped_divergence_bound(1, 1.0), 1.0);
        let k = 3;
        let expected = 2.0 * (6f64).ln() - 1.0;
        assert!((capped_divergence_bound(k, 2.0) - expected).abs() < 1e-15);
        let s = schedule_three_block(&ScheduleConstants::three_block(), 0.1, 2, 1.0, k, 2.0, 4, 2.0, 3.0, 5.0).unwrap();
        assert_eq!(s.eta_s, Some(0.1 / 18.0));
    }
}
