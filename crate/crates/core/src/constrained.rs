//! Constrained mixing AMDPs: find a stationary occupancy `μ` with `Dᵀμ >= 1`.
//!
//! Solved as the three-block problem
//! `min_{v ∈ B_{2M}, s >= 0, 1ᵀs <= 2} max_{μ ∈ Δ^A} μᵀ[(Î − P)v + Ds] − 1ᵀs` with `M = 2 D t_mix`.

use crate::error::{Error, Result};
use crate::mdp::{induced_chain, max_min_occupancy, stationary_distribution, GenerativeModel, MdpInstance, Policy};
use crate::mdp_smd::round_to_policy;
use crate::numeric::lp::{LinearProgram, Relation};
use crate::numeric::{BoxDomain, CappedOrthantDomain, SimplexDomain};
use crate::report::{ConstraintMetrics, SolveReport};
use crate::saddle::{
    run_smd, schedule_three_block, Averages, BlockGradients, BoundedEstimator, CheckpointPlan, EstimatorBounds,
    Estimators, IterateView, NormKind, SaddleProblem, ScheduleConstants, SmdOptions, SmdRun, SmdSchedule,
    SparseGradient,
};
use crate::sampling::RngState;
use crate::{Matrix, Vector};
use std::time::Instant;

/// Cap on `1ᵀs`.
pub const SLACK_CAP: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedConfig {
    pub k: usize,
    /// Largest constraint entry `D`.
    pub d_max: f64,
    /// `2 D t_mix`; the primal box has radius `2M`.
    pub m: f64,
    pub radius: f64,
    pub eps: f64,
    pub schedule: SmdSchedule,
}

impl ConstrainedConfig {
    pub fn new(mdp: &MdpInstance, eps: f64, t_mix: Option<u32>, consts: &ScheduleConstants) -> Result<Self> {
        let d = mdp
            .costs()
            .ok_or_else(|| Error::Config("constrained solve needs constraint costs".into()))?;
        let d_max = d.max_abs();
        if !(d_max > 0.0) {
            return Err(Error::InfeasibleInstance("all constraint costs are zero".into()));
        }
        let t = t_mix
            .or(mdp.t_mix())
            .ok_or_else(|| Error::Config("constrained solve needs a mixing-time bound".into()))?;
        if t == 0 {
            return Err(Error::Config("mixing time must be at least 1".into()));
        }
        let k = d.cols();
        let m = 2.0 * d_max * t as f64;
        let radius = 2.0 * m;
        let pairs = mdp.num_pairs();
        let schedule = schedule_three_block(
            consts,
            eps,
            mdp.num_states(),
            radius,
            k,
            SLACK_CAP,
            pairs,
            V_BOUNDS.v,
            slack_bounds(k, d_max).v,
            declared_mu_bounds(m, d_max, pairs).v,
        )?;
        Ok(Self {
            k,
            d_max,
            m,
            radius,
            eps,
            schedule,
        })
    }
}

const V_BOUNDS: EstimatorBounds<f64> = EstimatorBounds {
    c: 1.0,
    v: 2.0,
    norm: NormKind::Euclidean,
};

/// `(KD + 2, 2KD² + 2)` in the capped local norm.
pub fn slack_bounds(k: usize, d_max: f64) -> EstimatorBounds<f64> {
    let k = k as f64;
    EstimatorBounds {
        c: k * d_max + 2.0,
        v: 2.0 * k * d_max * d_max + 2.0,
        norm: NormKind::LocalCapped,
    }
}

/// `((2M + 1 + 2D)|A|, 2(2M + 1 + 2D)²|A|)` as stated for the μ-side estimator.
pub fn lemma_mu_bounds(m: f64, d_max: f64, pairs: usize) -> EstimatorBounds<f64> {
    let a = pairs as f64;
    let spread = 2.0 * m + 1.0 + 2.0 * d_max;
    EstimatorBounds {
        c: spread * a,
        v: 2.0 * spread * spread * a,
        norm: NormKind::LocalSimplex,
    }
}

/// Bounds valid on the whole domain, where `|v_j − v_i − d_k ‖s‖₁| <= 4M + 2D`.
pub fn declared_mu_bounds(m: f64, d_max: f64, pairs: usize) -> EstimatorBounds<f64> {
    let a = pairs as f64;
    let spread = 4.0 * m + 2.0 * d_max;
    let lemma = lemma_mu_bounds(m, d_max, pairs);
    EstimatorBounds {
        c: lemma.c.max(spread * a),
        v: lemma.v.max(spread * spread * a),
        norm: NormKind::LocalSimplex,
    }
}

/// `e_i − e_j` with `(i,a) ~ μ`, `j ~ p(·|i,a)`: unbiased for `(Î − P)ᵀμ`.
pub struct ConstrainedVEstimator<'a> {
    mdp: &'a MdpInstance,
    model: &'a GenerativeModel,
}

impl<'a> ConstrainedVEstimator<'a> {
    pub fn new(mdp: &'a MdpInstance, model: &'a GenerativeModel) -> Self {
        Self { mdp, model }
    }
}

impl BoundedEstimator<f64> for ConstrainedVEstimator<'_> {
    fn bounds(&self) -> EstimatorBounds<f64> {
        V_BOUNDS
    }

    fn draw(&self, it: &IterateView<'_, f64>, rng: &mut RngState, out: &mut SparseGradient<f64>) -> u64 {
        let k = it.y.sample(rng);
        let j = self.model.sample_pair(k, rng);
        out.push(self.mdp.state_of(k), 1.0);
        out.push(j, -1.0);
        1
    }
}

/// `K d_k(i,a) e_k − 1` with `(i,a) ~ μ`, `k` uniform: unbiased for `Dᵀμ − 1`. Uses no transitions.
pub struct SlackEstimator<'a> {
    costs: &'a Matrix,
    bounds: EstimatorBounds<f64>,
}

impl<'a> SlackEstimator<'a> {
    pub fn new(mdp: &'a MdpInstance) -> Result<Self> {
        let costs = mdp
            .costs()
            .ok_or_else(|| Error::Config("instance has no constraint costs".into()))?;
        Ok(Self {
            costs,
            bounds: slack_bounds(costs.cols(), costs.max_abs()),
        })
    }
}

impl BoundedEstimator<f64> for SlackEstimator<'_> {
    fn bounds(&self) -> EstimatorBounds<f64> {
        self.bounds
    }

    fn draw(&self, it: &IterateView<'_, f64>, rng: &mut RngState, out: &mut SparseGradient<f64>) -> u64 {
        let pair = it.y.sample(rng);
        let kk = self.costs.cols();
        let k = rng.below(kk);
        out.set_shift(-1.0);
        out.push(k, kk as f64 * self.costs[(pair, k)]);
        0
    }
}

/// `|A|(v_j − v_i − d_k(i,a)‖s‖₁) e_{(i,a)}` with `(i,a)` uniform, `j ~ p(·|i,a)`, `k ~ s/‖s‖₁`:
/// unbiased for `−[(Î − P)v + Ds]`. The cost term is skipped when `s = 0`.
pub struct ConstrainedMuEstimator<'a> {
    mdp: &'a MdpInstance,
    model: &'a GenerativeModel,
    costs: &'a Matrix,
    bounds: EstimatorBounds<f64>,
}

impl<'a> ConstrainedMuEstimator<'a> {
    pub fn new(mdp: &'a MdpInstance, model: &'a GenerativeModel, cfg: &ConstrainedConfig) -> Result<Self> {
        let costs = mdp
            .costs()
            .ok_or_else(|| Error::Config("instance has no constraint costs".into()))?;
        Ok(Self {
            mdp,
            model,
            costs,
            bounds: declared_mu_bounds(cfg.m, cfg.d_max, mdp.num_pairs()),
        })
    }
}

impl BoundedEstimator<f64> for ConstrainedMuEstimator<'_> {
    fn bounds(&self) -> EstimatorBounds<f64> {
        self.bounds
    }

    fn draw(&self, it: &IterateView<'_, f64>, rng: &mut RngState, out: &mut SparseGradient<f64>) -> u64 {
        let pairs = self.mdp.num_pairs();
        let pair = rng.below(pairs);
        let i = self.mdp.state_of(pair);
        let j = self.model.sample_pair(pair, rng);
        let mut value = it.x[j] - it.x[i];
        let mass: f64 = it.s.iter().sum();
        if mass > 0.0 {
            let mut u = rng.uniform() * mass;
            let mut k = it.s.len() - 1;
            for (idx, sk) in it.s.iter().enumerate() {
                if u < *sk {
                    k = idx;
                    break;
                }
                u -= sk;
            }
            value -= self.costs[(pair, k)] * mass;
        }
        out.push(pair, pairs as f64 * value);
        1
    }
}

/// The three-block problem with closed-form gradients and gap.
#[derive(Debug, Clone)]
pub struct ConstrainedProblem {
    /// `Î − P`, one row per state-action pair.
    flow: Matrix,
    costs: Matrix,
    radius: f64,
}

impl ConstrainedProblem {
    pub fn new(mdp: &MdpInstance, cfg: &ConstrainedConfig) -> Result<Self> {
        let costs = mdp
            .costs()
            .ok_or_else(|| Error::Config("instance has no constraint costs".into()))?
            .clone();
        let mut flow = mdp.transitions().scaled(-1.0);
        for k in 0..mdp.num_pairs() {
            flow[(k, mdp.state_of(k))] += 1.0;
        }
        Ok(Self {
            flow,
            costs,
            radius: cfg.radius,
        })
    }

    pub fn objective(&self, v: &[f64], s: &[f64], mu: &[f64]) -> f64 {
        let inner = self.flow.matvec(v).add(&self.costs.matvec(s));
        inner.dot(mu) - s.iter().sum::<f64>()
    }

    fn gap_unchecked(&self, v: &[f64], s: &[f64], mu: &[f64]) -> f64 {
        let inner = self.flow.matvec(v).add(&self.costs.matvec(s));
        let dual_best = inner.max() - s.iter().sum::<f64>();
        let residual = self.flow.tmatvec(mu).norm1();
        let dmu_min = self.costs.tmatvec(mu).min();
        let primal_best = -self.radius * residual + (SLACK_CAP * (dmu_min - 1.0)).min(0.0);
        dual_best - primal_best
    }
}

impl SaddleProblem<f64> for ConstrainedProblem {
    fn primal(&self) -> BoxDomain<f64> {
        BoxDomain::new(self.flow.cols(), self.radius)
    }

    fn slack(&self) -> Option<CappedOrthantDomain<f64>> {
        Some(CappedOrthantDomain::new(self.costs.cols(), SLACK_CAP))
    }

    fn dual(&self) -> SimplexDomain {
        SimplexDomain::new(self.flow.rows())
    }

    fn gradients(&self, v: &[f64], s: &[f64], mu: &[f64]) -> BlockGradients<f64> {
        let gx = self.flow.tmatvec(mu);
        let gs: Vector = self.costs.tmatvec(mu).iter().map(|d| d - 1.0).collect();
        let gy = self.flow.matvec(v).add(&self.costs.matvec(s)).scaled(-1.0);
        BlockGradients {
            x: gx,
            s: Some(gs),
            y: gy,
        }
    }

    fn gap(&self, v: &[f64], s: &[f64], mu: &[f64]) -> f64 {
        self.gap_unchecked(v, s, mu)
    }
}

/// Exact gap: `[max((Î − P)v + Ds) − 1ᵀs] + 2M‖(Î − P)ᵀμ‖₁ − min(0, 2 min_k((Dᵀμ)_k − 1))`.
pub fn exact_constrained_gap(
    cfg: &ConstrainedConfig,
    mdp: &MdpInstance,
    v: &[f64],
    s: &[f64],
    mu: &[f64],
) -> Result<f64> {
    let problem = ConstrainedProblem::new(mdp, cfg)?;
    if v.len() != mdp.num_states() || s.len() != cfg.k || mu.len() != mdp.num_pairs() {
        return Err(Error::DimensionMismatch("gap arguments".into()));
    }
    let tol = 1e-12 * (1.0 + cfg.radius);
    if !v.iter().all(|x| x.abs() <= cfg.radius + tol)
        || !CappedOrthantDomain::new(cfg.k, SLACK_CAP).contains(s)
        || !SimplexDomain::new(mu.len()).contains(mu)
    {
        return Err(Error::Domain("gap evaluated at an infeasible triple".into()));
    }
    Ok(problem.gap_unchecked(v, s, mu))
}

/// An optimal triple: `(v, s)` minimizing the dual best response by LP, and a feasible
/// stationary `μ` maximizing `min_k (Dᵀμ)_k`.
pub fn constrained_optimal_triple(cfg: &ConstrainedConfig, mdp: &MdpInstance) -> Result<(Vector, Vector, Vector)> {
    let problem = ConstrainedProblem::new(mdp, cfg)?;
    let (best, mu) = max_min_occupancy(mdp, &problem.costs)?;
    if best < 1.0 {
        return Err(Error::InfeasibleInstance(format!("max_μ min_k (Dᵀμ)_k = {best} < 1")));
    }
    // variables: v (free, boxed), s >= 0, z free
    let n = mdp.num_states();
    let kk = cfg.k;
    let nv = n + kk + 1;
    let mut obj = vec![0.0; nv];
    obj[n + kk] = 1.0;
    obj[n..n + kk].iter_mut().for_each(|c| *c = -1.0);
    let mut lp = LinearProgram::minimize(obj);
    for j in 0..n {
        lp.set_free(j);
    }
    lp.set_free(n + kk);
    for pair in 0..mdp.num_pairs() {
        let mut row = problem.flow.row(pair).to_vec();
        row.extend(problem.costs.row(pair));
        row.push(-1.0);
        lp.constrain(row, Relation::Le, 0.0);
    }
    for j in 0..n {
        let mut row = vec![0.0; nv];
        row[j] = 1.0;
        lp.constrain(row.clone(), Relation::Le, cfg.radius);
        lp.constrain(row, Relation::Ge, -cfg.radius);
    }
    let mut cap = vec![0.0; nv];
    cap[n..n + kk].iter_mut().for_each(|c| *c = 1.0);
    lp.constrain(cap, Relation::Le, SLACK_CAP);
    let sol = lp.solve()?;
    let v: Vector = sol.x[..n].iter().map(|x| x.clamp(-cfg.radius, cfg.radius)).collect();
    let s: Vector = sol.x[n..n + kk].iter().map(|x| x.max(0.0)).collect();
    Ok((v, s, mu))
}

/// `μ_{i,a} = ν^π_i π_{i,a}` and its constraint figures.
pub fn policy_constraint_metrics(mdp: &MdpInstance, pi: &Policy) -> Result<(Vector, ConstraintMetrics)> {
    let d = mdp
        .costs()
        .ok_or_else(|| Error::Config("instance has no constraint costs".into()))?;
    let (p, _) = induced_chain(mdp, pi)?;
    let nu = stationary_distribution(&p)?;
    let mu = pi.occupancy(&nu);
    let metrics = ConstraintMetrics {
        min_Dmu: d.tmatvec(&mu).min(),
        stationarity_l1: mdp.stationarity_residual(&mu).norm1(),
        K: d.cols(),
        D_max: d.max_abs(),
    };
    Ok((mu, metrics))
}

#[derive(Debug, Clone)]
pub struct ConstrainedSolveOptions {
    pub eps: f64,
    pub seed: u64,
    pub t_mix: Option<u32>,
    pub constants: ScheduleConstants,
    pub iteration_cap: Option<u64>,
    pub checkpoints: CheckpointPlan,
    pub smd: SmdOptions,
}

impl ConstrainedSolveOptions {
    pub fn new(eps: f64, seed: u64) -> Self {
        Self {
            eps,
            seed,
            t_mix: None,
            constants: ScheduleConstants::three_block(),
            iteration_cap: None,
            checkpoints: CheckpointPlan::None,
            smd: SmdOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstrainedSolution {
    pub report: SolveReport,
    pub policy: Policy,
    pub config: ConstrainedConfig,
    pub run: SmdRun<f64>,
}

/// Three-block SMD followed by rounding the averaged μ to a policy.
pub fn solve_constrained(mdp: &MdpInstance, opts: &ConstrainedSolveOptions) -> Result<ConstrainedSolution> {
    let start = Instant::now();
    if let Some(f) = mdp.feasibility() {
        if f.checked && f.max_min_dmu.is_some_and(|v| v <= 1.0) {
            return Err(Error::InfeasibleInstance("instance is not strictly feasible".into()));
        }
        if !f.checked {
            log::warn!("constraint feasibility of this instance is unchecked");
        }
    }
    let mut cfg = ConstrainedConfig::new(mdp, opts.eps, opts.t_mix, &opts.constants)?;
    let mut full_budget = None;
    if let Some(cap) = opts.iteration_cap {
        if cap < cfg.schedule.iterations {
            log::warn!("capping {} scheduled iterations at {cap}", cfg.schedule.iterations);
            full_budget = Some(cfg.schedule.iterations);
            cfg.schedule.iterations = cap;
        }
    }
    cfg.schedule.checkpoints = opts.checkpoints.clone();

    let problem = ConstrainedProblem::new(mdp, &cfg)?;
    let model = GenerativeModel::new(mdp)?;
    let v_est = ConstrainedVEstimator::new(mdp, &model);
    let s_est = SlackEstimator::new(mdp)?;
    let mu_est = ConstrainedMuEstimator::new(mdp, &model, &cfg)?;
    let est = Estimators {
        x: &v_est,
        s: Some(&s_est),
        y: &mu_est,
    };
    let mut observer = |_: &Averages<f64>| None;
    let run = run_smd(&problem, &est, &cfg.schedule, opts.seed, &opts.smd, &mut observer)?;

    let policy = round_to_policy(&run.averages.y, mdp)?;
    let (_, metrics) = policy_constraint_metrics(mdp, &policy)?;
    let s_avg = run.averages.s.clone().unwrap_or_default();
    let gap = problem.gap(&run.averages.x, &s_avg, &run.averages.y);
    let report = SolveReport {
        mode: "constrained".into(),
        eps: opts.eps,
        seed: opts.seed,
        iterations: run.iterations,
        full_budget,
        samples: run.samples,
        gap,
        subopt: None,
        checkpoints: run.checkpoints.clone(),
        policy: Some(policy.rows().to_vec()),
        constraints: Some(metrics),
        wall_ms: start.elapsed().as_millis() as u64,
    };
    Ok(ConstrainedSolution {
        report,
        policy,
        config: cfg,
        run,
    })
}
