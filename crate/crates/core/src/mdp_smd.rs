//! Mixing average-reward and discounted MDPs as box-simplex saddle problems.
//!
//! Mixing: `min_{v ∈ B_{2M}} max_{μ ∈ Δ^A} μᵀ((P − Î)v + r)` with `M = 2 t_mix`.
//! Discounted: `min_v max_μ (1−γ)qᵀv + μᵀ((γP − Î)v + r)` with `M = 1/(1−γ)`.

use crate::error::{Error, Result};
use crate::mdp::{evaluate_policy, optimal_oracle, GenerativeModel, MdpInstance, Policy};
use crate::numeric::BoxDomain;
use crate::numeric::SimplexDomain;
use crate::report::SolveReport;
use crate::saddle::{
    exact_gap, run_smd, schedule_with, Averages, BilinearProblem, BlockGradients, BoundedEstimator, CheckpointPlan,
    EstimatorBounds, Estimators, IterateView, NormKind, SaddleProblem, ScheduleConstants, SmdOptions, SmdRun,
    SmdSchedule, SparseGradient,
};
use crate::sampling::{AliasTable, RngState};
use crate::Vector;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdpMode {
    Mixing,
    Discounted,
}

impl MdpMode {
    pub fn name(self) -> &'static str {
        match self {
            MdpMode::Mixing => "mixing",
            MdpMode::Discounted => "discounted",
        }
    }
}

/// Domain sizes and the step-size schedule of one MDP solve.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpSaddleConfig {
    pub mode: MdpMode,
    /// Bound on `‖v*‖∞`; the primal box has radius `2M`.
    pub m: f64,
    pub radius: f64,
    /// Target policy accuracy.
    pub eps: f64,
    /// Accuracy asked of the saddle solver.
    pub internal_eps: f64,
    pub schedule: SmdSchedule,
}

impl MdpSaddleConfig {
    /// `t_mix` overrides the instance's recorded mixing time (mixing mode only).
    pub fn new(
        mdp: &MdpInstance,
        mode: MdpMode,
        eps: f64,
        t_mix: Option<u32>,
        consts: &ScheduleConstants,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Config(format!("accuracy must lie in (0,1), got {eps}")));
        }
        let (m, internal_eps, gamma) = match mode {
            MdpMode::Mixing => {
                let t = t_mix
                    .or(mdp.t_mix())
                    .ok_or_else(|| Error::Config("mixing mode needs a mixing-time bound".into()))?;
                if t == 0 {
                    return Err(Error::Config("mixing time must be at least 1".into()));
                }
                (2.0 * t as f64, eps / 3.0, 1.0)
            }
            MdpMode::Discounted => {
                let gamma = mdp
                    .gamma()
                    .ok_or_else(|| Error::Config("discounted mode needs a discount".into()))?;
                if mdp.q().is_none() {
                    return Err(Error::Config("discounted mode needs an initial distribution".into()));
                }
                (1.0 / (1.0 - gamma), (1.0 - gamma) * eps / 3.0, gamma)
            }
        };
        let radius = 2.0 * m;
        let mu = declared_mu_bounds(m, gamma, mdp.num_pairs());
        let schedule = schedule_with(
            consts,
            internal_eps,
            mdp.num_states(),
            radius,
            mdp.num_pairs(),
            V_BOUNDS.v,
            mu.v,
        )?;
        Ok(Self {
            mode,
            m,
            radius,
            eps,
            internal_eps,
            schedule,
        })
    }

    fn gamma(&self, mdp: &MdpInstance) -> f64 {
        match self.mode {
            MdpMode::Mixing => 1.0,
            MdpMode::Discounted => mdp.gamma().unwrap_or(1.0),
        }
    }
}

const V_BOUNDS: EstimatorBounds<f64> = EstimatorBounds {
    c: 1.0,
    v: 2.0,
    norm: NormKind::Euclidean,
};

/// `((2M+1)|A|, 9(M²+1)|A|)` as stated for the μ-side estimators.
pub fn lemma_mu_bounds(m: f64, pairs: usize) -> EstimatorBounds<f64> {
    let a = pairs as f64;
    EstimatorBounds {
        c: (2.0 * m + 1.0) * a,
        v: 9.0 * (m * m + 1.0) * a,
        norm: NormKind::LocalSimplex,
    }
}

/// Bounds that hold on the whole box `B_{2M}`, where `|v_i − γv_j − r| <= 2M(1+γ) + 1`.
/// Never smaller than [`lemma_mu_bounds`].
pub fn declared_mu_bounds(m: f64, gamma: f64, pairs: usize) -> EstimatorBounds<f64> {
    let a = pairs as f64;
    let spread = 2.0 * m * (1.0 + gamma) + 1.0;
    let lemma = lemma_mu_bounds(m, pairs);
    EstimatorBounds {
        c: lemma.c.max(spread * a),
        v: lemma.v.max(spread * spread * a),
        norm: NormKind::LocalSimplex,
    }
}

/// v-side estimator. Mixing: `e_j − e_i`. Discounted: `(1−γ)e_{i'} + γe_j − e_i`.
/// `(i,a) ~ μ`, `j ~ p(·|i,a)`, `i' ~ q`.
pub struct VEstimator<'a> {
    mdp: &'a MdpInstance,
    model: &'a GenerativeModel,
    discount: Option<(f64, AliasTable)>,
}

impl<'a> VEstimator<'a> {
    pub fn mixing(mdp: &'a MdpInstance, model: &'a GenerativeModel) -> Self {
        Self {
            mdp,
            model,
            discount: None,
        }
    }

    pub fn discounted(mdp: &'a MdpInstance, model: &'a GenerativeModel) -> Result<Self> {
        let gamma = mdp
            .gamma()
            .ok_or_else(|| Error::Config("instance has no discount".into()))?;
        let q = mdp
            .q()
            .ok_or_else(|| Error::Config("instance has no initial distribution".into()))?;
        Ok(Self {
            mdp,
            model,
            discount: Some((gamma, AliasTable::build(q)?)),
        })
    }
}

impl BoundedEstimator<f64> for VEstimator<'_> {
    fn bounds(&self) -> EstimatorBounds<f64> {
        V_BOUNDS
    }

    fn draw(&self, it: &IterateView<'_, f64>, rng: &mut RngState, out: &mut SparseGradient<f64>) -> u64 {
        let k = it.y.sample(rng);
        let i = self.mdp.state_of(k);
        let j = self.model.sample_pair(k, rng);
        match &self.discount {
            None => {
                out.push(j, 1.0);
                out.push(i, -1.0);
            }
            Some((gamma, q)) => {
                let start = q.sample(rng);
                out.push(start, 1.0 - gamma);
                out.push(j, *gamma);
                out.push(i, -1.0);
            }
        }
        1
    }
}

/// μ-side estimator `|A|(v_i − γv_j − r_{i,a}) e_{(i,a)}` with `(i,a)` uniform, `γ = 1` when mixing.
pub struct MuEstimator<'a> {
    mdp: &'a MdpInstance,
    model: &'a GenerativeModel,
    gamma: f64,
    bounds: EstimatorBounds<f64>,
}

impl<'a> MuEstimator<'a> {
    pub fn new(mdp: &'a MdpInstance, model: &'a GenerativeModel, cfg: &MdpSaddleConfig) -> Self {
        let gamma = cfg.gamma(mdp);
        Self {
            mdp,
            model,
            gamma,
            bounds: declared_mu_bounds(cfg.m, gamma, mdp.num_pairs()),
        }
    }
}

impl BoundedEstimator<f64> for MuEstimator<'_> {
    fn bounds(&self) -> EstimatorBounds<f64> {
        self.bounds
    }

    fn draw(&self, it: &IterateView<'_, f64>, rng: &mut RngState, out: &mut SparseGradient<f64>) -> u64 {
        let pairs = self.mdp.num_pairs();
        let k = rng.below(pairs);
        let i = self.mdp.state_of(k);
        let j = self.model.sample_pair(k, rng);
        let value = it.x[i] - self.gamma * it.x[j] - self.mdp.rewards()[k];
        out.push(k, pairs as f64 * value);
        1
    }
}

/// The MDP minimax problem in box-simplex bilinear form `μᵀ A v + bᵀv − cᵀμ`.
#[derive(Debug, Clone)]
pub struct MdpSaddleProblem {
    inner: BilinearProblem<f64>,
}

impl MdpSaddleProblem {
    pub fn new(mdp: &MdpInstance, cfg: &MdpSaddleConfig) -> Result<Self> {
        let gamma = cfg.gamma(mdp);
        let s = mdp.num_states();
        let mut a = mdp.transitions().scaled(gamma);
        for k in 0..mdp.num_pairs() {
            a[(k, mdp.state_of(k))] -= 1.0;
        }
        let b = match cfg.mode {
            MdpMode::Mixing => Vector::zeros(s),
            MdpMode::Discounted => mdp
                .q()
                .ok_or_else(|| Error::Config("discounted mode needs an initial distribution".into()))?
                .scaled(1.0 - gamma),
        };
        let c = mdp.rewards().scaled(-1.0);
        Ok(Self {
            inner: BilinearProblem::new(a, b, c, cfg.radius)?,
        })
    }

    pub fn bilinear(&self) -> &BilinearProblem<f64> {
        &self.inner
    }

    pub fn objective(&self, v: &[f64], mu: &[f64]) -> f64 {
        self.inner.objective(v, mu)
    }
}

impl SaddleProblem<f64> for MdpSaddleProblem {
    fn primal(&self) -> BoxDomain<f64> {
        self.inner.primal()
    }

    fn dual(&self) -> SimplexDomain {
        self.inner.dual()
    }

    fn gradients(&self, x: &[f64], s: &[f64], y: &[f64]) -> BlockGradients<f64> {
        self.inner.gradients(x, s, y)
    }

    fn gap(&self, x: &[f64], s: &[f64], y: &[f64]) -> f64 {
        self.inner.gap(x, s, y)
    }
}

/// Exact duality gap of `(v, μ)`. Mixing:
/// `max[(P − Î)v + r] − μᵀr + 2M‖(Î − P)ᵀμ‖₁`; the discounted form adds the `(1−γ)q` terms.
pub fn exact_mdp_gap(cfg: &MdpSaddleConfig, mdp: &MdpInstance, v: &[f64], mu: &[f64]) -> Result<f64> {
    exact_gap(MdpSaddleProblem::new(mdp, cfg)?.bilinear(), v, mu)
}

/// State marginal `λ_i = Σ_a μ_{i,a}`.
pub fn state_marginal(mu: &[f64], mdp: &MdpInstance) -> Vector {
    (0..mdp.num_states())
        .map(|i| {
            let o = mdp.offset(i);
            mu[o..o + mdp.actions()[i]].iter().sum()
        })
        .collect()
}

/// `π_i = μ_{i,·}/λ_i`, uniform where `λ_i <= 1e-12`.
pub fn round_to_policy(mu: &[f64], mdp: &MdpInstance) -> Result<Policy> {
    if mu.len() != mdp.num_pairs() {
        return Err(Error::DimensionMismatch(
            "μ needs one entry per state-action pair".into(),
        ));
    }
    let lambda = state_marginal(mu, mdp);
    let rows = (0..mdp.num_states())
        .map(|i| {
            let o = mdp.offset(i);
            let na = mdp.actions()[i];
            if lambda[i] > 1e-12 {
                mu[o..o + na].iter().map(|w| w.max(0.0) / lambda[i]).collect()
            } else {
                vec![1.0 / na as f64; na]
            }
        })
        .collect();
    Policy::new(mdp, rows)
}

#[derive(Debug, Clone)]
pub struct MdpSolveOptions {
    pub mode: MdpMode,
    pub eps: f64,
    pub seed: u64,
    /// Mixing-time bound; defaults to the instance's recorded value.
    pub t_mix: Option<u32>,
    pub constants: ScheduleConstants,
    /// Stop after this many iterations even if the schedule asks for more.
    pub iteration_cap: Option<u64>,
    pub checkpoints: CheckpointPlan,
    pub smd: SmdOptions,
    /// Evaluate rounded policies against the exact optimum (desk-scale instances only).
    pub with_oracle: bool,
}

impl MdpSolveOptions {
    pub fn new(mode: MdpMode, eps: f64, seed: u64) -> Self {
        Self {
            mode,
            eps,
            seed,
            t_mix: None,
            constants: ScheduleConstants::default(),
            iteration_cap: None,
            checkpoints: CheckpointPlan::None,
            smd: SmdOptions::default(),
            with_oracle: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MdpSolution {
    pub report: SolveReport,
    pub policy: Policy,
    pub config: MdpSaddleConfig,
    pub run: SmdRun<f64>,
    /// Exact optimal value, when the oracle ran.
    pub optimal: Option<f64>,
}

/// Runs SMD on the MDP minimax problem and rounds the averaged μ to a policy.
pub fn solve_mdp(mdp: &MdpInstance, opts: &MdpSolveOptions) -> Result<MdpSolution> {
    let start = Instant::now();
    let mut cfg = MdpSaddleConfig::new(mdp, opts.mode, opts.eps, opts.t_mix, &opts.constants)?;
    let mut full_budget = None;
    if let Some(cap) = opts.iteration_cap {
        if cap < cfg.schedule.iterations {
            log::warn!("capping {} scheduled iterations at {cap}", cfg.schedule.iterations);
            full_budget = Some(cfg.schedule.iterations);
            cfg.schedule.iterations = cap;
        }
    }
    cfg.schedule.checkpoints = opts.checkpoints.clone();

    let problem = MdpSaddleProblem::new(mdp, &cfg)?;
    let model = GenerativeModel::new(mdp)?;
    let v_est = match opts.mode {
        MdpMode::Mixing => VEstimator::mixing(mdp, &model),
        MdpMode::Discounted => VEstimator::discounted(mdp, &model)?,
    };
    let mu_est = MuEstimator::new(mdp, &model, &cfg);
    let est = Estimators {
        x: &v_est,
        s: None,
        y: &mu_est,
    };

    let optimal = if opts.with_oracle {
        match optimal_oracle(mdp) {
            Ok(sol) => Some(sol.v_bar),
            Err(Error::OracleTooLarge(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let subopt_of = |mu: &[f64]| -> Option<f64> {
        let best = optimal?;
        let pi = round_to_policy(mu, mdp).ok()?;
        Some(best - evaluate_policy(mdp, &pi).ok()?.v_bar)
    };
    let mut observer = |avg: &Averages<f64>| subopt_of(&avg.y);
    let run = run_smd(&problem, &est, &cfg.schedule, opts.seed, &opts.smd, &mut observer)?;

    let policy = round_to_policy(&run.averages.y, mdp)?;
    let subopt = subopt_of(&run.averages.y);
    let gap = problem.gap(&run.averages.x, &[], &run.averages.y);
    let report = SolveReport {
        mode: opts.mode.name().into(),
        eps: opts.eps,
        seed: opts.seed,
        iterations: run.iterations,
        full_budget,
        samples: run.samples,
        gap,
        subopt,
        checkpoints: run.checkpoints.clone(),
        policy: Some(policy.rows().to_vec()),
        constraints: None,
        wall_ms: start.elapsed().as_millis() as u64,
    };
    Ok(MdpSolution {
        report,
        policy,
        config: cfg,
        run,
        optimal,
    })
}

/// Exact gradient blocks of the MDP problem, for estimator checks.
pub fn exact_mdp_gradients(problem: &MdpSaddleProblem, v: &[f64], mu: &[f64]) -> (Vector, Vector) {
    let g = problem.gradients(v, &[], mu);
    (g.x, g.y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> MdpInstance {
        MdpInstance::new(
            vec![2, 2],
            vec![vec![0.9, 0.1], vec![0.2, 0.8], vec![0.5, 0.5], vec![0.1, 0.9]],
            vec![0.2, 0.6, 1.0, 0.3],
        )
        .unwrap()
        .with_mixing_time(2)
    }

    #[test]
    fn rounding_examples() {
        let single = MdpInstance::new(vec![1, 1], vec![vec![0.5, 0.5]; 2], vec![0.0, 1.0]).unwrap();
        let pi = round_to_policy(&[0.3, 0.7], &single).unwrap();
        assert_eq!(pi.rows(), &[vec![1.0], vec![1.0]]);
        assert_eq!(state_marginal(&[0.3, 0.7], &single).as_slice(), &[0.3, 0.7]);

        let mdp = MdpInstance::new(vec![2, 1], vec![vec![0.5, 0.5]; 3], vec![0.0; 3]).unwrap();
        let pi = round_to_policy(&[0.2, 0.2, 0.6], &mdp).unwrap();
        assert_eq!(pi.rows(), &[vec![0.5, 0.5], vec![1.0]]);
        let pi = round_to_policy(&[0.0, 0.0, 1.0], &mdp).unwrap();
        assert_eq!(pi.rows(), &[vec![0.5, 0.5], vec![1.0]]);
        assert!(round_to_policy(&[1.0], &mdp).is_err());
    }

    #[test]
    fn one_state_gap_vanishes() {
        let mdp = MdpInstance::new(vec![1], vec![vec![1.0]], vec![1.0])
            .unwrap()
            .with_mixing_time(1);
        let cfg = MdpSaddleConfig::new(&mdp, MdpMode::Mixing, 0.1, None, &ScheduleConstants::default()).unwrap();
        for v in [-4.0, 0.0, 3.5] {
            assert!(exact_mdp_gap(&cfg, &mdp, &[v], &[1.0]).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn optimal_pair_has_zero_gap() {
        let mdp = two_state();
        let cfg = MdpSaddleConfig::new(&mdp, MdpMode::Mixing, 0.1, None, &ScheduleConstants::default()).unwrap();
        let opt = optimal_oracle(&mdp).unwrap();
        let nu = evaluate_policy(&mdp, &opt.policy).unwrap().stationary.unwrap();
        let mu = opt.policy.occupancy(&nu);
        assert!(exact_mdp_gap(&cfg, &mdp, &opt.values, &mu).unwrap() <= 1e-8);
        // a suboptimal policy's occupancy leaves a gap of at least its value loss
        let bad = Policy::deterministic(&mdp, &[0, 1]).unwrap();
        let eval = evaluate_policy(&mdp, &bad).unwrap();
        let mu_bad = bad.occupancy(eval.stationary.as_ref().unwrap());
        let gap = exact_mdp_gap(&cfg, &mdp, &opt.values, &mu_bad).unwrap();
        assert!(gap >= opt.v_bar - eval.v_bar - 1e-12);
    }

    #[test]
    fn config_rejects_accuracy_outside_unit_interval() {
        let mdp = MdpInstance::new(vec![1], vec![vec![1.0]], vec![0.5])
            .unwrap()
            .with_mixing_time(1);
        for eps in [0.0, 1.0, 1.5] {
            assert!(matches!(
                MdpSaddleConfig::new(&mdp, MdpMode::Mixing, eps, None, &ScheduleConstants::default()),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn config_radii_and_errors() {
        let mdp = two_state();
        let k = ScheduleConstants::default();
        let cfg = MdpSaddleConfig::new(&mdp, MdpMode::Mixing, 0.3, None, &k).unwrap();
        assert_eq!((cfg.m, cfg.radius), (4.0, 8.0));
        assert!((cfg.internal_eps - 0.1).abs() < 1e-15);
        assert_eq!(
            MdpSaddleConfig::new(&mdp, MdpMode::Mixing, 0.3, Some(3), &k).unwrap().m,
            6.0
        );
        assert!(matches!(
            MdpSaddleConfig::new(&mdp, MdpMode::Discounted, 0.3, None, &k),
            Err(Error::Config(_))
        ));
        let no_q = two_state().with_discount(0.5, None).unwrap();
        assert!(matches!(
            MdpSaddleConfig::new(&no_q, MdpMode::Discounted, 0.3, None, &k),
            Err(Error::Config(_))
        ));
        let model = GenerativeModel::new(&no_q).unwrap();
        assert!(VEstimator::discounted(&no_q, &model).is_err());
        let dm = two_state().with_discount(0.75, Some(vec![0.5, 0.5])).unwrap();
        let cfg = MdpSaddleConfig::new(&dm, MdpMode::Discounted, 0.3, None, &k).unwrap();
        assert_eq!((cfg.m, cfg.radius), (4.0, 8.0));
        assert!((cfg.internal_eps - 0.025).abs() < 1e-15);
    }

    #[test]
    fn declared_bounds_dominate_lemma() {
        for m in [0.5, 2.0, 10.0] {
            for gamma in [0.5, 0.99, 1.0] {
                let l = lemma_mu_bounds(m, 6);
                let d = declared_mu_bounds(m, gamma, 6);
                assert!(d.c >= l.c && d.v >= l.v);
                assert!(d.c >= (2.0 * m * (1.0 + gamma) + 1.0) * 6.0);
            }
        }
    }

    #[test]
    fn single_policy_solve_is_exact() {
        let mdp = MdpInstance::new(vec![1, 1], vec![vec![0.3, 0.7], vec![0.6, 0.4]], vec![0.1, 0.9])
            .unwrap()
            .with_mixing_time(1);
        let mut opts = MdpSolveOptions::new(MdpMode::Mixing, 0.2, 3);
        opts.iteration_cap = Some(2000);
        let sol = solve_mdp(&mdp, &opts).unwrap();
        assert_eq!(sol.policy.rows(), &[vec![1.0], vec![1.0]]);
        assert_eq!(sol.report.subopt, Some(0.0));
        assert_eq!(sol.report.iterations, 2000);
        assert_eq!(sol.report.samples, 2 * sol.report.iterations);
        assert!(sol.report.full_budget.unwrap() > 2000);
    }
}
