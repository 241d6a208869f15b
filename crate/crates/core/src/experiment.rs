//! Helpers for seed ensembles, scaling fits and the exact lemma checks.

use crate::constrained::{
    slack_bounds, ConstrainedConfig, ConstrainedMuEstimator, ConstrainedProblem, SlackEstimator, SLACK_CAP,
};
use crate::error::{Error, Result};
use crate::game::{GameInstance, GameXEstimator, GameYEstimator};
use crate::mdp::{
    deterministic_policy_count, for_each_deterministic_policy, generate_instance, induced_chain, mixing_time,
    optimal_oracle, power_decay_check, verify_norm_bounds, GenerativeModel, GeneratorParams, InstanceKind, MdpInstance,
    Policy,
};
use crate::mdp_smd::{MdpMode, MdpSaddleConfig, MdpSaddleProblem, MuEstimator, VEstimator};
use crate::saddle::{
    BoundedEstimator, Checkpoint, DualWeights, EstimatorBounds, IterateView, NormKind, SaddleProblem,
    ScheduleConstants, SparseGradient,
};
use crate::sampling::{RngState, SamplerKind, Stream};
use crate::Matrix;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

/// Median, averaging the two middle values for even counts. `None` when empty or any NaN.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Fraction of `values` at most `threshold`.
pub fn fraction_at_most(values: &[f64], threshold: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|v| **v <= threshold).count() as f64 / values.len() as f64
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::DimensionMismatch("need at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all x values coincide".into()));
    }
    Ok(sxy / sxx)
}

/// Samples consumed at the first checkpoint whose suboptimality is at most `target`.
pub fn samples_to_target(checkpoints: &[Checkpoint], target: f64) -> Option<u64> {
    checkpoints
        .iter()
        .find(|c| c.subopt.is_some_and(|s| s <= target))
        .map(|c| c.samples)
}

/// Random policy with rows drawn uniformly from each action simplex.
pub fn random_policy(mdp: &MdpInstance, rng: &mut RngState) -> Result<Policy> {
    let rows = mdp
        .actions()
        .iter()
        .map(|&na| {
            let raw: Vec<f64> = (0..na).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / total).collect()
        })
        .collect();
    Policy::new(mdp, rows)
}

/// Outcome of one exact lemma check over a family of instances.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub instances: usize,
    pub checks: usize,
    pub failures: usize,
    /// Largest `measured / bound`.
    pub worst_ratio: f64,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            instances: 0,
            checks: 0,
            failures: 0,
            worst_ratio: 0.0,
        }
    }

    fn record(&mut self, measured: f64, bound: f64, pass: bool) {
        self.checks += 1;
        self.worst_ratio = self.worst_ratio.max(measured / bound);
        if !pass {
            self.failures += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checks > 0
    }
}

// sizes cycle through small families so the suites cover several shapes
fn family(index: usize) -> GeneratorParams {
    GeneratorParams {
        states: 2 + index % 5,
        actions: 2 + index % 2,
        alpha: [0.1, 0.2, 0.3, 0.5, 0.8][(index / 5) % 5],
        ..Default::default()
    }
}

fn family_instance(kind: InstanceKind, index: usize, seed: u64) -> Result<MdpInstance> {
    let mut rng = RngState::for_role(seed.wrapping_add(index as u64), Stream::Generator);
    generate_instance(kind, &family(index), &mut rng)
}

/// `‖(I − P^π + 1νᵀ)⁻¹‖∞ <= 2 t_mix` over every deterministic policy of `count` mixing
/// instances with at most 6 states.
pub fn mixing_norm_suite(count: usize, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("mixing inverse norm");
    for idx in 0..count {
        let mdp = family_instance(InstanceKind::RandomMixing, idx, seed)?;
        report.instances += 1;
        for_each_deterministic_policy(&mdp, |choice| {
            let pi = Policy::deterministic(&mdp, choice)?;
            let check = verify_norm_bounds(&mdp, &pi)?;
            report.record(check.measured, check.bound, check.pass);
            Ok(())
        })?;
    }
    Ok(report)
}

/// `‖(I − γP^π)⁻¹‖∞ <= 1/(1−γ)` for `policies` random policies on each of `count` discounted instances.
pub fn discounted_norm_suite(count: usize, policies: usize, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("discounted inverse norm");
    let mut rng = RngState::for_role(seed, Stream::Test);
    for idx in 0..count {
        let mut params = family(idx);
        params.gamma = [0.5, 0.9, 0.99][idx % 3];
        let mut grng = RngState::for_role(seed.wrapping_add(idx as u64), Stream::Generator);
        let mdp = generate_instance(InstanceKind::RandomDmdp, &params, &mut grng)?;
        report.instances += 1;
        for _ in 0..policies {
            let pi = random_policy(&mdp, &mut rng)?;
            let check = verify_norm_bounds(&mdp, &pi)?;
            report.record(check.measured, check.bound, check.pass);
        }
    }
    Ok(report)
}

/// `‖v*‖∞ <= 2 t_mix` (mixing) and `‖v*‖∞ <= 1/(1−γ)` (discounted) for the oracle's `v*`.
pub fn optimal_value_suite(count: usize, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("optimal value vector norm");
    for idx in 0..count {
        let mdp = family_instance(InstanceKind::RandomMixing, idx, seed)?;
        let t = mdp
            .t_mix()
            .ok_or_else(|| Error::Config("generated instance lacks a mixing time".into()))?;
        let opt = optimal_oracle(&mdp)?;
        let bound = 2.0 * t as f64;
        let measured = opt.values.norm_inf();
        report.record(measured, bound, measured <= bound + 1e-9);

        let mut params = family(idx);
        params.gamma = 0.9;
        let mut grng = RngState::for_role(seed.wrapping_add(idx as u64), Stream::Generator);
        let dmdp = generate_instance(InstanceKind::RandomDmdp, &params, &mut grng)?;
        let opt = optimal_oracle(&dmdp)?;
        let bound = 1.0 / (1.0 - params.gamma);
        let measured = opt.values.norm_inf();
        report.record(measured, bound, measured <= bound + 1e-9);
        report.instances += 2;
    }
    Ok(report)
}

/// `‖(P^π)^k − 1νᵀ‖∞ <= 2^{-⌊k/t_mix⌋}` for `t_mix <= k <= 10 t_mix` over deterministic policies.
pub fn power_decay_suite(count: usize, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("power decay");
    for idx in 0..count {
        let mdp = family_instance(InstanceKind::RandomMixing, idx, seed)?;
        report.instances += 1;
        for_each_deterministic_policy(&mdp, |choice| {
            let pi = Policy::deterministic(&mdp, choice)?;
            let (p, _) = induced_chain(&mdp, &pi)?;
            let decay = power_decay_check(&p, 10)?;
            report.record(decay.worst_ratio, 1.0, decay.pass);
            Ok(())
        })?;
    }
    Ok(report)
}

/// Empirical behaviour of one estimator at a frozen iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorCheck {
    pub draws: u64,
    /// Largest coordinate gap between the empirical mean and the exact gradient.
    pub mean_error: f64,
    /// `4 sqrt(v / N)` with the declared `v`.
    pub band: f64,
    /// Empirical second moment in the declared norm.
    pub second_moment: f64,
    pub moment_bound: f64,
    /// Largest `|g|∞` seen.
    pub max_entry: f64,
    /// Draws above the declared max-entry bound.
    pub entry_violations: u64,
    /// Draws above the reference max-entry bound, when that is tighter than the declared one.
    pub reference_exceedances: u64,
}

impl EstimatorCheck {
    pub fn passed(&self) -> bool {
        self.mean_error <= self.band && self.second_moment <= 1.05 * self.moment_bound && self.entry_violations == 0
    }
}

/// Draws `draws` gradients at a frozen iterate and compares them with `exact`.
///
/// `reference` supplies the second-moment bound to test against and a max-entry bound whose
/// exceedances are only counted. Local norms are measured at `probe` when given, otherwise at
/// the iterate itself.
pub fn check_estimator(
    est: &dyn BoundedEstimator<f64>,
    it: &IterateView<'_, f64>,
    exact: &[f64],
    reference: EstimatorBounds<f64>,
    probe: Option<&[f64]>,
    draws: u64,
    seed: u64,
) -> Result<EstimatorCheck> {
    let dim = exact.len();
    let declared = est.bounds();
    let weights: Vec<f64> = match (declared.norm, probe) {
        (NormKind::Euclidean, _) => vec![1.0; dim],
        (_, Some(p)) => p.to_vec(),
        (NormKind::LocalSimplex, None) => it.y.probabilities().to_vec(),
        (NormKind::LocalCapped, None) => it.s.to_vec(),
    };
    if weights.len() != dim {
        return Err(Error::DimensionMismatch(
            "norm weights and gradient differ in length".into(),
        ));
    }
    let weight_total: f64 = weights.iter().sum();
    let mut rng = RngState::for_role(seed, Stream::Test);
    let mut g = SparseGradient::new();
    let mut sums = vec![0.0; dim];
    let mut shift_sum = 0.0;
    let (mut moment, mut max_entry) = (0.0, 0.0f64);
    let (mut violations, mut exceed) = (0, 0);
    for _ in 0..draws {
        g.clear();
        est.draw(it, &mut rng, &mut g);
        let shift = g.shift();
        shift_sum += shift;
        let mut m = shift * shift * weight_total;
        for &(i, v) in g.entries() {
            sums[i] += v;
            m += weights[i] * ((v + shift) * (v + shift) - shift * shift);
        }
        moment += m;
        let top = g.max_abs(dim);
        max_entry = max_entry.max(top);
        if top > declared.c * (1.0 + 1e-12) {
            violations += 1;
        }
        if top > reference.c * (1.0 + 1e-12) {
            exceed += 1;
        }
    }
    let n = draws.max(1) as f64;
    let mean_error = sums
        .iter()
        .zip(exact)
        .map(|(s, e)| ((s + shift_sum) / n - e).abs())
        .fold(0.0, f64::max);
    Ok(EstimatorCheck {
        draws,
        mean_error,
        band: 4.0 * (declared.v / n).sqrt(),
        second_moment: moment / n,
        moment_bound: reference.v,
        max_entry,
        entry_violations: violations,
        reference_exceedances: exceed,
    })
}

/// Status of one row of the lemma table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RowStatus {
    Pass,
    Fail,
    Skip,
}

/// One lemma-level check with its measured value against the bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaRow {
    pub check: String,
    pub status: RowStatus,
    pub measured: f64,
    pub bound: f64,
    pub note: String,
}

impl LemmaRow {
    fn skip(check: &str, note: String) -> Self {
        Self {
            check: check.into(),
            status: RowStatus::Skip,
            measured: f64::NAN,
            bound: f64::NAN,
            note,
        }
    }

    fn from_suite(check: &str, s: &SuiteReport) -> Self {
        Self {
            check: check.into(),
            status: if s.passed() { RowStatus::Pass } else { RowStatus::Fail },
            measured: s.worst_ratio,
            bound: 1.0,
            note: format!(
                "worst measured/bound over {} checks on {} instances",
                s.checks, s.instances
            ),
        }
    }

    fn from_estimator(check: &str, checks: &[EstimatorCheck]) -> Self {
        let pass = checks.iter().all(EstimatorCheck::passed);
        let worst = checks
            .iter()
            .max_by(|a, b| (a.second_moment / a.moment_bound).total_cmp(&(b.second_moment / b.moment_bound)))
            .expect("at least one estimator check");
        let mean_ratio = checks.iter().map(|c| c.mean_error / c.band).fold(0.0, f64::max);
        let violations: u64 = checks.iter().map(|c| c.entry_violations).sum();
        Self {
            check: check.into(),
            status: if pass { RowStatus::Pass } else { RowStatus::Fail },
            measured: worst.second_moment,
            bound: worst.moment_bound,
            note: format!("second moment; mean error/band {mean_ratio:.2}, max-entry violations {violations}"),
        }
    }

    pub fn passed(&self) -> bool {
        self.status != RowStatus::Fail
    }
}

const LEMMA_DRAWS: u64 = 100_000;
const LEMMA_ITERATES: usize = 3;

fn box_point(n: usize, radius: f64, rng: &mut RngState) -> Vec<f64> {
    (0..n).map(|_| (2.0 * rng.uniform() - 1.0) * radius).collect()
}

// bounded away from the boundary so no weight is zero
fn simplex_point(n: usize, rng: &mut RngState) -> Vec<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|_| {
            let e: f64 = Exp1.sample(rng);
            e + 1e-3
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn game_rows(seed: u64) -> Result<Vec<LemmaRow>> {
    let mut rng = RngState::for_role(seed, Stream::Test);
    let (m, n) = (4, 3);
    let entries = (0..m * n).map(|_| 2.0 * rng.uniform() - 1.0).collect();
    let game = GameInstance::new(
        Matrix::new(m, n, entries)?,
        box_point(n, 1.0, &mut rng).into(),
        box_point(m, 1.0, &mut rng).into(),
        1.5,
    )?;
    let (xe, ye) = (GameXEstimator::new(&game, false)?, GameYEstimator::new(&game)?);
    let (mut cx, mut cy) = (Vec::new(), Vec::new());
    for t in 0..LEMMA_ITERATES as u64 {
        let x = box_point(n, game.radius(), &mut rng);
        let y = simplex_point(m, &mut rng);
        let w = DualWeights::new(SamplerKind::SumTree, &y)?;
        let it = IterateView { x: &x, s: &[], y: &w };
        let g = game.problem().gradients(&x, &[], &y);
        cx.push(check_estimator(
            &xe,
            &it,
            &g.x,
            xe.bounds(),
            None,
            LEMMA_DRAWS,
            seed + t,
        )?);
        cy.push(check_estimator(
            &ye,
            &it,
            &g.y,
            ye.bounds(),
            None,
            LEMMA_DRAWS,
            seed + 100 + t,
        )?);
    }
    Ok(vec![
        LemmaRow::from_estimator("game x estimator", &cx),
        LemmaRow::from_estimator("game y estimator", &cy),
    ])
}

const V_REFERENCE: EstimatorBounds<f64> = EstimatorBounds {
    c: 1.0,
    v: 2.0,
    norm: NormKind::Euclidean,
};

fn mdp_estimator_rows(mdp: &MdpInstance, mode: MdpMode, t_mix: Option<u32>, seed: u64) -> Result<Vec<LemmaRow>> {
    let cfg = MdpSaddleConfig::new(mdp, mode, 0.1, t_mix, &ScheduleConstants::default())?;
    let problem = MdpSaddleProblem::new(mdp, &cfg)?;
    let model = GenerativeModel::new(mdp)?;
    let ve = match mode {
        MdpMode::Mixing => VEstimator::mixing(mdp, &model),
        MdpMode::Discounted => VEstimator::discounted(mdp, &model)?,
    };
    let me = MuEstimator::new(mdp, &model, &cfg);
    let reference = crate::mdp_smd::lemma_mu_bounds(cfg.m, mdp.num_pairs());
    let mut rng = RngState::for_role(seed, Stream::Test);
    let (mut cv, mut cm) = (Vec::new(), Vec::new());
    for t in 0..LEMMA_ITERATES as u64 {
        let v = box_point(mdp.num_states(), cfg.radius, &mut rng);
        let mu = simplex_point(mdp.num_pairs(), &mut rng);
        let w = DualWeights::new(SamplerKind::SumTree, &mu)?;
        let it = IterateView { x: &v, s: &[], y: &w };
        let g = problem.gradients(&v, &[], &mu);
        cv.push(check_estimator(
            &ve,
            &it,
            &g.x,
            V_REFERENCE,
            None,
            LEMMA_DRAWS,
            seed + t,
        )?);
        cm.push(check_estimator(
            &me,
            &it,
            &g.y,
            reference,
            None,
            LEMMA_DRAWS,
            seed + 100 + t,
        )?);
    }
    let name = mode.name();
    Ok(vec![
        LemmaRow::from_estimator(&format!("{name} v estimator"), &cv),
        LemmaRow::from_estimator(&format!("{name} mu estimator"), &cm),
    ])
}

fn constrained_estimator_rows(mdp: &MdpInstance, t_mix: Option<u32>, seed: u64) -> Result<Vec<LemmaRow>> {
    let cfg = ConstrainedConfig::new(mdp, 0.1, t_mix, &ScheduleConstants::three_block())?;
    let problem = ConstrainedProblem::new(mdp, &cfg)?;
    let model = GenerativeModel::new(mdp)?;
    let se = SlackEstimator::new(mdp)?;
    let me = ConstrainedMuEstimator::new(mdp, &model, &cfg)?;
    let reference = crate::constrained::lemma_mu_bounds(cfg.m, cfg.d_max, mdp.num_pairs());
    let mut rng = RngState::for_role(seed, Stream::Test);
    let (mut cs, mut cm) = (Vec::new(), Vec::new());
    for t in 0..LEMMA_ITERATES as u64 {
        let v = box_point(mdp.num_states(), cfg.radius, &mut rng);
        let mass = SLACK_CAP * rng.uniform();
        let s: Vec<f64> = simplex_point(cfg.k, &mut rng).into_iter().map(|p| p * mass).collect();
        let mu = simplex_point(mdp.num_pairs(), &mut rng);
        let w = DualWeights::new(SamplerKind::SumTree, &mu)?;
        let it = IterateView { x: &v, s: &s, y: &w };
        let g = problem.gradients(&v, &s, &mu);
        let gs = g.s.expect("constrained problem has a slack block");
        cs.push(check_estimator(
            &se,
            &it,
            &gs,
            slack_bounds(cfg.k, cfg.d_max),
            None,
            LEMMA_DRAWS,
            seed + t,
        )?);
        cm.push(check_estimator(
            &me,
            &it,
            &g.y,
            reference,
            None,
            LEMMA_DRAWS,
            seed + 100 + t,
        )?);
    }
    Ok(vec![
        LemmaRow::from_estimator("constrained s estimator", &cs),
        LemmaRow::from_estimator("constrained mu estimator", &cm),
    ])
}

/// The full lemma table on generated instances.
pub fn builtin_suite(seed: u64) -> Result<Vec<LemmaRow>> {
    let mut rows = game_rows(seed)?;
    rows.push(LemmaRow::from_suite(
        "mixing inverse norm",
        &mixing_norm_suite(10, seed)?,
    ));
    rows.push(LemmaRow::from_suite(
        "optimal value norm",
        &optimal_value_suite(10, seed)?,
    ));
    rows.push(LemmaRow::from_suite(
        "discounted inverse norm",
        &discounted_norm_suite(10, 10, seed)?,
    ));
    rows.push(LemmaRow::from_suite("power decay", &power_decay_suite(10, seed)?));

    let params = GeneratorParams {
        states: 3,
        actions: 2,
        alpha: 0.5,
        ..Default::default()
    };
    let mut grng = RngState::for_role(seed, Stream::Generator);
    let mixing = generate_instance(InstanceKind::RandomMixing, &params, &mut grng)?;
    rows.extend(mdp_estimator_rows(&mixing, MdpMode::Mixing, None, seed)?);
    let discounted = generate_instance(InstanceKind::RandomDmdp, &params, &mut grng)?;
    rows.extend(mdp_estimator_rows(&discounted, MdpMode::Discounted, None, seed)?);
    let constrained = generate_instance(InstanceKind::Constrained, &params, &mut grng)?;
    rows.extend(constrained_estimator_rows(&constrained, None, seed)?);
    Ok(rows)
}

fn skippable(e: &Error) -> bool {
    matches!(
        e,
        Error::NotMixing(_) | Error::NonUniqueStationary | Error::OracleTooLarge(_)
    )
}

/// Policies to check on one instance: every deterministic one when there are few, else random ones.
fn policies_of(mdp: &MdpInstance, seed: u64) -> Result<Vec<Policy>> {
    let mut out = Vec::new();
    if deterministic_policy_count(mdp) <= 4096 {
        for_each_deterministic_policy(mdp, |choice| {
            out.push(Policy::deterministic(mdp, choice)?);
            Ok(())
        })?;
    } else {
        let mut rng = RngState::for_role(seed, Stream::Test);
        for _ in 0..200 {
            out.push(random_policy(mdp, &mut rng)?);
        }
    }
    Ok(out)
}

/// Lemma table for one instance. Checks that need a mixing chain are skipped when the
/// instance (or one of its policies) does not mix.
pub fn instance_suite(mdp: &MdpInstance, seed: u64) -> Result<Vec<LemmaRow>> {
    let mut rows = Vec::new();
    let policies = policies_of(mdp, seed)?;
    let norm_name = if mdp.gamma().is_some() {
        "discounted inverse norm"
    } else {
        "mixing inverse norm"
    };
    let mut norm = Ok((0.0f64, 0.0f64, true));
    for pi in &policies {
        match verify_norm_bounds(mdp, pi) {
            Ok(c) => {
                if let Ok((m, b, p)) = &mut norm {
                    if c.measured / c.bound >= *m / b.max(f64::MIN_POSITIVE) {
                        (*m, *b) = (c.measured, c.bound);
                    }
                    *p &= c.pass;
                }
            }
            Err(e) if skippable(&e) => {
                norm = Err(e);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    rows.push(match norm {
        Ok((measured, bound, pass)) => LemmaRow {
            check: norm_name.into(),
            status: if pass { RowStatus::Pass } else { RowStatus::Fail },
            measured,
            bound,
            note: format!("worst of {} policies", policies.len()),
        },
        Err(e) => LemmaRow::skip(norm_name, e.to_string()),
    });

    if mdp.gamma().is_none() {
        let mut decay = Ok((0.0f64, true));
        for pi in &policies {
            let step = induced_chain(mdp, pi).and_then(|(p, _)| power_decay_check(&p, 10));
            match step {
                Ok(d) => {
                    if let Ok((w, pass)) = &mut decay {
                        *w = w.max(d.worst_ratio);
                        *pass &= d.pass;
                    }
                }
                Err(e) if skippable(&e) => {
                    decay = Err(e);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        rows.push(match decay {
            Ok((w, pass)) => LemmaRow {
                check: "power decay".into(),
                status: if pass { RowStatus::Pass } else { RowStatus::Fail },
                measured: w,
                bound: 1.0,
                note: "worst measured/bound".into(),
            },
            Err(e) => LemmaRow::skip("power decay", e.to_string()),
        });
    }

    let t_mix = match (mdp.gamma(), mdp.t_mix()) {
        (Some(_), _) => None,
        (None, Some(t)) => Some(Ok(t)),
        (None, None) => Some(mixing_time(mdp)),
    };
    match &t_mix {
        Some(Err(e)) if !skippable(e) => return Err(Error::Domain(e.to_string())),
        Some(Err(e)) => {
            rows.push(LemmaRow::skip("optimal value norm", e.to_string()));
            rows.push(LemmaRow::skip("mixing v estimator", e.to_string()));
            rows.push(LemmaRow::skip("mixing mu estimator", e.to_string()));
        }
        _ => {
            let bound = match (mdp.gamma(), &t_mix) {
                (Some(g), _) => 1.0 / (1.0 - g),
                (None, Some(Ok(t))) => 2.0 * *t as f64,
                _ => unreachable!("mixing time resolved above"),
            };
            match optimal_oracle(mdp) {
                Ok(opt) => {
                    let measured = opt.values.norm_inf();
                    rows.push(LemmaRow {
                        check: "optimal value norm".into(),
                        status: if measured <= bound + 1e-9 {
                            RowStatus::Pass
                        } else {
                            RowStatus::Fail
                        },
                        measured,
                        bound,
                        note: String::new(),
                    });
                }
                Err(e) if skippable(&e) => rows.push(LemmaRow::skip("optimal value norm", e.to_string())),
                Err(e) => return Err(e),
            }
            let (mode, t) = match &t_mix {
                Some(Ok(t)) => (MdpMode::Mixing, Some(*t)),
                _ => (MdpMode::Discounted, None),
            };
            rows.extend(mdp_estimator_rows(mdp, mode, t, seed)?);
            if mdp.costs().is_some() && mode == MdpMode::Mixing {
                rows.extend(constrained_estimator_rows(mdp, t, seed)?);
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[1.0, f64::NAN]), None);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [0.4, 0.2, 0.1];
        let ys: Vec<f64> = xs.iter().map(|e: &f64| 7.0 * e.powi(-2)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() + 2.0).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_err());
        assert!(loglog_slope(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn first_checkpoint_under_target() {
        let cps = [
            Checkpoint {
                t: 1,
                samples: 2,
                gap: 1.0,
                subopt: Some(0.5),
            },
            Checkpoint {
                t: 2,
                samples: 4,
                gap: 1.0,
                subopt: None,
            },
            Checkpoint {
                t: 4,
                samples: 8,
                gap: 1.0,
                subopt: Some(0.1),
            },
            Checkpoint {
                t: 8,
                samples: 16,
                gap: 1.0,
                subopt: Some(0.05),
            },
        ];
        assert_eq!(samples_to_target(&cps, 0.2), Some(8));
        assert_eq!(samples_to_target(&cps, 0.01), None);
        assert_eq!(fraction_at_most(&[0.1, 0.2, 0.3, 0.4], 0.2), 0.5);
    }

    #[test]
    fn small_suites_pass() {
        assert!(mixing_norm_suite(5, 1).unwrap().passed());
        assert!(discounted_norm_suite(3, 5, 1).unwrap().passed());
        assert!(optimal_value_suite(3, 1).unwrap().passed());
        assert!(power_decay_suite(3, 1).unwrap().passed());
    }

    #[test]
    fn builtin_table_passes() {
        let rows = builtin_suite(0).unwrap();
        assert_eq!(rows.len(), 12);
        for r in &rows {
            assert_eq!(r.status, RowStatus::Pass, "{r:?}");
        }
    }

    #[test]
    fn periodic_chain_rows_are_skipped() {
        let mdp = MdpInstance::new(vec![1, 1], vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![1.0, 0.0]).unwrap();
        let rows = instance_suite(&mdp, 0).unwrap();
        assert!(rows.iter().all(|r| r.status == RowStatus::Skip), "{rows:?}");
        assert_eq!(rows[0].check, "mixing inverse norm");
    }

    #[test]
    fn discounted_norm_row_measures_the_inverse() {
        let params = GeneratorParams {
            states: 3,
            actions: 2,
            gamma: 0.99,
            ..Default::default()
        };
        let mut rng = RngState::for_role(2, Stream::Generator);
        let mdp = generate_instance(InstanceKind::RandomDmdp, &params, &mut rng).unwrap();
        let rows = instance_suite(&mdp, 0).unwrap();
        let norm = &rows[0];
        assert_eq!(norm.check, "discounted inverse norm");
        assert!(norm.measured <= 100.0 + 1e-9 && (norm.bound - 100.0).abs() < 1e-9);
        assert!(rows.iter().all(LemmaRow::passed));
    }
}
