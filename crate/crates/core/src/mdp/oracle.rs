use super::{MdpInstance, Policy};
use crate::error::{Error, Result};
use crate::numeric::lp::{LinearProgram, Relation};
use crate::numeric::{inf_operator_norm, invert, solve_linear};
use crate::{Matrix, Vector};

const ENUMERATION_LIMIT: u128 = 100_000;
const ENUMERATION_STATES: usize = 8;
const ORACLE_STATES: usize = 100;
const MIXING_THRESHOLD: f64 = 0.5;
// slack on the 1/2 threshold so exact ties are not lost to rounding
const THRESHOLD_SLACK: f64 = 1e-12;
const MIXING_HORIZON: u32 = 1000;

/// Transition matrix and reward vector of the Markov chain a policy induces.
pub fn induced_chain(mdp: &MdpInstance, pi: &Policy) -> Result<(Matrix, Vector)> {
    if pi.rows().len() != mdp.num_states() {
        return Err(Error::DimensionMismatch("policy and instance disagree on S".into()));
    }
    let s = mdp.num_states();
    let mut p = Matrix::zeros(s, s);
    let mut r = Vector::zeros(s);
    for (i, row) in pi.rows().iter().enumerate() {
        if row.len() != mdp.actions()[i] {
            return Err(Error::DimensionMismatch(format!("policy row {i} length")));
        }
        for (a, w) in row.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let k = mdp.offset(i) + a;
            r[i] += w * mdp.rewards()[k];
            for (dst, src) in p.row_mut(i).iter_mut().zip(mdp.transition_row(k)) {
                *dst += w * src;
            }
        }
    }
    Ok((p, r))
}

/// Unique `ν` with `Pᵀν = ν`, `Σν = 1`.
pub fn stationary_distribution(p: &Matrix) -> Result<Vector> {
    let n = p.rows();
    if p.cols() != n || n == 0 {
        return Err(Error::DimensionMismatch("transition matrix must be square".into()));
    }
    let mut a = p.transpose().sub(&Matrix::identity(n));
    a.row_mut(n - 1).iter_mut().for_each(|v| *v = 1.0);
    let rhs = Vector::basis(n, n - 1);
    let mut nu = match solve_linear(&a, &rhs) {
        Ok(nu) => nu,
        Err(Error::SingularMatrix) => return Err(Error::NonUniqueStationary),
        Err(e) => return Err(e),
    };
    if nu.iter().any(|v| *v < -1e-9) {
        return Err(Error::NonUniqueStationary);
    }
    nu.iter_mut().for_each(|v| *v = v.max(0.0));
    let total = nu.sum();
    nu.iter_mut().for_each(|v| *v /= total);
    let residual = p.tmatvec(&nu).dist_inf(&nu);
    if residual > 1e-9 {
        return Err(Error::NonUniqueStationary);
    }
    Ok(nu)
}

/// Exact value of a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation {
    /// Average reward (AMDP) or `qᵀ v^π` (DMDP).
    pub v_bar: f64,
    pub stationary: Option<Vector>,
    pub values: Option<Vector>,
}

fn require_q(mdp: &MdpInstance) -> Result<&Vector> {
    mdp.q()
        .ok_or_else(|| Error::Config("discounted instance needs an initial distribution q".into()))
}

/// Average reward of `pi`, or its discounted value when the instance has a discount.
pub fn evaluate_policy(mdp: &MdpInstance, pi: &Policy) -> Result<PolicyEvaluation> {
    let (p, r) = induced_chain(mdp, pi)?;
    match mdp.gamma() {
        None => {
            let nu = stationary_distribution(&p)?;
            Ok(PolicyEvaluation {
                v_bar: nu.dot(&r),
                stationary: Some(nu),
                values: None,
            })
        }
        Some(gamma) => {
            let a = Matrix::identity(p.rows()).sub(&p.scaled(gamma));
            let values = solve_linear(&a, &r)?;
            let q = require_q(mdp)?;
            Ok(PolicyEvaluation {
                v_bar: q.dot(&values),
                stationary: None,
                values: Some(values),
            })
        }
    }
}

/// Number of deterministic policies, saturating.
pub fn deterministic_policy_count(mdp: &MdpInstance) -> u128 {
    mdp.actions()
        .iter()
        .fold(1u128, |acc, a| acc.saturating_mul(*a as u128))
}

/// Calls `f` with the action choice of every deterministic policy, in odometer order.
pub fn for_each_deterministic_policy<F>(mdp: &MdpInstance, mut f: F) -> Result<()>
where
    F: FnMut(&[usize]) -> Result<()>,
{
    let s = mdp.num_states();
    let mut choice = vec![0usize; s];
    loop {
        f(&choice)?;
        let mut i = 0;
        loop {
            if i == s {
                return Ok(());
            }
            choice[i] += 1;
            if choice[i] < mdp.actions()[i] {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

fn check_enumerable(mdp: &MdpInstance) -> Result<()> {
    let count = deterministic_policy_count(mdp);
    if mdp.num_states() > ENUMERATION_STATES || count > ENUMERATION_LIMIT {
        return Err(Error::OracleTooLarge(format!(
            "{} states and {count} deterministic policies",
            mdp.num_states()
        )));
    }
    Ok(())
}

/// Optimal value, an optimal deterministic policy and an optimal value vector.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSolution {
    pub v_bar: f64,
    pub policy: Policy,
    /// DMDP: `v*`. AMDP: bias of the optimal policy, normalized so `⟨ν*, v*⟩ = 0`.
    pub values: Vector,
}

/// Exact optimum by value iteration (discounted) or policy enumeration (average reward).
pub fn optimal_oracle(mdp: &MdpInstance) -> Result<OptimalSolution> {
    if mdp.num_states() > ORACLE_STATES {
        return Err(Error::OracleTooLarge(format!("{} states", mdp.num_states())));
    }
    match mdp.gamma() {
        Some(gamma) => discounted_optimum(mdp, gamma),
        None => {
            if check_enumerable(mdp).is_ok() {
                average_optimum_enumerate(mdp)
            } else {
                average_optimum_policy_iteration(mdp)
            }
        }
    }
}

fn q_values(mdp: &MdpInstance, v: &[f64], gamma: f64) -> Vector {
    (0..mdp.num_pairs())
        .map(|k| {
            let pv: f64 = mdp.transition_row(k).iter().zip(v).map(|(p, x)| p * x).sum();
            mdp.rewards()[k] + gamma * pv
        })
        .collect()
}

fn greedy(mdp: &MdpInstance, qv: &[f64]) -> Vec<usize> {
    (0..mdp.num_states())
        .map(|i| {
            let o = mdp.offset(i);
            let row = &qv[o..o + mdp.actions()[i]];
            let mut best = 0;
            for (a, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect()
}

fn discounted_optimum(mdp: &MdpInstance, gamma: f64) -> Result<OptimalSolution> {
    let q = require_q(mdp)?.clone();
    let tol = 1e-10 * (1.0 - gamma) / gamma;
    let mut v = Vector::zeros(mdp.num_states());
    loop {
        let qv = q_values(mdp, &v, gamma);
        let next: Vector = (0..mdp.num_states())
            .map(|i| {
                let o = mdp.offset(i);
                qv[o..o + mdp.actions()[i]]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let delta = next.dist_inf(&v);
        v = next;
        if delta <= tol {
            break;
        }
    }
    let choice = greedy(mdp, &q_values(mdp, &v, gamma));
    let policy = Policy::deterministic(mdp, &choice)?;
    let eval = evaluate_policy(mdp, &policy)?;
    let values = eval.values.expect("discounted evaluation returns values");
    Ok(OptimalSolution {
        v_bar: q.dot(&values),
        policy,
        values,
    })
}

// bias h of a unichain policy with gain g, normalized to ⟨ν, h⟩ = 0
fn bias(p: &Matrix, r: &[f64], nu: &[f64], gain: f64) -> Result<Vector> {
    let n = p.rows();
    let mut a = Matrix::identity(n).sub(p);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] += nu[j];
        }
    }
    let rhs: Vector = r.iter().map(|x| x - gain).collect();
    solve_linear(&a, &rhs)
}

fn average_optimum_enumerate(mdp: &MdpInstance) -> Result<OptimalSolution> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_deterministic_policy(mdp, |choice| {
        let pi = Policy::deterministic(mdp, choice)?;
        let eval = evaluate_policy(mdp, &pi)?;
        if best.as_ref().is_none_or(|(v, _)| eval.v_bar > *v + 1e-13) {
            best = Some((eval.v_bar, choice.to_vec()));
        }
        Ok(())
    })?;
    let (_, choice) = best.expect("at least one policy");
    finish_average(mdp, &choice)
}

fn finish_average(mdp: &MdpInstance, choice: &[usize]) -> Result<OptimalSolution> {
    let policy = Policy::deterministic(mdp, choice)?;
    let (p, r) = induced_chain(mdp, &policy)?;
    let nu = stationary_distribution(&p)?;
    let v_bar = nu.dot(&r);
    let values = bias(&p, &r, &nu, v_bar)?;
    Ok(OptimalSolution { v_bar, policy, values })
}

// Howard policy iteration for unichain instances too large to enumerate.
fn average_optimum_policy_iteration(mdp: &MdpInstance) -> Result<OptimalSolution> {
    let mut choice = vec![0usize; mdp.num_states()];
    for _ in 0..10_000 {
        let sol = finish_average(mdp, &choice)?;
        let qv = q_values(mdp, &sol.values, 1.0);
        let mut changed = false;
        for i in 0..mdp.num_states() {
            let o = mdp.offset(i);
            let current = qv[o + choice[i]];
            let (mut best, mut best_v) = (choice[i], current);
            for a in 0..mdp.actions()[i] {
                if qv[o + a] > best_v + 1e-12 {
                    best = a;
                    best_v = qv[o + a];
                }
            }
            if best != choice[i] {
                choice[i] = best;
                changed = true;
            }
        }
        if !changed {
            return Ok(sol);
        }
    }
    Err(Error::Domain("policy iteration did not converge".into()))
}

/// Smallest `t >= 1` with `max_i ‖P^t(i,·) − ν‖₁ <= 1/2`.
pub fn chain_mixing_time(p: &Matrix) -> Result<u32> {
    let nu = stationary_distribution(p).map_err(|e| match e {
        Error::NonUniqueStationary => Error::NotMixing("no unique stationary distribution".into()),
        other => other,
    })?;
    let mut power = p.clone();
    for t in 1..=MIXING_HORIZON {
        if row_distance(&power, &nu) <= MIXING_THRESHOLD + THRESHOLD_SLACK {
            return Ok(t);
        }
        power = power.matmul(p);
    }
    Err(Error::NotMixing(format!(
        "distance above 1/2 after {MIXING_HORIZON} steps"
    )))
}

fn row_distance(power: &Matrix, nu: &[f64]) -> f64 {
    (0..power.rows())
        .map(|i| power.row(i).iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Mixing time maximized over deterministic policies. This is a lower bound on the
/// maximum over all randomized policies.
pub fn mixing_time(mdp: &MdpInstance) -> Result<u32> {
    check_enumerable(mdp)?;
    let mut worst = 0;
    for_each_deterministic_policy(mdp, |choice| {
        let pi = Policy::deterministic(mdp, choice)?;
        let (p, _) = induced_chain(mdp, &pi)?;
        worst = worst.max(chain_mixing_time(&p)?);
        Ok(())
    })?;
    Ok(worst)
}

/// Which inverse-norm bound a [`NormCheck`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKindReport {
    /// `‖(I − P + 1νᵀ)⁻¹‖∞ <= 2 t_mix`
    Mixing,
    /// `‖(I − γP)⁻¹‖∞ <= 1/(1−γ)`
    Discounted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormCheck {
    pub kind: NormKindReport,
    pub measured: f64,
    pub bound: f64,
    /// Mixing time of the policy's own chain (mixing checks only).
    pub t_mix: Option<u32>,
    pub pass: bool,
}

/// Exact inverse norm for the policy's chain against its bound.
///
/// The mixing bound uses the mixing time of this policy's chain, which is never larger than
/// the instance-level constant.
pub fn verify_norm_bounds(mdp: &MdpInstance, pi: &Policy) -> Result<NormCheck> {
    let (p, _) = induced_chain(mdp, pi)?;
    let n = p.rows();
    match mdp.gamma() {
        Some(gamma) => {
            let inv = invert(&Matrix::identity(n).sub(&p.scaled(gamma)))?;
            let measured = inf_operator_norm(&inv);
            let bound = 1.0 / (1.0 - gamma);
            Ok(NormCheck {
                kind: NormKindReport::Discounted,
                measured,
                bound,
                t_mix: None,
                pass: measured <= bound + 1e-9,
            })
        }
        None => {
            let t_mix = chain_mixing_time(&p)?;
            let nu = stationary_distribution(&p)?;
            let mut a = Matrix::identity(n).sub(&p);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] += nu[j];
                }
            }
            let measured = inf_operator_norm(&invert(&a)?);
            let bound = 2.0 * t_mix as f64;
            Ok(NormCheck {
                kind: NormKindReport::Mixing,
                measured,
                bound,
                t_mix: Some(t_mix),
                pass: measured <= bound + 1e-9,
            })
        }
    }
}

/// Result of checking `‖P^k − 1νᵀ‖∞ <= 2^{-⌊k/t_mix⌋}` for `t_mix <= k <= horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDecay {
    pub t_mix: u32,
    /// Largest `measured / bound` over the checked powers.
    pub worst_ratio: f64,
    pub pass: bool,
}

/// Power-decay check over `k = t_mix ..= multiple · t_mix`.
pub fn power_decay_check(p: &Matrix, multiple: u32) -> Result<PowerDecay> {
    let t_mix = chain_mixing_time(p)?;
    let nu = stationary_distribution(p)?;
    let mut power = p.clone();
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for k in 1..=multiple * t_mix {
        if k >= t_mix {
            let bound = 0.5f64.powi((k / t_mix) as i32);
            let measured = row_distance(&power, &nu);
            worst = worst.max(measured / bound);
            pass &= measured <= bound + 1e-12;
        }
        power = power.matmul(p);
    }
    Ok(PowerDecay {
        t_mix,
        worst_ratio: worst,
        pass,
    })
}

/// `max_μ min_k (Dᵀμ)_k` over stationary occupancy measures
/// `{μ >= 0, Σμ = 1, (Î − P)ᵀμ = 0}`, with a maximizer.
pub fn max_min_occupancy(mdp: &MdpInstance, costs: &Matrix) -> Result<(f64, Vector)> {
    let pairs = mdp.num_pairs();
    let nv = pairs + 1;
    let mut obj = vec![0.0; nv];
    obj[pairs] = 1.0;
    let mut lp = LinearProgram::maximize(obj);
    let mut ones = vec![1.0; nv];
    ones[pairs] = 0.0;
    lp.constrain(ones, Relation::Eq, 1.0);
    for j in 0..mdp.num_states() {
        let mut row = vec![0.0; nv];
        for (k, r) in row.iter_mut().enumerate().take(pairs) {
            let hat = if mdp.state_of(k) == j { 1.0 } else { 0.0 };
            *r = hat - mdp.transition_row(k)[j];
        }
        lp.constrain(row, Relation::Eq, 0.0);
    }
    for c in 0..costs.cols() {
        let mut row: Vec<f64> = (0..pairs).map(|k| costs[(k, c)]).collect();
        row.push(-1.0);
        lp.constrain(row, Relation::Ge, 0.0);
    }
    let sol = lp.solve()?;
    let mu: Vector = sol.x[..pairs].iter().map(|v| v.max(0.0)).collect();
    Ok((sol.x[pairs], mu))
}
