use super::oracle::{deterministic_policy_count, max_min_occupancy, mixing_time};
use super::{Feasibility, MdpInstance};
use crate::error::{Error, Result};
use crate::sampling::RngState;
use rand_distr::{Distribution, Exp1};

const MAX_ATTEMPTS: usize = 100;
// mixing times are only recorded when every deterministic policy can be enumerated
const RECORD_LIMIT: u128 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    RandomMixing,
    RandomDmdp,
    Constrained,
}

impl std::str::FromStr for InstanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_mixing" => Ok(Self::RandomMixing),
            "random_dmdp" => Ok(Self::RandomDmdp),
            "constrained" => Ok(Self::Constrained),
            other => Err(Error::Config(format!("unknown instance kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub states: usize,
    /// Actions per state.
    pub actions: usize,
    /// Weight of the uniform component mixed into every transition row.
    pub alpha: f64,
    /// Discount for `RandomDmdp`.
    pub gamma: f64,
    /// Number of constraints for `Constrained`.
    pub constraints: usize,
    /// Raw cost entries are drawn uniformly from `[0, d_max]`.
    pub d_max: f64,
    /// Thresholds are set to `slack · max_μ min_k (Dᵀμ)_k`, so `slack < 1` gives strict feasibility.
    pub slack: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            states: 5,
            actions: 3,
            alpha: 0.3,
            gamma: 0.9,
            constraints: 2,
            d_max: 1.0,
            slack: 0.8,
        }
    }
}

impl GeneratorParams {
    fn validate(&self, kind: InstanceKind) -> Result<()> {
        if self.states == 0 || self.actions == 0 {
            return Err(Error::Config("need at least one state and one action".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0,1], got {}", self.alpha)));
        }
        match kind {
            InstanceKind::RandomDmdp if !(self.gamma > 0.0 && self.gamma < 1.0) => {
                Err(Error::Config(format!("gamma must lie in (0,1), got {}", self.gamma)))
            }
            InstanceKind::Constrained
                if self.constraints == 0 || !(self.d_max > 0.0) || !(self.slack > 0.0 && self.slack < 1.0) =>
            {
                Err(Error::Config(
                    "constrained generation needs K >= 1, d_max > 0, slack in (0,1)".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

fn random_row(n: usize, alpha: f64, rng: &mut RngState) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    let mut row: Vec<f64> = raw
        .iter()
        .map(|w| (1.0 - alpha) * w / total + alpha / n as f64)
        .collect();
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= total);
    row
}

fn random_mixing(params: &GeneratorParams, rng: &mut RngState) -> Result<MdpInstance> {
    let s = params.states;
    let actions = vec![params.actions; s];
    let pairs = s * params.actions;
    let transitions = (0..pairs).map(|_| random_row(s, params.alpha, rng)).collect();
    let rewards = (0..pairs).map(|_| rng.uniform()).collect();
    MdpInstance::new(actions, transitions, rewards)
}

fn record_mixing(mdp: MdpInstance) -> Result<MdpInstance> {
    if deterministic_policy_count(&mdp) > RECORD_LIMIT || mdp.num_states() > 8 {
        return Ok(mdp);
    }
    let t = mixing_time(&mdp)?;
    Ok(mdp.with_mixing_time(t))
}

/// Random instance of the requested family. Equal seeds give identical instances.
pub fn generate_instance(kind: InstanceKind, params: &GeneratorParams, rng: &mut RngState) -> Result<MdpInstance> {
    params.validate(kind)?;
    match kind {
        InstanceKind::RandomMixing => record_mixing(random_mixing(params, rng)?),
        InstanceKind::RandomDmdp => {
            let q = vec![1.0 / params.states as f64; params.states];
            random_mixing(params, rng)?.with_discount(params.gamma, Some(q))
        }
        InstanceKind::Constrained => {
            for _ in 0..MAX_ATTEMPTS {
                let base = random_mixing(params, rng)?;
                let costs: Vec<Vec<f64>> = (0..base.num_pairs())
                    .map(|_| (0..params.constraints).map(|_| params.d_max * rng.uniform()).collect())
                    .collect();
                let base = base.with_costs(costs)?;
                let d = base.costs().expect("costs just set").clone();
                let best = match max_min_occupancy(&base, &d) {
                    Ok((t, _)) => t,
                    Err(Error::InfeasibleInstance(_)) => continue,
                    Err(e) => return Err(e),
                };
                if best <= 1e-9 {
                    continue;
                }
                let threshold = params.slack * best;
                let mdp = base
                    .with_cost_thresholds(&vec![threshold; params.constraints])?
                    .with_feasibility(Feasibility {
                        checked: true,
                        max_min_dmu: Some(best / threshold),
                    });
                match record_mixing(mdp) {
                    Ok(mdp) => return Ok(mdp),
                    Err(Error::NotMixing(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::InfeasibleInstance(format!(
                "no strictly feasible instance after {MAX_ATTEMPTS} attempts"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Stream;

    #[test]
    fn alpha_one_gives_uniform_rows() {
        let params = GeneratorParams {
            alpha: 1.0,
            ..Default::default()
        };
        let mut rng = RngState::for_role(1, Stream::Generator);
        let mdp = generate_instance(InstanceKind::RandomMixing, &params, &mut rng).unwrap();
        assert!(mdp.transitions().data().iter().all(|p| (p - 0.2).abs() < 1e-15));
        assert_eq!(mdp.t_mix(), Some(1));
    }

    #[test]
    fn generation_is_deterministic() {
        for kind in [
            InstanceKind::RandomMixing,
            InstanceKind::RandomDmdp,
            InstanceKind::Constrained,
        ] {
            let params = GeneratorParams {
                states: 4,
                ..Default::default()
            };
            let a = generate_instance(kind, &params, &mut RngState::for_role(9, Stream::Generator));
            let b = generate_instance(kind, &params, &mut RngState::for_role(9, Stream::Generator));
            assert_eq!(a.unwrap(), b.unwrap());
        }
    }

    #[test]
    fn seven_seed_mixing_time_is_small() {
        let mut rng = RngState::for_role(7, Stream::Generator);
        let mdp = generate_instance(InstanceKind::RandomMixing, &GeneratorParams::default(), &mut rng).unwrap();
        let t = mdp.t_mix().unwrap();
        assert!((1..=20).contains(&t));
        assert_eq!(mixing_time(&mdp).unwrap(), t);
    }

    #[test]
    fn constrained_instances_are_strictly_feasible() {
        let params = GeneratorParams {
            states: 4,
            ..Default::default()
        };
        let mut rng = RngState::for_role(4, Stream::Generator);
        let mdp = generate_instance(InstanceKind::Constrained, &params, &mut rng).unwrap();
        let (best, mu) = max_min_occupancy(&mdp, mdp.costs().unwrap()).unwrap();
        assert!((best - 1.0 / params.slack).abs() < 1e-8);
        assert!(mdp.stationarity_residual(&mu).norm1() < 1e-9);
        let f = mdp.feasibility().unwrap();
        assert!(f.checked && f.max_min_dmu.unwrap() > 1.0);
    }

    #[test]
    fn rejects_bad_params() {
        let mut rng = RngState::for_role(1, Stream::Generator);
        let bad = GeneratorParams {
            alpha: 0.0,
            ..Default::default()
        };
        assert!(generate_instance(InstanceKind::RandomMixing, &bad, &mut rng).is_err());
        let bad = GeneratorParams {
            gamma: 1.0,
            ..Default::default()
        };
        assert!(generate_instance(InstanceKind::RandomDmdp, &bad, &mut rng).is_err());
    }
}
