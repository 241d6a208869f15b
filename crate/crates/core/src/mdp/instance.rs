use crate::error::{Error, Result};
use crate::{Matrix, Vector};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Format tag written into every instance file.
pub const FORMAT_TAG: &str = "mdp-smd/v1";
const ROW_TOL: f64 = 1e-9;

/// Strict-feasibility certificate of a constrained instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub checked: bool,
    /// `max_μ min_k (Dᵀμ)_k` over stationary occupancy measures, when computed.
    pub max_min_dmu: Option<f64>,
}

/// Finite MDP with per-state action sets. State-action pairs are numbered state-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpInstance {
    actions: Vec<usize>,
    offsets: Vec<usize>,
    state_of: Vec<usize>,
    transitions: Matrix,
    rewards: Vector,
    gamma: Option<f64>,
    q: Option<Vector>,
    costs: Option<Matrix>,
    t_mix: Option<u32>,
    feasibility: Option<Feasibility>,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    format: String,
    #[serde(rename = "S")]
    states: usize,
    actions: Vec<usize>,
    transitions: Vec<Vec<f64>>,
    rewards: Vec<f64>,
    gamma: Option<f64>,
    q: Option<Vec<f64>>,
    #[serde(rename = "D")]
    costs: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_mix: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feasibility: Option<Feasibility>,
}

fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Domain(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_TOL {
        return Err(Error::Domain(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

impl MdpInstance {
    /// Average-reward instance from per-state action counts, one transition row per pair and rewards in `[0,1]`.
    pub fn new(actions: Vec<usize>, transitions: Vec<Vec<f64>>, rewards: Vec<f64>) -> Result<Self> {
        let s = actions.len();
        if s == 0 || actions.iter().any(|a| *a == 0) {
            return Err(Error::Domain("every state needs at least one action".into()));
        }
        let mut offsets = Vec::with_capacity(s + 1);
        let mut state_of = Vec::new();
        offsets.push(0);
        for (i, a) in actions.iter().enumerate() {
            offsets.push(offsets[i] + a);
            state_of.extend(std::iter::repeat(i).take(*a));
        }
        let pairs = offsets[s];
        if transitions.len() != pairs || rewards.len() != pairs {
            return Err(Error::DimensionMismatch(format!(
                "{pairs} state-action pairs but {} transition rows and {} rewards",
                transitions.len(),
                rewards.len()
            )));
        }
        for (k, row) in transitions.iter().enumerate() {
            if row.len() != s {
                return Err(Error::DimensionMismatch(format!(
                    "transition row {k} has length {}",
                    row.len()
                )));
            }
            check_distribution(row, &format!("transition row {k}"))?;
        }
        if rewards.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Domain("rewards must lie in [0,1]".into()));
        }
        Ok(Self {
            actions,
            offsets,
            state_of,
            transitions: Matrix::from_rows(&transitions)?,
            rewards: rewards.into(),
            gamma: None,
            q: None,
            costs: None,
            t_mix: None,
            feasibility: None,
        })
    }

    /// Adds a discount factor and (optionally) an initial distribution.
    pub fn with_discount(mut self, gamma: f64, q: Option<Vec<f64>>) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Domain(format!("discount must lie in (0,1), got {gamma}")));
        }
        if let Some(q) = &q {
            if q.len() != self.num_states() {
                return Err(Error::DimensionMismatch("initial distribution length".into()));
            }
            check_distribution(q, "initial distribution")?;
        }
        self.gamma = Some(gamma);
        self.q = q.map(Vector::from);
        Ok(self)
    }

    /// Adds constraint costs: one row of `K` nonnegative entries per state-action pair.
    pub fn with_costs(mut self, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != self.num_pairs() {
            return Err(Error::DimensionMismatch("one cost row per state-action pair".into()));
        }
        let d = Matrix::from_rows(&rows)?;
        if d.cols() == 0 || d.data().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain(
                "costs must be finite, nonnegative and at least one column".into(),
            ));
        }
        self.costs = Some(d);
        self.feasibility = Some(Feasibility {
            checked: false,
            max_min_dmu: None,
        });
        Ok(self)
    }

    /// Rewrites constraints `Dᵀμ >= c` as `(D/c)ᵀμ >= 1`, column by column.
    pub fn with_cost_thresholds(mut self, thresholds: &[f64]) -> Result<Self> {
        let d = self
            .costs
            .as_mut()
            .ok_or_else(|| Error::Config("instance has no constraint costs".into()))?;
        if thresholds.len() != d.cols() || thresholds.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::Domain("need one positive threshold per constraint".into()));
        }
        for k in 0..d.rows() {
            for (v, c) in d.row_mut(k).iter_mut().zip(thresholds) {
                *v /= c;
            }
        }
        if let Some(f) = self.feasibility.as_mut() {
            f.checked = false;
            f.max_min_dmu = None;
        }
        Ok(self)
    }

    pub fn with_mixing_time(mut self, t_mix: u32) -> Self {
        self.t_mix = Some(t_mix);
        self
    }

    pub fn with_feasibility(mut self, feasibility: Feasibility) -> Self {
        self.feasibility = Some(feasibility);
        self
    }

    pub fn num_states(&self) -> usize {
        self.actions.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.state_of.len()
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    /// Index of the first pair of state `i`.
    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn pair(&self, i: usize, a: usize) -> Result<usize> {
        if i >= self.num_states() || a >= self.actions[i] {
            return Err(Error::IndexOutOfRange {
                index: a,
                len: self.actions.get(i).copied().unwrap_or(0),
            });
        }
        Ok(self.offsets[i] + a)
    }

    #[inline]
    pub fn state_of(&self, k: usize) -> usize {
        self.state_of[k]
    }

    pub fn action_of(&self, k: usize) -> usize {
        k - self.offsets[self.state_of[k]]
    }

    #[inline]
    pub fn transition_row(&self, k: usize) -> &[f64] {
        self.transitions.row(k)
    }

    pub fn transitions(&self) -> &Matrix {
        &self.transitions
    }

    pub fn rewards(&self) -> &Vector {
        &self.rewards
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn q(&self) -> Option<&Vector> {
        self.q.as_ref()
    }

    pub fn costs(&self) -> Option<&Matrix> {
        self.costs.as_ref()
    }

    pub fn num_constraints(&self) -> usize {
        self.costs.as_ref().map_or(0, Matrix::cols)
    }

    /// Largest absolute cost entry.
    pub fn cost_max(&self) -> Option<f64> {
        self.costs.as_ref().map(Matrix::max_abs)
    }

    pub fn t_mix(&self) -> Option<u32> {
        self.t_mix
    }

    pub fn feasibility(&self) -> Option<&Feasibility> {
        self.feasibility.as_ref()
    }

    /// `Î`: the pairs × states matrix with a one in the column of each pair's state.
    pub fn selection_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.num_pairs(), self.num_states());
        for k in 0..self.num_pairs() {
            m[(k, self.state_of[k])] = 1.0;
        }
        m
    }

    /// `(Î − P)ᵀ μ` computed without forming `Î`.
    pub fn stationarity_residual(&self, mu: &[f64]) -> Vector {
        let mut out = self.transitions.tmatvec(mu);
        for v in out.iter_mut() {
            *v = -*v;
        }
        for (k, m) in mu.iter().enumerate() {
            out[self.state_of[k]] += m;
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let file = InstanceFile {
            format: FORMAT_TAG.into(),
            states: self.num_states(),
            actions: self.actions.clone(),
            transitions: self.transitions.to_rows(),
            rewards: self.rewards.to_vec(),
            gamma: self.gamma,
            q: self.q.as_ref().map(|q| q.to_vec()),
            costs: self.costs.as_ref().map(Matrix::to_rows),
            t_mix: self.t_mix,
            feasibility: self.feasibility.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        if file.format != FORMAT_TAG {
            return Err(Error::Config(format!("unknown instance format {:?}", file.format)));
        }
        if file.states != file.actions.len() {
            return Err(Error::DimensionMismatch("S disagrees with the action list".into()));
        }
        let mut mdp = Self::new(file.actions, file.transitions, file.rewards)?;
        if let Some(g) = file.gamma {
            mdp = mdp.with_discount(g, file.q)?;
        } else if file.q.is_some() {
            return Err(Error::Config("q given without gamma".into()));
        }
        if let Some(d) = file.costs {
            mdp = mdp.with_costs(d)?;
            mdp.feasibility = Some(file.feasibility.unwrap_or(Feasibility {
                checked: false,
                max_min_dmu: None,
            }));
        }
        mdp.t_mix = file.t_mix;
        Ok(mdp)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Stationary randomized policy: one distribution over actions per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy {
    rows: Vec<Vec<f64>>,
}

impl Policy {
    pub fn new(mdp: &MdpInstance, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != mdp.num_states() {
            return Err(Error::DimensionMismatch("one policy row per state".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != mdp.actions()[i] {
                return Err(Error::DimensionMismatch(format!("policy row {i} length")));
            }
            check_distribution(row, &format!("policy row {i}"))?;
        }
        Ok(Self { rows })
    }

    /// Picks action `choices[i]` in state `i`.
    pub fn deterministic(mdp: &MdpInstance, choices: &[usize]) -> Result<Self> {
        if choices.len() != mdp.num_states() {
            return Err(Error::DimensionMismatch("one action per state".into()));
        }
        let rows = choices
            .iter()
            .zip(mdp.actions())
            .map(|(c, n)| {
                if c >= n {
                    return Err(Error::IndexOutOfRange { index: *c, len: *n });
                }
                let mut r = vec![0.0; *n];
                r[*c] = 1.0;
                Ok(r)
            })
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    pub fn uniform(mdp: &MdpInstance) -> Self {
        Self {
            rows: mdp.actions().iter().map(|n| vec![1.0 / *n as f64; *n]).collect(),
        }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.rows
    }

    /// Occupancy `μ_{i,a} = λ_i π_i(a)` for a state distribution `lambda`.
    pub fn occupancy(&self, lambda: &[f64]) -> Vector {
        self.rows
            .iter()
            .zip(lambda)
            .flat_map(|(row, l)| row.iter().map(move |p| l * p))
            .collect()
    }
}
