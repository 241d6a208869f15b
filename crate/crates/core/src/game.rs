//! Box-simplex matrix games `min_{x ∈ B_b} max_{y ∈ Δ} yᵀMx + bᵀx − cᵀy` with entrywise
//! sampling estimators, and the `ℓ∞`-regression reduction.

use crate::error::{Error, Result};
use crate::report::SolveReport;
use crate::saddle::{
    exact_gap, run_smd, schedule_for, Averages, BilinearProblem, BoundedEstimator, CheckpointPlan, EstimatorBounds,
    Estimators, IterateView, NormKind, SmdOptions, SmdRun, SparseGradient,
};
use crate::sampling::{AliasTable, RngState};
use crate::{Matrix, Vector};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    problem: BilinearProblem<f64>,
    row_norms: Vector,
}

#[derive(Serialize, Deserialize)]
struct GameFile {
    m: usize,
    n: usize,
    entries: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
}

impl GameInstance {
    pub fn new(matrix: Matrix, b: Vector, c: Vector, radius: f64) -> Result<Self> {
        let problem = BilinearProblem::new(matrix, b, c, radius)?;
        let row_norms = (0..problem.matrix.rows())
            .map(|i| problem.matrix.row(i).iter().map(|v| v.abs()).sum())
            .collect();
        Ok(Self { problem, row_norms })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.problem.matrix
    }

    pub fn b(&self) -> &Vector {
        &self.problem.b
    }

    pub fn c(&self) -> &Vector {
        &self.problem.c
    }

    pub fn radius(&self) -> f64 {
        self.problem.radius
    }

    pub fn problem(&self) -> &BilinearProblem<f64> {
        &self.problem
    }

    /// `‖M‖∞ = max_i ‖M(i,:)‖₁`.
    pub fn norm_inf(&self) -> f64 {
        self.row_norms.max()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: GameFile = serde_json::from_str(text)?;
        if f.entries.len() != f.m * f.n || f.b.len() != f.n || f.c.len() != f.m {
            return Err(Error::DimensionMismatch("game file sizes disagree with m, n".into()));
        }
        let matrix = Matrix::new(f.m, f.n, f.entries)?;
        Self::new(matrix, f.b.into(), f.c.into(), f.radius.unwrap_or(1.0))
    }

    pub fn to_json(&self) -> Result<String> {
        let f = GameFile {
            m: self.matrix().rows(),
            n: self.matrix().cols(),
            entries: self.matrix().data().to_vec(),
            b: self.b().to_vec(),
            c: self.c().to_vec(),
            radius: Some(self.radius()),
        };
        let mut s = serde_json::to_string_pretty(&f)?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

// alias table over |w| plus its l1 mass, or None when w = 0
fn abs_sampler(w: &[f64]) -> Result<Option<(AliasTable, f64)>> {
    let abs: Vec<f64> = w.iter().map(|v| v.abs()).collect();
    let mass: f64 = abs.iter().sum();
    if mass > 0.0 {
        Ok(Some((AliasTable::build(&abs)?, mass)))
    } else {
        Ok(None)
    }
}

fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Estimator of `Mᵀy + b`.
///
/// Default: `i ~ y`, `j ~ |M_ij|/‖M_i‖₁`, value `sign(M_ij)‖M_i‖₁`. With `global` set,
/// `(i,j) ~ |M_ij|/‖M‖₁₁` and value `sign(M_ij) y_i ‖M‖₁₁`. Both add `sign(b_j')‖b‖₁ e_j'`.
pub struct GameXEstimator<'a> {
    game: &'a GameInstance,
    rows: Vec<Option<AliasTable>>,
    entries: Option<(AliasTable, f64)>,
    b: Option<(AliasTable, f64)>,
    global: bool,
}

impl<'a> GameXEstimator<'a> {
    pub fn new(game: &'a GameInstance, global: bool) -> Result<Self> {
        let m = game.matrix();
        let rows = (0..m.rows())
            .map(|i| abs_sampler(m.row(i)).map(|s| s.map(|(t, _)| t)))
            .collect::<Result<_>>()?;
        Ok(Self {
            game,
            rows,
            entries: abs_sampler(m.data())?,
            b: abs_sampler(game.b())?,
            global,
        })
    }
}

impl BoundedEstimator<f64> for GameXEstimator<'_> {
    fn bounds(&self) -> EstimatorBounds<f64> {
        let b1 = self.game.b().norm1();
        let minf = self.game.norm_inf();
        let v = if self.global {
            2.0 * (b1 * b1 + self.game.matrix().entry_norm1() * minf)
        } else {
            2.0 * (b1 * b1 + minf * minf)
        };
        let c = if self.global {
            self.game.matrix().entry_norm1()
        } else {
            minf
        } + b1;
        EstimatorBounds {
            c,
            v,
            norm: NormKind::Euclidean,
        }
    }

    fn draw(&self, it: &IterateView<'_, f64>, rng: &mut RngState, out: &mut SparseGradient<f64>) -> u64 {
        let m = self.game.matrix();
        let mut samples = 0;
        if self.global {
            if let Some((table, mass)) = &self.entries {
                let e = table.sample(rng);
                let (i, j) = (e / m.cols(), e % m.cols());
                out.push(j, sign(m[(i, j)]) * it.y.prob(i) * mass);
                samples += 1;
            }
        } else {
            let i = it.y.sample(rng);
            if let Some(table) = &self.rows[i] {
                let j = table.sample(rng);
                out.push(j, sign(m[(i, j)]) * self.game.row_norms[i]);
                samples += 1;
            }
        }
        if let Some((table, mass)) = &self.b {
            let j = table.sample(rng);
            out.push(j, sign(self.game.b()[j]) * mass);
        }
        samples
    }
}

/// Estimator of `c − Mx`: `(i,j) ~ |M_ij|/‖M‖₁₁` gives `−sign(M_ij)‖M‖₁₁ x_j e_i`,
/// `i' ~ |c|/‖c‖₁` gives `sign(c_i')‖c‖₁ e_i'`.
pub struct GameYEstimator<'a> {
    game: &'a GameInstance,
    entries: Option<(AliasTable, f64)>,
    c: Option<(AliasTable, f64)>,
}

impl<'a> GameYEstimator<'a> {
    pub fn new(game: &'a GameInstance) -> Result<Self> {
        Ok(Self {
            game,
            entries: abs_sampler(game.matrix().data())?,
            c: abs_sampler(game.c())?,
        })
    }
}

impl BoundedEstimator<f64> for GameYEstimator<'_> {
    /// `c = m(b‖M‖∞ + ‖c‖∞)`, `v = 2m(‖c‖∞² + b²‖M‖∞²)`.
    fn bounds(&self) -> EstimatorBounds<f64> {
        let m = self.game.matrix().rows() as f64;
        let b = self.game.radius();
        let minf = self.game.norm_inf();
        let cinf = self.game.c().norm_inf();
        EstimatorBounds {
            c: m * (b * minf + cinf),
            v: 2.0 * m * (cinf * cinf + b * b * minf * minf),
            norm: NormKind::LocalSimplex,
        }
    }

    fn draw(&self, it: &IterateView<'_, f64>, rng: &mut RngState, out: &mut SparseGradient<f64>) -> u64 {
        let m = self.game.matrix();
        let mut samples = 0;
        if let Some((table, mass)) = &self.entries {
            let e = table.sample(rng);
            let (i, j) = (e / m.cols(), e % m.cols());
            out.push(i, -sign(m[(i, j)]) * mass * it.x[j]);
            samples += 1;
        }
        if let Some((table, mass)) = &self.c {
            let i = table.sample(rng);
            out.push(i, sign(self.game.c()[i]) * mass);
        }
        samples
    }
}

#[derive(Debug, Clone)]
pub struct GameSolveOptions {
    pub eps: f64,
    pub seed: u64,
    /// Use the global-weight x estimator.
    pub global_x: bool,
    pub iteration_cap: Option<u64>,
    pub checkpoints: CheckpointPlan,
    pub smd: SmdOptions,
}

impl GameSolveOptions {
    pub fn new(eps: f64, seed: u64) -> Self {
        Self {
            eps,
            seed,
            global_x: false,
            iteration_cap: None,
            checkpoints: CheckpointPlan::None,
            smd: SmdOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GameSolution {
    pub report: SolveReport,
    pub run: SmdRun<f64>,
}

// zero bounds only arise for identically zero estimators; any positive value is then valid
const BOUND_FLOOR: f64 = 1e-12;

fn solve_with_observer(
    game: &GameInstance,
    opts: &GameSolveOptions,
    mode: &str,
    observer: &mut dyn FnMut(&Averages<f64>) -> Option<f64>,
) -> Result<GameSolution> {
    let start = Instant::now();
    if game.norm_inf() + game.c().norm_inf() < 0.1 {
        log::warn!("‖M‖∞ + ‖c‖∞ is small; iteration counts assume it is of order one");
    }
    let xe = GameXEstimator::new(game, opts.global_x)?;
    let ye = GameYEstimator::new(game)?;
    let m = game.matrix();
    let mut schedule = schedule_for(
        opts.eps,
        m.cols(),
        game.radius(),
        m.rows(),
        xe.bounds().v.max(BOUND_FLOOR),
        ye.bounds().v.max(BOUND_FLOOR),
    )?;
    let mut full_budget = None;
    if let Some(cap) = opts.iteration_cap {
        if cap < schedule.iterations {
            full_budget = Some(schedule.iterations);
            schedule.iterations = cap;
        }
    }
    schedule.checkpoints = opts.checkpoints.clone();
    let est = Estimators {
        x: &xe,
        s: None,
        y: &ye,
    };
    let run = run_smd(game.problem(), &est, &schedule, opts.seed, &opts.smd, observer)?;
    let gap = exact_gap(game.problem(), &run.averages.x, &run.averages.y)?;
    let report = SolveReport {
        mode: mode.into(),
        eps: opts.eps,
        seed: opts.seed,
        iterations: run.iterations,
        full_budget,
        samples: run.samples,
        gap,
        subopt: None,
        checkpoints: run.checkpoints.clone(),
        policy: None,
        constraints: None,
        wall_ms: start.elapsed().as_millis() as u64,
    };
    Ok(GameSolution { report, run })
}

/// SMD on the game; the report's gap is the exact gap of the averaged iterates.
pub fn solve_game(game: &GameInstance, opts: &GameSolveOptions) -> Result<GameSolution> {
    solve_with_observer(game, opts, "game", &mut |_| None)
}

/// `M̂ = [M; −M]`, `ĉ = [c; −c]`, so that `max_y yᵀ(M̂x − ĉ) = ‖Mx − c‖∞`.
pub fn regression_game(m: &Matrix, c: &[f64]) -> Result<GameInstance> {
    if c.len() != m.rows() {
        return Err(Error::DimensionMismatch("c needs one entry per row of M".into()));
    }
    let mut rows = m.to_rows();
    rows.extend(
        m.to_rows()
            .into_iter()
            .map(|r| r.into_iter().map(|v| -v).collect::<Vec<_>>()),
    );
    let stacked = Matrix::from_rows(&rows)?;
    let chat: Vector = c.iter().copied().chain(c.iter().map(|v| -v)).collect();
    GameInstance::new(stacked, Vector::zeros(m.cols()), chat, 1.0)
}

#[derive(Debug, Clone)]
pub struct RegressionSolution {
    pub x: Vector,
    /// `‖Mx − c‖∞`
    pub value: f64,
    /// Best dual lower bound `−‖M̂ᵀy‖₁ − ĉᵀy` over the averaged `y` seen.
    pub lower_bound: f64,
    /// `value − lower_bound`, an upper bound on the suboptimality of `x`.
    pub certified_gap: f64,
    pub report: SolveReport,
}

/// Dual lower bound on `min_{x ∈ B_1} ‖Mx − c‖∞` from a simplex point `y` of the stacked game.
pub fn regression_lower_bound(game: &GameInstance, y: &[f64]) -> f64 {
    -game.matrix().tmatvec(y).norm1() - game.c().dot(y)
}

/// Box-constrained `ℓ∞` regression `min_{‖x‖∞ <= 1} ‖Mx − c‖∞` with a certified gap.
pub fn solve_linf_regression(m: &Matrix, c: &[f64], opts: &GameSolveOptions) -> Result<RegressionSolution> {
    let game = regression_game(m, c)?;
    let mut lower = f64::NEG_INFINITY;
    let mut observer = |avg: &Averages<f64>| {
        lower = lower.max(regression_lower_bound(&game, &avg.y));
        None
    };
    let sol = solve_with_observer(&game, opts, "regression", &mut observer)?;
    let lower_bound = lower.max(regression_lower_bound(&game, &sol.run.averages.y));
    let x = sol.run.averages.x.clone();
    let value = m.matvec(&x).sub(&Vector::from(c.to_vec())).norm_inf();
    Ok(RegressionSolution {
        x,
        value,
        lower_bound,
        certified_gap: value - lower_bound,
        report: sol.report,
    })
}
