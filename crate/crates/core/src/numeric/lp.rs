//! Small dense linear programs solved by the two-phase simplex method with Bland's rule.
//!
//! Only meant for exact oracles at desk scale (a few hundred variables at most).

use crate::error::{Error, Result};

const EPS: f64 = 1e-10;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct Constraint {
    coeffs: Vec<f64>,
    relation: Relation,
    rhs: f64,
}

/// `minimize cᵀx` subject to linear constraints; variables are nonnegative unless marked free.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    free: Vec<bool>,
    constraints: Vec<Constraint>,
    maximizing: bool,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LinearProgram {
    pub fn minimize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            free: vec![false; n],
            constraints: Vec::new(),
            maximizing: false,
        }
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        let mut lp = Self::minimize(objective.into_iter().map(|c| -c).collect());
        lp.maximizing = true;
        lp
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_free(&mut self, j: usize) {
        self.free[j] = true;
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.num_vars(), "constraint width");
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    /// Solves the program. The returned objective is in the caller's sense (max or min).
    pub fn solve(&self) -> Result<LpSolution> {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// column of x_j^+ and (for free vars) x_j^-
    pos: Vec<usize>,
    neg: Vec<Option<usize>>,
    first_artificial: usize,
    width: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let mut pos = Vec::with_capacity(n);
        let mut neg = Vec::with_capacity(n);
        let mut col = 0;
        for j in 0..n {
            pos.push(col);
            col += 1;
            if lp.free[j] {
                neg.push(Some(col));
                col += 1;
            } else {
                neg.push(None);
            }
        }
        // normalize signs so every rhs is nonnegative
        let cons: Vec<Constraint> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let relation = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    Constraint {
                        coeffs: c.coeffs.iter().map(|a| -a).collect(),
                        relation,
                        rhs: -c.rhs,
                    }
                } else {
                    c.clone()
                }
            })
            .collect();
        let slack_start = col;
        let n_slack = cons.iter().filter(|c| c.relation != Relation::Eq).count();
        let first_artificial = slack_start + n_slack;
        let n_art = cons.iter().filter(|c| c.relation != Relation::Le).count();
        let width = first_artificial + n_art;
        let mut rows = Vec::with_capacity(cons.len());
        let mut basis = Vec::with_capacity(cons.len());
        let (mut s, mut a) = (slack_start, first_artificial);
        for c in &cons {
            let mut row = vec![0.0; width + 1];
            for (j, coef) in c.coeffs.iter().enumerate() {
                row[pos[j]] = *coef;
                if let Some(nj) = neg[j] {
                    row[nj] = -*coef;
                }
            }
            row[width] = c.rhs;
            match c.relation {
                Relation::Le => {
                    row[s] = 1.0;
                    basis.push(s);
                    s += 1;
                }
                Relation::Ge => {
                    row[s] = -1.0;
                    s += 1;
                    row[a] = 1.0;
                    basis.push(a);
                    a += 1;
                }
                Relation::Eq => {
                    row[a] = 1.0;
                    basis.push(a);
                    a += 1;
                }
            }
            rows.push(row);
        }
        Self {
            rows,
            basis,
            pos,
            neg,
            first_artificial,
            width,
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut obj: Vec<f64> = cost.to_vec();
        obj.push(0.0);
        for (r, row) in self.rows.iter().enumerate() {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for (o, v) in obj.iter_mut().zip(row) {
                    *o -= cb * v;
                }
            }
        }
        obj
    }

    fn pivot(&mut self, obj: &mut [f64], r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        let f = obj[col];
        if f != 0.0 {
            for (v, pv) in obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
        self.basis[r] = col;
    }

    /// Runs simplex iterations with Bland's rule over columns `< allowed`.
    fn optimize(&mut self, obj: &mut [f64], allowed: usize) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            let Some(col) = (0..allowed).find(|&j| obj[j] < -EPS) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                let a = row[col];
                if a > EPS {
                    let ratio = row[self.width] / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - EPS || (ratio <= lratio + EPS && self.basis[r] < self.basis[lr]) {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::UnboundedProgram);
            };
            self.pivot(obj, r, col);
        }
        Err(Error::Domain("simplex pivot limit reached".into()))
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        let scale = 1.0 + self.rows.iter().map(|r| r[self.width]).sum::<f64>();
        if self.first_artificial < self.width {
            let mut cost = vec![0.0; self.width];
            for c in cost.iter_mut().skip(self.first_artificial) {
                *c = 1.0;
            }
            let mut obj = self.reduced_costs(&cost);
            self.optimize(&mut obj, self.width)?;
            if -obj[self.width] > 1e-8 * scale {
                return Err(Error::InfeasibleInstance("linear program has no feasible point".into()));
            }
            // drive remaining artificials out of the basis or drop redundant rows
            let mut r = 0;
            while r < self.rows.len() {
                if self.basis[r] >= self.first_artificial {
                    let col = (0..self.first_artificial).find(|&j| self.rows[r][j].abs() > 1e-9);
                    match col {
                        Some(col) => {
                            self.pivot(&mut obj, r, col);
                            r += 1;
                        }
                        None => {
                            self.rows.remove(r);
                            self.basis.remove(r);
                        }
                    }
                } else {
                    r += 1;
                }
            }
        }
        let mut cost = vec![0.0; self.width];
        for (j, c) in lp.objective.iter().enumerate() {
            cost[self.pos[j]] = *c;
            if let Some(nj) = self.neg[j] {
                cost[nj] = -*c;
            }
        }
        let mut obj = self.reduced_costs(&cost);
        self.optimize(&mut obj, self.first_artificial)?;
        let mut values = vec![0.0; self.width];
        for (r, b) in self.basis.iter().enumerate() {
            values[*b] = self.rows[r][self.width];
        }
        let x: Vec<f64> = (0..lp.num_vars())
            .map(|j| values[self.pos[j]] - self.neg[j].map_or(0.0, |nj| values[nj]))
            .collect();
        let value: f64 = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
        let objective = if lp.maximizing { -value } else { value };
        Ok(LpSolution { x, objective })
    }
}
