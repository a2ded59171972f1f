//! Dense two-phase primal simplex with bounded variables and Bland's rule.
//!
//! Instances are tiny (a handful of rows and columns), so the solver keeps
//! an explicit tableau `B^-1 [A | I]` and favours determinism over speed.
//! Variables with finite upper bounds are handled by bound flipping rather
//! than extra rows.
//!
//! Dual multipliers follow the convention `c - A^T y = r` where `r` are the
//! reduced costs; for a minimization, `<=` rows carry `y <= 0` and `>=` rows
//! carry `y >= 0`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{BlockPoint, DecomposableLp};

/// Pivot eligibility threshold.
const PIVOT_TOL: f64 = 1e-10;
/// Reduced-cost optimality threshold.
const COST_TOL: f64 = 1e-10;
/// Ratio ties within this distance are broken by lowest variable index.
const TIE_TOL: f64 = 1e-12;

pub const DEFAULT_MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// `min <c, x>` s.t. `A x (rel) rhs`, `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpInstance {
    cost: Vec<f64>,
    rows: Vec<Vec<f64>>,
    relations: Vec<Relation>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LpInstance {
    /// New instance with `x >= 0` and no rows.
    pub fn new(cost: Vec<f64>) -> Self {
        let n = cost.len();
        LpInstance {
            cost,
            rows: Vec::new(),
            relations: Vec::new(),
            rhs: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) -> &mut Self {
        self.rows.push(coeffs);
        self.relations.push(rel);
        self.rhs.push(rhs);
        self
    }

    pub fn with_row(mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) -> Self {
        self.add_row(coeffs, rel, rhs);
        self
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[j] = lower;
        self.upper[j] = upper;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let bad = |field: String, reason: &str| Error::InvalidData {
            field,
            reason: reason.into(),
        };
        if self.cost.iter().any(|v| !v.is_finite()) {
            return Err(bad("cost".into(), "non-finite cost"));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::dim(format!("row {i}"), n, row.len()));
            }
            if row.iter().any(|v| !v.is_finite()) || !self.rhs[i].is_finite() {
                return Err(bad(format!("row {i}"), "non-finite coefficient"));
            }
        }
        for j in 0..n {
            if !self.lower[j].is_finite() {
                return Err(bad(format!("lower[{j}]"), "lower bounds must be finite"));
            }
            if self.upper[j].is_nan() || self.upper[j] < self.lower[j] {
                return Err(bad(format!("upper[{j}]"), "upper bound below lower bound"));
            }
        }
        Ok(())
    }

    /// Residuals of a solution against this instance.
    pub fn certify(&self, sol: &LpSolution) -> Certificate {
        let x = &sol.x;
        let mut primal: f64 = 0.0;
        let mut compl: f64 = 0.0;
        let mut dual_sign: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            let ax: f64 = row.iter().zip(x).map(|(a, x)| a * x).sum();
            let slack = ax - self.rhs[i];
            let y = sol.duals[i];
            match self.relations[i] {
                Relation::Le => {
                    primal = primal.max(slack);
                    dual_sign = dual_sign.max(y);
                }
                Relation::Ge => {
                    primal = primal.max(-slack);
                    dual_sign = dual_sign.max(-y);
                }
                Relation::Eq => primal = primal.max(slack.abs()),
            }
            compl = compl.max((y * slack).abs());
        }
        let mut dual_obj: f64 = self.rhs.iter().zip(&sol.duals).map(|(b, y)| b * y).sum();
        for j in 0..self.num_vars() {
            primal = primal.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
            let r = sol.reduced_costs[j];
            if r > 0.0 {
                dual_obj += r * self.lower[j];
                compl = compl.max((r * (x[j] - self.lower[j])).abs());
            } else if r < 0.0 {
                if self.upper[j].is_finite() {
                    dual_obj += r * self.upper[j];
                    compl = compl.max((r * (self.upper[j] - x[j])).abs());
                } else {
                    dual_sign = dual_sign.max(-r);
                }
            }
        }
        Certificate {
            primal_residual: primal.max(0.0),
            complementarity: compl,
            dual_sign_violation: dual_sign,
            duality_gap: (sol.objective - dual_obj).abs(),
        }
    }
}

/// Worst-case residuals of an optimal solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub primal_residual: f64,
    pub complementarity: f64,
    pub dual_sign_violation: f64,
    pub duality_gap: f64,
}

impl Certificate {
    pub fn holds(&self, tol: f64) -> bool {
        self.primal_residual <= tol
            && self.complementarity <= tol
            && self.dual_sign_violation <= tol
            && self.duality_gap <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; meaningful when `Optimal`.
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub pivots: usize,
    /// Filled when [`SimplexOptions::record_pivots`] is set.
    pub pivot_log: Option<String>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_pivots: usize,
    pub record_pivots: bool,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_pivots: DEFAULT_MAX_PIVOTS,
            record_pivots: false,
        }
    }
}

pub fn solve_lp(inst: &LpInstance) -> Result<LpSolution> {
    solve_lp_with(inst, &SimplexOptions::default())
}

pub fn solve_lp_with(inst: &LpInstance, opts: &SimplexOptions) -> Result<LpSolution> {
    inst.validate()?;
    let mut tab = Tableau::build(inst, opts);
    let status = tab.run()?;
    Ok(tab.extract(inst, status))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau {
    m: usize,
    n_struct: usize,
    n_cols: usize,
    first_art: usize,
    /// `m x n_cols`, equals `B^-1 A'` for the sign-normalized, shifted rows.
    t: Vec<Vec<f64>>,
    /// Shifted, sign-normalized constraint data, kept for refreshing `beta`.
    a0: Vec<Vec<f64>>,
    rhs0: Vec<f64>,
    row_sign: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    upper: Vec<f64>,
    cost2: Vec<f64>,
    pivots: usize,
    opts: SimplexOptions,
    log: Option<String>,
}

impl Tableau {
    fn build(inst: &LpInstance, opts: &SimplexOptions) -> Self {
        let m = inst.num_rows();
        let n = inst.num_vars();
        let n_slack = inst.relations.iter().filter(|r| **r != Relation::Eq).count();
        let first_art = n + n_slack;
        let n_cols = first_art + m;

        let mut a0 = vec![vec![0.0; n_cols]; m];
        let mut rhs0 = vec![0.0; m];
        let mut row_sign = vec![1.0; m];
        let mut slack = n;
        for i in 0..m {
            let row = &inst.rows[i];
            let shift: f64 = row.iter().zip(&inst.lower).map(|(a, l)| a * l).sum();
            a0[i][..n].copy_from_slice(row);
            match inst.relations[i] {
                Relation::Le => {
                    a0[i][slack] = 1.0;
                    slack += 1;
                }
                Relation::Ge => {
                    a0[i][slack] = -1.0;
                    slack += 1;
                }
                Relation::Eq => {}
            }
            rhs0[i] = inst.rhs[i] - shift;
            if rhs0[i] < 0.0 {
                row_sign[i] = -1.0;
                rhs0[i] = -rhs0[i];
                a0[i][..first_art].iter_mut().for_each(|v| *v = -*v);
            }
            a0[i][first_art + i] = 1.0;
        }

        let mut upper = vec![f64::INFINITY; n_cols];
        for j in 0..n {
            upper[j] = inst.upper[j] - inst.lower[j];
        }
        let mut cost2 = vec![0.0; n_cols];
        cost2[..n].copy_from_slice(&inst.cost);

        let mut state = vec![VarState::AtLower; n_cols];
        let basis: Vec<usize> = (first_art..n_cols).collect();
        for &b in &basis {
            state[b] = VarState::Basic;
        }

        Tableau {
            m,
            n_struct: n,
            n_cols,
            first_art,
            t: a0.clone(),
            a0,
            beta: rhs0.clone(),
            rhs0,
            row_sign,
            basis,
            state,
            upper,
            cost2,
            pivots: 0,
            opts: *opts,
            log: opts.record_pivots.then(String::new),
        }
    }

    fn is_art(&self, j: usize) -> bool {
        j >= self.first_art
    }

    fn run(&mut self) -> Result<LpStatus> {
        let mut cost1 = vec![0.0; self.n_cols];
        cost1[self.first_art..].iter_mut().for_each(|c| *c = 1.0);
        // phase 1 is bounded below by zero, so it never reports unbounded
        self.optimize(&cost1, 1)?;
        self.refresh_beta();

        let infeas: f64 = self
            .basis
            .iter()
            .zip(&self.beta)
            .filter(|(b, _)| self.is_art(**b))
            .map(|(_, v)| *v)
            .sum();
        let scale = 1.0 + self.rhs0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if infeas > 1e-9 * scale {
            return Ok(LpStatus::Infeasible);
        }

        self.drive_out_artificials();
        for j in self.first_art..self.n_cols {
            self.upper[j] = 0.0;
        }
        let cost2 = self.cost2.clone();
        let status = self.optimize(&cost2, 2)?;
        self.refresh_beta();
        Ok(status)
    }

    fn reduced_cost(&self, cost: &[f64], j: usize) -> f64 {
        let mut d = cost[j];
        for i in 0..self.m {
            d -= cost[self.basis[i]] * self.t[i][j];
        }
        d
    }

    fn optimize(&mut self, cost: &[f64], phase: u8) -> Result<LpStatus> {
        loop {
            // Bland: lowest-index improving column
            let mut entering = None;
            for j in 0..self.first_art {
                let d = match self.state[j] {
                    VarState::Basic => continue,
                    VarState::AtLower => self.reduced_cost(cost, j),
                    VarState::AtUpper => -self.reduced_cost(cost, j),
                };
                if d < -COST_TOL && self.upper[j] > 0.0 {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return Ok(LpStatus::Optimal);
            };
            let dir = if self.state[j] == VarState::AtLower { 1.0 } else { -1.0 };

            // rate of change of each basic variable per unit step
            let mut best: Option<(f64, usize, VarState)> = None;
            for i in 0..self.m {
                let rate = -dir * self.t[i][j];
                let var = self.basis[i];
                let (limit, to) = if rate < -PIVOT_TOL {
                    (self.beta[i].max(0.0) / -rate, VarState::AtLower)
                } else if rate > PIVOT_TOL && self.upper[var].is_finite() {
                    ((self.upper[var] - self.beta[i]).max(0.0) / rate, VarState::AtUpper)
                } else {
                    continue;
                };
                let better = match best {
                    None => true,
                    Some((lim, r, _)) => limit < lim - TIE_TOL || (limit <= lim + TIE_TOL && var < self.basis[r]),
                };
                if better {
                    best = Some((limit, i, to));
                }
            }

            self.pivots += 1;
            if self.pivots > self.opts.max_pivots {
                return Err(Error::MaxPivotsExceeded {
                    cap: self.opts.max_pivots,
                });
            }

            let flip = self.upper[j];
            let flips = flip.is_finite() && best.is_none_or(|(lim, _, _)| flip <= lim);
            if flips {
                for i in 0..self.m {
                    self.beta[i] -= dir * self.t[i][j] * flip;
                }
                self.state[j] = if dir > 0.0 {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
                if let Some(log) = &mut self.log {
                    let _ = writeln!(log, "phase {phase}: flip x{j}");
                }
                continue;
            }
            let Some((step, r, to)) = best else {
                return Ok(LpStatus::Unbounded);
            };

            for i in 0..self.m {
                self.beta[i] -= dir * self.t[i][j] * step;
            }
            let entering_value = if dir > 0.0 { step } else { self.upper[j] - step };
            let leaving = self.basis[r];
            if let Some(log) = &mut self.log {
                let _ = writeln!(log, "phase {phase}: x{j} enters, x{leaving} leaves row {r}");
            }
            self.pivot(r, j);
            self.beta[r] = entering_value;
            self.state[leaving] = to;
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.t[r][j];
        self.t[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.t[r].clone();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i][j];
            if f != 0.0 {
                for (v, pr) in self.t[i].iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
                self.t[i][j] = 0.0;
            }
        }
        self.state[self.basis[r]] = VarState::AtLower;
        self.basis[r] = j;
        self.state[j] = VarState::Basic;
    }

    /// After phase 1, replace zero-valued basic artificials by structural or
    /// slack columns where the row allows it. Rows that cannot be cleared are
    /// redundant and keep their artificial fixed at zero.
    fn drive_out_artificials(&mut self) {
        for r in 0..self.m {
            if !self.is_art(self.basis[r]) {
                continue;
            }
            let candidate =
                (0..self.first_art).find(|&j| self.state[j] != VarState::Basic && self.t[r][j].abs() > PIVOT_TOL);
            if let Some(j) = candidate {
                let value = match self.state[j] {
                    VarState::AtUpper => self.upper[j],
                    _ => 0.0,
                };
                let leaving = self.basis[r];
                self.pivot(r, j);
                self.state[leaving] = VarState::AtLower;
                self.beta[r] = value;
                if let Some(log) = &mut self.log {
                    let _ = writeln!(log, "cleanup: x{j} replaces artificial x{leaving} in row {r}");
                }
            }
        }
        self.refresh_beta();
    }

    /// Recomputes basic values as `B^-1 (rhs - sum_{j at upper} a_j u_j)`;
    /// `B^-1` sits in the artificial columns of the tableau.
    fn refresh_beta(&mut self) {
        let mut rhs = self.rhs0.clone();
        for j in 0..self.first_art {
            if self.state[j] == VarState::AtUpper {
                for (i, v) in rhs.iter_mut().enumerate() {
                    *v -= self.a0[i][j] * self.upper[j];
                }
            }
        }
        for i in 0..self.m {
            self.beta[i] = (0..self.m).map(|k| self.t[i][self.first_art + k] * rhs[k]).sum();
        }
    }

    fn extract(&self, inst: &LpInstance, status: LpStatus) -> LpSolution {
        let n = self.n_struct;
        let mut xs = vec![0.0; self.n_cols];
        for j in 0..self.n_cols {
            if self.state[j] == VarState::AtUpper {
                xs[j] = self.upper[j];
            }
        }
        for (i, &b) in self.basis.iter().enumerate() {
            xs[b] = self.beta[i];
        }
        let x: Vec<f64> = (0..n)
            .map(|j| (inst.lower[j] + xs[j]).clamp(inst.lower[j], inst.upper[j]))
            .collect();

        let duals: Vec<f64> = (0..self.m)
            .map(|k| {
                let yk: f64 = (0..self.m)
                    .map(|i| self.cost2[self.basis[i]] * self.t[i][self.first_art + k])
                    .sum();
                yk * self.row_sign[k]
            })
            .collect();
        let reduced_costs: Vec<f64> = (0..n)
            .map(|j| inst.cost[j] - inst.rows.iter().zip(&duals).map(|(row, y)| row[j] * y).sum::<f64>())
            .collect();
        let objective = match status {
            LpStatus::Optimal => inst.cost.iter().zip(&x).map(|(c, x)| c * x).sum(),
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
        };
        LpSolution {
            status,
            x,
            objective,
            duals,
            reduced_costs,
            pivots: self.pivots,
            pivot_log: self.log.clone(),
        }
    }
}

/// Exact optimum of a decomposable problem solved as one monolithic LP.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub f_star: f64,
    pub x_star: BlockPoint,
    /// Multipliers of the joint constraints, `lambda* >= 0`.
    pub lambda_star: Vec<f64>,
    pub solution: LpSolution,
}

/// Assembles `min sum_i <-c_i, x_i>` s.t. `sum_i A_i x_i <= b`, `x >= 0`
/// and solves it exactly.
pub fn solve_full_reference(p: &DecomposableLp) -> Result<ReferenceSolution> {
    let n = p.total_vars();
    let cost: Vec<f64> = p.blocks().iter().flat_map(|b| b.c.iter().map(|c| -c)).collect();
    let mut lp = LpInstance::new(cost);
    for j in 0..p.m() {
        let row: Vec<f64> = p.blocks().iter().flat_map(|b| b.a[j].iter().copied()).collect();
        debug_assert_eq!(row.len(), n);
        lp.add_row(row, Relation::Le, p.b()[j]);
    }
    let solution = solve_lp(&lp)?;
    match solution.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::InvalidProblem("reference LP is infeasible".into())),
        LpStatus::Unbounded => {
            return Err(Error::InvalidProblem(
                "reference LP is unbounded (invalid generator output)".into(),
            ))
        }
    }
    let mut offset = 0;
    let blocks = p
        .blocks()
        .iter()
        .map(|b| {
            let xi = solution.x[offset..offset + b.n()].to_vec();
            offset += b.n();
            xi
        })
        .collect();
    Ok(ReferenceSolution {
        f_star: solution.objective,
        x_star: BlockPoint { blocks },
        lambda_star: solution.duals.iter().map(|y| (-y).max(0.0)).collect(),
        solution,
    })
}
