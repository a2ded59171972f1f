//! Exact non-smooth penalty decomposition.
//!
//! For a share `u_i` the block value is
//!
//! ```text
//! mu_i(u_i, t) = min_{x_i >= 0} <-c_i, x_i> + <t, [A_i x_i - u_i]_+>
//!              = max { -<u_i, y> : A_i^T y >= c_i, 0 <= y <= t }
//! ```
//!
//! and `-y'` (the maximizer) is a subgradient of `mu_i` at `u_i`. The master
//! function `mu(u, t) = sum_i mu_i(u_i, t)` is convex on `U`; with
//! `t > lambda*` its minimizers over `U` give optimal solutions of the
//! coupled problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_full_reference, solve_lp, LpInstance, LpStatus, Relation};
use crate::problem::{BlockPoint, DecomposableLp, LpBlock, PenaltyBound, ShareAllocation};

/// Max allowed disagreement between primal and dual block values before a
/// cross-checked evaluation fails.
pub const CROSS_CHECK_TOL: f64 = 1e-6;

/// Result of evaluating one penalized block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEvaluation {
    pub value: f64,
    /// Maximizer `y'` of the bounded dual, `0 <= y' <= t`.
    pub dual: Vec<f64>,
    /// Minimizer of the penalized primal.
    pub x: Vec<f64>,
}

/// A block whose penalized marginal value can be evaluated. `Ok(None)` means
/// the penalized problem is unbounded below for this `t`.
pub trait PenalizedBlock {
    fn evaluate_penalized(&self, share: &[f64], t: &PenaltyBound) -> Result<Option<BlockEvaluation>>;
}

impl PenalizedBlock for LpBlock {
    fn evaluate_penalized(&self, share: &[f64], t: &PenaltyBound) -> Result<Option<BlockEvaluation>> {
        dual_path(self, share, t)
    }
}

fn check_block_dims(block: &LpBlock, share: &[f64], t: &PenaltyBound) -> Result<()> {
    let m = block.a.len();
    if share.len() != m {
        return Err(Error::dim("block share", m, share.len()));
    }
    if t.len() != m {
        return Err(Error::dim("penalty bound t", m, t.len()));
    }
    Ok(())
}

/// `min <u_i, y>` s.t. `A_i^T y >= c_i`, `0 <= y <= t`. The row
/// multipliers of this LP solve the penalized primal.
fn dual_path(block: &LpBlock, share: &[f64], t: &PenaltyBound) -> Result<Option<BlockEvaluation>> {
    check_block_dims(block, share, t)?;
    let m = block.a.len();
    let mut lp = LpInstance::new(share.to_vec());
    for k in 0..block.n() {
        let col = block.a.iter().map(|row| row[k]).collect();
        lp.add_row(col, Relation::Ge, block.c[k]);
    }
    for (j, &tj) in t.as_slice().iter().enumerate() {
        lp.set_bounds(j, 0.0, tj);
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(None),
        // bounded box, cannot happen
        LpStatus::Unbounded => return Err(Error::InvalidProblem("bounded dual reported unbounded".into())),
    }
    let dual: Vec<f64> = sol.x.clone();
    debug_assert_eq!(dual.len(), m);
    let value = -share.iter().zip(&dual).map(|(u, y)| u * y).sum::<f64>();
    let x = sol.duals.iter().map(|w| w.max(0.0)).collect();
    Ok(Some(BlockEvaluation { value, dual, x }))
}

/// Penalized primal in epigraph form:
/// `min <-c_i, x> + <t, z>` s.t. `A_i x - z <= u_i`, `x, z >= 0`.
fn primal_path(block: &LpBlock, share: &[f64], t: &PenaltyBound) -> Result<Option<BlockEvaluation>> {
    check_block_dims(block, share, t)?;
    let n = block.n();
    let m = block.a.len();
    let cost: Vec<f64> = block.c.iter().map(|c| -c).chain(t.as_slice().iter().copied()).collect();
    let mut lp = LpInstance::new(cost);
    for (j, row) in block.a.iter().enumerate() {
        let mut coeffs = row.clone();
        coeffs.extend((0..m).map(|r| if r == j { -1.0 } else { 0.0 }));
        lp.add_row(coeffs, Relation::Le, share[j]);
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(Some(BlockEvaluation {
            value: sol.objective,
            dual: sol.duals.iter().map(|y| (-y).max(0.0)).collect(),
            x: sol.x[..n].to_vec(),
        })),
        LpStatus::Unbounded => Ok(None),
        // x = 0, z = [-u]_+ is always feasible
        LpStatus::Infeasible => Err(Error::InvalidProblem("penalized primal reported infeasible".into())),
    }
}

/// Block value, subgradient dual and primal minimizer via the bounded dual.
pub fn eval_mu_block(p: &DecomposableLp, i: usize, share: &[f64], t: &PenaltyBound) -> Result<BlockEvaluation> {
    if i >= p.l() {
        return Err(Error::dim("block index (< l)", p.l(), i));
    }
    dual_path(p.block(i), share, t)?.ok_or(Error::InvalidPenaltyBound { block: i })
}

/// Same quantity through the penalized primal; used as a cross-check.
pub fn eval_mu_block_primal(p: &DecomposableLp, i: usize, share: &[f64], t: &PenaltyBound) -> Result<BlockEvaluation> {
    if i >= p.l() {
        return Err(Error::dim("block index (< l)", p.l(), i));
    }
    primal_path(p.block(i), share, t)?.ok_or(Error::InvalidPenaltyBound { block: i })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EvalMode {
    /// Bounded dual only.
    #[default]
    Dual,
    /// Both paths; fails with `OracleMismatch` beyond [`CROSS_CHECK_TOL`].
    CrossChecked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterEvaluation {
    pub value: f64,
    /// Stacked `-y'_i`, length `l*m`.
    pub subgradient: Vec<f64>,
    pub block_values: Vec<f64>,
    pub duals: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
}

pub fn eval_master(p: &DecomposableLp, u: &ShareAllocation, t: &PenaltyBound) -> Result<MasterEvaluation> {
    eval_master_with(p, u, t, EvalMode::Dual)
}

pub fn eval_master_with(
    p: &DecomposableLp,
    u: &ShareAllocation,
    t: &PenaltyBound,
    mode: EvalMode,
) -> Result<MasterEvaluation> {
    if u.l() != p.l() || u.m() != p.m() {
        return Err(Error::dim("share allocation length", p.l() * p.m(), u.l() * u.m()));
    }
    let mut evals = eval_blocks(p.blocks(), u, t)?;
    if mode == EvalMode::CrossChecked {
        for (i, ev) in evals.iter_mut().enumerate() {
            let primal = eval_mu_block_primal(p, i, u.block(i), t)?;
            if (primal.value - ev.value).abs() > CROSS_CHECK_TOL {
                log::warn!("block {i}: primal {} vs dual {}", primal.value, ev.value);
                return Err(Error::OracleMismatch {
                    block: i,
                    primal: primal.value,
                    dual: ev.value,
                });
            }
        }
    }
    Ok(assemble(evals))
}

/// Evaluates any sequence of penalized blocks on the shares of `u`, in block
/// order.
pub fn eval_blocks<B: PenalizedBlock>(
    blocks: &[B],
    u: &ShareAllocation,
    t: &PenaltyBound,
) -> Result<Vec<BlockEvaluation>> {
    blocks
        .iter()
        .enumerate()
        .map(|(i, blk)| {
            blk.evaluate_penalized(u.block(i), t)?
                .ok_or(Error::InvalidPenaltyBound { block: i })
        })
        .collect()
}

fn assemble(evals: Vec<BlockEvaluation>) -> MasterEvaluation {
    let block_values: Vec<f64> = evals.iter().map(|e| e.value).collect();
    // fixed summation order keeps results bit-identical
    let value = block_values.iter().fold(0.0, |acc, v| acc + v);
    let subgradient = evals.iter().flat_map(|e| e.dual.iter().map(|y| -y)).collect();
    let (duals, x) = evals.into_iter().map(|e| (e.dual, e.x)).unzip();
    MasterEvaluation {
        value,
        subgradient,
        block_values,
        duals,
        x,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub lambda_star: Vec<f64>,
    pub t: PenaltyBound,
    pub f_star: f64,
    pub x_star: BlockPoint,
}

pub const DEFAULT_MARGIN: f64 = 1.0;

/// `t_j = 2 lambda*_j + margin` from the exact reference solve.
pub fn calibrate_penalty(p: &DecomposableLp, margin: f64) -> Result<CalibrationResult> {
    if !(margin.is_finite() && margin > 0.0) {
        return Err(Error::Config(format!(
            "calibration margin must be positive, got {margin}"
        )));
    }
    let r = solve_full_reference(p)?;
    let t = penalty_from_multipliers(&r.lambda_star, margin);
    Ok(CalibrationResult {
        lambda_star: r.lambda_star,
        t,
        f_star: r.f_star,
        x_star: r.x_star,
    })
}

pub fn penalty_from_multipliers(lambda: &[f64], margin: f64) -> PenaltyBound {
    PenaltyBound::new(lambda.iter().map(|l| 2.0 * l.max(0.0) + margin).collect()).expect("nonnegative by construction")
}

/// Stacked block minimizers of an evaluation.
pub fn recover_primal(eval: &MasterEvaluation) -> BlockPoint {
    BlockPoint { blocks: eval.x.clone() }
}

/// `sqrt(l) * ||t||`, a bound on every master subgradient norm.
pub fn subgradient_norm_bound(p: &DecomposableLp, t: &PenaltyBound) -> f64 {
    (p.l() as f64).sqrt() * t.norm()
}

/// Shares that give every block exactly its optimal consumption plus an
/// equal part of the leftover resource:
/// `u*_i = (1/l)(b - sum_s A_s x*_s) + A_i x*_i`.
pub fn optimal_shares(p: &DecomposableLp, x_star: &BlockPoint) -> Result<ShareAllocation> {
    p.joint_violation(x_star)?;
    let used: Vec<Vec<f64>> = p
        .blocks()
        .iter()
        .zip(&x_star.blocks)
        .map(|(blk, xi)| blk.consumption(xi))
        .collect();
    let l = p.l() as f64;
    let leftover: Vec<f64> = (0..p.m())
        .map(|j| (p.b()[j] - used.iter().map(|u| u[j]).sum::<f64>()) / l)
        .collect();
    let data: Vec<f64> = used
        .iter()
        .flat_map(|ui| ui.iter().zip(&leftover).map(|(a, e)| a + e))
        .collect();
    Ok(ShareAllocation::from_raw(data, p.l(), p.m()))
}

/// Exact `inf_{u in U} mu(u, t)`, solved as the monolithic penalized LP
/// `min sum_i <-c_i, x_i> + <t, w>` s.t. `sum_i A_i x_i - w <= b`.
/// Returns `-inf` when the penalty is too weak for the problem to be bounded.
pub fn penalized_master_minimum(p: &DecomposableLp, t: &PenaltyBound) -> Result<f64> {
    if t.len() != p.m() {
        return Err(Error::dim("penalty bound t", p.m(), t.len()));
    }
    let n = p.total_vars();
    let m = p.m();
    let cost: Vec<f64> = p
        .blocks()
        .iter()
        .flat_map(|b| b.c.iter().map(|c| -c))
        .chain(t.as_slice().iter().copied())
        .collect();
    let mut lp = LpInstance::new(cost);
    for j in 0..m {
        let mut row: Vec<f64> = p.blocks().iter().flat_map(|b| b.a[j].iter().copied()).collect();
        row.extend((0..m).map(|r| if r == j { -1.0 } else { 0.0 }));
        debug_assert_eq!(row.len(), n + m);
        lp.add_row(row, Relation::Le, p.b()[j]);
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective),
        LpStatus::Unbounded => Ok(f64::NEG_INFINITY),
        LpStatus::Infeasible => Err(Error::InvalidProblem("penalized LP reported infeasible".into())),
    }
}
