//! Decomposable problem data: blocks `(c_i, A_i)` sharing a resource vector
//! `b`, the affine share set `U = { u : sum_i u_i = b }`, and the exact
//! evaluation helpers every solver relies on.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute per-component tolerance for membership in `U`.
pub const SHARE_TOL: f64 = 1e-9;

/// One producer: maximizes `<c, x>` subject to `A x <= u_i`, `x >= 0`.
///
/// `a` is stored row-major, `m` rows of length `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpBlock {
    pub c: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
}

impl LpBlock {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    /// `A x` for a block-local point.
    pub fn consumption(&self, x: &[f64]) -> Vec<f64> {
        self.a
            .iter()
            .map(|row| row.iter().zip(x).map(|(a, x)| a * x).sum())
            .collect()
    }
}

/// Block-separable LP `min sum_i <-c_i, x_i>` s.t. `sum_i A_i x_i <= b`,
/// `x_i >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecomposableLp {
    l: usize,
    m: usize,
    blocks: Vec<LpBlock>,
    b: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawProblem {
    l: usize,
    m: usize,
    blocks: Vec<LpBlock>,
    b: Vec<f64>,
    #[serde(default)]
    t: Option<Vec<f64>>,
}

fn check_finite(field: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::InvalidData {
            field: format!("{field}[{k}]"),
            reason: "value is not finite".into(),
        }),
        None => Ok(()),
    }
}

impl DecomposableLp {
    pub fn new(blocks: Vec<LpBlock>, b: Vec<f64>) -> Result<Self> {
        let m = b.len();
        let p = DecomposableLp {
            l: blocks.len(),
            m,
            blocks,
            b,
            t: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Attaches a penalty bound to be stored alongside the data.
    pub fn with_penalty(mut self, t: PenaltyBound) -> Result<Self> {
        if t.len() != self.m {
            return Err(Error::dim("penalty bound t", self.m, t.len()));
        }
        self.t = Some(t.0);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.l == 0 || self.blocks.is_empty() {
            return Err(Error::InvalidData {
                field: "l".into(),
                reason: "need at least one block".into(),
            });
        }
        if self.blocks.len() != self.l {
            return Err(Error::dim("blocks", self.l, self.blocks.len()));
        }
        if self.m == 0 {
            return Err(Error::InvalidData {
                field: "m".into(),
                reason: "need at least one joint constraint".into(),
            });
        }
        if self.b.len() != self.m {
            return Err(Error::dim("b", self.m, self.b.len()));
        }
        check_finite("b", &self.b)?;
        for (i, blk) in self.blocks.iter().enumerate() {
            if blk.c.is_empty() {
                return Err(Error::InvalidData {
                    field: format!("blocks[{i}].c"),
                    reason: "block has no variables".into(),
                });
            }
            check_finite(&format!("blocks[{i}].c"), &blk.c)?;
            if blk.a.len() != self.m {
                return Err(Error::dim(format!("blocks[{i}].A rows"), self.m, blk.a.len()));
            }
            for (j, row) in blk.a.iter().enumerate() {
                if row.len() != blk.n() {
                    return Err(Error::dim(format!("blocks[{i}].A[{j}]"), blk.n(), row.len()));
                }
                check_finite(&format!("blocks[{i}].A[{j}]"), row)?;
            }
        }
        if let Some(t) = &self.t {
            if t.len() != self.m {
                return Err(Error::dim("t", self.m, t.len()));
            }
            check_finite("t", t)?;
            if let Some(k) = t.iter().position(|&v| v < 0.0) {
                return Err(Error::InvalidData {
                    field: format!("t[{k}]"),
                    reason: "penalty bound must be nonnegative".into(),
                });
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: RawProblem = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let p = DecomposableLp {
            l: raw.l,
            m: raw.m,
            blocks: raw.blocks,
            b: raw.b,
            t: raw.t,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem data is always serializable")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn blocks(&self) -> &[LpBlock] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &LpBlock {
        &self.blocks[i]
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Penalty bound stored with the problem file, if any.
    pub fn penalty(&self) -> Option<PenaltyBound> {
        self.t.clone().map(PenaltyBound)
    }

    pub fn total_vars(&self) -> usize {
        self.blocks.iter().map(LpBlock::n).sum()
    }

    fn check_point(&self, x: &BlockPoint) -> Result<()> {
        if x.blocks.len() != self.l {
            return Err(Error::dim("block point blocks", self.l, x.blocks.len()));
        }
        for (i, (xi, blk)) in x.blocks.iter().zip(&self.blocks).enumerate() {
            if xi.len() != blk.n() {
                return Err(Error::dim(format!("x[{i}]"), blk.n(), xi.len()));
            }
        }
        Ok(())
    }

    /// `sum_i <-c_i, x_i>`.
    pub fn full_objective(&self, x: &BlockPoint) -> Result<f64> {
        self.check_point(x)?;
        Ok(self
            .blocks
            .iter()
            .zip(&x.blocks)
            .map(|(blk, xi)| -blk.c.iter().zip(xi).map(|(c, x)| c * x).sum::<f64>())
            .sum())
    }

    /// `[sum_i A_i x_i - b]_+`, zero iff the joint constraints hold.
    pub fn joint_violation(&self, x: &BlockPoint) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut used = vec![0.0; self.m];
        for (blk, xi) in self.blocks.iter().zip(&x.blocks) {
            for (acc, v) in used.iter_mut().zip(blk.consumption(xi)) {
                *acc += v;
            }
        }
        Ok(used.iter().zip(&self.b).map(|(u, b)| (u - b).max(0.0)).collect())
    }
}

/// A point of `U`: `l` shares of length `m`, stored as one flat vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareAllocation {
    l: usize,
    m: usize,
    data: Vec<f64>,
}

impl ShareAllocation {
    /// Wraps `data` after checking `sum_i u_i = b` to [`SHARE_TOL`].
    pub fn new(data: Vec<f64>, b: &[f64]) -> Result<Self> {
        let (l, m) = split_dims(data.len(), b.len())?;
        let u = ShareAllocation { l, m, data };
        let sums = u.block_sum();
        for (j, (s, bj)) in sums.iter().zip(b).enumerate() {
            if (s - bj).abs() > SHARE_TOL {
                return Err(Error::InvalidData {
                    field: format!("u component {j}"),
                    reason: format!("shares sum to {s}, expected {bj}"),
                });
            }
        }
        Ok(u)
    }

    pub fn from_blocks(blocks: &[Vec<f64>], b: &[f64]) -> Result<Self> {
        for (i, blk) in blocks.iter().enumerate() {
            if blk.len() != b.len() {
                return Err(Error::dim(format!("u[{i}]"), b.len(), blk.len()));
            }
        }
        Self::new(blocks.concat(), b)
    }

    /// Skips the membership check; callers guarantee `u` in `U`.
    pub(crate) fn from_raw(data: Vec<f64>, l: usize, m: usize) -> Self {
        debug_assert_eq!(data.len(), l * m);
        ShareAllocation { l, m, data }
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.m)
    }

    /// Componentwise `sum_i u_i`.
    pub fn block_sum(&self) -> Vec<f64> {
        block_sum(&self.data, self.m)
    }
}

fn split_dims(len: usize, m: usize) -> Result<(usize, usize)> {
    if m == 0 || len == 0 || !len.is_multiple_of(m) {
        return Err(Error::dim("share vector length (multiple of m)", m.max(1), len));
    }
    Ok((len / m, m))
}

fn block_sum(v: &[f64], m: usize) -> Vec<f64> {
    let mut s = vec![0.0; m];
    for chunk in v.chunks(m) {
        for (acc, x) in s.iter_mut().zip(chunk) {
            *acc += x;
        }
    }
    s
}

/// Euclidean projection of a raw `l*m` vector onto `U`:
/// `u_i = v_i - (1/l)(sum_s v_s - b)`.
pub fn project_onto_u(v: &[f64], b: &[f64]) -> Result<ShareAllocation> {
    let (l, m) = split_dims(v.len(), b.len())?;
    let excess: Vec<f64> = block_sum(v, m)
        .iter()
        .zip(b)
        .map(|(s, bj)| (s - bj) / l as f64)
        .collect();
    let data = v
        .chunks(m)
        .flat_map(|chunk| chunk.iter().zip(&excess).map(|(x, e)| x - e))
        .collect();
    Ok(ShareAllocation::from_raw(data, l, m))
}

/// Projection onto the tangent space `U_0 = { g : sum_i g_i = 0 }`:
/// removes the block mean from every block.
pub fn project_direction_onto_u0(g: &[f64], m: usize) -> Result<Vec<f64>> {
    let (l, m) = split_dims(g.len(), m)?;
    let mean: Vec<f64> = block_sum(g, m).iter().map(|s| s / l as f64).collect();
    Ok(g.chunks(m)
        .flat_map(|chunk| chunk.iter().zip(&mean).map(|(x, e)| x - e))
        .collect())
}

/// Per-constraint penalty weights `t >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PenaltyBound(Vec<f64>);

impl PenaltyBound {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        check_finite("t", &t)?;
        if let Some(k) = t.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidData {
                field: format!("t[{k}]"),
                reason: format!("penalty bound must be nonnegative, got {}", t[k]),
            });
        }
        Ok(PenaltyBound(t))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// True when every component is strictly above `lambda`.
    pub fn dominates(&self, lambda: &[f64]) -> bool {
        self.0.len() == lambda.len() && self.0.iter().zip(lambda).all(|(t, l)| t > l)
    }
}

/// Stacked block outputs `x = (x_1, ..., x_l)`, each `x_i >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPoint {
    pub blocks: Vec<Vec<f64>>,
}

impl BlockPoint {
    pub fn new(blocks: Vec<Vec<f64>>) -> Result<Self> {
        for (i, xi) in blocks.iter().enumerate() {
            check_finite(&format!("x[{i}]"), xi)?;
            if let Some(k) = xi.iter().position(|&v| v < 0.0) {
                return Err(Error::InvalidData {
                    field: format!("x[{i}][{k}]"),
                    reason: "outputs must be nonnegative".into(),
                });
            }
        }
        Ok(BlockPoint { blocks })
    }

    pub fn zeros(p: &DecomposableLp) -> Self {
        BlockPoint {
            blocks: p.blocks().iter().map(|b| vec![0.0; b.n()]).collect(),
        }
    }
}
