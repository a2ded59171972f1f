//! Benchmark problems: Shor's max-of-quadratics function and a deterministic
//! generator of positive decomposable LPs.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::problem::{DecomposableLp, LpBlock, ShareAllocation};
use crate::subgradient::FirstOrderOracle;

pub const SHOR_N: usize = 5;
pub const SHOR_M: usize = 10;

/// Known optimal value, to the printed seven digits.
pub const SHOR_OPTIMUM: f64 = 22.60016;

pub const SHOR_START: [f64; SHOR_N] = [0.0, 0.0, 0.0, 0.0, 1.0];

pub const SHOR_B: [f64; SHOR_M] = [1.0, 5.0, 10.0, 2.0, 4.0, 3.0, 1.7, 2.5, 6.0, 3.5];

/// Centers `a_i`, one row per quadratic (the transpose of the usual
/// 5 x 10 printed layout).
pub const SHOR_A: [[f64; SHOR_N]; SHOR_M] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [2.0, 1.0, 1.0, 1.0, 3.0],
    [1.0, 2.0, 1.0, 1.0, 2.0],
    [1.0, 4.0, 1.0, 2.0, 2.0],
    [3.0, 2.0, 1.0, 0.0, 1.0],
    [0.0, 2.0, 1.0, 0.0, 1.0],
    [1.0, 1.0, 1.0, 1.0, 1.0],
    [1.0, 0.0, 1.0, 2.0, 1.0],
    [0.0, 0.0, 2.0, 1.0, 0.0],
    [1.0, 1.0, 2.0, 0.0, 0.0],
];

#[derive(Debug, Clone, PartialEq)]
pub struct ShorEval {
    pub value: f64,
    pub subgradient: [f64; SHOR_N],
    /// Lowest index attaining the max.
    pub active: usize,
}

/// `phi(v) = max_i b_i ||v - a_i||^2` with subgradient
/// `2 b_i (v - a_i)` of the first maximizing piece.
pub fn shor_eval(v: &[f64; SHOR_N]) -> ShorEval {
    let mut active = 0;
    let mut value = f64::NEG_INFINITY;
    for (i, (a, b)) in SHOR_A.iter().zip(SHOR_B).enumerate() {
        let eta = b * v.iter().zip(a).map(|(x, c)| (x - c) * (x - c)).sum::<f64>();
        if eta > value {
            value = eta;
            active = i;
        }
    }
    let mut subgradient = [0.0; SHOR_N];
    for (g, (x, c)) in subgradient.iter_mut().zip(v.iter().zip(&SHOR_A[active])) {
        *g = 2.0 * SHOR_B[active] * (x - c);
    }
    ShorEval {
        value,
        subgradient,
        active,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ShorProblem;

impl FirstOrderOracle for ShorProblem {
    fn evaluate(&self, v: &[f64]) -> Result<(f64, Vec<f64>)> {
        let point: [f64; SHOR_N] = v
            .try_into()
            .map_err(|_| crate::error::Error::dim("Shor point", SHOR_N, v.len()))?;
        let e = shor_eval(&point);
        Ok((e.value, e.subgradient.to_vec()))
    }
}

/// Shape of a generated instance: `l` blocks, two factors, two outputs each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub l: usize,
    pub phase: f64,
}

impl GeneratorSpec {
    pub const M: usize = 2;
    pub const N: usize = 2;

    pub fn new(l: usize) -> Self {
        GeneratorSpec { l, phase: 0.0 }
    }
}

/// Builds the positive instance (1-based `i`, `j`, `k`)
///
/// ```text
/// A_i[j][k] = 1.5 + sin(i (j + 1) + k + p)
/// c_i[k]    = 2 + cos(i + k + p)
/// b_j       = l (2 + 0.5 sin(j + 1 + p))
/// ```
pub fn generate_declp(spec: &GeneratorSpec) -> Result<DecomposableLp> {
    let p = spec.phase;
    let blocks = (1..=spec.l)
        .map(|i| {
            let i = i as f64;
            let a = (1..=GeneratorSpec::M)
                .map(|j| {
                    (1..=GeneratorSpec::N)
                        .map(|k| 1.5 + (i * (j as f64 + 1.0) + k as f64 + p).sin())
                        .collect()
                })
                .collect();
            let c = (1..=GeneratorSpec::N).map(|k| 2.0 + (i + k as f64 + p).cos()).collect();
            LpBlock { c, a }
        })
        .collect();
    let l = spec.l as f64;
    let b = (1..=GeneratorSpec::M)
        .map(|j| l * (2.0 + 0.5 * (j as f64 + 1.0 + p).sin()))
        .collect();
    DecomposableLp::new(blocks, b)
}

/// Even split `u_i = b / l`.
pub fn initial_allocation(p: &DecomposableLp) -> ShareAllocation {
    let l = p.l() as f64;
    let data = (0..p.l()).flat_map(|_| p.b().iter().map(|b| b / l)).collect();
    ShareAllocation::from_raw(data, p.l(), p.m())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shor_at_start() {
        let e = shor_eval(&SHOR_START);
        assert_eq!(e.value, 80.0);
        assert_eq!(e.active, 2);
        assert_eq!(e.subgradient, [-20.0, -40.0, -20.0, -20.0, -20.0]);
    }

    #[test]
    fn shor_at_first_center() {
        let e = shor_eval(&[0.0; 5]);
        // eta_1 vanishes at its own center; another piece is active
        assert_ne!(e.active, 0);
        assert!(e.value > 0.0);
        assert!(e.subgradient.iter().any(|g| *g != 0.0));
    }

    #[test]
    fn generator_ranges() {
        for l in [1, 3, 7] {
            for phase in [0.0, 0.4, 2.5] {
                let p = generate_declp(&GeneratorSpec { l, phase }).unwrap();
                for blk in p.blocks() {
                    assert!(blk.a.iter().flatten().all(|v| (0.5..=2.5).contains(v)));
                    assert!(blk.c.iter().all(|v| (1.0..=3.0).contains(v)));
                }
                let lf = l as f64;
                assert!(p.b().iter().all(|v| *v >= 1.5 * lf && *v <= 2.5 * lf));
            }
        }
    }

    #[test]
    fn halving_start() {
        let p = DecomposableLp::new(
            vec![
                LpBlock {
                    c: vec![1.0],
                    a: vec![vec![1.0], vec![1.0]],
                },
                LpBlock {
                    c: vec![1.0],
                    a: vec![vec![1.0], vec![1.0]],
                },
            ],
            vec![4.0, 2.0],
        )
        .unwrap();
        let u = initial_allocation(&p);
        assert_eq!(u.as_slice(), &[2.0, 1.0, 2.0, 1.0]);
        let single = generate_declp(&GeneratorSpec::new(1)).unwrap();
        assert_eq!(initial_allocation(&single).as_slice(), single.b());
    }
}
