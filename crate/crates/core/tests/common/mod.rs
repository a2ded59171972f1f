//! Independent oracles for the integration and acceptance tests. Nothing
//! here calls into the simplex code.

#![allow(dead_code)]

use rand::Rng;
use sharedecomp::lp::{LpInstance, Relation};

/// Dense Gaussian elimination with partial pivoting; `None` if singular.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-11 {
            return None;
        }
        a.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (rhs[r] - s) / a[r][r];
    }
    Some(x)
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Enumerated {
    Optimal(f64),
    NoVertex,
}

/// Minimum of `c.x` over all basic feasible solutions of the instance.
/// Valid when the feasible region is pointed and the optimum is finite.
pub fn enumerate_vertices(lp: &LpInstance) -> (Enumerated, Option<Vec<f64>>) {
    let n = lp.num_vars();
    let mut eqs: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut ineqs: Vec<(Vec<f64>, f64)> = Vec::new(); // a.x <= b
    for ((row, rel), b) in lp.rows().iter().zip(lp.relations()).zip(lp.rhs()) {
        match rel {
            Relation::Le => ineqs.push((row.clone(), *b)),
            Relation::Ge => ineqs.push((row.iter().map(|v| -v).collect(), -b)),
            Relation::Eq => eqs.push((row.clone(), *b)),
        }
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        ineqs.push((e.clone(), -lp.lower()[j]));
        if lp.upper()[j].is_finite() {
            e[j] = 1.0;
            ineqs.push((e, lp.upper()[j]));
        }
    }
    if eqs.len() > n {
        return (Enumerated::NoVertex, None);
    }
    let feasible = |x: &[f64]| {
        let dot = |a: &[f64]| a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>();
        eqs.iter().all(|(a, b)| (dot(a) - b).abs() <= 1e-9 * (1.0 + b.abs()))
            && ineqs.iter().all(|(a, b)| dot(a) <= b + 1e-9 * (1.0 + b.abs()))
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    combinations(ineqs.len(), n - eqs.len(), &mut |idx| {
        let mut a: Vec<Vec<f64>> = eqs.iter().map(|(a, _)| a.clone()).collect();
        let mut b: Vec<f64> = eqs.iter().map(|(_, b)| *b).collect();
        for &i in idx {
            a.push(ineqs[i].0.clone());
            b.push(ineqs[i].1);
        }
        if let Some(x) = solve_dense(a, b) {
            if feasible(&x) {
                let v: f64 = lp.cost().iter().zip(&x).map(|(c, x)| c * x).sum();
                if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                    best = Some((v, x));
                }
            }
        }
    });
    match best {
        Some((v, x)) => (Enumerated::Optimal(v), Some(x)),
        None => (Enumerated::NoVertex, None),
    }
}

/// Random LP with at most `max_rows` rows and `max_cols` columns whose
/// feasible region (when nonempty) is bounded: the first row always caps
/// `sum x_j`.
pub fn random_bounded_lp(rng: &mut impl Rng, max_rows: usize, max_cols: usize) -> LpInstance {
    let n = rng.gen_range(1..=max_cols);
    let m = rng.gen_range(1..=max_rows);
    let coef = |rng: &mut dyn rand::RngCore| -> f64 {
        if rng.gen_bool(0.6) {
            rng.gen_range(-3i32..=3) as f64
        } else {
            (rng.gen_range(-3.0..3.0f64) * 100.0).round() / 100.0
        }
    };
    let cost = (0..n).map(|_| coef(rng)).collect();
    let mut lp = LpInstance::new(cost);
    lp.add_row(vec![1.0; n], Relation::Le, rng.gen_range(1..=8) as f64);
    for _ in 1..m {
        let row: Vec<f64> = (0..n).map(|_| coef(rng)).collect();
        let rel = match rng.gen_range(0..10) {
            0..=5 => Relation::Le,
            6..=8 => Relation::Ge,
            _ => Relation::Eq,
        };
        let rhs = rng.gen_range(-2i32..=6) as f64;
        lp.add_row(row, rel, rhs);
    }
    for j in 0..n {
        if rng.gen_bool(0.3) {
            let lo = if rng.gen_bool(0.3) {
                rng.gen_range(0..=1) as f64
            } else {
                0.0
            };
            lp.set_bounds(j, lo, lo + rng.gen_range(1..=4) as f64);
        }
    }
    lp
}

/// Euclidean projection onto `{u : sum_i u_i = b}` from the KKT system
/// `[I E^T; E 0] [u; mu] = [v; b]`, `E = [I I ... I]`.
pub fn kkt_projection(v: &[f64], b: &[f64]) -> Vec<f64> {
    let m = b.len();
    let lm = v.len();
    let dim = lm + m;
    let mut a = vec![vec![0.0; dim]; dim];
    let mut rhs = vec![0.0; dim];
    for k in 0..lm {
        a[k][k] = 1.0;
        a[k][lm + k % m] = 1.0;
        a[lm + k % m][k] = 1.0;
        rhs[k] = v[k];
    }
    rhs[lm..].copy_from_slice(b);
    let sol = solve_dense(a, rhs).expect("KKT matrix is nonsingular");
    sol[..lm].to_vec()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
