mod common;

use common::{dot, enumerate_vertices, norm, Enumerated};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sharedecomp::experiment::random_share;
use sharedecomp::lp::{solve_full_reference, LpInstance, Relation};
use sharedecomp::penalty::{
    calibrate_penalty, eval_master, eval_mu_block, eval_mu_block_primal, optimal_shares, penalized_master_minimum,
    recover_primal, subgradient_norm_bound,
};
use sharedecomp::problem::{DecomposableLp, LpBlock, PenaltyBound, ShareAllocation};
use sharedecomp::testbed::{generate_declp, initial_allocation, GeneratorSpec};

fn calibrated(l: usize) -> (DecomposableLp, PenaltyBound, ShareAllocation, f64) {
    let p = generate_declp(&GeneratorSpec::new(l)).unwrap();
    let cal = calibrate_penalty(&p, 1.0).unwrap();
    let u_star = optimal_shares(&p, &cal.x_star).unwrap();
    (p, cal.t, u_star, cal.f_star)
}

/// Brute force for the scalar block: `-x + 5 [2x - 1]_+` on a fine grid.
#[test]
fn scalar_block_against_grid() {
    let p = DecomposableLp::new(
        vec![LpBlock {
            c: vec![1.0],
            a: vec![vec![2.0]],
        }],
        vec![1.0],
    )
    .unwrap();
    let t = PenaltyBound::new(vec![5.0]).unwrap();
    let grid = (0..=40_000)
        .map(|s| s as f64 * 1e-4)
        .map(|x| -x + 5.0 * (2.0 * x - 1.0_f64).max(0.0))
        .fold(f64::INFINITY, f64::min);
    let ev = eval_mu_block(&p, 0, &[1.0], &t).unwrap();
    assert!((ev.value - grid).abs() < 1e-9);
    assert!((ev.value + 0.5).abs() < 1e-12);
}

#[test]
fn random_2x2_primal_dual_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = PenaltyBound::new(vec![10.0, 10.0]).unwrap();
    for _ in 0..200 {
        let blk = LpBlock {
            c: (0..2).map(|_| rng.gen_range(0.5..3.0)).collect(),
            a: (0..2)
                .map(|_| (0..2).map(|_| rng.gen_range(0.5..2.5)).collect())
                .collect(),
        };
        let p = DecomposableLp::new(vec![blk], vec![1.0, 1.0]).unwrap();
        let u: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..3.0)).collect();
        let d = eval_mu_block(&p, 0, &u, &t).unwrap();
        let q = eval_mu_block_primal(&p, 0, &u, &t).unwrap();
        assert!((d.value - q.value).abs() < 1e-8, "{} vs {}", d.value, q.value);
        // value equals -<y', u> and the recovered x attains it
        assert!((d.value + dot(&d.dual, &u)).abs() < 1e-8);
        let blk = p.block(0);
        let ax = blk.consumption(&d.x);
        let primal_at_x: f64 = -dot(&blk.c, &d.x)
            + ax.iter()
                .zip(&u)
                .zip(t.as_slice())
                .map(|((a, u), t)| t * (a - u).max(0.0))
                .sum::<f64>();
        assert!((primal_at_x - d.value).abs() < 1e-8);
        assert!(d.dual.iter().zip(t.as_slice()).all(|(y, t)| *y >= 0.0 && y <= t));
    }
}

#[test]
fn exactness_at_optimal_shares() {
    for l in [1, 2, 5] {
        let (p, t, u_star, f_star) = calibrated(l);
        let ev = eval_master(&p, &u_star, &t).unwrap();
        assert!((ev.value - f_star).abs() < 1e-7, "l={l}: {} vs {f_star}", ev.value);
        let x = recover_primal(&ev);
        assert!(p.joint_violation(&x).unwrap().iter().all(|v| *v <= 1e-6));
        assert!((p.full_objective(&x).unwrap() - f_star).abs() < 1e-6);
        assert!((penalized_master_minimum(&p, &t).unwrap() - f_star).abs() < 1e-9);
    }
}

#[test]
fn single_block_value_and_recovery() {
    let p = generate_declp(&GeneratorSpec::new(1)).unwrap();
    let cal = calibrate_penalty(&p, 1.0).unwrap();
    let u = initial_allocation(&p);
    let ev = eval_master(&p, &u, &cal.t).unwrap();
    let blk = eval_mu_block(&p, 0, u.block(0), &cal.t).unwrap();
    assert_eq!(ev.value, blk.value);
    let x = recover_primal(&ev);
    assert!((p.full_objective(&x).unwrap() - cal.f_star).abs() < 1e-9);
}

#[test]
fn subgradient_inequality_and_convexity() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for l in [2, 5] {
        let (p, t, u_star, _) = calibrated(l);
        for _ in 0..200 {
            let u1 = random_share(&mut rng, &u_star, p.b(), 3.0);
            let u2 = random_share(&mut rng, &u_star, p.b(), 3.0);
            let e1 = eval_master(&p, &u1, &t).unwrap();
            let e2 = eval_master(&p, &u2, &t).unwrap();
            let diff: Vec<f64> = u2.as_slice().iter().zip(u1.as_slice()).map(|(a, b)| a - b).collect();
            assert!(e2.value - e1.value >= dot(&e1.subgradient, &diff) - 1e-9);
            for alpha in [0.25, 0.5, 0.75] {
                let mix: Vec<f64> = u1
                    .as_slice()
                    .iter()
                    .zip(u2.as_slice())
                    .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                    .collect();
                let um = ShareAllocation::new(mix, p.b()).unwrap();
                let em = eval_master(&p, &um, &t).unwrap();
                assert!(em.value <= alpha * e1.value + (1.0 - alpha) * e2.value + 1e-9);
            }
        }
    }
}

#[test]
fn monotone_in_penalty_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (p, t, u_star, _) = calibrated(2);
    for _ in 0..100 {
        let u = random_share(&mut rng, &u_star, p.b(), 3.0);
        let bigger = PenaltyBound::new(t.as_slice().iter().map(|v| v + rng.gen_range(0.0..2.0)).collect()).unwrap();
        for i in 0..p.l() {
            let lo = eval_mu_block(&p, i, u.block(i), &t).unwrap().value;
            let hi = eval_mu_block(&p, i, u.block(i), &bigger).unwrap().value;
            assert!(hi >= lo - 1e-9);
        }
    }
}

#[test]
fn norm_bound_holds_on_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let (p, t, u_star, _) = calibrated(5);
    let bound = subgradient_norm_bound(&p, &t);
    for _ in 0..100 {
        let u = random_share(&mut rng, &u_star, p.b(), 5.0);
        let ev = eval_master(&p, &u, &t).unwrap();
        assert!(norm(&ev.subgradient) <= bound);
        for y in &ev.duals {
            assert!(y.iter().zip(t.as_slice()).all(|(y, t)| *y >= 0.0 && y <= t));
        }
        let total: f64 = ev.block_values.iter().sum();
        assert!((total - ev.value).abs() < 1e-12);
    }
}

/// Calibrated `t` strictly dominates every optimal multiplier found by
/// enumerating the vertices of the joint dual.
#[test]
fn calibration_dominates_enumerated_multipliers() {
    let p = generate_declp(&GeneratorSpec::new(2)).unwrap();
    let cal = calibrate_penalty(&p, 1.0).unwrap();
    let mut dual = LpInstance::new(p.b().to_vec());
    for blk in p.blocks() {
        for k in 0..blk.n() {
            dual.add_row(blk.a.iter().map(|row| row[k]).collect(), Relation::Ge, blk.c[k]);
        }
    }
    let (Enumerated::Optimal(_), Some(lambda)) = enumerate_vertices(&dual) else {
        panic!()
    };
    assert!(cal.t.dominates(&lambda));
    assert!(cal.t.as_slice().iter().zip(&lambda).all(|(t, l)| t - l >= 1.0));

    let zero = DecomposableLp::new(
        vec![LpBlock {
            c: vec![1.0],
            a: vec![vec![1.0], vec![0.0]],
        }],
        vec![1.0, 5.0],
    )
    .unwrap();
    let cal0 = calibrate_penalty(&zero, 1.0).unwrap();
    assert_eq!(cal0.lambda_star[1], 0.0);
    assert_eq!(cal0.t.as_slice()[1], 1.0);
}

#[test]
fn infeasible_reference_is_invalid_problem() {
    // b < 0 with nonnegative A: x = 0 violates, no x >= 0 helps
    let p = DecomposableLp::new(
        vec![LpBlock {
            c: vec![1.0],
            a: vec![vec![1.0]],
        }],
        vec![-1.0],
    )
    .unwrap();
    assert!(matches!(
        solve_full_reference(&p),
        Err(sharedecomp::Error::InvalidProblem(_))
    ));
    assert!(calibrate_penalty(&p, 1.0).is_err());
}
