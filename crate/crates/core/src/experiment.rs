//! Experiment drivers shared by the command-line tool and the Python module.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lp::solve_full_reference;
use crate::penalty::{
    calibrate_penalty, eval_master, eval_master_with, eval_mu_block, eval_mu_block_primal, optimal_shares,
    penalized_master_minimum, recover_primal, subgradient_norm_bound, EvalMode, DEFAULT_MARGIN,
};
use crate::problem::{project_onto_u, DecomposableLp, PenaltyBound, ShareAllocation};
use crate::subgradient::{
    solve, AccuracyHit, FirstOrderOracle, Method, RunTrace, ShareSet, SolverConfig, StopStatus, Target, WholeSpace,
};
use crate::testbed::{generate_declp, initial_allocation, GeneratorSpec, ShorProblem, SHOR_OPTIMUM, SHOR_START};

pub const DEFAULT_SEED: u64 = 20_190_431;
pub const CHECKPOINT_EVERY: usize = 50;

/// First-order oracle for `mu(., t)` on a fixed problem.
pub struct MasterOracle<'a> {
    pub problem: &'a DecomposableLp,
    pub t: &'a PenaltyBound,
    pub mode: EvalMode,
}

impl FirstOrderOracle for MasterOracle<'_> {
    fn evaluate(&self, v: &[f64]) -> Result<(f64, Vec<f64>)> {
        let u = ShareAllocation::from_raw(v.to_vec(), self.problem.l(), self.problem.m());
        let ev = eval_master_with(self.problem, &u, self.t, self.mode)?;
        Ok((ev.value, ev.subgradient))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub params: String,
    pub hits: Vec<AccuracyHit>,
    pub best: f64,
    pub last_k: usize,
    pub status: StopStatus,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub k: usize,
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeclpSummary {
    pub l: usize,
    pub f_star: f64,
    pub lambda_star: Vec<f64>,
    pub t: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
    pub best: f64,
    pub gap: f64,
    pub relative_gap: f64,
    pub recovered_objective: f64,
    pub recovered_violation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub problem_id: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub timestamp: Option<u64>,
    pub rows: Vec<MethodRow>,
    pub declp: Option<DeclpSummary>,
}

impl ExperimentReport {
    fn new<C: Serialize>(experiment: &str, problem_id: String, config: &C, timing: bool) -> Self {
        let config = serde_json::to_value(config).expect("configs serialize");
        let digest = Sha256::digest(config.to_string().as_bytes());
        let config_hash = digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
        let timestamp = timing.then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        ExperimentReport {
            experiment: experiment.into(),
            problem_id,
            config,
            config_hash,
            timestamp,
            rows: Vec::new(),
            declp: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Plain-text table for terminals.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} on {} (config {})",
            self.experiment,
            self.problem_id,
            &self.config_hash[..12]
        );
        for row in &self.rows {
            let _ = writeln!(s, "{} [{}]", row.method, row.params);
            if !row.hits.is_empty() {
                let _ = writeln!(s, "  {:>12} {:>10}", "eps", "it");
                for h in &row.hits {
                    let it = h.iteration.map_or_else(|| "-".to_string(), |k| k.to_string());
                    let _ = writeln!(s, "  {:>12} {:>10}", h.eps, it);
                }
            }
            let _ = writeln!(
                s,
                "  best {:.7}  last k {}  status {:?}  {:.3}s",
                row.best, row.last_k, row.status, row.elapsed_s
            );
        }
        if let Some(d) = &self.declp {
            let _ = writeln!(s, "  {:>8} {:>14}", "it", "f");
            for c in &d.checkpoints {
                let _ = writeln!(s, "  {:>8} {:>14.7}", c.k, c.best);
            }
            let _ = writeln!(s, "  f* {:.7}  lambda* {:?}  t {:?}", d.f_star, d.lambda_star, d.t);
            let _ = writeln!(
                s,
                "  gap {:.3e} (relative {:.3e})  recovered f {:.7}  violation {:?}",
                d.gap, d.relative_gap, d.recovered_objective, d.recovered_violation
            );
        }
        s
    }
}

fn elapsed_of(trace: &RunTrace) -> f64 {
    trace.records.last().map_or(0.0, |r| r.elapsed)
}

fn params_of(cfg: &SolverConfig) -> String {
    let mut p = format!("theta={}", cfg.theta);
    match cfg.method {
        Method::Sgmts => {
            let _ = write!(p, " nu={} d={} o={}", cfg.nu, cfg.d, cfg.offset);
        }
        Method::Sgm => {
            let _ = write!(p, " o={}", cfg.offset);
        }
        _ => {}
    }
    if cfg.normalize {
        p.push_str(" normalized");
    }
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShorConfig {
    pub method: Method,
    pub theta: f64,
    pub nu: f64,
    pub d: usize,
    pub eps: Vec<f64>,
    pub max_iter: usize,
    pub normalize: bool,
    pub stride: usize,
    pub timing: bool,
}

impl ShorConfig {
    pub fn new(method: Method) -> Self {
        ShorConfig {
            method,
            theta: 0.1,
            nu: 0.7,
            d: 25,
            eps: vec![0.1, 0.01, 0.001, 0.0001],
            max_iter: 40_000,
            normalize: false,
            stride: 1,
            timing: true,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            method: self.method,
            theta: self.theta,
            nu: self.nu,
            d: self.d,
            offset: 1,
            normalize: self.normalize,
            max_iter: self.max_iter,
            target: Some(Target {
                optimum: SHOR_OPTIMUM,
                eps: self.eps.clone(),
                stop: true,
            }),
            stride: self.stride,
            timing: self.timing,
        }
    }
}

/// Runs one method on the Shor problem from `(0,0,0,0,1)`, recording the
/// first iteration at which each accuracy level is met.
pub fn run_shor(cfg: &ShorConfig) -> Result<(ExperimentReport, RunTrace)> {
    let solver = cfg.solver_config();
    let trace = solve(&ShorProblem, &WholeSpace, &SHOR_START, &solver)?;
    let mut report = ExperimentReport::new("shor", "shor-maxquad-5x10".into(), cfg, cfg.timing);
    report.rows.push(MethodRow {
        method: cfg.method.name().into(),
        params: params_of(&solver),
        hits: trace.hits.clone(),
        best: trace.best_value,
        last_k: trace.last_k,
        status: trace.status,
        elapsed_s: elapsed_of(&trace),
    });
    Ok((report, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyMode {
    Auto { margin: f64 },
    Explicit { t: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeclpConfig {
    pub l: usize,
    pub phase: f64,
    pub method: Method,
    pub theta: f64,
    pub nu: f64,
    pub d: usize,
    pub offset: u32,
    pub budget: usize,
    pub penalty: PenaltyMode,
    pub normalize: bool,
    pub stride: usize,
    pub timing: bool,
}

impl DeclpConfig {
    pub fn new(l: usize, method: Method) -> Self {
        DeclpConfig {
            l,
            phase: 0.0,
            method,
            theta: 5.0,
            nu: 0.8,
            d: 25,
            offset: 2,
            budget: 2000,
            penalty: PenaltyMode::Auto { margin: DEFAULT_MARGIN },
            normalize: false,
            stride: 1,
            timing: true,
        }
    }
}

/// Generates an instance, fixes `t`, and minimizes the master function from
/// the even split `u^0 = b / l`.
pub fn run_declp(cfg: &DeclpConfig) -> Result<(ExperimentReport, RunTrace)> {
    if cfg.l == 0 {
        return Err(Error::Config("l must be at least 1".into()));
    }
    let problem = generate_declp(&GeneratorSpec {
        l: cfg.l,
        phase: cfg.phase,
    })?;
    let reference = solve_full_reference(&problem)?;
    let t = match &cfg.penalty {
        PenaltyMode::Auto { margin } => calibrate_penalty(&problem, *margin)?.t,
        PenaltyMode::Explicit { t } => {
            if t.len() != problem.m() {
                return Err(Error::dim("explicit t", problem.m(), t.len()));
            }
            PenaltyBound::new(t.clone())?
        }
    };

    let solver = SolverConfig {
        method: cfg.method,
        theta: cfg.theta,
        nu: cfg.nu,
        d: cfg.d,
        offset: cfg.offset,
        normalize: cfg.normalize,
        max_iter: cfg.budget,
        target: None,
        stride: 1,
        timing: cfg.timing,
    };
    let oracle = MasterOracle {
        problem: &problem,
        t: &t,
        mode: EvalMode::Dual,
    };
    let u0 = initial_allocation(&problem);
    let set = ShareSet {
        b: problem.b().to_vec(),
    };
    let mut trace = solve(&oracle, &set, u0.as_slice(), &solver)?;

    let checkpoints = trace
        .records
        .iter()
        .filter(|r| r.k % CHECKPOINT_EVERY == 0 || r.k == trace.last_k)
        .map(|r| Checkpoint { k: r.k, best: r.best })
        .collect();

    let best_u = ShareAllocation::from_raw(trace.best_point.clone(), problem.l(), problem.m());
    let recovered = recover_primal(&eval_master(&problem, &best_u, &t)?);
    let gap = (trace.best_value - reference.f_star).abs();

    let summary = DeclpSummary {
        l: cfg.l,
        f_star: reference.f_star,
        lambda_star: reference.lambda_star.clone(),
        t: t.as_slice().to_vec(),
        checkpoints,
        best: trace.best_value,
        gap,
        relative_gap: gap / reference.f_star.abs().max(f64::MIN_POSITIVE),
        recovered_objective: problem.full_objective(&recovered)?,
        recovered_violation: problem.joint_violation(&recovered)?,
    };

    let stride = cfg.stride.max(1);
    let last = trace.last_k;
    trace.records.retain(|r| r.k % stride == 0 || r.k == last);

    let mut report = ExperimentReport::new("declp", format!("declp-l{}-p{}", cfg.l, cfg.phase), cfg, cfg.timing);
    report.rows.push(MethodRow {
        method: cfg.method.name().into(),
        params: params_of(&solver),
        hits: Vec::new(),
        best: trace.best_value,
        last_k: trace.last_k,
        status: trace.status,
        elapsed_s: elapsed_of(&trace),
    });
    report.declp = Some(summary);
    Ok((report, trace))
}

/// Re-runs the experiment described by a report's stored configuration.
pub fn replay(report: &ExperimentReport) -> Result<(ExperimentReport, RunTrace)> {
    let parse_err = |e: serde_json::Error| Error::Parse(e.to_string());
    match report.experiment.as_str() {
        "shor" => run_shor(&serde_json::from_value(report.config.clone()).map_err(parse_err)?),
        "declp" => run_declp(&serde_json::from_value(report.config.clone()).map_err(parse_err)?),
        other => Err(Error::Parse(format!("cannot replay experiment {other:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub ls: Vec<usize>,
    pub phase: f64,
    /// Overrides calibration when set.
    pub t: Option<Vec<f64>>,
    pub seed: u64,
    pub samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            ls: vec![1, 2, 5],
            phase: 0.0,
            t: None,
            seed: DEFAULT_SEED,
            samples: 50,
        }
    }
}

pub const EXACTNESS_TOL: f64 = 1e-7;
pub const SUBGRADIENT_TOL: f64 = 1e-9;
pub const BLOCK_AGREEMENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyCase {
    pub l: usize,
    pub f_star: f64,
    pub lambda_star: Vec<f64>,
    pub t: Vec<f64>,
    /// `t > lambda*` componentwise.
    pub precondition: bool,
    /// `mu(u*, t)`; `-inf` when some block's penalized problem is unbounded.
    pub mu_at_u_star: f64,
    /// Exact `inf_U mu(., t)`.
    pub master_minimum: f64,
    pub exactness: bool,
    pub subgradient_failures: usize,
    pub max_block_mismatch: f64,
    pub max_subgradient_norm: f64,
    pub norm_bound: f64,
    pub recovered_violation: f64,
    pub passed: bool,
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub cases: Vec<VerifyCase>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        for c in &self.cases {
            let _ = writeln!(
                s,
                "l={:<3} {}  f*={:.9}  mu(u*,t)={:.9}  min_U mu={:.9}",
                c.l,
                if c.passed { "PASS" } else { "FAIL" },
                c.f_star,
                c.mu_at_u_star,
                c.master_minimum
            );
            let _ = writeln!(s, "       lambda*={:?}  t={:?}", c.lambda_star, c.t);
            let _ = writeln!(
                s,
                "       subgradient failures {}  block mismatch {:.2e}  |g| max {:.4} <= {:.4}  violation {:.2e}",
                c.subgradient_failures,
                c.max_block_mismatch,
                c.max_subgradient_norm,
                c.norm_bound,
                c.recovered_violation
            );
            for m in &c.messages {
                let _ = writeln!(s, "       {m}");
            }
        }
        let _ = writeln!(
            s,
            "{}",
            if self.passed {
                "all checks passed"
            } else {
                "verification FAILED"
            }
        );
        s
    }
}

/// Random point of `U` around `center`.
pub fn random_share(rng: &mut impl Rng, center: &ShareAllocation, b: &[f64], radius: f64) -> ShareAllocation {
    let v: Vec<f64> = center
        .as_slice()
        .iter()
        .map(|c| c + rng.gen_range(-radius..=radius))
        .collect();
    project_onto_u(&v, b).expect("dimensions match the center")
}

fn verify_case(l: usize, cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<VerifyCase> {
    let problem = generate_declp(&GeneratorSpec { l, phase: cfg.phase })?;
    let reference = solve_full_reference(&problem)?;
    let t = match &cfg.t {
        Some(t) => PenaltyBound::new(t.clone())?,
        None => calibrate_penalty(&problem, DEFAULT_MARGIN)?.t,
    };
    if t.len() != problem.m() {
        return Err(Error::dim("t", problem.m(), t.len()));
    }
    let precondition = t.dominates(&reference.lambda_star);
    let u_star = optimal_shares(&problem, &reference.x_star)?;
    let master_minimum = penalized_master_minimum(&problem, &t)?;
    let mut messages = Vec::new();

    let at_star = match eval_master(&problem, &u_star, &t) {
        Ok(ev) => Some(ev),
        Err(Error::InvalidPenaltyBound { block }) => {
            messages.push(format!(
                "block {block}: penalized problem unbounded below at u* (mu = -inf)"
            ));
            None
        }
        Err(e) => return Err(e),
    };
    let mu_at_u_star = at_star.as_ref().map_or(f64::NEG_INFINITY, |e| e.value);
    let exactness = (mu_at_u_star - reference.f_star).abs() <= EXACTNESS_TOL;
    if !precondition {
        messages.push(format!(
            "t does not dominate lambda*: exactness not guaranteed; mu(u*,t) - f* = {:.3e}, min_U mu - f* = {:.3e}",
            mu_at_u_star - reference.f_star,
            master_minimum - reference.f_star
        ));
    } else if !exactness {
        messages.push(format!(
            "mu(u*,t) = {mu_at_u_star} differs from f* = {} by more than {EXACTNESS_TOL:e}",
            reference.f_star
        ));
    }

    let recovered_violation = match &at_star {
        Some(ev) => problem
            .joint_violation(&recover_primal(ev))?
            .into_iter()
            .fold(0.0, f64::max),
        None => f64::INFINITY,
    };

    let norm_bound = subgradient_norm_bound(&problem, &t);
    let mut subgradient_failures = 0;
    let mut max_block_mismatch: f64 = 0.0;
    let mut max_subgradient_norm: f64 = 0.0;
    if at_star.is_some() {
        let radius = problem.b().iter().fold(0.0f64, |a, b| a.max(b.abs())) / l as f64;
        for _ in 0..cfg.samples {
            let u1 = random_share(rng, &u_star, problem.b(), radius);
            let u2 = random_share(rng, &u_star, problem.b(), radius);
            let (e1, e2) = match (eval_master(&problem, &u1, &t), eval_master(&problem, &u2, &t)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(Error::InvalidPenaltyBound { .. }), _) | (_, Err(Error::InvalidPenaltyBound { .. })) => continue,
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            let lin: f64 = e1
                .subgradient
                .iter()
                .zip(u2.as_slice().iter().zip(u1.as_slice()))
                .map(|(g, (a, b))| g * (a - b))
                .sum();
            if e2.value - e1.value < lin - SUBGRADIENT_TOL {
                subgradient_failures += 1;
            }
            let gnorm = e1.subgradient.iter().map(|g| g * g).sum::<f64>().sqrt();
            max_subgradient_norm = max_subgradient_norm.max(gnorm);
            for i in 0..l {
                let d = eval_mu_block(&problem, i, u1.block(i), &t)?;
                let p = eval_mu_block_primal(&problem, i, u1.block(i), &t)?;
                max_block_mismatch = max_block_mismatch.max((d.value - p.value).abs());
            }
        }
        if subgradient_failures > 0 {
            messages.push(format!("{subgradient_failures} subgradient inequality violations"));
        }
        if max_block_mismatch > BLOCK_AGREEMENT_TOL {
            messages.push(format!("primal/dual block values differ by {max_block_mismatch:e}"));
        }
        if max_subgradient_norm > norm_bound {
            messages.push("subgradient norm exceeds sqrt(l)*||t||".into());
        }
    }

    let passed = precondition
        && exactness
        && subgradient_failures == 0
        && max_block_mismatch <= BLOCK_AGREEMENT_TOL
        && max_subgradient_norm <= norm_bound
        && recovered_violation <= 1e-6;

    Ok(VerifyCase {
        l,
        f_star: reference.f_star,
        lambda_star: reference.lambda_star,
        t: t.as_slice().to_vec(),
        precondition,
        mu_at_u_star,
        master_minimum,
        exactness,
        subgradient_failures,
        max_block_mismatch,
        max_subgradient_norm,
        norm_bound,
        recovered_violation,
        passed,
        messages,
    })
}

/// Exactness and oracle self-check on generated instances.
pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cases = cfg
        .ls
        .iter()
        .map(|&l| verify_case(l, cfg, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let passed = cases.iter().all(|c| c.passed);
    Ok(VerifyReport { cases, passed })
}
