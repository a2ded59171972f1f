//! Projected subgradient methods with divergent-series step sizes.
//!
//! `v^{k+1} = P_V[v^k - theta_k g^k]` with one of four step rules:
//!
//! * `Sgm`   plain harmonic steps `theta / (k + o)`
//! * `Sgmts` two-speed steps: `beta_s = theta / (s + o)` at `k = s*d`,
//!   multiplied by `nu` at every other iteration
//! * `Sgmsq` `theta / sqrt(k + 1)`
//! * `Dasg`  double averaging over the running subgradient sum (unconstrained)

use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{project_direction_onto_u0, project_onto_u};

/// Steps shorter than this count as `v^{k+1} = v^k`.
pub const STATIONARY_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSchedule {
    Plain { theta: f64, offset: u32 },
    SquareRoot { theta: f64 },
    TwoSpeed { theta: f64, nu: f64, d: usize, offset: u32 },
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        let theta = match *self {
            StepSchedule::Plain { theta, .. } | StepSchedule::SquareRoot { theta } => theta,
            StepSchedule::TwoSpeed { theta, nu, d, .. } => {
                if !(nu > 0.0 && nu < 1.0) {
                    return Err(Error::Config(format!("nu must lie in (0, 1), got {nu}")));
                }
                if d == 0 {
                    return Err(Error::Config("anchor spacing d must be positive".into()));
                }
                theta
            }
        };
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::Config(format!("theta must be positive, got {theta}")));
        }
        if let StepSchedule::Plain { offset: 0, .. } | StepSchedule::TwoSpeed { offset: 0, .. } = self {
            return Err(Error::Config("offset must be at least 1".into()));
        }
        Ok(())
    }

    /// Step size `theta_k`.
    pub fn step(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Plain { theta, offset } => theta / (k as f64 + offset as f64),
            StepSchedule::SquareRoot { theta } => theta / (k as f64 + 1.0).sqrt(),
            StepSchedule::TwoSpeed { theta, nu, d, offset } => {
                let s = k / d;
                let mut step = theta / (s as f64 + offset as f64);
                // repeated products, exactly as the recursion theta_k = nu theta_{k-1}
                for _ in 0..k % d {
                    step *= nu;
                }
                step
            }
        }
    }

    /// Anchor step `beta_s` of the two-speed rule.
    pub fn anchor(&self, s: usize) -> Option<f64> {
        match *self {
            StepSchedule::TwoSpeed { theta, offset, .. } => Some(theta / (s as f64 + offset as f64)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sgm,
    Sgmts,
    Sgmsq,
    Dasg,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sgm => "SGM",
            Method::Sgmts => "SGMTS",
            Method::Sgmsq => "SGMSQ",
            Method::Dasg => "DASG",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgm" => Ok(Method::Sgm),
            "sgmts" => Ok(Method::Sgmts),
            "sgmsq" => Ok(Method::Sgmsq),
            "dasg" => Ok(Method::Dasg),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// Accuracy targets `phi(v) - optimum <= eps` tracked on the best value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub optimum: f64,
    pub eps: Vec<f64>,
    /// Stop once the tightest `eps` is met.
    pub stop: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub theta: f64,
    pub nu: f64,
    pub d: usize,
    pub offset: u32,
    pub normalize: bool,
    /// Number of updates; the iterate `v^{max_iter}` is still evaluated.
    pub max_iter: usize,
    pub target: Option<Target>,
    pub stride: usize,
    /// Record wall-clock seconds; off gives bit-reproducible traces.
    pub timing: bool,
}

impl SolverConfig {
    pub fn new(method: Method, theta: f64) -> Self {
        SolverConfig {
            method,
            theta,
            nu: 0.7,
            d: 25,
            offset: 1,
            normalize: false,
            max_iter: 10_000,
            target: None,
            stride: 1,
            timing: true,
        }
    }

    pub fn schedule(&self) -> StepSchedule {
        match self.method {
            Method::Sgm => StepSchedule::Plain {
                theta: self.theta,
                offset: self.offset,
            },
            Method::Sgmts => StepSchedule::TwoSpeed {
                theta: self.theta,
                nu: self.nu,
                d: self.d,
                offset: self.offset,
            },
            Method::Sgmsq | Method::Dasg => StepSchedule::SquareRoot { theta: self.theta },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule().validate()?;
        if self.stride == 0 {
            return Err(Error::Config("trace stride must be positive".into()));
        }
        if let Some(t) = &self.target {
            if !t.optimum.is_finite() {
                return Err(Error::Config("target optimum must be finite".into()));
            }
            if t.eps.is_empty() || t.eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
                return Err(Error::Config("accuracy levels must be positive".into()));
            }
        }
        Ok(())
    }
}

/// First-order oracle: value and one subgradient.
pub trait FirstOrderOracle {
    fn evaluate(&self, v: &[f64]) -> Result<(f64, Vec<f64>)>;
}

impl<F> FirstOrderOracle for F
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn evaluate(&self, v: &[f64]) -> Result<(f64, Vec<f64>)> {
        self(v)
    }
}

/// Feasible set `V` with a cheap projection.
pub trait FeasibleSet {
    fn project(&self, v: &mut Vec<f64>) -> Result<()>;

    /// `P_V[v - theta * dir]`.
    fn step(&self, v: &[f64], theta: f64, dir: &[f64]) -> Result<Vec<f64>> {
        let mut next: Vec<f64> = v.iter().zip(dir).map(|(x, g)| x - theta * g).collect();
        self.project(&mut next)?;
        Ok(next)
    }

    fn is_whole_space(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WholeSpace;

impl FeasibleSet for WholeSpace {
    fn project(&self, _v: &mut Vec<f64>) -> Result<()> {
        Ok(())
    }

    fn is_whole_space(&self) -> bool {
        true
    }
}

/// The share set `U = { u : sum_i u_i = b }`.
#[derive(Debug, Clone)]
pub struct ShareSet {
    pub b: Vec<f64>,
}

impl FeasibleSet for ShareSet {
    fn project(&self, v: &mut Vec<f64>) -> Result<()> {
        *v = project_onto_u(v, &self.b)?.into_vec();
        Ok(())
    }

    /// From a point of `U`, moves along the block-centered direction, which
    /// equals projecting the plain step.
    fn step(&self, v: &[f64], theta: f64, dir: &[f64]) -> Result<Vec<f64>> {
        let centered = project_direction_onto_u0(dir, self.b.len())?;
        Ok(v.iter().zip(&centered).map(|(x, g)| x - theta * g).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopStatus {
    TargetReached,
    BudgetExhausted,
    StationaryStop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub theta: f64,
    pub f: f64,
    pub best: f64,
    pub elapsed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyHit {
    pub eps: f64,
    pub iteration: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub status: StopStatus,
    /// Index of the last evaluated iterate.
    pub last_k: usize,
    pub best_value: f64,
    pub best_point: Vec<f64>,
    pub final_point: Vec<f64>,
    pub hits: Vec<AccuracyHit>,
}

impl RunTrace {
    pub fn hit(&self, eps: f64) -> Option<usize> {
        self.hits.iter().find(|h| h.eps == eps).and_then(|h| h.iteration)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    /// CSV with header `k,theta,f,best,elapsed_s`; shortest round-trip
    /// decimal formatting, independent of locale.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,theta,f,best,elapsed_s\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{},{},{},{}", r.k, r.theta, r.f, r.best, r.elapsed);
        }
        s
    }
}

struct Recorder<'a> {
    cfg: &'a SolverConfig,
    start: Instant,
    records: Vec<TraceRecord>,
    best: f64,
    best_point: Vec<f64>,
    hits: Vec<AccuracyHit>,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a SolverConfig) -> Self {
        let hits = cfg
            .target
            .as_ref()
            .map(|t| t.eps.iter().map(|&eps| AccuracyHit { eps, iteration: None }).collect())
            .unwrap_or_default();
        Recorder {
            cfg,
            start: Instant::now(),
            records: Vec::new(),
            best: f64::INFINITY,
            best_point: Vec::new(),
            hits,
        }
    }

    /// Registers `phi(v^k)`; returns true when the stopping target is met.
    fn observe(&mut self, k: usize, v: &[f64], f: f64, theta: f64) -> bool {
        if f < self.best || self.best_point.is_empty() {
            self.best = self.best.min(f);
            self.best_point = v.to_vec();
        }
        let mut done = false;
        if let Some(t) = &self.cfg.target {
            for h in &mut self.hits {
                if h.iteration.is_none() && self.best - t.optimum <= h.eps {
                    h.iteration = Some(k);
                }
            }
            done = t.stop && self.hits.iter().all(|h| h.iteration.is_some());
        }
        if k.is_multiple_of(self.cfg.stride) {
            self.push(k, theta, f);
        }
        done
    }

    fn push(&mut self, k: usize, theta: f64, f: f64) {
        let elapsed = if self.cfg.timing {
            self.start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        self.records.push(TraceRecord {
            k,
            theta,
            f,
            best: self.best,
            elapsed,
        });
    }

    fn finish(mut self, k: usize, theta: f64, f: f64, v: Vec<f64>, status: StopStatus) -> RunTrace {
        if self.records.last().map(|r| r.k) != Some(k) {
            self.push(k, theta, f);
        }
        RunTrace {
            records: self.records,
            status,
            last_k: k,
            best_value: self.best,
            best_point: self.best_point,
            final_point: v,
            hits: self.hits,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn evaluate_at<O: FirstOrderOracle + ?Sized>(oracle: &O, v: &[f64], k: usize) -> Result<(f64, Vec<f64>)> {
    let (f, g) = oracle.evaluate(v).map_err(|e| Error::Oracle {
        iteration: k,
        source: Box::new(e),
    })?;
    if g.len() != v.len() {
        return Err(Error::Oracle {
            iteration: k,
            source: Box::new(Error::dim("subgradient", v.len(), g.len())),
        });
    }
    Ok((f, g))
}

/// Direction actually applied: `g` or `g / ||g||`.
fn direction(g: Vec<f64>, normalize: bool) -> Vec<f64> {
    if normalize {
        let n = norm(&g);
        g.into_iter().map(|x| x / n).collect()
    } else {
        g
    }
}

/// Projected subgradient iteration for SGM, SGMTS and SGMSQ.
pub fn run_subgradient<O, S>(oracle: &O, set: &S, v0: &[f64], cfg: &SolverConfig) -> Result<RunTrace>
where
    O: FirstOrderOracle + ?Sized,
    S: FeasibleSet + ?Sized,
{
    cfg.validate()?;
    if cfg.method == Method::Dasg {
        return Err(Error::Config("DASG runs through run_dasg".into()));
    }
    let schedule = cfg.schedule();
    let mut rec = Recorder::new(cfg);
    let mut v = v0.to_vec();
    let mut k = 0;
    loop {
        let (f, g) = evaluate_at(oracle, &v, k)?;
        let theta = schedule.step(k);
        if rec.observe(k, &v, f, theta) {
            return Ok(rec.finish(k, theta, f, v, StopStatus::TargetReached));
        }
        if k >= cfg.max_iter {
            return Ok(rec.finish(k, theta, f, v, StopStatus::BudgetExhausted));
        }
        if norm(&g) == 0.0 {
            return Ok(rec.finish(k, theta, f, v, StopStatus::StationaryStop));
        }
        let next = set.step(&v, theta, &direction(g, cfg.normalize))?;
        if distance(&next, &v) <= STATIONARY_TOL {
            return Ok(rec.finish(k, theta, f, v, StopStatus::StationaryStop));
        }
        v = next;
        k += 1;
    }
}

/// Simple double averaging on the whole space:
/// `y^k = v^0 - theta_k p^k`, `p^k = sum_{i<=k} g^i`,
/// `v^{k+1} = (k+1)/(k+2) v^k + 1/(k+2) y^k`.
pub fn run_dasg<O>(oracle: &O, v0: &[f64], cfg: &SolverConfig) -> Result<RunTrace>
where
    O: FirstOrderOracle + ?Sized,
{
    cfg.validate()?;
    let schedule = cfg.schedule();
    let mut rec = Recorder::new(cfg);
    let mut v = v0.to_vec();
    let mut sum = vec![0.0; v0.len()];
    let mut k = 0;
    loop {
        let (f, g) = evaluate_at(oracle, &v, k)?;
        let theta = schedule.step(k);
        if rec.observe(k, &v, f, theta) {
            return Ok(rec.finish(k, theta, f, v, StopStatus::TargetReached));
        }
        if k >= cfg.max_iter {
            return Ok(rec.finish(k, theta, f, v, StopStatus::BudgetExhausted));
        }
        if norm(&g) == 0.0 {
            return Ok(rec.finish(k, theta, f, v, StopStatus::StationaryStop));
        }
        for (s, gi) in sum.iter_mut().zip(direction(g, cfg.normalize)) {
            *s += gi;
        }
        let weight = (k as f64 + 1.0) / (k as f64 + 2.0);
        let next: Vec<f64> = v
            .iter()
            .zip(v0)
            .zip(&sum)
            .map(|((vk, v0), p)| weight * vk + (1.0 - weight) * (v0 - theta * p))
            .collect();
        if distance(&next, &v) <= STATIONARY_TOL {
            return Ok(rec.finish(k, theta, f, v, StopStatus::StationaryStop));
        }
        v = next;
        k += 1;
    }
}

/// Dispatches on `cfg.method`; DASG requires the whole space.
pub fn solve<O, S>(oracle: &O, set: &S, v0: &[f64], cfg: &SolverConfig) -> Result<RunTrace>
where
    O: FirstOrderOracle + ?Sized,
    S: FeasibleSet + ?Sized,
{
    match cfg.method {
        Method::Dasg if !set.is_whole_space() => Err(Error::Config(
            "DASG is only available for unconstrained problems".into(),
        )),
        Method::Dasg => run_dasg(oracle, v0, cfg),
        _ => run_subgradient(oracle, set, v0, cfg),
    }
}
