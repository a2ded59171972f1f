//! Python bindings. Structured results come back as plain dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use sharedecomp::experiment::{
    run_declp as core_run_declp, run_shor as core_run_shor, run_verify as core_run_verify, DeclpConfig, PenaltyMode,
    ShorConfig, VerifyConfig, DEFAULT_SEED,
};
use sharedecomp::lp::{solve_lp as core_solve_lp, LpInstance, Relation};
use sharedecomp::penalty::{calibrate_penalty, eval_master, optimal_shares, recover_primal};
use sharedecomp::problem::{project_onto_u as core_project, BlockPoint, PenaltyBound, ShareAllocation};
use sharedecomp::subgradient::{Method, SolverConfig};
use sharedecomp::testbed::{generate_declp, initial_allocation, shor_eval as core_shor_eval, GeneratorSpec};
use sharedecomp::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Dimension { .. } | Error::InvalidData { .. } | Error::Parse(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_method(s: &str) -> PyResult<Method> {
    s.parse().map_err(to_py)
}

/// Decomposable LP `max sum c_i.x_i` subject to `sum A_i x_i <= b`, `x >= 0`.
#[pyclass(name = "DecomposableLp", module = "sharedecomp")]
struct PyDecomposableLp {
    inner: sharedecomp::DecomposableLp,
}

#[pymethods]
impl PyDecomposableLp {
    #[staticmethod]
    #[pyo3(signature = (l, phase = 0.0))]
    fn generate(l: usize, phase: f64) -> PyResult<Self> {
        let inner = generate_declp(&GeneratorSpec { l, phase }).map_err(to_py)?;
        Ok(PyDecomposableLp { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = sharedecomp::DecomposableLp::from_json_str(text).map_err(to_py)?;
        Ok(PyDecomposableLp { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    #[getter]
    fn l(&self) -> usize {
        self.inner.l()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn b(&self) -> Vec<f64> {
        self.inner.b().to_vec()
    }

    /// Even split `b / l`, flattened block-major.
    fn initial_allocation(&self) -> Vec<f64> {
        initial_allocation(&self.inner).into_vec()
    }

    /// Reference optimum of the joint LP: `f_star`, `lambda_star`, `x_star`.
    fn reference<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let r = sharedecomp::lp::solve_full_reference(&self.inner).map_err(to_py)?;
        #[derive(Serialize)]
        struct Out {
            f_star: f64,
            lambda_star: Vec<f64>,
            x_star: Vec<Vec<f64>>,
        }
        to_dict(
            py,
            &Out {
                f_star: r.f_star,
                lambda_star: r.lambda_star,
                x_star: r.x_star.blocks,
            },
        )
    }

    /// `t = 2 lambda* + margin` together with `f_star`, `lambda_star`, `x_star`.
    #[pyo3(signature = (margin = 1.0))]
    fn calibrate<'py>(&self, py: Python<'py>, margin: f64) -> PyResult<Bound<'py, PyAny>> {
        let c = calibrate_penalty(&self.inner, margin).map_err(to_py)?;
        #[derive(Serialize)]
        struct Out {
            f_star: f64,
            lambda_star: Vec<f64>,
            t: Vec<f64>,
            x_star: Vec<Vec<f64>>,
        }
        to_dict(
            py,
            &Out {
                f_star: c.f_star,
                lambda_star: c.lambda_star,
                t: c.t.as_slice().to_vec(),
                x_star: c.x_star.blocks,
            },
        )
    }

    /// Shares built from a solution `x` of the joint LP, flattened.
    fn optimal_shares(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let x = BlockPoint::new(x).map_err(to_py)?;
        Ok(optimal_shares(&self.inner, &x).map_err(to_py)?.into_vec())
    }

    /// Value, subgradient, per-block values and recovered primal point of
    /// the penalized master function at the flattened allocation `u`.
    fn eval_master<'py>(&self, py: Python<'py>, u: Vec<f64>, t: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        let u = ShareAllocation::new(u, self.inner.b()).map_err(to_py)?;
        let t = PenaltyBound::new(t).map_err(to_py)?;
        let ev = eval_master(&self.inner, &u, &t).map_err(to_py)?;
        let x = recover_primal(&ev);
        #[derive(Serialize)]
        struct Out {
            value: f64,
            subgradient: Vec<f64>,
            block_values: Vec<f64>,
            x: Vec<Vec<f64>>,
            objective: f64,
            violation: Vec<f64>,
        }
        let objective = self.inner.full_objective(&x).map_err(to_py)?;
        let violation = self.inner.joint_violation(&x).map_err(to_py)?;
        to_dict(
            py,
            &Out {
                value: ev.value,
                subgradient: ev.subgradient,
                block_values: ev.block_values,
                x: x.blocks,
                objective,
                violation,
            },
        )
    }

    fn __repr__(&self) -> String {
        format!("DecomposableLp(l={}, m={})", self.inner.l(), self.inner.m())
    }
}

/// `(phi(v), subgradient, active index)` for the Shor test function.
#[pyfunction]
fn shor_eval(v: [f64; 5]) -> (f64, Vec<f64>, usize) {
    let e = core_shor_eval(&v);
    (e.value, e.subgradient.to_vec(), e.active)
}

/// Euclidean projection onto `{u : sum_i u_i = b}`; `v` is block-major.
#[pyfunction]
fn project_onto_u(v: Vec<f64>, b: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(core_project(&v, &b).map_err(to_py)?.into_vec())
}

/// Step size of a method's schedule at iteration `k`.
#[pyfunction]
#[pyo3(signature = (method, theta, k, nu = 0.7, d = 25, offset = 1))]
fn step_size(method: &str, theta: f64, k: usize, nu: f64, d: usize, offset: u32) -> PyResult<f64> {
    let mut cfg = SolverConfig::new(parse_method(method)?, theta);
    cfg.nu = nu;
    cfg.d = d;
    cfg.offset = offset;
    cfg.validate().map_err(to_py)?;
    Ok(cfg.schedule().step(k))
}

/// Minimizes `cost.x` subject to rows with relations `"<="`, `">="` or `"="`.
#[pyfunction]
#[pyo3(signature = (cost, rows, relations, rhs, lower = None, upper = None))]
fn solve_lp<'py>(
    py: Python<'py>,
    cost: Vec<f64>,
    rows: Vec<Vec<f64>>,
    relations: Vec<String>,
    rhs: Vec<f64>,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    if rows.len() != relations.len() || rows.len() != rhs.len() {
        return Err(PyValueError::new_err("rows, relations and rhs must have equal length"));
    }
    let n = cost.len();
    let mut lp = LpInstance::new(cost);
    for ((row, rel), r) in rows.into_iter().zip(&relations).zip(rhs) {
        let rel = match rel.as_str() {
            "<=" => Relation::Le,
            ">=" => Relation::Ge,
            "=" | "==" => Relation::Eq,
            other => return Err(PyValueError::new_err(format!("unknown relation {other:?}"))),
        };
        lp.add_row(row, rel, r);
    }
    let lower = lower.unwrap_or_else(|| vec![0.0; n]);
    let upper = upper.unwrap_or_else(|| vec![f64::INFINITY; n]);
    if lower.len() != n || upper.len() != n {
        return Err(PyValueError::new_err("bounds must match the number of variables"));
    }
    for j in 0..n {
        lp.set_bounds(j, lower[j], upper[j]);
    }
    let sol = core_solve_lp(&lp).map_err(to_py)?;
    #[derive(Serialize)]
    struct Out {
        status: String,
        x: Vec<f64>,
        objective: f64,
        duals: Vec<f64>,
        pivots: usize,
    }
    to_dict(
        py,
        &Out {
            status: format!("{:?}", sol.status).to_lowercase(),
            x: sol.x,
            objective: sol.objective,
            duals: sol.duals,
            pivots: sol.pivots,
        },
    )
}

/// Shor experiment. Returns `(report, trace_csv)`.
#[pyfunction]
#[pyo3(signature = (method = "sgm", theta = 0.1, nu = 0.7, d = 25, eps = None, max_iter = 40_000, normalize = false, timing = true))]
#[allow(clippy::too_many_arguments)]
fn run_shor<'py>(
    py: Python<'py>,
    method: &str,
    theta: f64,
    nu: f64,
    d: usize,
    eps: Option<Vec<f64>>,
    max_iter: usize,
    normalize: bool,
    timing: bool,
) -> PyResult<(Bound<'py, PyAny>, String)> {
    let mut cfg = ShorConfig::new(parse_method(method)?);
    cfg.theta = theta;
    cfg.nu = nu;
    cfg.d = d;
    if let Some(eps) = eps {
        cfg.eps = eps;
    }
    cfg.max_iter = max_iter;
    cfg.normalize = normalize;
    cfg.timing = timing;
    let (report, trace) = core_run_shor(&cfg).map_err(to_py)?;
    Ok((to_dict(py, &report)?, trace.to_csv()))
}

/// Master-problem experiment on a generated instance. `t=None` calibrates.
/// Returns `(report, trace_csv)`.
#[pyfunction]
#[pyo3(signature = (l, method = "sgmts", theta = 5.0, nu = 0.8, d = 25, offset = 2, budget = 2000, t = None, margin = 1.0, phase = 0.0, timing = true))]
#[allow(clippy::too_many_arguments)]
fn run_declp<'py>(
    py: Python<'py>,
    l: usize,
    method: &str,
    theta: f64,
    nu: f64,
    d: usize,
    offset: u32,
    budget: usize,
    t: Option<Vec<f64>>,
    margin: f64,
    phase: f64,
    timing: bool,
) -> PyResult<(Bound<'py, PyAny>, String)> {
    let mut cfg = DeclpConfig::new(l, parse_method(method)?);
    cfg.theta = theta;
    cfg.nu = nu;
    cfg.d = d;
    cfg.offset = offset;
    cfg.budget = budget;
    cfg.phase = phase;
    cfg.timing = timing;
    cfg.penalty = match t {
        Some(t) => PenaltyMode::Explicit { t },
        None => PenaltyMode::Auto { margin },
    };
    let (report, trace) = core_run_declp(&cfg).map_err(to_py)?;
    Ok((to_dict(py, &report)?, trace.to_csv()))
}

/// Exactness and oracle self-check; returns the report dict.
#[pyfunction]
#[pyo3(signature = (ls = vec![1, 2, 5], t = None, seed = DEFAULT_SEED, samples = 50, phase = 0.0))]
fn run_verify<'py>(
    py: Python<'py>,
    ls: Vec<usize>,
    t: Option<Vec<f64>>,
    seed: u64,
    samples: usize,
    phase: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let report = core_run_verify(&VerifyConfig {
        ls,
        phase,
        t,
        seed,
        samples,
    })
    .map_err(to_py)?;
    to_dict(py, &report)
}

#[pymodule]
#[pyo3(name = "sharedecomp")]
pub fn sharedecomp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDecomposableLp>()?;
    m.add_function(wrap_pyfunction!(shor_eval, m)?)?;
    m.add_function(wrap_pyfunction!(project_onto_u, m)?)?;
    m.add_function(wrap_pyfunction!(step_size, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lp, m)?)?;
    m.add_function(wrap_pyfunction!(run_shor, m)?)?;
    m.add_function(wrap_pyfunction!(run_declp, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    m.add("SHOR_OPTIMUM", sharedecomp::testbed::SHOR_OPTIMUM)?;
    Ok(())
}
