//! Python bindings. Reports cross the boundary as plain dicts.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use rdl_core::amplitude::{FamilySpec, TargetSet};
use rdl_core::isis_solver::{self, RecoverableSolver, RecursiveSolver, SolverOutput, SolverParams, SolverTape};
use rdl_core::lattice_states::LatticeContext;
use rdl_core::modq::{Instance, ModVector};
use rdl_core::reductions::{self, EndToEndSolver, IclweOracle, PgmOracle, SlweOracle};

create_exception!(rdl, RdlError, PyException);

fn err(e: rdl_core::Error) -> PyErr {
    RdlError::new_err(format!("{}: {e}", e.code()))
}

fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| RdlError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn target(json: &str) -> PyResult<TargetSet> {
    serde_json::from_str(json).map_err(|e| RdlError::new_err(format!("E_MALFORMED: {e}")))
}

/// Validated ISIS instance `(A, y)` over `Z_q`.
#[pyclass(name = "Instance", module = "rdl", frozen)]
struct PyInstance {
    inner: Instance,
}

#[pymethods]
impl PyInstance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Instance::from_json(text).map_err(err)?,
        })
    }

    /// Uniform instance drawn from the seeded stream.
    #[staticmethod]
    fn random(q: u32, n: usize, m: usize, seed: u64) -> PyResult<Self> {
        let mut rng = rdl_core::rng::fork(seed, "gen-instance");
        let a = isis_solver::random_matrix(n, m, q, &mut rng).map_err(err)?;
        let y = isis_solver::random_vector(n, q, &mut rng).map_err(err)?;
        Ok(Self {
            inner: Instance { a, y: Some(y) },
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn q(&self) -> u32 {
        self.inner.q()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.a.rows()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.a.cols()
    }

    #[getter]
    fn a(&self) -> Vec<Vec<u32>> {
        self.inner.a.to_rows()
    }

    #[getter]
    fn y(&self) -> Option<Vec<u32>> {
        self.inner.y.as_ref().map(|y| y.entries().to_vec())
    }

    fn digest(&self) -> String {
        reductions::instance_digest(&self.inner.a)
    }

    fn __repr__(&self) -> String {
        format!("Instance(q={}, n={}, m={})", self.q(), self.n(), self.m())
    }
}

/// Lattice states `psi_s`, `W_y` and weights for `A` and an amplitude family.
#[pyclass(name = "LatticeContext", module = "rdl", frozen)]
struct PyLatticeContext {
    inner: LatticeContext,
}

#[pymethods]
impl PyLatticeContext {
    #[new]
    fn new(instance: &PyInstance, family: &str) -> PyResult<Self> {
        let inst = &instance.inner;
        let f = FamilySpec::from_json(family)
            .and_then(|s| s.build(inst.q(), inst.a.cols()))
            .map_err(err)?;
        Ok(Self {
            inner: LatticeContext::new(inst.a.clone(), f).map_err(err)?,
        })
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn pmax(&self) -> f64 {
        self.inner.pmax_formula()
    }

    fn pgm_success_direct(&self) -> PyResult<f64> {
        self.inner.pgm_success_direct().map_err(err)
    }

    fn identities(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.check_identities().map_err(err)?)
    }

    /// Amplitudes of `psi_s` as `(re, im)` pairs.
    fn psi(&self, s: usize) -> PyResult<Vec<(f64, f64)>> {
        let st = self.inner.build_psi(s).map_err(err)?;
        Ok(st.amplitudes().iter().map(|c| (c.re, c.im)).collect())
    }

    /// Forward pipeline report; `oracle` is `pgm`, `biased`, `symmetrized-pgm` or `symmetrized-biased`.
    #[pyo3(signature = (target, oracle = "pgm"))]
    fn forward(&self, py: Python<'_>, target: &str, oracle: &str) -> PyResult<Py<PyAny>> {
        let ctx = &self.inner;
        let t = self::target(target)?;
        let o: Box<dyn SlweOracle + '_> = match oracle {
            "pgm" => Box::new(PgmOracle::new(ctx).map_err(err)?),
            "biased" => Box::new(reductions::ConstantAnswerOracle::new(ctx, 0).map_err(err)?),
            "symmetrized-pgm" => Box::new(reductions::symmetrize(Box::new(PgmOracle::new(ctx).map_err(err)?), ctx).map_err(err)?),
            "symmetrized-biased" => Box::new(
                reductions::symmetrize(Box::new(reductions::ConstantAnswerOracle::new(ctx, 0).map_err(err)?), ctx)
                    .map_err(err)?,
            ),
            other => return Err(RdlError::new_err(format!("E_USAGE: unknown oracle {other}"))),
        };
        to_py(py, &reductions::forward_report(ctx, &t, o.as_ref()).map_err(err)?)
    }

    /// Reverse pipeline report with the exact lattice states as the oracle family.
    fn reverse_perfect(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let o = IclweOracle::perfect(&self.inner).map_err(err)?;
        to_py(py, &reductions::reverse_report(&self.inner, &o).map_err(err)?)
    }
}

/// Runs the recursive solver; returns `("solution", x)` or `("abort", tape_hex)`.
#[pyfunction]
fn solve(py: Python<'_>, instance: &PyInstance, l: u32, tape_hex: &str) -> PyResult<(String, Py<PyAny>)> {
    let inst = &instance.inner;
    let params = SolverParams::new(inst.a.rows(), l).map_err(err)?;
    let y = inst
        .y
        .clone()
        .ok_or_else(|| RdlError::new_err("E_MALFORMED: instance has no y"))?;
    let tape = SolverTape::from_hex(tape_hex, params.tape_length()).map_err(err)?;
    let out = RecursiveSolver::new(params).solve(&inst.a, &y, &tape).map_err(err)?;
    match out {
        SolverOutput::Solution(x) => Ok(("solution".to_string(), to_py(py, &x.entries())?)),
        SolverOutput::Abort(t) => Ok(("abort".to_string(), to_py(py, &t.to_hex())?)),
    }
}

/// Tape (hex) that makes the solver output `x`.
#[pyfunction]
fn recover(instance: &PyInstance, l: u32, x: Vec<i64>) -> PyResult<String> {
    let inst = &instance.inner;
    let params = SolverParams::new(inst.a.rows(), l).map_err(err)?;
    let y = inst
        .y
        .clone()
        .ok_or_else(|| RdlError::new_err("E_MALFORMED: instance has no y"))?;
    let x = ModVector::from_i64(inst.q(), &x).map_err(err)?;
    Ok(isis_solver::recover(&params, &inst.a, &y, &x).map_err(err)?.to_hex())
}

#[pyfunction]
fn tape_length(n: usize, l: u32) -> PyResult<usize> {
    Ok(SolverParams::new(n, l).map_err(err)?.tape_length())
}

#[pyfunction]
#[pyo3(signature = (n, l, trials, seed = 0))]
fn abort_rate(py: Python<'_>, n: usize, l: u32, trials: u64, seed: u64) -> PyResult<Py<PyAny>> {
    let params = SolverParams::new(n, l).map_err(err)?;
    to_py(py, &isis_solver::abort_probability(&params, trials, seed).map_err(err)?)
}

#[pyfunction]
fn forward_bound(p: f64, eta: f64) -> PyResult<f64> {
    reductions::forward_bound(p, eta).map_err(err)
}

#[pyfunction]
fn reverse_bound(eps: f64, eps_prime: f64) -> PyResult<f64> {
    Ok(reductions::reverse_bound(eps, eps_prime).map_err(err)?.value)
}

/// Random solvable instance, solver-derived family, reverse measurement.
#[pyfunction]
#[pyo3(signature = (n, l, seed = 0, stub = false))]
fn end_to_end(py: Python<'_>, n: usize, l: u32, seed: u64, stub: bool) -> PyResult<Py<PyAny>> {
    let which = if stub {
        EndToEndSolver::AlwaysAbort
    } else {
        EndToEndSolver::Recursive
    };
    let params = SolverParams::new(n, l).map_err(err)?;
    to_py(py, &reductions::end_to_end(params, seed, which).map_err(err)?)
}

#[pymodule]
fn rdl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("RdlError", m.py().get_type::<RdlError>())?;
    m.add_class::<PyInstance>()?;
    m.add_class::<PyLatticeContext>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(recover, m)?)?;
    m.add_function(wrap_pyfunction!(tape_length, m)?)?;
    m.add_function(wrap_pyfunction!(abort_rate, m)?)?;
    m.add_function(wrap_pyfunction!(forward_bound, m)?)?;
    m.add_function(wrap_pyfunction!(reverse_bound, m)?)?;
    m.add_function(wrap_pyfunction!(end_to_end, m)?)?;
    Ok(())
}
