//! Python bindings: expressions, semisprays, connections, and integration.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use kjet_core::connections::{
    autoparallel_curve_system, autoparallel_rhs, bucataru_connection, dual_to_primal,
    miron_connection, DualCoefficients,
};
use kjet_core::integrate::{integrate, kpath_system, IntegratorConfig, OdeSystem};
use kjet_core::lagrange::{canonical_semispray, cartan_connection, LagrangianSpec};
use kjet_core::phase::{default_points, euler_degree, PhasePoint};
use kjet_core::problem::ProblemSetup;
use kjet_core::sample::SampleBox;
use kjet_core::verify::run_verify;

fn err(e: kjet_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn context(n: usize, k: usize) -> PyResult<kjet_core::Context> {
    kjet_core::Context::new(n, k).map_err(err)
}

/// A symbolic expression over the coordinates x(i), y(m,i) of a fixed (n, k).
#[pyclass(name = "Expr")]
#[derive(Clone)]
struct PyExpr {
    ctx: kjet_core::Context,
    inner: kjet_core::Expr,
}

#[pymethods]
impl PyExpr {
    #[staticmethod]
    fn parse(text: &str, n: usize, k: usize) -> PyResult<PyExpr> {
        let ctx = context(n, k)?;
        let inner = kjet_core::parse_expr(text, ctx).map_err(err)?;
        Ok(PyExpr { ctx, inner })
    }

    /// Partial derivative with respect to x(index) (level 0) or
    /// y(level, index).
    fn diff(&self, level: usize, index: usize) -> PyResult<PyExpr> {
        let coord = kjet_core::CoordId { level, index };
        self.ctx.check(coord).map_err(err)?;
        Ok(PyExpr {
            ctx: self.ctx,
            inner: self.inner.differentiate(coord),
        })
    }

    /// Evaluate at a point given as x = [..] and y = [[..] per level].
    fn eval(&self, x: Vec<f64>, y: Vec<Vec<f64>>) -> PyResult<f64> {
        let p = PhasePoint::new(x, y);
        self.inner.evaluate(self.ctx, &p).map_err(err)
    }

    /// Residual of the Euler homogeneity test for degree r over sampled
    /// admissible points.
    #[pyo3(signature = (r, samples = 50, seed = 42))]
    fn euler_residual(&self, r: i64, samples: usize, seed: u64) -> PyResult<f64> {
        let points = default_points(self.ctx, samples, seed);
        let rep = euler_degree(&self.inner, r, self.ctx, &points, 1e-9);
        rep.residual
            .ok_or_else(|| PyValueError::new_err(rep.notes.join("; ")))
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expr('{}')", self.inner)
    }

    fn __eq__(&self, other: &PyExpr) -> bool {
        self.inner == other.inner
    }
}

/// A k-semispray with coefficient functions G(i).
#[pyclass(name = "Semispray")]
#[derive(Clone)]
struct PySemispray {
    inner: kjet_core::KSemispray,
}

fn coefficients_to_strings(d: &DualCoefficients) -> Vec<Vec<Vec<String>>> {
    d.m.iter()
        .map(|level| {
            level
                .iter()
                .map(|row| row.iter().map(|e| e.to_string()).collect())
                .collect()
        })
        .collect()
}

fn integrate_system(
    sys: &OdeSystem,
    init: Vec<f64>,
    t0: f64,
    t1: f64,
    step: f64,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let point = PhasePoint::from_flat(sys.ctx, &init).map_err(err)?;
    let cfg = IntegratorConfig {
        step,
        ..Default::default()
    };
    let traj = integrate(sys, &point, t0, t1, &cfg).map_err(err)?;
    let states = traj.states.iter().map(|s| s.flatten()).collect();
    Ok((traj.times, states))
}

#[pymethods]
impl PySemispray {
    /// Build from coefficient expression texts, one per base dimension.
    #[new]
    fn new(n: usize, k: usize, coefficients: Vec<String>) -> PyResult<PySemispray> {
        let ctx = context(n, k)?;
        let g = coefficients
            .iter()
            .map(|text| kjet_core::parse_expr(text, ctx))
            .collect::<kjet_core::Result<Vec<_>>>()
            .map_err(err)?;
        Ok(PySemispray {
            inner: kjet_core::KSemispray::new(ctx, g).map_err(err)?,
        })
    }

    /// The canonical semispray of a regular order-k Lagrangian.
    #[staticmethod]
    fn canonical(n: usize, k: usize, lagrangian: &str) -> PyResult<PySemispray> {
        let ctx = context(n, k)?;
        let l = kjet_core::parse_expr(lagrangian, ctx).map_err(err)?;
        let spec =
            LagrangianSpec::new(ctx, l, false, SampleBox::default_for(ctx)).map_err(err)?;
        Ok(PySemispray {
            inner: canonical_semispray(&spec).map_err(err)?,
        })
    }

    fn coefficients(&self) -> Vec<String> {
        self.inner.g.iter().map(|g| g.to_string()).collect()
    }

    /// One step of the semispray iteration.
    fn next(&self) -> PySemispray {
        PySemispray {
            inner: self.inner.next_semispray(),
        }
    }

    /// The first m semisprays of the iteration, as coefficient lists.
    fn sequence(&self, m: usize) -> PyResult<Vec<Vec<String>>> {
        if m == 0 {
            return Err(PyValueError::new_err("sequence length must be >= 1"));
        }
        Ok(self
            .inner
            .sequence(m)
            .iter()
            .map(|s| s.g.iter().map(|g| g.to_string()).collect())
            .collect())
    }

    #[pyo3(signature = (samples = 50, seed = 42))]
    fn is_kspray(&self, samples: usize, seed: u64) -> bool {
        let points = default_points(self.inner.ctx, samples, seed);
        self.inner.is_kspray(&points, 1e-9).passed()
    }

    /// Miron dual coefficients as strings, indexed [level][i][j].
    fn miron(&self) -> Vec<Vec<Vec<String>>> {
        coefficients_to_strings(&miron_connection(&self.inner))
    }

    /// Bucataru dual coefficients as strings, indexed [level][i][j].
    fn bucataru(&self) -> Vec<Vec<Vec<String>>> {
        coefficients_to_strings(&bucataru_connection(&self.inner))
    }

    /// Primal coefficients of the Miron connection.
    fn miron_primal(&self) -> Vec<Vec<Vec<String>>> {
        let p = dual_to_primal(&miron_connection(&self.inner));
        p.n.iter()
            .map(|level| {
                level
                    .iter()
                    .map(|row| row.iter().map(|e| e.to_string()).collect())
                    .collect()
            })
            .collect()
    }

    /// Integrate the k-path system from a flat initial state
    /// (x..., y1..., ..., yk...); returns (times, states).
    #[pyo3(signature = (init, t0 = 0.0, t1 = 1.0, step = 1e-3))]
    fn kpath(
        &self,
        init: Vec<f64>,
        t0: f64,
        t1: f64,
        step: f64,
    ) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        integrate_system(&kpath_system(&self.inner), init, t0, t1, step)
    }

    /// Integrate the autoparallel-curve system of the chosen connection
    /// ("miron" or "bucataru") from a flat initial state.
    #[pyo3(signature = (method, init, t0 = 0.0, t1 = 1.0, step = 1e-3))]
    fn autoparallel(
        &self,
        method: &str,
        init: Vec<f64>,
        t0: f64,
        t1: f64,
        step: f64,
    ) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let d = self.connection(method)?;
        integrate_system(&autoparallel_curve_system(&d), init, t0, t1, step)
    }

    /// Integrate the horizontal-lift flow of the chosen connection.
    #[pyo3(signature = (method, init, t0 = 0.0, t1 = 1.0, step = 1e-3))]
    fn horizontal_flow(
        &self,
        method: &str,
        init: Vec<f64>,
        t0: f64,
        t1: f64,
        step: f64,
    ) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let d = self.connection(method)?;
        integrate_system(&autoparallel_rhs(&d), init, t0, t1, step)
    }

    fn __repr__(&self) -> String {
        format!("Semispray(G = [{}])", self.coefficients().join(", "))
    }
}

impl PySemispray {
    fn connection(&self, method: &str) -> PyResult<DualCoefficients> {
        match method {
            "miron" => Ok(miron_connection(&self.inner)),
            "bucataru" => Ok(bucataru_connection(&self.inner)),
            other => Err(PyValueError::new_err(format!(
                "unknown connection method '{other}' (use miron or bucataru)"
            ))),
        }
    }
}

/// Cartan data of a Finsler structure F^2: the canonical spray and the
/// Cartan dual coefficients.
#[pyfunction]
fn cartan(n: usize, k: usize, f_squared: &str) -> PyResult<(PySemispray, Vec<Vec<Vec<String>>>)> {
    let ctx = context(n, k)?;
    let l = kjet_core::parse_expr(f_squared, ctx).map_err(err)?;
    let spec = LagrangianSpec::new(ctx, l, true, SampleBox::default_for(ctx)).map_err(err)?;
    let (s, cartan) = cartan_connection(&spec).map_err(err)?;
    Ok((PySemispray { inner: s }, coefficients_to_strings(&cartan)))
}

/// Run the verification suite on problem-file text; returns a list of
/// {name, status, residual} dicts.
#[pyfunction]
fn verify_problem(py: Python<'_>, text: &str) -> PyResult<Vec<Py<PyDict>>> {
    let setup = ProblemSetup::from_str(text).map_err(err)?;
    let mut out = Vec::new();
    for check in run_verify(&setup) {
        let d = PyDict::new(py);
        d.set_item("name", &check.name)?;
        d.set_item("status", check.status.to_string())?;
        d.set_item("residual", check.residual)?;
        out.push(d.into());
    }
    Ok(out)
}

#[pymodule]
fn kjet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpr>()?;
    m.add_class::<PySemispray>()?;
    m.add_function(wrap_pyfunction!(cartan, m)?)?;
    m.add_function(wrap_pyfunction!(verify_problem, m)?)?;
    Ok(())
}
