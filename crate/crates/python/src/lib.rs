//! Python bindings: charts, warp specs and the closed-form/oracle pairs.
//! Points are plain lists of floats, base coordinates first.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use warpgeo::cli::{load_config, run, RunOptions};
use warpgeo::connection::{nabla_lifted, LiftedVectorField};
use warpgeo::curvature::scalar_closed_h;
use warpgeo::frame::product_frame;
use warpgeo::laplacian::{harmonicity_defect, laplacian_report};
use warpgeo::{DerivativeMode, Error, Formulas, Side, Variant};

fn err(e: Error) -> PyErr {
    match e {
        Error::Config { .. } | Error::Syntax { .. } | Error::UndeclaredVariable(_) | Error::OutOfDomain { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_side(name: &str) -> PyResult<Side> {
    match name {
        "base" => Ok(Side::Base),
        "fiber" => Ok(Side::Fiber),
        _ => Err(PyValueError::new_err(format!("side must be 'base' or 'fiber', got {name:?}"))),
    }
}

fn mode(fd: bool) -> DerivativeMode {
    if fd {
        DerivativeMode::CentralDifference
    } else {
        DerivativeMode::Dual
    }
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// A parsed expression over named variables.
#[pyclass(frozen)]
struct Expression(warpgeo::Expression);

#[pymethods]
impl Expression {
    #[new]
    fn new(source: &str, vars: Vec<String>) -> PyResult<Self> {
        warpgeo::Expression::parse(source, &vars).map(Expression).map_err(err)
    }

    fn __call__(&self, point: Vec<f64>) -> PyResult<f64> {
        self.0.eval(&point).map_err(err)
    }

    /// `(value, gradient, hessian)` by forward-mode differentiation.
    fn jet(&self, point: Vec<f64>) -> PyResult<(f64, Vec<f64>, Vec<Vec<f64>>)> {
        let j = self.0.eval_jet2(&point).map_err(err)?;
        Ok((j.value(), j.gradient(), j.hessian()))
    }

    fn __repr__(&self) -> String {
        format!("Expression({:?})", self.0.source())
    }
}

/// A coordinate chart with its metric.
#[pyclass(frozen)]
struct Chart(Arc<warpgeo::Chart>);

#[pymethods]
impl Chart {
    /// A catalog chart: `euclidean:<n>`, `sphere2` or `halfplane2`.
    #[staticmethod]
    #[pyo3(signature = (name, prefix = "x"))]
    fn catalog(name: &str, prefix: &str) -> PyResult<Self> {
        warpgeo::Chart::from_catalog(name, prefix).map(|c| Chart(Arc::new(c))).map_err(err)
    }

    /// A chart from explicit variables, box and upper-triangle metric.
    #[staticmethod]
    fn custom(name: &str, vars: Vec<String>, domain: Vec<(f64, f64)>, metric: Vec<String>) -> PyResult<Self> {
        warpgeo::Chart::custom(name, &vars, &domain, &metric).map(|c| Chart(Arc::new(c))).map_err(err)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name().to_string()
    }

    #[getter]
    fn vars(&self) -> Vec<String> {
        self.0.vars().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn metric(&self, point: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        self.0.metric_at(&point).map(|m| rows(&m)).map_err(err)
    }

    fn scalar_curvature(&self, point: Vec<f64>) -> PyResult<f64> {
        self.0.check_point(&point).map_err(err)?;
        self.0.oracle().scalar(&point).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Chart({})", self.0)
    }
}

/// A warped product of two charts, variant `"G"` or `"H"`.
#[pyclass(frozen)]
struct WarpSpec(warpgeo::WarpSpec);

impl WarpSpec {
    fn point(&self, coords: &[f64]) -> PyResult<warpgeo::ProductPoint> {
        self.0.point(coords).map_err(err)
    }
}

#[pymethods]
impl WarpSpec {
    #[new]
    #[pyo3(signature = (base, fiber, f1, f2, c, variant = "G"))]
    fn new(base: &Chart, fiber: &Chart, f1: &str, f2: &str, c: f64, variant: &str) -> PyResult<Self> {
        let variant = match variant {
            "G" => Variant::G,
            "H" => Variant::H,
            _ => return Err(PyValueError::new_err(format!("variant must be 'G' or 'H', got {variant:?}"))),
        };
        warpgeo::WarpSpec::from_sources(base.0.clone(), fiber.0.clone(), f1, f2, c, variant)
            .map(WarpSpec)
            .map_err(err)
    }

    #[getter]
    fn variant(&self) -> String {
        self.0.variant().to_string()
    }

    #[getter]
    fn dims(&self) -> (usize, usize) {
        (self.0.m1(), self.0.m2())
    }

    #[getter]
    fn c(&self) -> f64 {
        self.0.c()
    }

    #[pyo3(signature = (count, seed = 42, margin = 1e-3))]
    fn sample(&self, count: usize, seed: u64, margin: f64) -> Vec<Vec<f64>> {
        self.0.sample(count, seed, margin).iter().map(|q| q.coords()).collect()
    }

    fn metric(&self, point: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let q = self.point(&point)?;
        self.0.assemble(&q).map(|m| rows(&m)).map_err(err)
    }

    fn det(&self, point: Vec<f64>) -> PyResult<f64> {
        let q = self.point(&point)?;
        self.0.det_closed_form(&q).map_err(err)
    }

    /// `(classification, c² b1 b2)`.
    fn classify(&self, point: Vec<f64>) -> PyResult<(String, f64)> {
        let q = self.point(&point)?;
        let (class, coupling) = self.0.classify(&q).map_err(err)?;
        Ok((format!("{class:?}").to_lowercase(), coupling))
    }

    fn cometric(&self, point: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let q = self.point(&point)?;
        self.0.cometric(&q).map(|m| rows(&m)).map_err(err)
    }

    /// Closed-form `∇_{e_i} e_j` on product coordinate fields.
    fn nabla(&self, i: usize, j: usize, point: Vec<f64>) -> PyResult<Vec<f64>> {
        let q = self.point(&point)?;
        let m1 = self.0.m1();
        let n = m1 + self.0.m2();
        if i >= n || j >= n {
            return Err(PyValueError::new_err(format!("coordinate index out of range 0..{n}")));
        }
        let field = |k: usize| {
            if k < m1 {
                LiftedVectorField::coordinate(&self.0, Side::Base, k)
            } else {
                LiftedVectorField::coordinate(&self.0, Side::Fiber, k - m1)
            }
        };
        nabla_lifted(&self.0, &field(i), &field(j), &q)
            .map(|v| v.iter().copied().collect())
            .map_err(err)
    }

    /// Orthonormal frame vectors, one list per vector.
    fn frame(&self, point: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let q = self.point(&point)?;
        let frame = product_frame(&self.0, &q).map_err(err)?;
        Ok(frame.vectors.iter().map(|v| v.iter().copied().collect()).collect())
    }

    /// `(closed_form, oracle)` for the Laplacian of a lifted function;
    /// the warping function of that side when `phi` is omitted.
    #[pyo3(signature = (side, point, phi = None, fd_oracle = false))]
    fn laplacian(&self, side: &str, point: Vec<f64>, phi: Option<&str>, fd_oracle: bool) -> PyResult<(f64, f64)> {
        let s = parse_side(side)?;
        let q = self.point(&point)?;
        let field = phi
            .map(|src| warpgeo::ScalarField::new(self.0.chart(s).clone(), src))
            .transpose()
            .map_err(err)?;
        let r = laplacian_report(&self.0, s, field.as_ref(), &q, mode(fd_oracle)).map_err(err)?;
        Ok((r.closed_form, r.oracle))
    }

    fn harmonicity_defect(&self, side: &str, point: Vec<f64>) -> PyResult<f64> {
        let q = self.point(&point)?;
        harmonicity_defect(&self.0, parse_side(side)?, &q).map_err(err)
    }

    /// Closed-form scalar curvature (variant H, parallel gradients).
    #[pyo3(signature = (point, formulas = "published"))]
    fn scalar_curvature(&self, point: Vec<f64>, formulas: &str) -> PyResult<f64> {
        let formulas = match formulas {
            "published" => Formulas::Published,
            "rederived" => Formulas::Rederived,
            _ => return Err(PyValueError::new_err("formulas must be 'published' or 'rederived'")),
        };
        let q = self.point(&point)?;
        scalar_closed_h(&self.0, &q, formulas).map_err(err)
    }

    #[pyo3(signature = (point, fd_oracle = false))]
    fn oracle_scalar_curvature(&self, point: Vec<f64>, fd_oracle: bool) -> PyResult<f64> {
        self.point(&point)?;
        self.0.oracle(mode(fd_oracle)).scalar(&point).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "WarpSpec(variant={}, base={}, fiber={}, f1={:?}, f2={:?}, c={})",
            self.0.variant(),
            self.0.base(),
            self.0.fiber(),
            self.0.f1().expression().source(),
            self.0.f2().expression().source(),
            self.0.c()
        )
    }
}

/// Run a TOML config; returns `(exit_code, csv)`.
#[pyfunction]
#[pyo3(signature = (path, tolerance_scale = 1.0, fd_oracle = false))]
fn run_config(path: std::path::PathBuf, tolerance_scale: f64, fd_oracle: bool) -> PyResult<(i32, String)> {
    let cfg = load_config(&path).map_err(err)?;
    let report = run(&cfg, RunOptions { tolerance_scale, fd_oracle }).map_err(err)?;
    Ok((report.exit_code(), report.to_csv()))
}

#[pymodule]
fn pywarpgeo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Expression>()?;
    m.add_class::<Chart>()?;
    m.add_class::<WarpSpec>()?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
