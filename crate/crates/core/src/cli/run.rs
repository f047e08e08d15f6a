//! Verification sweeps: every task at every sample point, closed form
//! against reference.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::config::{RunConfig, Task};
use super::report::{Report, Row, RowKind};
use crate::connection::{compatibility_residual, grad_lift, nabla_lifted, torsion_residual, LiftedVectorField};
use crate::curvature::{curvature_report, hessian_norms, CurvatureObject, PARALLEL_TOL};
use crate::error::{Error, Result};
use crate::frame::{product_frame, remark_identity_residual, sum_identities_residual};
use crate::laplacian::{harmonicity_defect, laplacian_report};
use crate::metric::{ProductPoint, Side, Variant, WarpSpec};
use crate::oracle::DerivativeMode;

/// Tolerance multiplier applied to oracle tasks in finite-difference mode.
pub const FD_RELAXATION: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub tolerance_scale: f64,
    pub fd_oracle: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            tolerance_scale: 1.0,
            fd_oracle: false,
        }
    }
}

impl RunOptions {
    fn mode(&self) -> DerivativeMode {
        if self.fd_oracle {
            DerivativeMode::CentralDifference
        } else {
            DerivativeMode::Dual
        }
    }
}

/// The points a config evaluates, in report order.
pub fn sample_points(cfg: &RunConfig) -> Result<Vec<ProductPoint>> {
    match &cfg.sampling.points {
        Some(points) => points.iter().map(|p| cfg.spec.point(p)).collect(),
        None => Ok(cfg.spec.sample(cfg.sampling.count, cfg.sampling.seed, cfg.sampling.margin)),
    }
}

/// Errors that mark a single point as failed instead of aborting the run.
fn point_failure(err: &Error) -> Option<RowKind> {
    match err {
        Error::Hypothesis { .. } => Some(RowKind::Hypothesis),
        Error::NotRiemannian { .. } | Error::DegenerateFrame { .. } | Error::Inconsistent(_) | Error::Singular => {
            Some(RowKind::Degenerate)
        }
        _ => None,
    }
}

pub fn run(cfg: &RunConfig, opts: RunOptions) -> Result<Report> {
    let points = sample_points(cfg)?;
    let header = format!(
        "warpgeo run: variant {}, dims {}+{}, c = {}, {} points ({}), seed {}, oracle {}",
        cfg.spec.variant(),
        cfg.spec.m1(),
        cfg.spec.m2(),
        cfg.spec.c(),
        points.len(),
        if cfg.sampling.points.is_some() { "explicit" } else { "sampled" },
        cfg.sampling.seed,
        if opts.fd_oracle { "central-difference" } else { "dual" },
    );
    let mut rows = Vec::new();
    for &task in &cfg.tasks {
        let mut tol = cfg.tolerance(task) * opts.tolerance_scale;
        if opts.fd_oracle && task.uses_oracle() {
            tol *= FD_RELAXATION;
        }
        let per_point: Vec<Result<Vec<Row>>> = points
            .par_iter()
            .enumerate()
            .map(|(i, q)| {
                let coords = q.coords();
                match evaluate(cfg, task, q, &coords, i, tol, opts.mode()) {
                    Ok(rows) => Ok(rows),
                    Err(e) => match point_failure(&e) {
                        Some(RowKind::Hypothesis) => {
                            let (h1, h2) = hessian_norms(&cfg.spec, q)?;
                            let label = format!("{task}:hypothesis");
                            Ok(vec![Row::failure(label, i, &coords, RowKind::Hypothesis, h1.max(h2))])
                        }
                        Some(kind) => {
                            let label = format!("{task}:degenerate");
                            Ok(vec![Row::failure(label, i, &coords, kind, f64::NAN)])
                        }
                        None => Err(e),
                    },
                }
            })
            .collect();
        for r in per_point {
            rows.extend(r?);
        }
    }
    Ok(Report::new(header, rows))
}

fn coordinate_fields(spec: &WarpSpec) -> Vec<LiftedVectorField> {
    (0..spec.m1())
        .map(|i| LiftedVectorField::coordinate(spec, Side::Base, i))
        .chain((0..spec.m2()).map(|i| LiftedVectorField::coordinate(spec, Side::Fiber, i)))
        .collect()
}

/// Largest component difference between two equally shaped value lists,
/// as `(closed, reference)` at the worst index.
fn worst_pair(closed: &[f64], reference: &[f64]) -> (f64, f64) {
    let mut best = (0.0, 0.0);
    let mut worst = -1.0;
    for (&a, &b) in closed.iter().zip(reference) {
        let d = (a - b).abs();
        if d > worst || d.is_nan() {
            worst = d;
            best = (a, b);
            if d.is_nan() {
                break;
            }
        }
    }
    best
}

fn evaluate(
    cfg: &RunConfig,
    task: Task,
    q: &ProductPoint,
    coords: &[f64],
    index: usize,
    tol: f64,
    mode: DerivativeMode,
) -> Result<Vec<Row>> {
    let spec = &cfg.spec;
    let row = |name: &str, closed: f64, reference: f64| Row::compare(format!("{task}:{name}"), index, coords, closed, reference, tol);
    let mut rows = Vec::new();
    match task {
        Task::Metric => {
            let g = spec.assemble(q)?;
            rows.push(row("det", spec.det_closed_form(q)?, g.determinant()));
            let (class, _) = spec.is_riemannian(q)?;
            rows.push(row("classification", class.code(), spec.eigen_classification(q)?.code()));
        }
        Task::Cometric => {
            let inv = spec.cometric(q)?;
            let g = spec.assemble(q)?;
            let n = g.nrows();
            rows.push(row("inverse", (inv * g - DMatrix::<f64>::identity(n, n)).amax(), 0.0));
        }
        Task::Connection => {
            spec.require_riemannian(q)?;
            let fields = coordinate_fields(spec);
            let oracle = spec.oracle(mode);
            let (mut closed, mut reference) = (Vec::new(), Vec::new());
            let mut torsion: f64 = 0.0;
            let mut compat: f64 = 0.0;
            for x in &fields {
                for y in &fields {
                    closed.extend(nabla_lifted(spec, x, y, q)?.iter());
                    reference.extend(oracle.covariant_derivative(x, y, coords)?.iter());
                    torsion = torsion.max(torsion_residual(spec, x, y, q)?);
                    for z in &fields {
                        compat = compat.max(compatibility_residual(spec, x, y, z, q)?);
                    }
                }
            }
            let (a, b) = worst_pair(&closed, &reference);
            rows.push(row("nabla", a, b));
            rows.push(row("torsion", torsion, 0.0));
            rows.push(row("compatibility", compat, 0.0));
        }
        Task::Frame => {
            let frame = product_frame(spec, q)?;
            let g = spec.assemble(q)?;
            let n = g.nrows();
            rows.push(row("gram", (frame.gram(&g) - DMatrix::<f64>::identity(n, n)).amax(), 0.0));
            let recomputed: Vec<f64> = frame.unnormalized.iter().map(|u| (u.transpose() * &g * u)[(0, 0)]).collect();
            let (a, b) = worst_pair(&frame.norms_sq, &recomputed);
            rows.push(row("norms", a, b));
        }
        Task::Identities => {
            rows.push(row("sums", sum_identities_residual(spec, q)?, 0.0));
            rows.push(row("remark", remark_identity_residual(spec, q)?, 0.0));
        }
        Task::Laplacian => {
            for (side, name) in [(Side::Base, "f1"), (Side::Fiber, "f2")] {
                let r = laplacian_report(spec, side, None, q, mode)?;
                rows.push(row(name, r.closed_form, r.oracle));
            }
            if spec.variant() == Variant::H {
                for (side, prefix) in [(Side::Base, "base"), (Side::Fiber, "fiber")] {
                    for (k, phi) in cfg.fields(side).iter().enumerate() {
                        let r = laplacian_report(spec, side, Some(phi), q, mode)?;
                        rows.push(row(&format!("{prefix}[{k}]"), r.closed_form, r.oracle));
                    }
                }
            }
        }
        Task::Curvature => {
            for object in [CurvatureObject::Riemann, CurvatureObject::Ricci, CurvatureObject::Scalar] {
                let r = curvature_report(spec, q, object, cfg.formulas, mode)?;
                let (a, b) = worst_pair(&r.closed_form, &r.oracle);
                rows.push(row(object.name(), a, b));
            }
        }
    }
    Ok(rows)
}

fn fmt_vec(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.10}")).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_mat(out: &mut String, title: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "{title}:");
    for i in 0..m.nrows() {
        let _ = writeln!(out, "  {}", fmt_vec(&m.row(i).transpose()));
    }
}

/// Human-readable dump of every object the spec defines at one point.
/// Objects whose hypotheses fail at the point are reported as such.
pub fn point_dump(cfg: &RunConfig, coords: &[f64], mode: DerivativeMode) -> Result<String> {
    let spec = &cfg.spec;
    let q = spec.point(coords)?;
    let mut out = String::new();
    let _ = writeln!(out, "point {coords:?}, variant {}, c = {}", spec.variant(), spec.c());
    let l = spec.local(&q)?;
    let _ = writeln!(out, "f1 = {:.10}, f2 = {:.10}, b1 = {:.10}, b2 = {:.10}", l.f1, l.f2, l.b1, l.b2);
    let g = spec.assemble(&q)?;
    fmt_mat(&mut out, "metric", &g);
    let _ = writeln!(out, "det: closed {:.10e}, direct {:.10e}", spec.det_closed_form(&q)?, g.determinant());
    let (class, diag) = spec.is_riemannian(&q)?;
    let _ = writeln!(out, "classification: {class:?} (c^2 b1 b2 = {diag})");
    let soft = |out: &mut String, label: &str, e: Error| -> Result<()> {
        if point_failure(&e).is_some() {
            let _ = writeln!(out, "{label}: unavailable ({e})");
            Ok(())
        } else {
            Err(e)
        }
    };
    match spec.cometric(&q) {
        Ok(inv) => fmt_mat(&mut out, "cometric", &inv),
        Err(e) => soft(&mut out, "cometric", e)?,
    }
    if class != crate::metric::Classification::Riemannian {
        return Ok(out);
    }
    for (side, f) in [(Side::Base, spec.f1()), (Side::Fiber, spec.f2())] {
        let _ = writeln!(out, "grad lift of {}: {}", f.expression().source(), fmt_vec(&grad_lift(spec, f, side, &q)?));
    }
    let fields = coordinate_fields(spec);
    let _ = writeln!(out, "connection on coordinate fields (closed form):");
    for (i, x) in fields.iter().enumerate() {
        for (j, y) in fields.iter().enumerate() {
            let _ = writeln!(out, "  nabla_{i} e_{j} = {}", fmt_vec(&nabla_lifted(spec, x, y, &q)?));
        }
    }
    match product_frame(spec, &q) {
        Ok(frame) => {
            let _ = writeln!(out, "frame (|u'|^2 = {:?}):", frame.norms_sq);
            for u in &frame.vectors {
                let _ = writeln!(out, "  {}", fmt_vec(u));
            }
            let _ = writeln!(out, "sum identities residual: {:.3e}", sum_identities_residual(spec, &q)?);
        }
        Err(e) => soft(&mut out, "frame", e)?,
    }
    for (side, name) in [(Side::Base, "f1"), (Side::Fiber, "f2")] {
        let r = laplacian_report(spec, side, None, &q, mode)?;
        let defect = harmonicity_defect(spec, side, &q)?;
        let _ = writeln!(
            out,
            "laplacian of {name} lift: closed {:.12}, oracle {:.12}, harmonicity defect {:.12}",
            r.closed_form, r.oracle, defect
        );
    }
    let oracle = spec.oracle(mode);
    let _ = writeln!(out, "scalar curvature (oracle): {:.12}", oracle.scalar(coords)?);
    if spec.variant() == Variant::H {
        let (h1, h2) = hessian_norms(spec, &q)?;
        if h1 < PARALLEL_TOL && h2 < PARALLEL_TOL {
            for object in [CurvatureObject::Ricci, CurvatureObject::Scalar] {
                let r = curvature_report(spec, &q, object, cfg.formulas, mode)?;
                let _ = writeln!(out, "{} closed-form vs oracle: max diff {:.3e}", object.name(), r.max_abs_diff);
            }
        } else {
            let _ = writeln!(out, "curvature closed forms unavailable: Hessian norms {h1:.3e}, {h2:.3e}");
        }
    }
    Ok(out)
}
