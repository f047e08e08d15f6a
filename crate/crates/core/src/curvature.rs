//! Closed-form curvature of the variant-H metric when both warping
//! functions have parallel gradients.
//!
//! Conventions: `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{[X,Y]}Z` and
//! `Ric(X,Y) = tr(V ↦ R(V,X)Y)`. Below, `E = 1 + (c f2)² b1`.
//!
//! Two forms of the fiber Ricci block and of the scalar curvature are
//! provided. [`Formulas::Published`] is the commonly quoted form;
//! [`Formulas::Rederived`] follows from tracing the Riemann tensor and is
//! the one the coordinate oracle reproduces (see [`ricci_closed_h`]).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::metric::{Local, ProductPoint, Side, Variant, WarpSpec};
use crate::connection::LiftedVectorField;
use crate::oracle::{sectional_curvature, DerivativeMode, VectorFn};

/// Largest covariant Hessian entry for which a gradient counts as parallel.
pub const PARALLEL_TOL: f64 = 1e-8;

/// Which closed form of the fiber Ricci block and scalar curvature to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Formulas {
    /// Fiber Ricci with `+c² b1 X(f2) Y(f2) / E²`; scalar without the
    /// mixed `b1 b2` term.
    #[default]
    Published,
    /// Fiber Ricci with `−c² b1 X(f2) Y(f2) / E²`; scalar with
    /// `−2 c² b1 b2 / (f1² E²)`.
    Rederived,
}

/// `(X ∧ Y)Z = g(Y,Z) X − g(X,Z) Y`.
pub fn wedge(g: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
    let ip = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * g * b)[(0, 0)];
    x * ip(y, z) - y * ip(x, z)
}

/// Max-abs covariant Hessian entries of `f1` and `f2` at `q`.
pub fn hessian_norms(spec: &WarpSpec, q: &ProductPoint) -> Result<(f64, f64)> {
    Ok((
        spec.f1().covariant_hessian(&q.p1)?.amax(),
        spec.f2().covariant_hessian(&q.p2)?.amax(),
    ))
}

/// Fails with [`Error::Hypothesis`] unless both gradients are parallel at `q`.
pub fn check_parallel(spec: &WarpSpec, q: &ProductPoint) -> Result<()> {
    let (hessian_f1, hessian_f2) = hessian_norms(spec, q)?;
    if hessian_f1 >= PARALLEL_TOL || hessian_f2 >= PARALLEL_TOL {
        return Err(Error::Hypothesis { hessian_f1, hessian_f2 });
    }
    Ok(())
}

fn prepare(spec: &WarpSpec, q: &ProductPoint) -> Result<Local> {
    spec.require_variant(Variant::H)?;
    check_parallel(spec, q)?;
    spec.local(q)
}

/// A factor vector tagged with the factor it lives on.
pub type Tagged = (Side, DVector<f64>);

/// `R(X,Y)Z` for lifted vectors given by their factor components.
pub fn riemann_closed_h_at(spec: &WarpSpec, q: &ProductPoint, x: &Tagged, y: &Tagged, z: &Tagged) -> Result<DVector<f64>> {
    let l = prepare(spec, q)?;
    riemann_local(spec, &l, q, x, y, z)
}

fn riemann_local(
    spec: &WarpSpec,
    l: &Local,
    q: &ProductPoint,
    x: &Tagged,
    y: &Tagged,
    z: &Tagged,
) -> Result<DVector<f64>> {
    use Side::{Base as B, Fiber as F};
    let c2 = l.c * l.c;
    let e = 1.0 + l.k() * l.b1;
    let ln_f1 = |v: &DVector<f64>| l.df1.dot(v) / l.f1;
    let (xv, yv, zv) = (&x.1, &y.1, &z.1);
    Ok(match (x.0, y.0, z.0) {
        (B, B, B) => {
            let r = spec.base().oracle().riemann(&q.p1)?;
            l.horizontal(&r.apply(xv, yv, zv))
        }
        (F, F, F) => {
            let r = spec.fiber().oracle().riemann(&q.p2)?;
            let w = wedge(&l.g2, xv, yv, zv);
            l.vertical(&r.apply(xv, yv, zv)) - l.vertical(&w) * (l.b1 / e)
                + l.horizontal(&l.grad1) * (c2 * l.f1 * l.f2 * l.b1 / (e * e) * l.df2.dot(&w))
        }
        (B, B, F) => DVector::zeros(l.m1 + l.m2),
        (F, F, B) => {
            let w = wedge(&l.g2, xv, yv, &l.grad2);
            l.vertical(&w) * (c2 * l.f2 * l.b1 * l.df1.dot(zv) / (l.f1 * e))
        }
        (B, F, B) => l.vertical(&l.grad2) * (c2 * ln_f1(xv) * ln_f1(zv) * l.df2.dot(yv) / e),
        (B, F, F) => {
            let w = wedge(&l.g2, &l.grad2, yv, zv);
            (l.vertical(&w) * (l.f2 * l.b1)
                - l.horizontal(&l.grad1) * (l.f1 * l.df2.dot(yv) * l.df2.dot(zv) / e))
                * (c2 * ln_f1(xv) / e)
        }
        // skew in the first pair
        (F, B, _) => -riemann_local(spec, l, q, y, x, z)?,
    })
}

/// `R(X,Y)Z` for lifted vector fields, in product coordinates.
pub fn riemann_closed_h(
    spec: &WarpSpec,
    x: &LiftedVectorField,
    y: &LiftedVectorField,
    z: &LiftedVectorField,
    q: &ProductPoint,
) -> Result<DVector<f64>> {
    let at = |f: &LiftedVectorField| -> Result<Tagged> { Ok((f.side(), f.factor_value(q.on(f.side()))?)) };
    riemann_closed_h_at(spec, q, &at(x)?, &at(y)?, &at(z)?)
}

/// `Ric(X,Y)` for lifted vectors given by their factor components.
pub fn ricci_closed_h_at(spec: &WarpSpec, q: &ProductPoint, x: &Tagged, y: &Tagged, formulas: Formulas) -> Result<f64> {
    use Side::{Base as B, Fiber as F};
    let l = prepare(spec, q)?;
    let c2 = l.c * l.c;
    let e = 1.0 + l.k() * l.b1;
    let m2 = l.m2 as f64;
    let ln_f1 = |v: &DVector<f64>| l.df1.dot(v) / l.f1;
    let bilinear = |m: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * m * b)[(0, 0)];
    let (xv, yv) = (&x.1, &y.1);
    Ok(match (x.0, y.0) {
        (B, B) => {
            let ric = spec.base().oracle().ricci(&q.p1)?;
            bilinear(&ric, xv, yv) - c2 * l.b2 / e * ln_f1(xv) * ln_f1(yv)
        }
        (B, F) => c2 * (m2 - 1.0) * l.b1 * l.f2 / e * ln_f1(xv) * l.df2.dot(yv),
        (F, B) => c2 * (m2 - 1.0) * l.b1 * l.f2 / e * ln_f1(yv) * l.df2.dot(xv),
        (F, F) => {
            let ric = spec.fiber().oracle().ricci(&q.p2)?;
            let sign = match formulas {
                Formulas::Published => 1.0,
                Formulas::Rederived => -1.0,
            };
            bilinear(&ric, xv, yv) + sign * c2 * l.b1 / (e * e) * l.df2.dot(xv) * l.df2.dot(yv)
                - (m2 - 1.0) * l.b1 / e * bilinear(&l.g2, xv, yv)
        }
    })
}

/// `Ric(X,Y)` for lifted vector fields.
pub fn ricci_closed_h(
    spec: &WarpSpec,
    x: &LiftedVectorField,
    y: &LiftedVectorField,
    q: &ProductPoint,
    formulas: Formulas,
) -> Result<f64> {
    let at = |f: &LiftedVectorField| -> Result<Tagged> { Ok((f.side(), f.factor_value(q.on(f.side()))?)) };
    ricci_closed_h_at(spec, q, &at(x)?, &at(y)?, formulas)
}

/// Scalar curvature of the variant-H metric.
pub fn scalar_closed_h(spec: &WarpSpec, q: &ProductPoint, formulas: Formulas) -> Result<f64> {
    let l = prepare(spec, q)?;
    let s1 = spec.base().oracle().scalar(&q.p1)?;
    let s2 = spec.fiber().oracle().scalar(&q.p2)?;
    let e = 1.0 + l.k() * l.b1;
    let m2 = l.m2 as f64;
    let f1_sq = l.f1 * l.f1;
    let published = s1 + s2 / f1_sq - m2 * (m2 - 1.0) * l.b1 / (f1_sq * e);
    Ok(match formulas {
        Formulas::Published => published,
        Formulas::Rederived => published - 2.0 * l.c * l.c * l.b1 * l.b2 / (f1_sq * e * e),
    })
}

/// Scalar curvature when the factors have constant sectional curvatures
/// `k1`, `k2`; `b1` is the squared gradient norm of `f1` at the point.
#[allow(clippy::too_many_arguments)]
pub fn scalar_constant_curvature(m1: usize, k1: f64, m2: usize, k2: f64, f1: f64, f2: f64, c: f64, b1: f64) -> f64 {
    let (m1, m2) = (m1 as f64, m2 as f64);
    m1 * (m1 - 1.0) * k1 + m2 * (m2 - 1.0) / (f1 * f1) * (k2 - b1 / (1.0 + (c * f2).powi(2) * b1))
}

/// `b1 / (1 + (c f2)² b1)`, the fiber curvature that makes the product flat
/// over a flat base when `f2` is constant.
pub fn flat_fiber_curvature(spec: &WarpSpec, q: &ProductPoint) -> Result<f64> {
    let l = spec.local(q)?;
    Ok(l.b1 / (1.0 + l.k() * l.b1))
}

/// Oracle sectional curvature of the product along the plane spanned by the
/// lifts of the first two fiber coordinate vectors.
pub fn fiber_plane_sectional_curvature(spec: &WarpSpec, q: &ProductPoint, mode: DerivativeMode) -> Result<f64> {
    if spec.m2() < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: spec.m2(),
        });
    }
    let p = q.coords();
    let oracle = spec.oracle(mode);
    let r = oracle.riemann(&p)?;
    let g = oracle.metric(&p)?;
    let n = p.len();
    let e = |i: usize| DVector::from_fn(n, |k, _| if k == spec.m1() + i { 1.0 } else { 0.0 });
    Ok(sectional_curvature(&r, &g, &e(0), &e(1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureObject {
    Riemann,
    Ricci,
    Scalar,
}

impl CurvatureObject {
    pub fn name(self) -> &'static str {
        match self {
            CurvatureObject::Riemann => "riemann",
            CurvatureObject::Ricci => "ricci",
            CurvatureObject::Scalar => "scalar",
        }
    }
}

/// Closed forms against the oracle for one curvature object at one point.
/// Riemann values are every component `R(∂_i,∂_j)∂_k`, Ricci values every
/// `Ric(∂_i,∂_j)`, over product coordinate vectors in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureReport {
    pub object: CurvatureObject,
    pub closed_form: Vec<f64>,
    pub oracle: Vec<f64>,
    pub max_abs_diff: f64,
    pub hessian_f1: f64,
    pub hessian_f2: f64,
}

pub fn curvature_report(
    spec: &WarpSpec,
    q: &ProductPoint,
    object: CurvatureObject,
    formulas: Formulas,
    mode: DerivativeMode,
) -> Result<CurvatureReport> {
    let (hessian_f1, hessian_f2) = hessian_norms(spec, q)?;
    let l = prepare(spec, q)?;
    let p = q.coords();
    let oracle = spec.oracle(mode);
    let fields: Vec<LiftedVectorField> = (0..l.m1)
        .map(|i| LiftedVectorField::coordinate(spec, Side::Base, i))
        .chain((0..l.m2).map(|i| LiftedVectorField::coordinate(spec, Side::Fiber, i)))
        .collect();
    let tagged = fields
        .iter()
        .map(|f| Ok((f.side(), f.factor_value(q.on(f.side()))?)))
        .collect::<Result<Vec<Tagged>>>()?;
    let (closed_form, oracle_values) = match object {
        CurvatureObject::Riemann => {
            let r = oracle.riemann(&p)?;
            let mut closed = Vec::new();
            let mut reference = Vec::new();
            for (i, x) in tagged.iter().enumerate() {
                for (j, y) in tagged.iter().enumerate() {
                    for (k, z) in tagged.iter().enumerate() {
                        closed.extend(riemann_local(spec, &l, q, x, y, z)?.iter());
                        let (a, b, c) = (fields[i].value(&p)?, fields[j].value(&p)?, fields[k].value(&p)?);
                        reference.extend(r.apply(&a, &b, &c).iter());
                    }
                }
            }
            (closed, reference)
        }
        CurvatureObject::Ricci => {
            let ric = oracle.ricci(&p)?;
            let mut closed = Vec::new();
            for x in &tagged {
                for y in &tagged {
                    closed.push(ricci_closed_h_at(spec, q, x, y, formulas)?);
                }
            }
            let n = tagged.len();
            (closed, (0..n * n).map(|k| ric[(k / n, k % n)]).collect())
        }
        CurvatureObject::Scalar => (vec![scalar_closed_h(spec, q, formulas)?], vec![oracle.scalar(&p)?]),
    };
    let max_abs_diff = closed_form
        .iter()
        .zip(&oracle_values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(CurvatureReport {
        object,
        closed_form,
        oracle: oracle_values,
        max_abs_diff,
        hessian_f1,
        hessian_f2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;
    use std::sync::Arc;

    fn flat(f1: &str, f2: &str, c: f64) -> WarpSpec {
        let base = Arc::new(Chart::euclidean(2, "x").unwrap());
        let fiber = Arc::new(Chart::euclidean(2, "y").unwrap());
        WarpSpec::from_sources(base, fiber, f1, f2, c, Variant::H).unwrap()
    }

    #[test]
    fn wedge_examples() {
        let g = DMatrix::identity(2, 2);
        let v = |a: f64, b: f64| DVector::from_vec(vec![a, b]);
        assert_eq!(wedge(&g, &v(1.0, 0.0), &v(0.0, 1.0), &v(0.0, 1.0)), v(1.0, 0.0));
        assert_eq!(wedge(&g, &v(1.0, 2.0), &v(1.0, 2.0), &v(3.0, 1.0)), v(0.0, 0.0));
        let g3 = DMatrix::identity(3, 3);
        let e = |i: usize| DVector::from_fn(3, |k, _| if k == i { 1.0 } else { 0.0 });
        assert_eq!(wedge(&g3, &e(0), &e(1), &e(2)), DVector::zeros(3));
    }

    #[test]
    fn worked_scalar_value() {
        let s = flat("x1", "y1", 1.0);
        let q = ProductPoint::new(vec![2.0, 0.5], vec![3.0, 0.5]);
        let published = scalar_closed_h(&s, &q, Formulas::Published).unwrap();
        assert!((published + 0.05).abs() < 1e-12);
        assert!((scalar_constant_curvature(2, 0.0, 2, 0.0, 2.0, 3.0, 1.0, 1.0) + 0.05).abs() < 1e-15);
        // tracing the Riemann tensor adds −2c²b1b2/(f1²E²) = −0.005
        let rederived = scalar_closed_h(&s, &q, Formulas::Rederived).unwrap();
        assert!((rederived + 0.055).abs() < 1e-12);
        let oracle = s.oracle(DerivativeMode::Dual).scalar(&q.coords()).unwrap();
        assert!((oracle - rederived).abs() < 1e-9);
    }

    #[test]
    fn fiber_block_with_flat_factors() {
        let s = flat("x1", "1", 1.0);
        let q = ProductPoint::new(vec![1.5, 1.0], vec![2.0, 2.0]);
        let x = (Side::Fiber, DVector::from_vec(vec![1.0, 0.0]));
        let y = (Side::Fiber, DVector::from_vec(vec![0.0, 1.0]));
        let r = riemann_closed_h_at(&s, &q, &x, &y, &y).unwrap();
        assert!((r - DVector::from_vec(vec![0.0, 0.0, -0.5, 0.0])).amax() < 1e-15);
    }

    #[test]
    fn hypothesis_is_enforced() {
        let s = flat("x1^2", "y1", 1.0);
        let q = ProductPoint::new(vec![1.0, 1.0], vec![1.0, 1.0]);
        assert!(matches!(scalar_closed_h(&s, &q, Formulas::Published), Err(Error::Hypothesis { .. })));
    }

    #[test]
    fn riemann_and_hh_hv_ricci_match_oracle() {
        let base = Arc::new(Chart::euclidean(2, "x").unwrap());
        let fiber = Arc::new(Chart::sphere2("y").unwrap());
        let s = WarpSpec::from_sources(base, fiber, "0.5 + x1 + 0.5*x2", "1.5", 0.8, Variant::H).unwrap();
        for q in s.sample(5, 9, 0.01) {
            let r = curvature_report(&s, &q, CurvatureObject::Riemann, Formulas::Published, DerivativeMode::Dual).unwrap();
            assert!(r.max_abs_diff < 1e-8, "{}", r.max_abs_diff);
            let r = curvature_report(&s, &q, CurvatureObject::Ricci, Formulas::Rederived, DerivativeMode::Dual).unwrap();
            assert!(r.max_abs_diff < 1e-8, "{}", r.max_abs_diff);
        }
    }

    #[test]
    fn rederived_forms_match_oracle_with_warped_fiber_function() {
        let s = flat("1 + x1 + 0.3*x2", "0.5 + 0.2*y1 + 0.4*y2", 0.9);
        for q in s.sample(5, 4, 0.01) {
            for object in [CurvatureObject::Riemann, CurvatureObject::Ricci, CurvatureObject::Scalar] {
                let r = curvature_report(&s, &q, object, Formulas::Rederived, DerivativeMode::Dual).unwrap();
                assert!(r.max_abs_diff < 1e-8, "{object:?} {}", r.max_abs_diff);
            }
            let published = curvature_report(&s, &q, CurvatureObject::Scalar, Formulas::Published, DerivativeMode::Dual).unwrap();
            assert!(published.max_abs_diff > 1e-4);
        }
    }

    #[test]
    fn flat_fiber_sign() {
        let s = flat("x1", "2", 0.7);
        for q in s.sample(5, 2, 0.01) {
            let k = fiber_plane_sectional_curvature(&s, &q, DerivativeMode::Dual).unwrap();
            let f1 = s.f1().value(&q.p1).unwrap();
            let want = flat_fiber_curvature(&s, &q).unwrap();
            assert!((k * f1 * f1 + want).abs() < 1e-9);
        }
    }
}
