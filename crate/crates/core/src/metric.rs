//! The two coupled product metrics on `M1 × M2`.
//!
//! Coordinates on the product are the base coordinates followed by the fiber
//! coordinates. With `b_i = |grad f_i|²` on each factor:
//!
//! * variant G: base block `f2² g1`, fiber block `f1² g2`, mixed block
//!   `c f1 f2 ∂f1 ⊗ ∂f2`; Riemannian exactly when `c² b1 b2 < 1`.
//! * variant H: base block `g1 + c² f2² ∂f1 ⊗ ∂f1`, fiber block `f1² g2`,
//!   no mixed block; always Riemannian.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::chart::{Chart, ScalarField};
use crate::error::{Error, Result};
use crate::expr::{Jet2, Scalar, MAX_VARS};
use crate::oracle::{symmetric_inverse, DerivativeMode, MetricField, Oracle, ScalarFn};
use crate::sample;

/// Tolerance on `|1 − c² b1 b2|` below which a G metric counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Condition number above which a numerically inverted metric is flagged.
pub const CONDITION_WARNING: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    G,
    H,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::G => "G",
            Variant::H => "H",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Riemannian,
    Degenerate,
    Indefinite,
}

impl Classification {
    /// Numeric code used in reports: 0, 1, 2 in declaration order.
    pub fn code(self) -> f64 {
        match self {
            Classification::Riemannian => 0.0,
            Classification::Degenerate => 1.0,
            Classification::Indefinite => 2.0,
        }
    }
}

/// Which factor a lifted object lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Base,
    Fiber,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Base => Side::Fiber,
            Side::Fiber => Side::Base,
        }
    }
}

/// A point of the product, split into its factor coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPoint {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

impl ProductPoint {
    pub fn new(p1: Vec<f64>, p2: Vec<f64>) -> Self {
        ProductPoint { p1, p2 }
    }

    pub fn coords(&self) -> Vec<f64> {
        self.p1.iter().chain(&self.p2).copied().collect()
    }

    pub fn on(&self, side: Side) -> &[f64] {
        match side {
            Side::Base => &self.p1,
            Side::Fiber => &self.p2,
        }
    }
}

/// Factor data at a product point that every closed form uses.
#[derive(Debug, Clone)]
pub struct Local {
    pub m1: usize,
    pub m2: usize,
    pub c: f64,
    pub f1: f64,
    pub f2: f64,
    pub g1: DMatrix<f64>,
    pub g2: DMatrix<f64>,
    pub g1_inv: DMatrix<f64>,
    pub g2_inv: DMatrix<f64>,
    /// Coordinate differentials `∂f_i`.
    pub df1: DVector<f64>,
    pub df2: DVector<f64>,
    /// Factor gradients `grad f_i`.
    pub grad1: DVector<f64>,
    pub grad2: DVector<f64>,
    pub b1: f64,
    pub b2: f64,
}

impl Local {
    /// `1 − c² b1 b2`.
    pub fn coupling_margin(&self) -> f64 {
        1.0 - self.c * self.c * self.b1 * self.b2
    }

    /// `(c f2)²`, the coefficient that recurs in variant H.
    pub fn k(&self) -> f64 {
        (self.c * self.f2).powi(2)
    }

    pub fn horizontal(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.m1 + self.m2);
        out.rows_mut(0, self.m1).copy_from(v);
        out
    }

    pub fn vertical(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.m1 + self.m2);
        out.rows_mut(self.m1, self.m2).copy_from(v);
        out
    }

    pub fn lift(&self, side: Side, v: &DVector<f64>) -> DVector<f64> {
        match side {
            Side::Base => self.horizontal(v),
            Side::Fiber => self.vertical(v),
        }
    }

    /// Factor metric, warping value and differential for one side.
    pub fn factor(&self, side: Side) -> (&DMatrix<f64>, f64, &DVector<f64>) {
        match side {
            Side::Base => (&self.g1, self.f1, &self.df1),
            Side::Fiber => (&self.g2, self.f2, &self.df2),
        }
    }
}

/// Complete description of a product metric.
#[derive(Debug, Clone)]
pub struct WarpSpec {
    f1: ScalarField,
    f2: ScalarField,
    c: f64,
    variant: Variant,
}

impl WarpSpec {
    /// `f1` must live on the base chart and `f2` on the fiber chart.
    pub fn new(f1: ScalarField, f2: ScalarField, c: f64, variant: Variant) -> Result<WarpSpec> {
        let n = f1.chart().dim() + f2.chart().dim();
        if n > MAX_VARS {
            return Err(Error::DimensionTooLarge(n));
        }
        if !c.is_finite() {
            return Err(Error::config("c", "coupling constant must be finite"));
        }
        Ok(WarpSpec { f1, f2, c, variant })
    }

    /// Parses both warping functions on the given charts.
    pub fn from_sources(
        base: Arc<Chart>,
        fiber: Arc<Chart>,
        f1: &str,
        f2: &str,
        c: f64,
        variant: Variant,
    ) -> Result<WarpSpec> {
        WarpSpec::new(ScalarField::new(base, f1)?, ScalarField::new(fiber, f2)?, c, variant)
    }

    pub fn base(&self) -> &Arc<Chart> {
        self.f1.chart()
    }

    pub fn fiber(&self) -> &Arc<Chart> {
        self.f2.chart()
    }

    pub fn chart(&self, side: Side) -> &Arc<Chart> {
        match side {
            Side::Base => self.base(),
            Side::Fiber => self.fiber(),
        }
    }

    pub fn f1(&self) -> &ScalarField {
        &self.f1
    }

    pub fn f2(&self) -> &ScalarField {
        &self.f2
    }

    pub fn warp(&self, side: Side) -> &ScalarField {
        match side {
            Side::Base => &self.f1,
            Side::Fiber => &self.f2,
        }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn m1(&self) -> usize {
        self.base().dim()
    }

    pub fn m2(&self) -> usize {
        self.fiber().dim()
    }

    pub fn with_variant(&self, variant: Variant) -> WarpSpec {
        WarpSpec {
            variant,
            ..self.clone()
        }
    }

    pub fn with_c(&self, c: f64) -> WarpSpec {
        WarpSpec { c, ..self.clone() }
    }

    pub fn require_variant(&self, v: Variant) -> Result<()> {
        if self.variant != v {
            return Err(Error::WrongVariant {
                expected: match v {
                    Variant::G => "G",
                    Variant::H => "H",
                },
            });
        }
        Ok(())
    }

    /// Splits product coordinates into a point, checking both domains.
    pub fn point(&self, coords: &[f64]) -> Result<ProductPoint> {
        let m1 = self.m1();
        if coords.len() != m1 + self.m2() {
            return Err(Error::DimensionMismatch {
                expected: m1 + self.m2(),
                found: coords.len(),
            });
        }
        let q = ProductPoint::new(coords[..m1].to_vec(), coords[m1..].to_vec());
        self.base().check_point(&q.p1)?;
        self.fiber().check_point(&q.p2)?;
        Ok(q)
    }

    /// Deterministic low-discrepancy sample of the product box.
    pub fn sample(&self, count: usize, seed: u64, margin: f64) -> Vec<ProductPoint> {
        let bounds: Vec<(f64, f64)> = self.base().domain().iter().chain(self.fiber().domain()).copied().collect();
        let m1 = self.m1();
        sample::sample_box(&bounds, count, seed, margin)
            .into_iter()
            .map(|x| ProductPoint::new(x[..m1].to_vec(), x[m1..].to_vec()))
            .collect()
    }

    fn warp_values(&self, q: &ProductPoint) -> Result<(f64, f64)> {
        let f1 = self.f1.value(&q.p1)?;
        let f2 = self.f2.value(&q.p2)?;
        for (label, v, p) in [("f1", f1, &q.p1), ("f2", f2, &q.p2)] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::NonPositiveWarp {
                    field: label.to_string(),
                    point: p.clone(),
                    value: v,
                });
            }
        }
        Ok((f1, f2))
    }

    pub fn local(&self, q: &ProductPoint) -> Result<Local> {
        let (f1, f2) = self.warp_values(q)?;
        let g1 = self.base().metric_at(&q.p1)?;
        let g2 = self.fiber().metric_at(&q.p2)?;
        let g1_inv = symmetric_inverse(&g1)?;
        let g2_inv = symmetric_inverse(&g2)?;
        let df1 = self.f1.differential(&q.p1)?;
        let df2 = self.f2.differential(&q.p2)?;
        let grad1 = &g1_inv * &df1;
        let grad2 = &g2_inv * &df2;
        let b1 = grad1.dot(&df1);
        let b2 = grad2.dot(&df2);
        Ok(Local {
            m1: self.m1(),
            m2: self.m2(),
            c: self.c,
            f1,
            f2,
            g1,
            g2,
            g1_inv,
            g2_inv,
            df1,
            df2,
            grad1,
            grad2,
            b1,
            b2,
        })
    }

    /// Row-major product metric on arbitrary scalars, from base coordinates
    /// `x1` and fiber coordinates `x2`.
    pub fn assemble_with<T: Scalar>(&self, x1: &[T], x2: &[T]) -> Result<Vec<T>> {
        let (m1, m2) = (self.m1(), self.m2());
        let n = m1 + m2;
        let f1 = self.f1.value_with(x1)?;
        let f2 = self.f2.value_with(x2)?;
        let g1 = self.base().metric_with(x1)?;
        let g2 = self.fiber().metric_with(x2)?;
        let d1 = self.f1.partials_with(x1)?;
        let c = T::from_f64(self.c);
        let mut out = vec![T::from_f64(0.0); n * n];
        match self.variant {
            Variant::G => {
                let d2 = self.f2.partials_with(x2)?;
                let (s1, s2) = (f2 * f2, f1 * f1);
                for a in 0..m1 {
                    for b in 0..m1 {
                        out[a * n + b] = s1 * g1[a * m1 + b];
                    }
                }
                for a in 0..m2 {
                    for b in 0..m2 {
                        out[(m1 + a) * n + m1 + b] = s2 * g2[a * m2 + b];
                    }
                }
                let cff = c * f1 * f2;
                for a in 0..m1 {
                    for b in 0..m2 {
                        let v = cff * d1[a] * d2[b];
                        out[a * n + m1 + b] = v;
                        out[(m1 + b) * n + a] = v;
                    }
                }
            }
            Variant::H => {
                let k = c * c * f2 * f2;
                for a in 0..m1 {
                    for b in 0..m1 {
                        out[a * n + b] = g1[a * m1 + b] + k * d1[a] * d1[b];
                    }
                }
                let s2 = f1 * f1;
                for a in 0..m2 {
                    for b in 0..m2 {
                        out[(m1 + a) * n + m1 + b] = s2 * g2[a * m2 + b];
                    }
                }
            }
        }
        Ok(out)
    }

    /// The product metric at `q`; exactly symmetric.
    pub fn assemble(&self, q: &ProductPoint) -> Result<DMatrix<f64>> {
        self.base().check_point(&q.p1)?;
        self.fiber().check_point(&q.p2)?;
        self.warp_values(q)?;
        let n = self.m1() + self.m2();
        Ok(DMatrix::from_row_slice(n, n, &self.assemble_with(&q.p1, &q.p2)?))
    }

    /// `det g1 · det g2 · f1^{2 m2} · f2^{2 m1} · (1 − c² b1 b2)`.
    pub fn det_closed_form_g(&self, q: &ProductPoint) -> Result<f64> {
        self.require_variant(Variant::G)?;
        let l = self.local(q)?;
        Ok(l.g1.determinant()
            * l.g2.determinant()
            * l.f1.powi(2 * l.m2 as i32)
            * l.f2.powi(2 * l.m1 as i32)
            * l.coupling_margin())
    }

    /// Closed-form determinant for either variant; for H it is
    /// `det g1 · det g2 · f1^{2 m2} · (1 + (c f2)² b1)`.
    pub fn det_closed_form(&self, q: &ProductPoint) -> Result<f64> {
        match self.variant {
            Variant::G => self.det_closed_form_g(q),
            Variant::H => {
                let l = self.local(q)?;
                Ok(l.g1.determinant() * l.g2.determinant() * l.f1.powi(2 * l.m2 as i32) * (1.0 + l.k() * l.b1))
            }
        }
    }

    /// Classification from the closed-form criterion alone, with the
    /// diagnostic `c² b1 b2` (always 0 for variant H).
    pub fn classify(&self, q: &ProductPoint) -> Result<(Classification, f64)> {
        if self.variant == Variant::H {
            return Ok((Classification::Riemannian, 0.0));
        }
        let l = self.local(q)?;
        let d = 1.0 - l.coupling_margin();
        let class = if (1.0 - d).abs() <= DEGENERACY_TOL {
            Classification::Degenerate
        } else if d < 1.0 {
            Classification::Riemannian
        } else {
            Classification::Indefinite
        };
        Ok((class, d))
    }

    /// Closed-form classification, cross-checked against a Cholesky
    /// factorisation of the assembled matrix.
    pub fn is_riemannian(&self, q: &ProductPoint) -> Result<(Classification, f64)> {
        let (class, d) = self.classify(q)?;
        if class == Classification::Degenerate {
            return Ok((class, d));
        }
        let factorizable = self.assemble(q)?.cholesky().is_some();
        let agrees = factorizable == (class == Classification::Riemannian);
        // within rounding of the boundary either answer is acceptable
        if !agrees && (1.0 - d).abs() > 1e-6 {
            return Err(Error::Inconsistent(format!(
                "c^2 b1 b2 = {d} gives {class:?} but Cholesky {}",
                if factorizable { "succeeds" } else { "fails" }
            )));
        }
        Ok((class, d))
    }

    /// Classification from the signs of the eigenvalues of the assembled
    /// matrix; eigenvalues within `DEGENERACY_TOL` of zero relative to the
    /// largest count as zero.
    pub fn eigen_classification(&self, q: &ProductPoint) -> Result<Classification> {
        let eig = SymmetricEigen::new(self.assemble(q)?).eigenvalues;
        let scale = eig.amax();
        let min = eig.min();
        Ok(if min.abs() <= DEGENERACY_TOL * scale {
            Classification::Degenerate
        } else if min > 0.0 {
            Classification::Riemannian
        } else {
            Classification::Indefinite
        })
    }

    pub fn require_riemannian(&self, q: &ProductPoint) -> Result<Local> {
        let (classification, diagnostic) = self.is_riemannian(q)?;
        if classification != Classification::Riemannian {
            return Err(Error::NotRiemannian {
                classification,
                diagnostic,
            });
        }
        self.local(q)
    }

    /// Inverse metric. Variant G uses the closed block form; variant H is
    /// inverted numerically.
    pub fn cometric(&self, q: &ProductPoint) -> Result<DMatrix<f64>> {
        Ok(self.cometric_with_condition(q)?.0)
    }

    /// The inverse metric plus, for variant H, the condition number when it
    /// exceeds [`CONDITION_WARNING`].
    pub fn cometric_with_condition(&self, q: &ProductPoint) -> Result<(DMatrix<f64>, Option<f64>)> {
        let l = self.require_riemannian(q)?;
        match self.variant {
            Variant::G => Ok((cometric_g(&l), None)),
            Variant::H => {
                let g = self.assemble(q)?;
                let eig = SymmetricEigen::new(g.clone()).eigenvalues;
                let cond = eig.amax() / eig.amin();
                let inv = symmetric_inverse(&g)?;
                Ok((inv, (cond > CONDITION_WARNING).then_some(cond)))
            }
        }
    }

    /// The vector `X` whose inner products with lifted base vectors equal
    /// those of `φ2 X1^h + φ1 X2^v` and with lifted fiber vectors those of
    /// `ψ2 Y1^h + ψ1 Y2^v`.
    pub fn reconstruct_vector(&self, data: &ReconstructionData, q: &ProductPoint) -> Result<DVector<f64>> {
        self.require_variant(Variant::G)?;
        let l = self.require_riemannian(q)?;
        let (grad_f1, grad_f2) = crate::connection::warp_gradients_g(&l);
        let d = data;
        let x1_f1 = d.x1.dot(&l.df1);
        let y1_f1 = d.y1.dot(&l.df1);
        let x2_f2 = d.x2.dot(&l.df2);
        let y2_f2 = d.y2.dot(&l.df2);
        let cff = l.c * l.f1 * l.f2;
        Ok(l.horizontal(&d.x1) * d.phi2 + l.vertical(&d.y2) * d.psi1
            + grad_f2 * (cff * (d.psi2 * y1_f1 - d.phi2 * x1_f1))
            - grad_f1 * (cff * (d.psi1 * y2_f2 - d.phi1 * x2_f2)))
    }

    pub fn oracle(&self, mode: DerivativeMode) -> Oracle<'_> {
        // dimension checked in the constructor
        Oracle::new(self, mode).expect("product dimension within MAX_VARS")
    }
}

/// Closed-form G cometric from factor data.
pub fn cometric_g(l: &Local) -> DMatrix<f64> {
    let (m1, m2) = (l.m1, l.m2);
    let n = m1 + m2;
    let c2 = l.c * l.c;
    let dm = l.coupling_margin();
    let mut out = DMatrix::zeros(n, n);
    let s1 = 1.0 / (l.f2 * l.f2);
    let s2 = 1.0 / (l.f1 * l.f1);
    for a in 0..m1 {
        for b in 0..m1 {
            out[(a, b)] = s1 * (l.g1_inv[(a, b)] + c2 * l.b2 / dm * l.grad1[a] * l.grad1[b]);
        }
    }
    for a in 0..m2 {
        for b in 0..m2 {
            out[(m1 + a, m1 + b)] = s2 * (l.g2_inv[(a, b)] + c2 * l.b1 / dm * l.grad2[a] * l.grad2[b]);
        }
    }
    let mix = -l.c / (l.f1 * l.f2 * dm);
    for a in 0..m1 {
        for b in 0..m2 {
            out[(a, m1 + b)] = mix * l.grad1[a] * l.grad2[b];
            out[(m1 + b, a)] = out[(a, m1 + b)];
        }
    }
    out
}

/// Inputs of [`WarpSpec::reconstruct_vector`]: scalar values at the point
/// and factor vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionData {
    pub phi1: f64,
    pub phi2: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub x1: DVector<f64>,
    pub y1: DVector<f64>,
    pub x2: DVector<f64>,
    pub y2: DVector<f64>,
}

/// A factor function pulled back to the product by the projection.
#[derive(Debug, Clone)]
pub struct LiftedScalar {
    field: ScalarField,
    side: Side,
    offset: usize,
    total: usize,
}

impl LiftedScalar {
    /// # Panics
    /// If `field` is not defined on the chart of `side`.
    pub fn new(spec: &WarpSpec, side: Side, field: ScalarField) -> LiftedScalar {
        assert!(Arc::ptr_eq(field.chart(), spec.chart(side)) || **field.chart() == **spec.chart(side));
        let offset = if side == Side::Base { 0 } else { spec.m1() };
        LiftedScalar {
            field,
            side,
            offset,
            total: spec.m1() + spec.m2(),
        }
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn side(&self) -> Side {
        self.side
    }

    fn factor<'p>(&self, p: &'p [f64]) -> &'p [f64] {
        &p[self.offset..self.offset + self.field.chart().dim()]
    }
}

impl ScalarFn for LiftedScalar {
    fn value(&self, p: &[f64]) -> Result<f64> {
        self.field.value(self.factor(p))
    }

    fn jet(&self, p: &[f64]) -> Result<Jet2> {
        Ok(self.field.jet(self.factor(p))?.embed(self.offset, self.total))
    }
}

impl MetricField for WarpSpec {
    fn dim(&self) -> usize {
        self.m1() + self.m2()
    }

    fn metric(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.assemble(&self.point(p)?)
    }

    fn metric_jet(&self, p: &[f64]) -> Result<Vec<Jet2>> {
        let q = self.point(p)?;
        self.warp_values(&q)?;
        let n = p.len();
        let x: Vec<Jet2> = p.iter().enumerate().map(|(i, &v)| Jet2::variable(n, i, v)).collect();
        let m1 = self.m1();
        self.assemble_with(&x[..m1], &x[m1..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_spec(c: f64, variant: Variant) -> WarpSpec {
        let base = Arc::new(Chart::euclidean(1, "x").unwrap());
        let fiber = Arc::new(Chart::euclidean(1, "y").unwrap());
        WarpSpec::from_sources(base, fiber, "x1", "y1", c, variant).unwrap()
    }

    fn q23() -> ProductPoint {
        ProductPoint::new(vec![2.0], vec![3.0])
    }

    #[test]
    fn worked_g_example() {
        let s = line_spec(0.5, Variant::G);
        let g = s.assemble(&q23()).unwrap();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[9.0, 3.0, 3.0, 4.0]));
        assert!((s.det_closed_form_g(&q23()).unwrap() - 27.0).abs() < 1e-12);
        assert!((g.determinant() - 27.0).abs() < 1e-12);
        let inv = s.cometric(&q23()).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[4.0, -3.0, -3.0, 9.0]) / 27.0;
        assert!((inv - want).amax() < 1e-15);
    }

    #[test]
    fn worked_h_example() {
        let s = line_spec(1.0, Variant::H);
        let g = s.assemble(&q23()).unwrap();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[10.0, 0.0, 0.0, 4.0]));
        let inv = s.cometric(&q23()).unwrap();
        assert!((inv - DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 0.25]))).amax() < 1e-15);
    }

    #[test]
    fn classification_of_line_family() {
        let q = q23();
        assert_eq!(line_spec(0.0, Variant::G).is_riemannian(&q).unwrap(), (Classification::Riemannian, 0.0));
        assert_eq!(line_spec(1.0, Variant::G).is_riemannian(&q).unwrap(), (Classification::Degenerate, 1.0));
        assert_eq!(line_spec(2.0, Variant::G).is_riemannian(&q).unwrap(), (Classification::Indefinite, 4.0));
        assert_eq!(line_spec(2.0, Variant::G).eigen_classification(&q).unwrap(), Classification::Indefinite);
        assert_eq!(line_spec(1.0, Variant::G).eigen_classification(&q).unwrap(), Classification::Degenerate);
        assert!(line_spec(1.0, Variant::G).assemble(&q).unwrap().determinant().abs() < 1e-12);
        assert!(matches!(
            line_spec(1.0, Variant::G).cometric(&q),
            Err(Error::NotRiemannian { .. })
        ));
    }

    #[test]
    fn trivial_couplings_reduce_to_products() {
        let base = Arc::new(Chart::sphere2("x").unwrap());
        let fiber = Arc::new(Chart::halfplane2("y").unwrap());
        let s = WarpSpec::from_sources(base.clone(), fiber.clone(), "1", "1", 0.0, Variant::G).unwrap();
        let q = ProductPoint::new(vec![1.0, 0.5], vec![0.3, 2.0]);
        let g = s.assemble(&q).unwrap();
        assert_eq!(g.view((0, 0), (2, 2)), base.metric_at(&q.p1).unwrap());
        assert_eq!(g.view((2, 2), (2, 2)), fiber.metric_at(&q.p2).unwrap());
        assert_eq!(g.view((0, 2), (2, 2)).amax(), 0.0);

        // f1 ≡ 1 with c ≠ 0 is singly warped: the mixed block vanishes
        let s = WarpSpec::from_sources(base, fiber, "1", "2 + y2", 0.7, Variant::G).unwrap();
        let g = s.assemble(&q).unwrap();
        assert_eq!(g.view((0, 2), (2, 2)).amax(), 0.0);
        assert_eq!(g[(0, 0)], 16.0);
    }

    #[test]
    fn reconstruction_satisfies_defining_conditions() {
        let s = line_spec(0.5, Variant::G);
        let q = q23();
        let v = |x: f64| DVector::from_vec(vec![x]);
        let data = ReconstructionData {
            phi1: 0.7,
            phi2: -1.3,
            psi1: 2.1,
            psi2: 0.4,
            x1: v(1.5),
            y1: v(-0.8),
            x2: v(0.6),
            y2: v(1.9),
        };
        let x = s.reconstruct_vector(&data, &q).unwrap();
        let g = s.assemble(&q).unwrap();
        let l = s.local(&q).unwrap();
        let lhs_base = l.horizontal(&data.x1) * data.phi2 + l.vertical(&data.x2) * data.phi1;
        let lhs_fiber = l.horizontal(&data.y1) * data.psi2 + l.vertical(&data.y2) * data.psi1;
        let e1 = l.horizontal(&v(1.0));
        let e2 = l.vertical(&v(1.0));
        let ip = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &g * b)[(0, 0)];
        assert!((ip(&x, &e1) - ip(&lhs_base, &e1)).abs() < 1e-12);
        assert!((ip(&x, &e2) - ip(&lhs_fiber, &e2)).abs() < 1e-12);
        // direct solve of the same 2×2 system
        let rhs = DVector::from_vec(vec![ip(&lhs_base, &e1), ip(&lhs_fiber, &e2)]);
        let direct = g.clone().lu().solve(&rhs).unwrap();
        assert!((direct - x).amax() < 1e-12);
    }

    #[test]
    fn consistent_reconstruction_data_needs_no_correction() {
        let s = line_spec(0.5, Variant::G);
        let v = |x: f64| DVector::from_vec(vec![x]);
        let data = ReconstructionData {
            phi1: 0.7,
            phi2: -1.3,
            psi1: 0.7,
            psi2: -1.3,
            x1: v(1.5),
            y1: v(1.5),
            x2: v(0.6),
            y2: v(0.6),
        };
        let x = s.reconstruct_vector(&data, &q23()).unwrap();
        assert!((x - DVector::from_vec(vec![-1.3 * 1.5, 0.7 * 0.6])).amax() < 1e-14);
    }
}
