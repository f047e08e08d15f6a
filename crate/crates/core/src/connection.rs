//! Gradients of lifted functions and the Levi-Civita connection of the
//! product metric on lifted vector fields, in closed form.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::chart::{Chart, ScalarField};
use crate::error::{Error, Result};
use crate::expr::{Expression, Jet2};
use crate::metric::{Local, ProductPoint, Side, Variant, WarpSpec};
use crate::oracle::VectorFn;

/// A vector field on one factor, lifted to the product.
#[derive(Debug, Clone)]
pub struct LiftedVectorField {
    side: Side,
    chart: Arc<Chart>,
    components: Vec<Expression>,
    offset: usize,
    total: usize,
}

impl LiftedVectorField {
    /// Components are expressions in the coordinates of the `side` chart.
    pub fn new<S: AsRef<str>>(spec: &WarpSpec, side: Side, sources: &[S]) -> Result<Self> {
        let chart = spec.chart(side).clone();
        if sources.len() != chart.dim() {
            return Err(Error::DimensionMismatch {
                expected: chart.dim(),
                found: sources.len(),
            });
        }
        let components = sources
            .iter()
            .map(|s| Expression::parse(s.as_ref(), chart.vars()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_parts(spec, side, components))
    }

    /// The coordinate field `∂/∂x_index` of the `side` chart.
    pub fn coordinate(spec: &WarpSpec, side: Side, index: usize) -> Self {
        let chart = spec.chart(side);
        let components = (0..chart.dim())
            .map(|i| Expression::constant(if i == index { 1.0 } else { 0.0 }, chart.vars()))
            .collect();
        Self::from_parts(spec, side, components)
    }

    fn from_parts(spec: &WarpSpec, side: Side, components: Vec<Expression>) -> Self {
        LiftedVectorField {
            side,
            chart: spec.chart(side).clone(),
            components,
            offset: if side == Side::Base { 0 } else { spec.m1() },
            total: spec.m1() + spec.m2(),
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }

    /// Components at a point of the factor.
    pub fn factor_value(&self, p: &[f64]) -> Result<DVector<f64>> {
        self.chart.check_point(p)?;
        let v = self.components.iter().map(|e| e.eval(p)).collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(v))
    }

    fn factor_jets(&self, p: &[f64]) -> Result<Vec<Jet2>> {
        self.chart.check_point(p)?;
        self.components.iter().map(|e| e.eval_jet2(p)).collect()
    }

    /// `[X, Y]^k = X^i ∂_i Y^k − Y^i ∂_i X^k` on the factor.
    pub fn factor_bracket(&self, other: &LiftedVectorField, p: &[f64]) -> Result<DVector<f64>> {
        let (x, y) = (self.factor_jets(p)?, other.factor_jets(p)?);
        let n = x.len();
        Ok(DVector::from_fn(n, |k, _| {
            (0..n).map(|i| x[i].value() * y[k].d(i) - y[i].value() * x[k].d(i)).sum()
        }))
    }

    fn on_factor(&self) -> OnFactor<'_> {
        OnFactor(self)
    }
}

impl VectorFn for LiftedVectorField {
    fn value(&self, p: &[f64]) -> Result<DVector<f64>> {
        let v = self.factor_value(&p[self.offset..self.offset + self.chart.dim()])?;
        let mut out = DVector::zeros(self.total);
        out.rows_mut(self.offset, v.len()).copy_from(&v);
        Ok(out)
    }

    fn jets(&self, p: &[f64]) -> Result<Vec<Jet2>> {
        let jets = self.factor_jets(&p[self.offset..self.offset + self.chart.dim()])?;
        let mut out = vec![Jet2::constant(self.total, 0.0); self.total];
        for (k, j) in jets.iter().enumerate() {
            out[self.offset + k] = j.embed(self.offset, self.total);
        }
        Ok(out)
    }
}

/// The same field seen as a vector field on its own factor.
struct OnFactor<'a>(&'a LiftedVectorField);

impl VectorFn for OnFactor<'_> {
    fn value(&self, p: &[f64]) -> Result<DVector<f64>> {
        self.0.factor_value(p)
    }

    fn jets(&self, p: &[f64]) -> Result<Vec<Jet2>> {
        self.0.factor_jets(p)
    }
}

/// `grad(f1^h)` and `grad(f2^v)` for variant G.
pub fn warp_gradients_g(l: &Local) -> (DVector<f64>, DVector<f64>) {
    let dm = l.coupling_margin();
    let c = l.c;
    let g1 = (l.horizontal(&l.grad1) / (l.f2 * l.f2) - l.vertical(&l.grad2) * (c * l.b1 / (l.f1 * l.f2))) / dm;
    let g2 = (l.vertical(&l.grad2) / (l.f1 * l.f1) - l.horizontal(&l.grad1) * (c * l.b2 / (l.f1 * l.f2))) / dm;
    (g1, g2)
}

/// `grad(f1^h)` and `grad(f2^v)` for variant H.
pub fn warp_gradients_h(l: &Local) -> (DVector<f64>, DVector<f64>) {
    let e = 1.0 + l.k() * l.b1;
    (l.horizontal(&l.grad1) / e, l.vertical(&l.grad2) / (l.f1 * l.f1))
}

/// `grad(f1^h)` and `grad(f2^v)` for the spec's variant.
pub fn warp_gradients(spec: &WarpSpec, q: &ProductPoint) -> Result<(DVector<f64>, DVector<f64>)> {
    let l = spec.require_riemannian(q)?;
    Ok(match spec.variant() {
        Variant::G => warp_gradients_g(&l),
        Variant::H => warp_gradients_h(&l),
    })
}

/// Product gradient of the lift of a factor function `phi` living on `side`.
pub fn grad_lift(spec: &WarpSpec, phi: &ScalarField, side: Side, q: &ProductPoint) -> Result<DVector<f64>> {
    let l = spec.require_riemannian(q)?;
    let (g, _, _) = l.factor(side);
    let grad_phi = symmetric_solve(g, &phi.differential(q.on(side))?)?;
    Ok(grad_lift_local(spec.variant(), &l, side, &grad_phi))
}

/// [`grad_lift`] from the factor gradient `grad_phi` of the function.
pub fn grad_lift_local(variant: Variant, l: &Local, side: Side, grad_phi: &DVector<f64>) -> DVector<f64> {
    match variant {
        Variant::G => {
            let (grad_f1, grad_f2) = warp_gradients_g(l);
            match side {
                Side::Base => {
                    let ip = l.df1.dot(grad_phi);
                    l.horizontal(grad_phi) / (l.f2 * l.f2) - grad_f2 * (l.c * l.f1 * ip / l.f2)
                }
                Side::Fiber => {
                    let ip = l.df2.dot(grad_phi);
                    l.vertical(grad_phi) / (l.f1 * l.f1) - grad_f1 * (l.c * l.f2 * ip / l.f1)
                }
            }
        }
        Variant::H => match side {
            Side::Base => {
                let k = l.k();
                let e = 1.0 + k * l.b1;
                l.horizontal(grad_phi) - l.horizontal(&l.grad1) * (k * l.df1.dot(grad_phi) / e)
            }
            Side::Fiber => l.vertical(grad_phi) / (l.f1 * l.f1),
        },
    }
}

fn symmetric_solve(g: &DMatrix<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
    g.clone().cholesky().map(|ch| ch.solve(d)).ok_or(Error::Singular)
}

/// `c f H^f(X, Y) + c X(f) Y(f) − g(X, Y)` on one factor.
pub fn b_tensor(
    c: f64,
    f: f64,
    hess_f: &DMatrix<f64>,
    df: &DVector<f64>,
    g: &DMatrix<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> f64 {
    c * f * (x.transpose() * hess_f * y)[(0, 0)] + c * df.dot(x) * df.dot(y) - (x.transpose() * g * y)[(0, 0)]
}

/// `∇_X Y` of the product metric for lifted `X`, `Y`, in closed form.
pub fn nabla_lifted(
    spec: &WarpSpec,
    x: &LiftedVectorField,
    y: &LiftedVectorField,
    q: &ProductPoint,
) -> Result<DVector<f64>> {
    let l = spec.require_riemannian(q)?;
    match (x.side(), y.side()) {
        (Side::Base, Side::Fiber) => mixed(spec, &l, x, y, q),
        // torsion-free and lifts from different factors commute
        (Side::Fiber, Side::Base) => mixed(spec, &l, y, x, q),
        (side, _) => {
            let p = q.on(side);
            let xv = x.factor_value(p)?;
            let yv = y.factor_value(p)?;
            let inner = spec.chart(side).oracle().covariant_derivative(&x.on_factor(), &y.on_factor(), p)?;
            let lifted = l.lift(side, &inner);
            Ok(lifted + same_side_correction(spec, &l, side, &xv, &yv, q)?)
        }
    }
}

fn same_side_correction(
    spec: &WarpSpec,
    l: &Local,
    side: Side,
    x: &DVector<f64>,
    y: &DVector<f64>,
    q: &ProductPoint,
) -> Result<DVector<f64>> {
    let c = l.c;
    match spec.variant() {
        Variant::G => {
            let (grad_f1, grad_f2) = warp_gradients_g(l);
            let (g, f, df) = l.factor(side);
            let hess = spec.warp(side).covariant_hessian(q.on(side))?;
            let b = b_tensor(c, f, &hess, df, g, x, y);
            Ok(match side {
                Side::Base => grad_f2 * (l.f2 * b),
                Side::Fiber => grad_f1 * (l.f1 * b),
            })
        }
        Variant::H => {
            let e = 1.0 + l.k() * l.b1;
            Ok(match side {
                Side::Base => {
                    let hess = spec.f1().covariant_hessian(&q.p1)?;
                    let h = (x.transpose() * hess * y)[(0, 0)];
                    let xl = l.df1.dot(x) / l.f1;
                    let yl = l.df1.dot(y) / l.f1;
                    l.horizontal(&l.grad1) * (l.k() * h / e) - l.vertical(&l.grad2) * (c * c * l.f2 * xl * yl)
                }
                Side::Fiber => {
                    let g2xy = (x.transpose() * &l.g2 * y)[(0, 0)];
                    -l.horizontal(&l.grad1) * (l.f1 * g2xy / e)
                }
            })
        }
    }
}

/// `∇_{X^h} Y^v` with `x` on the base and `y` on the fiber.
fn mixed(
    spec: &WarpSpec,
    l: &Local,
    x: &LiftedVectorField,
    y: &LiftedVectorField,
    q: &ProductPoint,
) -> Result<DVector<f64>> {
    let xv = x.factor_value(&q.p1)?;
    let yv = y.factor_value(&q.p2)?;
    let x_f1 = l.df1.dot(&xv);
    let y_f2 = l.df2.dot(&yv);
    let c = l.c;
    Ok(match spec.variant() {
        Variant::G => {
            let (grad_f1, grad_f2) = warp_gradients_g(l);
            (grad_f1 * l.f2 + grad_f2 * l.f1) * (-c * x_f1 * y_f2)
                + l.horizontal(&xv) * (y_f2 / l.f2)
                + l.vertical(&yv) * (x_f1 / l.f1)
        }
        Variant::H => {
            let e = 1.0 + l.k() * l.b1;
            l.horizontal(&l.grad1) * (c * c * l.f2 * y_f2 * x_f1 / e) + l.vertical(&yv) * (x_f1 / l.f1)
        }
    })
}

/// `|∇_X Y − ∇_Y X − [X, Y]|_∞` with both connections in closed form.
pub fn torsion_residual(
    spec: &WarpSpec,
    x: &LiftedVectorField,
    y: &LiftedVectorField,
    q: &ProductPoint,
) -> Result<f64> {
    let l = spec.local(q)?;
    let bracket = if x.side() == y.side() {
        l.lift(x.side(), &x.factor_bracket(y, q.on(x.side()))?)
    } else {
        DVector::zeros(l.m1 + l.m2)
    };
    let r = nabla_lifted(spec, x, y, q)? - nabla_lifted(spec, y, x, q)? - bracket;
    Ok(r.amax())
}

/// `|X(G(Y, Z)) − G(∇_X Y, Z) − G(Y, ∇_X Z)|`, with `X(G(Y, Z))`
/// differentiated exactly in forward mode.
pub fn compatibility_residual(
    spec: &WarpSpec,
    x: &LiftedVectorField,
    y: &LiftedVectorField,
    z: &LiftedVectorField,
    q: &ProductPoint,
) -> Result<f64> {
    let p = q.coords();
    let n = p.len();
    let m1 = spec.m1();
    let vars: Vec<Jet2> = p.iter().enumerate().map(|(i, &v)| Jet2::variable(n, i, v)).collect();
    let g_jet = spec.assemble_with(&vars[..m1], &vars[m1..])?;
    let (yj, zj) = (y.jets(&p)?, z.jets(&p)?);
    let mut pairing = Jet2::constant(n, 0.0);
    for a in 0..n {
        for b in 0..n {
            pairing += yj[a] * g_jet[a * n + b] * zj[b];
        }
    }
    let xv = x.value(&p)?;
    let derivative: f64 = (0..n).map(|i| pairing.d(i) * xv[i]).sum();
    let g = spec.assemble(q)?;
    let (yv, zv) = (y.value(&p)?, z.value(&p)?);
    let ny = nabla_lifted(spec, x, y, q)?;
    let nz = nabla_lifted(spec, x, z, q)?;
    let ip = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &g * b)[(0, 0)];
    Ok((derivative - ip(&ny, &zv) - ip(&yv, &nz)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{DerivativeMode, ScalarFn};
    use crate::metric::LiftedScalar;

    fn spec(variant: Variant) -> WarpSpec {
        let base = Arc::new(Chart::sphere2("x").unwrap());
        let fiber = Arc::new(Chart::euclidean(2, "y").unwrap());
        WarpSpec::from_sources(base, fiber, "2 + cos(x1) + 0.3*sin(x2)", "1 + 0.2*y1^2 + 0.1*y1*y2", 0.3, variant)
            .unwrap()
    }

    fn fields(s: &WarpSpec) -> Vec<LiftedVectorField> {
        vec![
            LiftedVectorField::new(s, Side::Base, &["sin(x2)", "x1^2"]).unwrap(),
            LiftedVectorField::coordinate(s, Side::Base, 1),
            LiftedVectorField::new(s, Side::Fiber, &["y2", "1 + y1*y2"]).unwrap(),
            LiftedVectorField::coordinate(s, Side::Fiber, 0),
        ]
    }

    fn q() -> ProductPoint {
        ProductPoint::new(vec![1.1, 0.4], vec![0.9, 1.7])
    }

    #[test]
    fn line_example_gradients() {
        let base = Arc::new(Chart::euclidean(1, "x").unwrap());
        let fiber = Arc::new(Chart::euclidean(1, "y").unwrap());
        let s = WarpSpec::from_sources(base, fiber, "x1", "y1", 0.5, Variant::G).unwrap();
        let q = ProductPoint::new(vec![2.0], vec![3.0]);
        let (g1, g2) = warp_gradients(&s, &q).unwrap();
        assert!((g1 - DVector::from_vec(vec![4.0, -3.0]) / 27.0).amax() < 1e-15);
        assert!((g2 - DVector::from_vec(vec![-3.0, 9.0]) / 27.0).amax() < 1e-15);
    }

    #[test]
    fn lifted_gradients_match_oracle() {
        for variant in [Variant::G, Variant::H] {
            let s = spec(variant);
            let q = q();
            let oracle = s.oracle(DerivativeMode::Dual);
            let phi1 = ScalarField::new(s.base().clone(), "x1*cos(x2)").unwrap();
            let phi2 = ScalarField::new(s.fiber().clone(), "y1^3 - y2").unwrap();
            for (side, phi) in [(Side::Base, &phi1), (Side::Fiber, &phi2), (Side::Base, s.f1()), (Side::Fiber, s.f2())] {
                let lifted = LiftedScalar::new(&s, side, phi.clone());
                let want = oracle.gradient(&lifted as &dyn ScalarFn, &q.coords()).unwrap();
                let got = grad_lift(&s, phi, side, &q).unwrap();
                assert!((got - want).amax() < 1e-12, "{variant} {side:?}");
            }
        }
    }

    #[test]
    fn connection_matches_oracle() {
        for variant in [Variant::G, Variant::H] {
            let s = spec(variant);
            let q = q();
            let oracle = s.oracle(DerivativeMode::Dual);
            let fs = fields(&s);
            for x in &fs {
                for y in &fs {
                    let want = oracle.covariant_derivative(x, y, &q.coords()).unwrap();
                    let got = nabla_lifted(&s, x, y, &q).unwrap();
                    assert!((got - &want).amax() < 1e-11 * (1.0 + want.amax()), "{variant}");
                }
            }
        }
    }

    #[test]
    fn torsion_free_and_compatible() {
        for variant in [Variant::G, Variant::H] {
            let s = spec(variant);
            let q = q();
            let fs = fields(&s);
            for x in &fs {
                for y in &fs {
                    assert!(torsion_residual(&s, x, y, &q).unwrap() < 1e-12);
                    for z in &fs {
                        assert!(compatibility_residual(&s, x, y, z, &q).unwrap() < 1e-7);
                    }
                }
            }
        }
    }
}
