//! Closed-form Laplacians of lifted functions and harmonicity defects.
//!
//! Sign convention: `Δφ = div grad φ`, so `Δ = ∂²` on flat space.

use nalgebra::DVector;

use crate::chart::ScalarField;
use crate::error::Result;
use crate::frame::product_frame;
use crate::metric::{LiftedScalar, Local, ProductPoint, Side, Variant, WarpSpec};
use crate::oracle::DerivativeMode;

/// Factor data of one warping function: value, `b`, `Δf` and `grad f(b)`.
#[derive(Debug, Clone, Copy)]
struct WarpData {
    f: f64,
    b: f64,
    lap: f64,
    grad_b: f64,
    m: f64,
}

fn warp_data(spec: &WarpSpec, l: &Local, side: Side, q: &ProductPoint) -> Result<WarpData> {
    let field = spec.warp(side);
    let p = q.on(side);
    let (f, b, m) = match side {
        Side::Base => (l.f1, l.b1, l.m1),
        Side::Fiber => (l.f2, l.b2, l.m2),
    };
    Ok(WarpData {
        f,
        b,
        lap: field.laplacian(p)?,
        grad_b: field.grad_of_grad_norm_sq(p)?,
        m: m as f64,
    })
}

/// `Δ(f1^h)` or `Δ(f2^v)` for variant G; the two lifts differ only by
/// exchanging the roles of the factors.
pub fn laplacian_lift_g(spec: &WarpSpec, side: Side, q: &ProductPoint) -> Result<f64> {
    spec.require_variant(Variant::G)?;
    let l = spec.require_riemannian(q)?;
    let this = warp_data(spec, &l, side, q)?;
    let other = warp_data(spec, &l, side.other(), q)?;
    let c = l.c;
    let d = l.coupling_margin();
    let (fa, fb) = (this.f, other.f);
    let main = this.lap / fb - c * this.b / fa * other.lap + coupling_bracket(c, &this, &other);
    Ok(main / (fb * d) + gradient_bracket(c, &this, &other) / (2.0 * fb * d * d))
}

/// `b_a (c (1 − m_a) b_b + m_b) / (f_a f_b)`.
fn coupling_bracket(c: f64, this: &WarpData, other: &WarpData) -> f64 {
    this.b * (c * (1.0 - this.m) * other.b + other.m) / (this.f * other.f)
}

/// `c² (b_b grad f_a(b_a) / f_b − c b_a² grad f_b(b_b) / f_a)`.
fn gradient_bracket(c: f64, this: &WarpData, other: &WarpData) -> f64 {
    c * c * (other.b / other.f * this.grad_b - c * this.b * this.b / this.f * other.grad_b)
}

/// The simplified variant-G Laplacian valid when both warping functions have
/// parallel gradients.
pub fn laplacian_lift_g_parallel(spec: &WarpSpec, side: Side, q: &ProductPoint) -> Result<f64> {
    spec.require_variant(Variant::G)?;
    let l = spec.require_riemannian(q)?;
    let (m1, m2) = (l.m1 as f64, l.m2 as f64);
    let (b1, b2, c) = (l.b1, l.b2, l.c);
    let d = l.coupling_margin();
    Ok(match side {
        Side::Base => ((1.0 - m1) * c * b1 * b2 + m2 * b1) / (l.f1 * l.f2 * l.f2 * d),
        Side::Fiber => ((1.0 - m2) * c * b1 * b2 + m1 * b2) / (l.f1 * l.f1 * l.f2 * d),
    })
}

/// `Δ(φ^h)` for `φ` on the base or `Δ(φ^v)` for `φ` on the fiber, variant H.
pub fn laplacian_lift_h(spec: &WarpSpec, side: Side, phi: &ScalarField, q: &ProductPoint) -> Result<f64> {
    spec.require_variant(Variant::H)?;
    let l = spec.local(q)?;
    let p = q.on(side);
    let lap_phi = phi.laplacian(p)?;
    let grad_phi = phi.grad_vec(p)?;
    let k = l.k();
    let e = 1.0 + k * l.b1;
    Ok(match side {
        Side::Base => {
            let along = l.df1.dot(&grad_phi);
            let hess_phi = quad(&phi.covariant_hessian(p)?, &l.grad1);
            let hess_f1 = quad(&spec.f1().covariant_hessian(p)?, &l.grad1);
            let lap_f1 = spec.f1().laplacian(p)?;
            lap_phi + l.m2 as f64 * along / (l.f1 * e)
                - k / e * (along * lap_f1 + hess_phi - k * along / e * hess_f1)
        }
        Side::Fiber => {
            let along = l.df2.dot(&grad_phi);
            (lap_phi + l.c * l.c * l.f2 * l.b1 * along / e) / (l.f1 * l.f1)
        }
    })
}

fn quad(m: &nalgebra::DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (v.transpose() * m * v)[(0, 0)]
}

/// The expression whose vanishing is equivalent to harmonicity of the lift
/// of `f1` (side `Base`) or `f2` (side `Fiber`) when both warping functions
/// are harmonic on their factors.
pub fn harmonicity_defect(spec: &WarpSpec, side: Side, q: &ProductPoint) -> Result<f64> {
    let l = spec.require_riemannian(q)?;
    match spec.variant() {
        Variant::G => {
            let this = warp_data(spec, &l, side, q)?;
            let other = warp_data(spec, &l, side.other(), q)?;
            let d = l.coupling_margin();
            Ok(coupling_bracket(l.c, &this, &other) + gradient_bracket(l.c, &this, &other) / (2.0 * d))
        }
        Variant::H => {
            let k = l.k();
            let e = 1.0 + k * l.b1;
            Ok(match side {
                Side::Base => {
                    let hess = quad(&spec.f1().covariant_hessian(&q.p1)?, &l.grad1);
                    l.m2 as f64 * l.b1 * e / l.f1 - k * hess
                }
                Side::Fiber => l.c * l.c * l.f2 * l.b1 * l.b2 / e,
            })
        }
    }
}

/// Coordinate Laplacian of the lift of `phi` under the assembled metric.
pub fn oracle_laplacian(
    spec: &WarpSpec,
    side: Side,
    phi: &ScalarField,
    q: &ProductPoint,
    mode: DerivativeMode,
) -> Result<f64> {
    let lifted = LiftedScalar::new(spec, side, phi.clone());
    spec.oracle(mode).laplace_beltrami(&lifted, &q.coords())
}

/// `Σ_j Hess φ(u_j, u_j)` over the explicit frame, with the Hessian of the
/// lift taken from the coordinate oracle.
pub fn frame_sum_laplacian(spec: &WarpSpec, side: Side, phi: &ScalarField, q: &ProductPoint) -> Result<f64> {
    let frame = product_frame(spec, q)?;
    let lifted = LiftedScalar::new(spec, side, phi.clone());
    let hess = spec.oracle(DerivativeMode::Dual).covariant_hessian(&lifted, &q.coords())?;
    Ok(frame.vectors.iter().map(|u| quad(&hess, u)).sum())
}

/// Closed form against oracle for one lifted function at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianReport {
    pub side: Side,
    /// Source of the lifted function.
    pub function: String,
    pub point: Vec<f64>,
    pub closed_form: f64,
    pub oracle: f64,
    pub abs_diff: f64,
}

/// Compares the closed-form Laplacian of a lift with the oracle. With
/// `phi = None` the warping function of `side` is used, which is the only
/// choice for variant G.
pub fn laplacian_report(
    spec: &WarpSpec,
    side: Side,
    phi: Option<&ScalarField>,
    q: &ProductPoint,
    mode: DerivativeMode,
) -> Result<LaplacianReport> {
    let phi = phi.unwrap_or_else(|| spec.warp(side));
    let closed_form = match spec.variant() {
        Variant::G => {
            if phi.expression() != spec.warp(side).expression() {
                return Err(crate::error::Error::WrongVariant { expected: "H" });
            }
            laplacian_lift_g(spec, side, q)?
        }
        Variant::H => laplacian_lift_h(spec, side, phi, q)?,
    };
    let oracle = oracle_laplacian(spec, side, phi, q, mode)?;
    Ok(LaplacianReport {
        side,
        function: phi.expression().source().to_string(),
        point: q.coords(),
        closed_form,
        oracle,
        abs_diff: (closed_form - oracle).abs(),
    })
}
