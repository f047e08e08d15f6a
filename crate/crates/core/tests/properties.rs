use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;

use warpgeo::chart::Chart;
use warpgeo::expr::Expression;
use warpgeo::frame::{product_frame, sum_identities_residual};
use warpgeo::metric::{Classification, Variant, WarpSpec};

/// Flat 1+2 dimensional spec with affine-plus-quadratic warps.
fn spec(a: f64, b: f64, c: f64, variant: Variant) -> WarpSpec {
    let base = Arc::new(Chart::euclidean(1, "x").unwrap());
    let fiber = Arc::new(Chart::euclidean(2, "y").unwrap());
    let f1 = format!("1 + {a}*x1^2");
    let f2 = format!("0.5 + {b}*y1 + 0.2*y2");
    WarpSpec::from_sources(base, fiber, &f1, &f2, c, variant).unwrap()
}

fn coords() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.3f64..3.9, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn determinant_and_classification_follow_coupling(a in 0.1f64..1.0, b in 0.1f64..1.0, c in -2.0f64..2.0, p in coords()) {
        let s = spec(a, b, c, Variant::G);
        let q = s.point(&p).unwrap();
        let g = s.assemble(&q).unwrap();
        let direct = g.determinant();
        let closed = s.det_closed_form(&q).unwrap();
        prop_assert!((closed - direct).abs() <= 1e-9 * g.amax().powi(3));
        let (class, coupling) = s.classify(&q).unwrap();
        if coupling < 1.0 - 1e-6 {
            prop_assert_eq!(class, Classification::Riemannian);
            prop_assert!(g.clone().cholesky().is_some());
        } else if coupling > 1.0 + 1e-6 {
            prop_assert_eq!(class, Classification::Indefinite);
        }
    }

    #[test]
    fn variant_h_is_always_riemannian(a in 0.1f64..1.0, b in 0.1f64..1.0, c in -3.0f64..3.0, p in coords()) {
        let s = spec(a, b, c, Variant::H);
        let q = s.point(&p).unwrap();
        prop_assert_eq!(s.classify(&q).unwrap().0, Classification::Riemannian);
        let g = s.assemble(&q).unwrap();
        let n = g.nrows();
        prop_assert!((s.cometric(&q).unwrap() * g - DMatrix::<f64>::identity(n, n)).amax() < 1e-9);
    }

    #[test]
    fn frames_are_orthonormal_inside_the_riemannian_region(a in 0.1f64..1.0, b in 0.1f64..1.0, t in 0.0f64..0.95, p in coords()) {
        let s0 = spec(a, b, 0.0, Variant::G);
        let l = s0.local(&s0.point(&p).unwrap()).unwrap();
        // a coupling strictly inside c^2 b1 b2 < 1 at this point
        let s = s0.with_c((t / (l.b1 * l.b2)).sqrt());
        let q = s.point(&p).unwrap();
        let g = s.assemble(&q).unwrap();
        let frame = product_frame(&s, &q).unwrap();
        prop_assert!((frame.gram(&g) - DMatrix::<f64>::identity(3, 3)).amax() < 1e-8);
        prop_assert!(sum_identities_residual(&s, &q).unwrap() < 1e-9);
    }

    #[test]
    fn expression_jets_match_finite_differences(k in 0.1f64..2.0, x in 0.5f64..2.0, y in 0.5f64..2.0) {
        let vars = ["x".to_string(), "y".to_string()];
        let e = Expression::parse(&format!("sin({k}*x)*y^2 + exp(x/y) - log(x + y)"), &vars).unwrap();
        let jet = e.eval_jet2(&[x, y]).unwrap();
        let h = 1e-6;
        let dx = (e.eval(&[x + h, y]).unwrap() - e.eval(&[x - h, y]).unwrap()) / (2.0 * h);
        let dy = (e.eval(&[x, y + h]).unwrap() - e.eval(&[x, y - h]).unwrap()) / (2.0 * h);
        prop_assert!((jet.d(0) - dx).abs() < 1e-6 * dx.abs().max(1.0));
        prop_assert!((jet.d(1) - dy).abs() < 1e-6 * dy.abs().max(1.0));
        prop_assert!((jet.value() - e.eval(&[x, y]).unwrap()).abs() < 1e-14);
    }
}
