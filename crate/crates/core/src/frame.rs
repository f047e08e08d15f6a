//! Explicit orthonormal frames of the product metrics and the telescoping
//! sum identities that hold between their coefficients.
//!
//! Both frames start from `g_i`-orthonormal factor frames `e_j`. Variant G
//! keeps `e_k^h / f2` on the base and corrects the fiber vectors; variant H
//! corrects the base vectors and keeps `e_j^v / f1` on the fiber. Along the
//! corrected factor, with `f` the warping function of that factor:
//!
//! * `a_j = e_j(f)`,
//! * `A_j = Σ_{i<j} a_i²` (so `A_0 = 0` and `A_m = |grad f|²`),
//! * `T_j = Σ_{i<j} a_i e_i`.

use nalgebra::{DMatrix, DVector};

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::metric::{Local, ProductPoint, Variant, WarpSpec};

/// Smallest admissible `1 − c² b1 A_j` before the G frame is refused.
pub const FRAME_MARGIN: f64 = 1e-8;

/// Gram–Schmidt of the coordinate basis under `g(p)`, in coordinate order.
/// Columns of the result are the frame vectors.
pub fn factor_orthonormal_frame(chart: &Chart, p: &[f64]) -> Result<DMatrix<f64>> {
    let g = chart.metric_at(p)?;
    let n = chart.dim();
    let mut frame = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut v = DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
        // modified Gram–Schmidt: project out one finished vector at a time
        for k in 0..j {
            let e = frame.column(k).into_owned();
            let ip = (v.transpose() * &g * &e)[(0, 0)];
            v -= e * ip;
        }
        let norm = (v.transpose() * &g * &v)[(0, 0)].sqrt();
        frame.set_column(j, &(v / norm));
    }
    Ok(frame)
}

/// The explicit frame at a point together with its building blocks.
#[derive(Debug, Clone)]
pub struct FrameData {
    pub variant: Variant,
    /// Orthonormal product vectors `u_j`, base-indexed first.
    pub vectors: Vec<DVector<f64>>,
    /// The vectors `u'_j` before normalisation.
    pub unnormalized: Vec<DVector<f64>>,
    /// Closed-form `|u'_j|²`.
    pub norms_sq: Vec<f64>,
    /// Factor frames as matrix columns.
    pub base_frame: DMatrix<f64>,
    pub fiber_frame: DMatrix<f64>,
    /// `a_j` along the corrected factor (fiber for G, base for H).
    pub a: Vec<f64>,
    /// `A_0, …, A_m`.
    pub partial_sums: Vec<f64>,
    /// `T_0, …, T_m` as factor vectors.
    pub partial_vectors: Vec<DVector<f64>>,
}

impl FrameData {
    /// Gram matrix of the frame under `g`.
    pub fn gram(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.vectors.len();
        DMatrix::from_fn(n, n, |i, j| (self.vectors[i].transpose() * g * &self.vectors[j])[(0, 0)])
    }
}

fn partial_sums(frame: &DMatrix<f64>, df: &DVector<f64>) -> (Vec<f64>, Vec<f64>, Vec<DVector<f64>>) {
    let m = frame.ncols();
    let a: Vec<f64> = (0..m).map(|j| frame.column(j).dot(df)).collect();
    let mut sums = vec![0.0];
    let mut vecs = vec![DVector::zeros(m)];
    for j in 0..m {
        sums.push(sums[j] + a[j] * a[j]);
        vecs.push(&vecs[j] + frame.column(j) * a[j]);
    }
    (a, sums, vecs)
}

/// The explicit frame of the product metric at `q`.
pub fn product_frame(spec: &WarpSpec, q: &ProductPoint) -> Result<FrameData> {
    let l = spec.require_riemannian(q)?;
    let base_frame = factor_orthonormal_frame(spec.base(), &q.p1)?;
    let fiber_frame = factor_orthonormal_frame(spec.fiber(), &q.p2)?;
    match spec.variant() {
        Variant::G => frame_g(&l, base_frame, fiber_frame),
        Variant::H => Ok(frame_h(&l, base_frame, fiber_frame)),
    }
}

fn frame_g(l: &Local, base_frame: DMatrix<f64>, fiber_frame: DMatrix<f64>) -> Result<FrameData> {
    let (a, sums, vecs) = partial_sums(&fiber_frame, &l.df2);
    let s = l.c * l.c * l.b1;
    let margins: Vec<f64> = sums.iter().map(|x| 1.0 - s * x).collect();
    if let Some(&margin) = margins.iter().find(|&&d| d < FRAME_MARGIN) {
        return Err(Error::DegenerateFrame { margin });
    }
    let mut vectors = Vec::with_capacity(l.m1 + l.m2);
    let mut unnormalized = Vec::with_capacity(l.m1 + l.m2);
    let mut norms_sq = Vec::with_capacity(l.m1 + l.m2);
    for k in 0..l.m1 {
        let u = l.horizontal(&base_frame.column(k).into_owned()) / l.f2;
        vectors.push(u.clone());
        unnormalized.push(u);
        norms_sq.push(1.0);
    }
    for j in 0..l.m2 {
        let d = margins[j];
        let u = l.horizontal(&l.grad1) * (-l.c * a[j] / (l.f2 * d))
            + l.vertical(&fiber_frame.column(j).into_owned()) / l.f1
            + l.vertical(&vecs[j]) * (s * a[j] / (l.f1 * d));
        let n2 = margins[j + 1] / d;
        vectors.push(&u / n2.sqrt());
        unnormalized.push(u);
        norms_sq.push(n2);
    }
    Ok(FrameData {
        variant: Variant::G,
        vectors,
        unnormalized,
        norms_sq,
        base_frame,
        fiber_frame,
        a,
        partial_sums: sums,
        partial_vectors: vecs,
    })
}

fn frame_h(l: &Local, base_frame: DMatrix<f64>, fiber_frame: DMatrix<f64>) -> FrameData {
    let (a, sums, vecs) = partial_sums(&base_frame, &l.df1);
    let k = l.k();
    let mut vectors = Vec::with_capacity(l.m1 + l.m2);
    let mut unnormalized = Vec::with_capacity(l.m1 + l.m2);
    let mut norms_sq = Vec::with_capacity(l.m1 + l.m2);
    for i in 0..l.m1 {
        let u = l.horizontal(&vecs[i]) * (-k * a[i] / (1.0 + k * sums[i]))
            + l.horizontal(&base_frame.column(i).into_owned());
        let n2 = (1.0 + k * sums[i + 1]) / (1.0 + k * sums[i]);
        vectors.push(&u / n2.sqrt());
        unnormalized.push(u);
        norms_sq.push(n2);
    }
    for j in 0..l.m2 {
        let u = l.vertical(&fiber_frame.column(j).into_owned()) / l.f1;
        vectors.push(u.clone());
        unnormalized.push(u);
        norms_sq.push(1.0);
    }
    FrameData {
        variant: Variant::H,
        vectors,
        unnormalized,
        norms_sq,
        base_frame,
        fiber_frame,
        a,
        partial_sums: sums,
        partial_vectors: vecs,
    }
}

/// Worst absolute residual over every telescoping sum identity of the
/// spec's frame at `q`.
pub fn sum_identities_residual(spec: &WarpSpec, q: &ProductPoint) -> Result<f64> {
    let l = spec.require_riemannian(q)?;
    let frame = product_frame(spec, q)?;
    Ok(match spec.variant() {
        Variant::G => residual_g(&l, &frame),
        Variant::H => residual_h(&l, &frame),
    })
}

fn residual_g(l: &Local, fr: &FrameData) -> f64 {
    let m = l.m2;
    let s = l.c * l.c * l.b1;
    let a = &fr.a;
    let big_a = &fr.partial_sums;
    let d: Vec<f64> = big_a.iter().map(|x| 1.0 - s * x).collect();
    let dd = l.coupling_margin();
    let n2 = &fr.norms_sq[l.m1..];
    let mut worst: f64 = 0.0;

    // grad f2 / D as a combination of the T_j and e_j
    let mut rhs = DVector::zeros(m);
    for j in 0..m {
        rhs += &fr.partial_vectors[j] * (s * (a[j] / (n2[j] * d[j] * d[j])) * a[j]);
        rhs += fr.fiber_frame.column(j) * (a[j] / (n2[j] * d[j]));
    }
    worst = worst.max((&l.grad2 / dd - rhs).amax());

    // the same identity applied to f2
    let rhs: f64 = (0..m)
        .map(|j| s * a[j] * a[j] * big_a[j] / (n2[j] * d[j] * d[j]) + a[j] * a[j] / (n2[j] * d[j]))
        .sum();
    worst = worst.max((l.b2 / dd - rhs).abs());

    // 1/D_j + s Σ_{i≥j} a_i²/(D_i D_{i+1}) = 1/D
    for j in 0..m {
        let tail: f64 = (j..m).map(|i| a[i] * a[i] / (d[i] * d[i + 1])).sum();
        worst = worst.max((1.0 / d[j] + s * tail - 1.0 / dd).abs());
    }

    // consecutive-index identity, from the second fiber vector on
    for j in 1..m {
        let num = d[j + 1] * d[j - 1] + (s * a[j] * a[j - 1]).powi(2);
        let den = d[j] * (1.0 - s * (big_a[j + 1] - a[j - 1] * a[j - 1]));
        worst = worst.max((num / den - 1.0).abs());
    }

    // 1/|u'_j|² + (s a_j)² Σ_{i>j} a_i²/(D_i D_{i+1}) = (1 − s(b2 − a_j²))/D
    for j in 0..m {
        let tail: f64 = (j + 1..m).map(|i| a[i] * a[i] / (d[i] * d[i + 1])).sum();
        let lhs = 1.0 / n2[j] + (s * a[j]).powi(2) * tail;
        worst = worst.max((lhs - (1.0 - s * (l.b2 - a[j] * a[j])) / dd).abs());
    }
    worst
}

fn residual_h(l: &Local, fr: &FrameData) -> f64 {
    let m = l.m1;
    let k = l.k();
    let a = &fr.a;
    let p: Vec<f64> = fr.partial_sums.iter().map(|x| 1.0 + k * x).collect();
    let e = 1.0 + k * l.b1;
    let mut worst: f64 = 0.0;
    for j in 0..m {
        let tail: f64 = (j + 1..m).map(|i| a[i] * a[i] / (p[i] * p[i + 1])).sum();
        let lhs = k * k * a[j] * a[j] * tail + p[j] / p[j + 1];
        worst = worst.max((lhs - (1.0 - k * a[j] * a[j] / e)).abs());
        worst = worst.max((k * tail - 1.0 / p[j + 1] + 1.0 / e).abs());
    }
    worst
}

/// Worst residual of the pointwise frame relations: `T_j(f) = A_j =
/// g(T_j, T_j)` on the corrected factor and, for variant G,
/// `u_j(f1^h) = −(c f1 b1 / f2) u_j(f2^v)` on every fiber-indexed vector.
pub fn remark_identity_residual(spec: &WarpSpec, q: &ProductPoint) -> Result<f64> {
    let l = spec.require_riemannian(q)?;
    let fr = product_frame(spec, q)?;
    let (g, df) = match spec.variant() {
        Variant::G => (&l.g2, &l.df2),
        Variant::H => (&l.g1, &l.df1),
    };
    let mut worst: f64 = 0.0;
    for (t, sum) in fr.partial_vectors.iter().zip(&fr.partial_sums) {
        worst = worst.max((t.dot(df) - sum).abs());
        worst = worst.max(((t.transpose() * g * t)[(0, 0)] - sum).abs());
    }
    if spec.variant() == Variant::G {
        let df1 = l.horizontal(&l.df1);
        let df2 = l.vertical(&l.df2);
        let ratio = l.c * l.f1 * l.b1 / l.f2;
        for u in &fr.vectors[l.m1..] {
            worst = worst.max((u.dot(&df1) + ratio * u.dot(&df2)).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn factor_frames() {
        let e = factor_orthonormal_frame(&Chart::euclidean(3, "x").unwrap(), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(e, DMatrix::identity(3, 3));
        let h = factor_orthonormal_frame(&Chart::halfplane2("x").unwrap(), &[0.0, 2.0]).unwrap();
        assert!((h - DMatrix::identity(2, 2) * 2.0).amax() < 1e-15);
        let s = factor_orthonormal_frame(&Chart::sphere2("x").unwrap(), &[std::f64::consts::FRAC_PI_2, 0.0]).unwrap();
        assert!((s - DMatrix::identity(2, 2)).amax() < 1e-15);
        let custom = Chart::custom("c", &["u", "v"], &[(0.0, 1.0); 2], &["2", "0.5", "1"]).unwrap();
        let p = [0.5, 0.5];
        let f = factor_orthonormal_frame(&custom, &p).unwrap();
        let g = custom.metric_at(&p).unwrap();
        assert!((f.transpose() * g * f - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn line_example() {
        let base = Arc::new(Chart::euclidean(1, "x").unwrap());
        let fiber = Arc::new(Chart::euclidean(1, "y").unwrap());
        let s = WarpSpec::from_sources(base, fiber, "x1", "y1", 0.5, Variant::G).unwrap();
        let q = ProductPoint::new(vec![2.0], vec![3.0]);
        let fr = product_frame(&s, &q).unwrap();
        assert!((&fr.vectors[0] - DVector::from_vec(vec![1.0 / 3.0, 0.0])).amax() < 1e-15);
        let want = DVector::from_vec(vec![-0.5 / 3.0, 0.5]);
        assert!((&fr.unnormalized[1] - want).amax() < 1e-15);
        assert!((fr.norms_sq[1] - 0.75).abs() < 1e-15);
        let g = s.assemble(&q).unwrap();
        assert!((fr.gram(&g) - DMatrix::identity(2, 2)).amax() < 1e-14);
        assert!(sum_identities_residual(&s, &q).unwrap() < 1e-15);

        let err = product_frame(&s.with_c(1.0), &q).unwrap_err();
        assert!(matches!(err, Error::NotRiemannian { .. }));
    }

    #[test]
    fn frames_are_orthonormal_and_identities_hold() {
        let base = Arc::new(Chart::halfplane2("x").unwrap());
        let fiber = Arc::new(Chart::euclidean(3, "y").unwrap());
        let g = WarpSpec::from_sources(base, fiber, "1 + 0.4*x1^2 + x2", "1 + 0.3*y1 + 0.2*y2*y3 + 0.1*y3^2", 0.4, Variant::G)
            .unwrap();
        for spec in [g.clone(), g.with_variant(Variant::H), g.with_c(0.0)] {
            for q in spec.sample(20, 3, 0.01) {
                if spec.classify(&q).unwrap().1 > 1.0 - 1e-6 {
                    continue;
                }
                let fr = product_frame(&spec, &q).unwrap();
                let metric = spec.assemble(&q).unwrap();
                assert!((fr.gram(&metric) - DMatrix::identity(5, 5)).amax() < 1e-10);
                for (u, n2) in fr.unnormalized.iter().zip(&fr.norms_sq) {
                    assert!(((u.transpose() * &metric * u)[(0, 0)] - n2).abs() < 1e-10);
                }
                assert!(sum_identities_residual(&spec, &q).unwrap() < 1e-10);
                assert!(remark_identity_residual(&spec, &q).unwrap() < 1e-10);
            }
        }
    }
}
