//! Seeded generators of random but well-posed specs for verification sweeps.
//!
//! Variant-G specs draw factor dimensions from {1, 2, 3}, catalog charts, and
//! warping functions built from polynomial and trigonometric terms with a
//! constant large enough to keep them positive on the whole chart box. The
//! coupling constant is then scaled so that `c² b1 b2` stays inside
//! [`COUPLING_RANGE`] on the default sample.
//!
//! Parallel-gradient specs use flat factors or the products `R × S²`,
//! `R × H²`, with warping functions affine in coordinates whose Hessian
//! vanishes.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::Chart;
use crate::error::Result;
use crate::metric::{Variant, WarpSpec};
use crate::sample::{DEFAULT_COUNT, DEFAULT_MARGIN, DEFAULT_SEED};

/// Range of the largest `c² b1 b2` over the default sample.
pub const COUPLING_RANGE: (f64, f64) = (0.3, 0.85);

/// `R × S²` with coordinates `(t, θ, φ)`.
pub fn line_times_sphere(prefix: &str) -> Result<Chart> {
    let v: Vec<String> = (1..=3).map(|i| format!("{prefix}{i}")).collect();
    let pi = std::f64::consts::PI;
    Chart::custom(
        "line_x_sphere2",
        &v,
        &[(0.25, 4.0), (0.1, pi - 0.1), (-pi, pi)],
        &["1", "0", "0", "1", "0", &format!("sin({})^2", v[1])],
    )
}

/// `R × H²` with coordinates `(t, x, y)`.
pub fn line_times_halfplane(prefix: &str) -> Result<Chart> {
    let v: Vec<String> = (1..=3).map(|i| format!("{prefix}{i}")).collect();
    let w = format!("1/{}^2", v[2]);
    Chart::custom(
        "line_x_halfplane2",
        &v,
        &[(0.25, 4.0), (-2.0, 2.0), (0.25, 4.0)],
        &["1", "0", "0", w.as_str(), "0", w.as_str()],
    )
}

fn random_chart(rng: &mut ChaCha8Rng, m: usize, prefix: &str) -> Result<Chart> {
    if m == 2 {
        let name = ["euclidean:2", "sphere2", "halfplane2"].choose(rng).copied().unwrap_or("euclidean:2");
        Chart::from_catalog(name, prefix)
    } else {
        Chart::euclidean(m, prefix)
    }
}

/// A positive function on `chart` mixing monomials and trigonometric terms.
fn random_warp(rng: &mut ChaCha8Rng, chart: &Chart) -> String {
    let mut terms = Vec::new();
    let mut bound = 0.0;
    for (var, &(lo, hi)) in chart.vars().iter().zip(chart.domain()) {
        let coef: f64 = rng.gen_range(-0.5..0.5);
        let reach = lo.abs().max(hi.abs());
        let (term, size) = match rng.gen_range(0..4) {
            0 => (var.clone(), reach),
            1 => (format!("{var}^2"), reach * reach),
            2 => (format!("sin({var})"), 1.0),
            _ => (format!("cos({var})"), 1.0),
        };
        bound += coef.abs() * size;
        terms.push(format!("{coef:.3}*{term}"));
    }
    let constant = 0.5 + bound + rng.gen_range(0.0..1.0);
    format!("{constant:.3} + {}", terms.join(" + "))
}

/// Largest `b` of the field over the base or fiber part of the default sample.
fn max_grad_norm_sq(field: &crate::chart::ScalarField, points: &[Vec<f64>]) -> Result<f64> {
    points.iter().try_fold(0.0f64, |m, p| Ok(m.max(field.grad_norm_sq(p)?)))
}

/// One random variant-G spec.
pub fn random_g_spec(rng: &mut ChaCha8Rng) -> Result<WarpSpec> {
    let m1 = rng.gen_range(1..=3);
    let m2 = rng.gen_range(1..=3);
    let base = Arc::new(random_chart(rng, m1, "x")?);
    let fiber = Arc::new(random_chart(rng, m2, "y")?);
    let f1 = random_warp(rng, &base);
    let f2 = random_warp(rng, &fiber);
    let spec = WarpSpec::from_sources(base, fiber, &f1, &f2, 0.0, Variant::G)?;
    let points = spec.sample(DEFAULT_COUNT, DEFAULT_SEED, DEFAULT_MARGIN);
    let base_pts: Vec<Vec<f64>> = points.iter().map(|q| q.p1.clone()).collect();
    let fiber_pts: Vec<Vec<f64>> = points.iter().map(|q| q.p2.clone()).collect();
    let coupling = max_grad_norm_sq(spec.f1(), &base_pts)? * max_grad_norm_sq(spec.f2(), &fiber_pts)?;
    let target = rng.gen_range(COUPLING_RANGE.0..COUPLING_RANGE.1);
    let c = if coupling > 0.0 { (target / coupling).sqrt() } else { 1.0 };
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    Ok(spec.with_c(sign * c))
}

/// `count` random variant-G specs from a seed.
pub fn g_population(count: usize, seed: u64) -> Result<Vec<WarpSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_g_spec(&mut rng)).collect()
}

/// An affine function of the flat coordinates `vars` with positive slopes.
fn affine(rng: &mut ChaCha8Rng, vars: &[String]) -> String {
    let mut s = format!("{:.3}", rng.gen_range(0.2..1.0));
    for v in vars {
        s.push_str(&format!(" + {:.3}*{v}", rng.gen_range(0.1..0.8)));
    }
    s
}

/// One factor chart with a warping function whose gradient is parallel.
fn parallel_factor(rng: &mut ChaCha8Rng, prefix: &str, allow_constant: bool) -> Result<(Chart, String)> {
    let kind = rng.gen_range(0..if allow_constant { 5 } else { 4 });
    Ok(match kind {
        0 => {
            let chart = Chart::euclidean(rng.gen_range(1..=2), prefix)?;
            let f = affine(rng, chart.vars());
            (chart, f)
        }
        1 => {
            let chart = line_times_sphere(prefix)?;
            let f = affine(rng, &chart.vars()[..1]);
            (chart, f)
        }
        2 => {
            let chart = line_times_halfplane(prefix)?;
            let f = affine(rng, &chart.vars()[..1]);
            (chart, f)
        }
        3 => {
            let chart = Chart::euclidean(rng.gen_range(2..=3), prefix)?;
            let f = affine(rng, &chart.vars()[..1]);
            (chart, f)
        }
        _ => {
            let chart = Chart::from_catalog(["sphere2", "halfplane2"].choose(rng).copied().unwrap_or("sphere2"), prefix)?;
            let f = format!("{:.3}", rng.gen_range(0.5..2.0));
            (chart, f)
        }
    })
}

/// One variant-H spec whose warping functions have parallel gradients.
pub fn random_parallel_h_spec(rng: &mut ChaCha8Rng) -> Result<WarpSpec> {
    let (base, f1) = parallel_factor(rng, "x", false)?;
    let (fiber, f2) = parallel_factor(rng, "y", true)?;
    let c = rng.gen_range(0.2..1.5);
    WarpSpec::from_sources(Arc::new(base), Arc::new(fiber), &f1, &f2, c, Variant::H)
}

/// `count` parallel-gradient variant-H specs from a seed.
pub fn parallel_h_population(count: usize, seed: u64) -> Result<Vec<WarpSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_parallel_h_spec(&mut rng)).collect()
}

/// `count` specs with affine warping functions on flat factors, variant G.
pub fn euclidean_linear_g_population(count: usize, seed: u64) -> Result<Vec<WarpSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let base = Arc::new(Chart::euclidean(rng.gen_range(1..=3), "x")?);
            let fiber = Arc::new(Chart::euclidean(rng.gen_range(1..=3), "y")?);
            let f1 = affine(&mut rng, base.vars());
            let f2 = affine(&mut rng, fiber.vars());
            let spec = WarpSpec::from_sources(base, fiber, &f1, &f2, 0.0, Variant::G)?;
            // affine on flat space: b is constant
            let q = &spec.sample(1, 0, DEFAULT_MARGIN)[0];
            let l = spec.local(q)?;
            let target = rng.gen_range(COUPLING_RANGE.0..COUPLING_RANGE.1);
            Ok(spec.with_c((target / (l.b1 * l.b2)).sqrt()))
        })
        .collect()
}
