//! Factor manifolds as single coordinate charts over open boxes.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::expr::{Expression, Jet2, Scalar, MAX_VARS};
use crate::linalg;
use crate::oracle::{DerivativeMode, MetricField, Oracle, ScalarFn};
use crate::sample;

/// Names accepted by [`Chart::from_catalog`] with a short description.
pub const CATALOG: [(&str, &str); 4] = [
    ("euclidean:<n>", "flat R^n, identity metric, box (0.25, 4)^n"),
    ("sphere2", "unit 2-sphere in polar coordinates (theta, phi), metric diag(1, sin^2 theta)"),
    ("halfplane2", "hyperbolic upper half-plane (x, y), metric diag(1/y^2, 1/y^2)"),
    ("custom", "metric components and box given explicitly"),
];

/// A coordinate chart: variable names, an open box, and the metric as a
/// symmetric matrix of expressions (upper triangle stored row by row).
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    name: String,
    vars: Vec<String>,
    domain: Vec<(f64, f64)>,
    metric: Vec<Expression>,
}

fn tri_index(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * n - a * (a + 1) / 2 + b
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

impl Chart {
    /// Builds a chart from upper-triangle component sources in row order
    /// (`g11, g12, …, g1n, g22, …`).
    pub fn custom<V: AsRef<str>, C: AsRef<str>>(
        name: &str,
        vars: &[V],
        domain: &[(f64, f64)],
        components: &[C],
    ) -> Result<Chart> {
        let n = vars.len();
        if n == 0 {
            return Err(Error::config(name, "a chart needs at least one coordinate"));
        }
        if n > MAX_VARS {
            return Err(Error::DimensionTooLarge(n));
        }
        if domain.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: domain.len(),
            });
        }
        if let Some(&(lo, hi)) = domain.iter().find(|(lo, hi)| lo.partial_cmp(hi) != Some(std::cmp::Ordering::Less)) {
            return Err(Error::config(name, format!("empty interval ({lo}, {hi})")));
        }
        if components.len() != n * (n + 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: n * (n + 1) / 2,
                found: components.len(),
            });
        }
        let metric = components
            .iter()
            .map(|c| Expression::parse(c.as_ref(), vars))
            .collect::<Result<Vec<_>>>()?;
        Ok(Chart {
            name: name.to_string(),
            vars: vars.iter().map(|v| v.as_ref().to_string()).collect(),
            domain: domain.to_vec(),
            metric,
        })
    }

    pub fn euclidean(n: usize, prefix: &str) -> Result<Chart> {
        let vars = numbered(prefix, n);
        let comps: Vec<String> = (0..n)
            .flat_map(|i| (i..n).map(move |j| if i == j { "1" } else { "0" }.to_string()))
            .collect();
        Chart::custom(&format!("euclidean:{n}"), &vars, &vec![(0.25, 4.0); n], &comps)
    }

    /// The box keeps θ at least 0.1 away from the poles, where the polar
    /// metric degenerates.
    pub fn sphere2(prefix: &str) -> Result<Chart> {
        let vars = numbered(prefix, 2);
        let pi = std::f64::consts::PI;
        let g22 = format!("sin({})^2", vars[0]);
        Chart::custom(
            "sphere2",
            &vars,
            &[(0.1, pi - 0.1), (-pi, pi)],
            &["1".to_string(), "0".to_string(), g22],
        )
    }

    pub fn halfplane2(prefix: &str) -> Result<Chart> {
        let vars = numbered(prefix, 2);
        let w = format!("1/{}^2", vars[1]);
        Chart::custom(
            "halfplane2",
            &vars,
            &[(-2.0, 2.0), (0.25, 4.0)],
            &[w.clone(), "0".to_string(), w],
        )
    }

    /// Looks up a built-in chart; coordinates are named `prefix1, prefix2, …`.
    pub fn from_catalog(name: &str, prefix: &str) -> Result<Chart> {
        match name {
            "sphere2" => Chart::sphere2(prefix),
            "halfplane2" => Chart::halfplane2(prefix),
            _ => {
                let n = name
                    .strip_prefix("euclidean:")
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&d| d >= 1)
                    .ok_or_else(|| Error::config(name, "unknown catalog chart"))?;
                Chart::euclidean(n, prefix)
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn component(&self, i: usize, j: usize) -> &Expression {
        &self.metric[tri_index(self.dim(), i, j)]
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().zip(&self.domain).all(|(x, (lo, hi))| lo < x && x < hi)
    }

    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p.len(),
            });
        }
        for (coord, (x, (lo, hi))) in p.iter().zip(&self.domain).enumerate() {
            if !(lo < x && x < hi) {
                return Err(Error::OutOfDomain {
                    chart: self.name.clone(),
                    coord,
                    value: *x,
                });
            }
        }
        Ok(())
    }

    /// Full row-major metric matrix evaluated on arbitrary scalars. No
    /// domain or definiteness check.
    pub fn metric_with<T: Scalar>(&self, p: &[T]) -> Result<Vec<T>> {
        let n = self.dim();
        let upper = self.metric.iter().map(|e| e.eval_with(p)).collect::<Result<Vec<T>>>()?;
        Ok((0..n * n).map(|k| upper[tri_index(n, k / n, k % n)]).collect())
    }

    /// `g(p)`, after checking the domain and positive-definiteness.
    pub fn metric_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(p)?;
        let n = self.dim();
        let g = DMatrix::from_row_slice(n, n, &self.metric_with(p)?);
        if g.clone().cholesky().is_none() {
            let min_eigenvalue = SymmetricEigen::new(g).eigenvalues.min();
            return Err(Error::NotPositiveDefinite {
                context: self.name.clone(),
                point: p.to_vec(),
                min_eigenvalue,
            });
        }
        Ok(g)
    }

    pub fn inverse_metric_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        crate::oracle::symmetric_inverse(&self.metric_at(p)?)
    }

    /// Deterministic sample of interior points.
    pub fn sample(&self, count: usize, seed: u64, margin: f64) -> Vec<Vec<f64>> {
        sample::sample_box(&self.domain, count, seed, margin)
    }

    pub fn oracle(&self) -> Oracle<'_> {
        // dimension is bounded by construction
        Oracle::new(self, DerivativeMode::Dual).expect("chart dimension within MAX_VARS")
    }
}

impl MetricField for Chart {
    fn dim(&self) -> usize {
        self.vars.len()
    }

    fn metric(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.metric_at(p)
    }

    fn metric_jet(&self, p: &[f64]) -> Result<Vec<Jet2>> {
        self.check_point(p)?;
        let n = self.dim();
        let x: Vec<Jet2> = p.iter().enumerate().map(|(i, &v)| Jet2::variable(n, i, v)).collect();
        self.metric_with(&x)
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.name, self.vars.join(", "))
    }
}

/// A function on one chart, with its first partial derivatives kept in
/// symbolic form so that quantities needing a third derivative of the
/// function can still be evaluated exactly on jets.
#[derive(Debug, Clone)]
pub struct ScalarField {
    chart: Arc<Chart>,
    expr: Expression,
    partials: Vec<Expression>,
}

impl ScalarField {
    pub fn new(chart: Arc<Chart>, source: &str) -> Result<ScalarField> {
        let expr = Expression::parse(source, chart.vars())?;
        Ok(ScalarField::from_expression(chart, expr))
    }

    /// # Panics
    /// If the expression's variables are not the chart's.
    pub fn from_expression(chart: Arc<Chart>, expr: Expression) -> ScalarField {
        assert_eq!(expr.vars(), chart.vars(), "expression must use the chart's coordinates");
        let partials = (0..chart.dim()).map(|i| expr.derivative(i)).collect();
        ScalarField { chart, expr, partials }
    }

    pub fn constant(chart: Arc<Chart>, value: f64) -> ScalarField {
        let expr = Expression::constant(value, chart.vars());
        ScalarField::from_expression(chart, expr)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn expression(&self) -> &Expression {
        &self.expr
    }

    pub fn is_constant(&self) -> bool {
        self.expr.is_constant()
    }

    pub fn value(&self, p: &[f64]) -> Result<f64> {
        self.chart.check_point(p)?;
        self.expr.eval(p)
    }

    pub fn value_with<T: Scalar>(&self, p: &[T]) -> Result<T> {
        self.expr.eval_with(p)
    }

    /// `∂_i f` evaluated on arbitrary scalars.
    pub fn partials_with<T: Scalar>(&self, p: &[T]) -> Result<Vec<T>> {
        self.partials.iter().map(|e| e.eval_with(p)).collect()
    }

    pub fn jet(&self, p: &[f64]) -> Result<Jet2> {
        self.chart.check_point(p)?;
        self.expr.eval_jet2(p)
    }

    /// The differential `∂_i f` as a covector.
    pub fn differential(&self, p: &[f64]) -> Result<DVector<f64>> {
        let j = self.jet(p)?;
        Ok(DVector::from_vec(j.gradient()))
    }

    /// `(grad f)^j = g^{jk} ∂_k f`.
    pub fn grad_vec(&self, p: &[f64]) -> Result<DVector<f64>> {
        Ok(self.chart.inverse_metric_at(p)? * self.differential(p)?)
    }

    /// `b = g^{jk} ∂_j f ∂_k f`.
    pub fn grad_norm_sq(&self, p: &[f64]) -> Result<f64> {
        let d = self.differential(p)?;
        Ok((self.chart.inverse_metric_at(p)? * &d).dot(&d))
    }

    /// `H_{jk} = ∂_j∂_k f − Γ^l_{jk} ∂_l f`.
    pub fn covariant_hessian(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.chart.oracle().covariant_hessian(self, p)
    }

    /// Laplace–Beltrami of the field on its own chart.
    pub fn laplacian(&self, p: &[f64]) -> Result<f64> {
        self.chart.oracle().laplace_beltrami(self, p)
    }

    /// `b` as a jet, from jets of the inverse metric and of the symbolic
    /// partial derivatives; its gradient involves third derivatives of `f`.
    pub fn grad_norm_sq_jet(&self, p: &[f64]) -> Result<Jet2> {
        self.chart.check_point(p)?;
        let n = self.chart.dim();
        let x: Vec<Jet2> = p.iter().enumerate().map(|(i, &v)| Jet2::variable(n, i, v)).collect();
        let ginv = linalg::invert(&self.chart.metric_with(&x)?, n)?;
        let d = self.partials_with(&x)?;
        let mut b = Jet2::constant(n, 0.0);
        for j in 0..n {
            for k in 0..n {
                b += ginv[j * n + k] * d[j] * d[k];
            }
        }
        Ok(b)
    }

    /// `grad f(b) = g(grad f, grad b)`, the derivative of the squared
    /// gradient norm along the gradient.
    pub fn grad_of_grad_norm_sq(&self, p: &[f64]) -> Result<f64> {
        let b = self.grad_norm_sq_jet(p)?;
        let db = DVector::from_vec(b.gradient());
        Ok(self.grad_vec(p)?.dot(&db))
    }

    /// Fails with [`Error::NonPositiveWarp`] at the first point where the
    /// field is not strictly positive.
    pub fn check_positive<'a>(&self, label: &str, points: impl IntoIterator<Item = &'a Vec<f64>>) -> Result<()> {
        for p in points {
            let v = self.value(p)?;
            // NaN is rejected as well
            if v.is_nan() || v <= 0.0 {
                return Err(Error::NonPositiveWarp {
                    field: label.to_string(),
                    point: p.clone(),
                    value: v,
                });
            }
        }
        Ok(())
    }
}

impl ScalarFn for ScalarField {
    fn value(&self, p: &[f64]) -> Result<f64> {
        ScalarField::value(self, p)
    }

    fn jet(&self, p: &[f64]) -> Result<Jet2> {
        ScalarField::jet(self, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn catalog_metrics() {
        let e = Chart::from_catalog("euclidean:2", "x").unwrap();
        assert_eq!(e.metric_at(&[1.0, 2.0]).unwrap(), DMatrix::identity(2, 2));
        let s = Chart::from_catalog("sphere2", "x").unwrap();
        let g = s.metric_at(&[PI / 2.0, 0.0]).unwrap();
        assert!((g - DMatrix::identity(2, 2)).amax() < 1e-15);
        let h = Chart::from_catalog("halfplane2", "x").unwrap();
        assert_eq!(h.metric_at(&[0.0, 2.0]).unwrap(), DMatrix::from_diagonal_element(2, 2, 0.25));
    }

    #[test]
    fn unknown_catalog_and_out_of_domain() {
        assert!(matches!(Chart::from_catalog("torus", "x"), Err(Error::Config { .. })));
        let e = Chart::euclidean(1, "x").unwrap();
        assert!(matches!(e.metric_at(&[5.0]), Err(Error::OutOfDomain { coord: 0, .. })));
    }

    #[test]
    fn indefinite_custom_metric_reports_eigenvalue() {
        let c = Chart::custom("bad", &["u", "v"], &[(0.0, 1.0), (0.0, 1.0)], &["1", "2", "1"]).unwrap();
        match c.metric_at(&[0.5, 0.5]) {
            Err(Error::NotPositiveDefinite { min_eigenvalue, .. }) => assert!(close(min_eigenvalue, -1.0, 1e-12)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gradients_on_flat_and_hyperbolic_charts() {
        let e = Arc::new(Chart::euclidean(2, "x").unwrap());
        let f = ScalarField::new(e.clone(), "x1").unwrap();
        assert_eq!(f.grad_vec(&[1.0, 1.0]).unwrap().as_slice(), &[1.0, 0.0]);
        assert_eq!(f.grad_norm_sq(&[1.0, 1.0]).unwrap(), 1.0);
        let k = ScalarField::constant(e, 3.0);
        assert_eq!(k.grad_vec(&[1.0, 1.0]).unwrap().amax(), 0.0);

        let h = Arc::new(Chart::halfplane2("x").unwrap());
        let f = ScalarField::new(h, "x1").unwrap();
        let p = [0.0, 2.0];
        assert!((f.grad_vec(&p).unwrap() - DVector::from_vec(vec![4.0, 0.0])).amax() < 1e-14);
        assert!(close(f.grad_norm_sq(&p).unwrap(), 4.0, 1e-14));
        let hess = f.covariant_hessian(&p).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        assert!((hess - want).amax() < 1e-14);
    }

    #[test]
    fn covariant_hessian_of_square_on_line() {
        let e = Arc::new(Chart::euclidean(1, "x").unwrap());
        let f = ScalarField::new(e.clone(), "x1^2").unwrap();
        assert_eq!(f.covariant_hessian(&[1.5]).unwrap()[(0, 0)], 2.0);
        let lin = ScalarField::new(Arc::new(Chart::euclidean(3, "x").unwrap()), "x1").unwrap();
        assert_eq!(lin.covariant_hessian(&[1.0, 1.0, 1.0]).unwrap().amax(), 0.0);
    }

    #[test]
    fn gradient_of_norm_matches_finite_difference() {
        let s = Arc::new(Chart::sphere2("x").unwrap());
        let f = ScalarField::new(s, "2 + cos(x1) * sin(x2)^2").unwrap();
        let p = [1.0, 0.7];
        let exact = f.grad_of_grad_norm_sq(&p).unwrap();
        let grad = f.grad_vec(&p).unwrap();
        let h = 1e-5;
        let mut fd = 0.0;
        for i in 0..2 {
            let mut a = p;
            let mut b = p;
            a[i] += h;
            b[i] -= h;
            fd += grad[i] * (f.grad_norm_sq(&a).unwrap() - f.grad_norm_sq(&b).unwrap()) / (2.0 * h);
        }
        assert!(close(exact, fd, 1e-8), "{exact} vs {fd}");
    }

    #[test]
    fn catalog_charts_are_positive_definite_on_samples() {
        for name in ["euclidean:3", "sphere2", "halfplane2"] {
            let c = Chart::from_catalog(name, "x").unwrap();
            for p in c.sample(1000, 42, 1e-3) {
                c.metric_at(&p).unwrap();
            }
        }
    }
}
