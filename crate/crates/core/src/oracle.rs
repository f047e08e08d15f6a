//! Coordinate-based reference geometry for an arbitrary metric field.
//!
//! Everything here works from the metric as a matrix-valued function of the
//! coordinates and nothing else: Christoffel symbols, covariant derivatives,
//! the Riemann tensor and its contractions, gradients and the
//! Laplace–Beltrami operator. Two derivative back ends are available.
//! [`DerivativeMode::Dual`] differentiates the metric exactly through
//! [`Jet2`]; [`DerivativeMode::CentralDifference`] uses finite differences
//! of the plain metric (step `1e-4` for Christoffel symbols) and of the
//! resulting Christoffel symbols (step `1e-3` for curvature).
//!
//! Curvature convention: `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`, with
//! components `R(∂_i, ∂_j)∂_k = R^l_{kij} ∂_l`, and
//! `Ric(X,Y) = tr(V ↦ R(V,X)Y)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{Jet2, MAX_VARS};

/// Step for first derivatives of the metric and of scalar or vector fields.
pub const FD_STEP_FIRST: f64 = 1e-4;
/// Step for derivatives of Christoffel symbols and second derivatives of
/// scalar fields.
pub const FD_STEP_SECOND: f64 = 1e-3;

/// A symmetric positive-definite matrix field on an open set of `R^dim`.
pub trait MetricField: Sync {
    fn dim(&self) -> usize;

    fn metric(&self, p: &[f64]) -> Result<DMatrix<f64>>;

    /// Row-major `dim × dim` entries as jets over the `dim` coordinates.
    fn metric_jet(&self, p: &[f64]) -> Result<Vec<Jet2>>;
}

/// A scalar function of the coordinates.
pub trait ScalarFn: Sync {
    fn value(&self, p: &[f64]) -> Result<f64>;

    /// Value with exact gradient and Hessian over all coordinates.
    fn jet(&self, p: &[f64]) -> Result<Jet2>;
}

/// A vector field given by its coordinate components.
pub trait VectorFn: Sync {
    fn value(&self, p: &[f64]) -> Result<DVector<f64>>;

    /// Components as jets over all coordinates.
    fn jets(&self, p: &[f64]) -> Result<Vec<Jet2>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativeMode {
    #[default]
    Dual,
    CentralDifference,
}

/// `Γ^k_{ij}` stored at `(k * n + i) * n + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    fn zeros(n: usize) -> Self {
        Christoffel {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    #[inline]
    fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.data[(k * self.n + i) * self.n + j] = v;
    }

    /// `Γ^k_{ij} X^i Y^j`.
    pub fn contract(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |k, _| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += self.get(k, i, j) * x[i] * y[j];
                }
            }
            s
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `R^l_{kij}` stored at `((l * n + k) * n + i) * n + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Riemann {
    n: usize,
    data: Vec<f64>,
}

impl Riemann {
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, l: usize, k: usize, i: usize, j: usize) -> f64 {
        self.data[((l * self.n + k) * self.n + i) * self.n + j]
    }

    /// `R(X,Y)Z`.
    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |l, _| {
            let mut s = 0.0;
            for k in 0..n {
                if z[k] == 0.0 {
                    continue;
                }
                for i in 0..n {
                    for j in 0..n {
                        s += self.get(l, k, i, j) * x[i] * y[j] * z[k];
                    }
                }
            }
            s
        })
    }

    /// `R_{lkij} = g_{lm} R^m_{kij}`, same layout.
    pub fn lowered(&self, g: &DMatrix<f64>) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n * n * n];
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            s += g[(l, m)] * self.get(m, k, i, j);
                        }
                        out[((l * n + k) * n + i) * n + j] = s;
                    }
                }
            }
        }
        out
    }

    /// Ricci tensor `Ric_{jk} = R^i_{kij}`.
    pub fn ricci(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |j, k| (0..n).map(|i| self.get(i, k, i, j)).sum())
    }

    /// Largest violation among the algebraic Riemann symmetries: skew
    /// symmetry in each index pair of the lowered tensor, pair symmetry, and
    /// the first Bianchi identity.
    pub fn symmetry_residual(&self, g: &DMatrix<f64>) -> f64 {
        let n = self.n;
        let low = self.lowered(g);
        let at = |l: usize, k: usize, i: usize, j: usize| low[((l * n + k) * n + i) * n + j];
        let mut worst: f64 = 0.0;
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let r = at(l, k, i, j);
                        worst = worst
                            .max((r + at(l, k, j, i)).abs())
                            .max((r + at(k, l, i, j)).abs())
                            .max((r - at(i, j, l, k)).abs());
                        let bianchi = self.get(l, k, i, j) + self.get(l, i, j, k) + self.get(l, j, k, i);
                        worst = worst.max(bianchi.abs());
                    }
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Sectional curvature of the plane spanned by `x` and `y`.
pub fn sectional_curvature(
    r: &Riemann,
    g: &DMatrix<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> f64 {
    let ip = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * g * b)[(0, 0)];
    let ryy = r.apply(x, y, y);
    ip(&ryy, x) / (ip(x, x) * ip(y, y) - ip(x, y).powi(2))
}

/// Inverse of a symmetric matrix, symmetrised to remove rounding skew.
pub fn symmetric_inverse(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = match g.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => g.clone().try_inverse().ok_or(Error::Singular)?,
    };
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Reference geometry of one metric field in one derivative mode.
pub struct Oracle<'a> {
    field: &'a dyn MetricField,
    mode: DerivativeMode,
}

impl<'a> Oracle<'a> {
    pub fn new(field: &'a dyn MetricField, mode: DerivativeMode) -> Result<Self> {
        if field.dim() > MAX_VARS {
            return Err(Error::DimensionTooLarge(field.dim()));
        }
        Ok(Oracle { field, mode })
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p.len(),
            });
        }
        Ok(())
    }

    pub fn metric(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(p)?;
        self.field.metric(p)
    }

    pub fn inverse_metric(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        symmetric_inverse(&self.metric(p)?)
    }

    /// `∂_m g_{ij}` at `(m * n + i) * n + j`, and the metric itself.
    fn metric_first_derivatives(&self, p: &[f64]) -> Result<(DMatrix<f64>, Vec<f64>)> {
        let n = self.dim();
        let mut dg = vec![0.0; n * n * n];
        match self.mode {
            DerivativeMode::Dual => {
                let jets = self.field.metric_jet(p)?;
                let g = DMatrix::from_fn(n, n, |i, j| jets[i * n + j].value());
                for m in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            dg[(m * n + i) * n + j] = jets[i * n + j].d(m);
                        }
                    }
                }
                Ok((g, dg))
            }
            DerivativeMode::CentralDifference => {
                let g = self.field.metric(p)?;
                let h = FD_STEP_FIRST;
                let mut q = p.to_vec();
                for m in 0..n {
                    q[m] = p[m] + h;
                    let plus = self.field.metric(&q)?;
                    q[m] = p[m] - h;
                    let minus = self.field.metric(&q)?;
                    q[m] = p[m];
                    for i in 0..n {
                        for j in 0..n {
                            dg[(m * n + i) * n + j] = (plus[(i, j)] - minus[(i, j)]) / (2.0 * h);
                        }
                    }
                }
                Ok((g, dg))
            }
        }
    }

    fn christoffel_from(ginv: &DMatrix<f64>, dg: &[f64], n: usize) -> Christoffel {
        let d = |m: usize, i: usize, j: usize| dg[(m * n + i) * n + j];
        let mut gamma = Christoffel::zeros(n);
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += ginv[(k, l)] * (d(i, j, l) + d(j, i, l) - d(l, i, j));
                    }
                    gamma.set(k, i, j, 0.5 * s);
                    gamma.set(k, j, i, 0.5 * s);
                }
            }
        }
        gamma
    }

    pub fn christoffel(&self, p: &[f64]) -> Result<Christoffel> {
        self.check_point(p)?;
        let (g, dg) = self.metric_first_derivatives(p)?;
        let ginv = symmetric_inverse(&g)?;
        Ok(Self::christoffel_from(&ginv, &dg, self.dim()))
    }

    /// Christoffel symbols together with `∂_m Γ^k_{ij}` stored at
    /// `((m * n + k) * n + i) * n + j`.
    fn christoffel_with_derivative(&self, p: &[f64]) -> Result<(Christoffel, Vec<f64>)> {
        let n = self.dim();
        let mut dgamma = vec![0.0; n * n * n * n];
        match self.mode {
            DerivativeMode::Dual => {
                let jets = self.field.metric_jet(p)?;
                let g = DMatrix::from_fn(n, n, |i, j| jets[i * n + j].value());
                let ginv = symmetric_inverse(&g)?;
                let d = |m: usize, i: usize, j: usize| jets[i * n + j].d(m);
                let dd = |m: usize, r: usize, i: usize, j: usize| jets[i * n + j].dd(m, r);
                let mut dg = vec![0.0; n * n * n];
                for m in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            dg[(m * n + i) * n + j] = d(m, i, j);
                        }
                    }
                }
                let gamma = Self::christoffel_from(&ginv, &dg, n);
                // first-kind symbols Γ_{l,ij} and their derivatives
                let first = |l: usize, i: usize, j: usize| 0.5 * (d(i, j, l) + d(j, i, l) - d(l, i, j));
                let dfirst = |m: usize, l: usize, i: usize, j: usize| {
                    0.5 * (dd(m, i, j, l) + dd(m, j, i, l) - dd(m, l, i, j))
                };
                for m in 0..n {
                    // ∂_m g^{-1} = -g^{-1} (∂_m g) g^{-1}
                    let dgm = DMatrix::from_fn(n, n, |i, j| d(m, i, j));
                    let dginv = -(&ginv * dgm * &ginv);
                    for k in 0..n {
                        for i in 0..n {
                            for j in i..n {
                                let mut s = 0.0;
                                for l in 0..n {
                                    s += dginv[(k, l)] * first(l, i, j) + ginv[(k, l)] * dfirst(m, l, i, j);
                                }
                                dgamma[((m * n + k) * n + i) * n + j] = s;
                                dgamma[((m * n + k) * n + j) * n + i] = s;
                            }
                        }
                    }
                }
                Ok((gamma, dgamma))
            }
            DerivativeMode::CentralDifference => {
                let gamma = self.christoffel(p)?;
                let h = FD_STEP_SECOND;
                let mut q = p.to_vec();
                for m in 0..n {
                    q[m] = p[m] + h;
                    let plus = self.christoffel(&q)?;
                    q[m] = p[m] - h;
                    let minus = self.christoffel(&q)?;
                    q[m] = p[m];
                    for idx in 0..n * n * n {
                        dgamma[m * n * n * n + idx] = (plus.data[idx] - minus.data[idx]) / (2.0 * h);
                    }
                }
                Ok((gamma, dgamma))
            }
        }
    }

    pub fn riemann(&self, p: &[f64]) -> Result<Riemann> {
        self.check_point(p)?;
        let n = self.dim();
        let (gamma, dgamma) = self.christoffel_with_derivative(p)?;
        let dg = |m: usize, k: usize, i: usize, j: usize| dgamma[((m * n + k) * n + i) * n + j];
        let mut data = vec![0.0; n * n * n * n];
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut s = dg(i, l, j, k) - dg(j, l, i, k);
                        for m in 0..n {
                            s += gamma.get(l, i, m) * gamma.get(m, j, k) - gamma.get(l, j, m) * gamma.get(m, i, k);
                        }
                        data[((l * n + k) * n + i) * n + j] = s;
                    }
                }
            }
        }
        Ok(Riemann { n, data })
    }

    pub fn ricci(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.riemann(p)?.ricci())
    }

    pub fn scalar(&self, p: &[f64]) -> Result<f64> {
        let ric = self.ricci(p)?;
        let ginv = self.inverse_metric(p)?;
        Ok(ginv.component_mul(&ric).sum())
    }

    /// Value, gradient and Hessian of a scalar function in the current mode.
    fn scalar_derivatives(&self, f: &dyn ScalarFn, p: &[f64]) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let n = self.dim();
        match self.mode {
            DerivativeMode::Dual => {
                let j = f.jet(p)?;
                Ok((
                    j.value(),
                    DVector::from_fn(n, |i, _| j.d(i)),
                    DMatrix::from_fn(n, n, |a, b| j.dd(a, b)),
                ))
            }
            DerivativeMode::CentralDifference => {
                let v = f.value(p)?;
                let mut q = p.to_vec();
                let h1 = FD_STEP_FIRST;
                let mut grad = DVector::zeros(n);
                for i in 0..n {
                    q[i] = p[i] + h1;
                    let a = f.value(&q)?;
                    q[i] = p[i] - h1;
                    let b = f.value(&q)?;
                    q[i] = p[i];
                    grad[i] = (a - b) / (2.0 * h1);
                }
                let h = FD_STEP_SECOND;
                let mut hess = DMatrix::zeros(n, n);
                for i in 0..n {
                    q[i] = p[i] + h;
                    let a = f.value(&q)?;
                    q[i] = p[i] - h;
                    let b = f.value(&q)?;
                    q[i] = p[i];
                    hess[(i, i)] = (a - 2.0 * v + b) / (h * h);
                    for j in 0..i {
                        let mut corner = |si: f64, sj: f64| -> Result<f64> {
                            q[i] = p[i] + si * h;
                            q[j] = p[j] + sj * h;
                            let r = f.value(&q);
                            q[i] = p[i];
                            q[j] = p[j];
                            r
                        };
                        let s = corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)? + corner(-1.0, -1.0)?;
                        hess[(i, j)] = s / (4.0 * h * h);
                        hess[(j, i)] = hess[(i, j)];
                    }
                }
                Ok((v, grad, hess))
            }
        }
    }

    /// `g^{ij} ∂_j φ`.
    pub fn gradient(&self, f: &dyn ScalarFn, p: &[f64]) -> Result<DVector<f64>> {
        self.check_point(p)?;
        let (_, d, _) = self.scalar_derivatives(f, p)?;
        Ok(self.inverse_metric(p)? * d)
    }

    /// `∂_i∂_j φ − Γ^k_{ij} ∂_k φ`.
    pub fn covariant_hessian(&self, f: &dyn ScalarFn, p: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(p)?;
        let n = self.dim();
        let (_, d, hess) = self.scalar_derivatives(f, p)?;
        let gamma = self.christoffel(p)?;
        Ok(DMatrix::from_fn(n, n, |i, j| {
            hess[(i, j)] - (0..n).map(|k| gamma.get(k, i, j) * d[k]).sum::<f64>()
        }))
    }

    /// `g^{ij}(∂_i∂_j φ − Γ^k_{ij} ∂_k φ)`.
    pub fn laplace_beltrami(&self, f: &dyn ScalarFn, p: &[f64]) -> Result<f64> {
        let h = self.covariant_hessian(f, p)?;
        let ginv = self.inverse_metric(p)?;
        Ok(ginv.component_mul(&h).sum())
    }

    /// `(∇_X Y)^k = X^i ∂_i Y^k + Γ^k_{ij} X^i Y^j`.
    pub fn covariant_derivative(&self, x: &dyn VectorFn, y: &dyn VectorFn, p: &[f64]) -> Result<DVector<f64>> {
        self.check_point(p)?;
        let n = self.dim();
        let xv = x.value(p)?;
        let (yv, dy) = match self.mode {
            DerivativeMode::Dual => {
                let jets = y.jets(p)?;
                let yv = DVector::from_fn(n, |k, _| jets[k].value());
                let dy = DMatrix::from_fn(n, n, |k, i| jets[k].d(i));
                (yv, dy)
            }
            DerivativeMode::CentralDifference => {
                let yv = y.value(p)?;
                let h = FD_STEP_FIRST;
                let mut q = p.to_vec();
                let mut dy = DMatrix::zeros(n, n);
                for i in 0..n {
                    q[i] = p[i] + h;
                    let a = y.value(&q)?;
                    q[i] = p[i] - h;
                    let b = y.value(&q)?;
                    q[i] = p[i];
                    for k in 0..n {
                        dy[(k, i)] = (a[k] - b[k]) / (2.0 * h);
                    }
                }
                (yv, dy)
            }
        };
        let gamma = self.christoffel(p)?;
        Ok(&dy * &xv + gamma.contract(&xv, &yv))
    }

    /// Largest component of `div Ric − ½ dS`, with the outer derivatives of
    /// Ricci and scalar curvature taken by central differences.
    pub fn contracted_bianchi_residual(&self, p: &[f64]) -> Result<f64> {
        self.check_point(p)?;
        let n = self.dim();
        let ginv = self.inverse_metric(p)?;
        let gamma = self.christoffel(p)?;
        let ric = self.ricci(p)?;
        let h = FD_STEP_FIRST;
        let mut q = p.to_vec();
        let mut dric = Vec::with_capacity(n);
        let mut ds = DVector::zeros(n);
        for i in 0..n {
            q[i] = p[i] + h;
            let (rp, sp) = (self.ricci(&q)?, self.scalar(&q)?);
            q[i] = p[i] - h;
            let (rm, sm) = (self.ricci(&q)?, self.scalar(&q)?);
            q[i] = p[i];
            dric.push((rp - rm) / (2.0 * h));
            ds[i] = (sp - sm) / (2.0 * h);
        }
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let mut div = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let mut cov = dric[i][(j, k)];
                    for l in 0..n {
                        cov -= gamma.get(l, i, j) * ric[(l, k)] + gamma.get(l, i, k) * ric[(j, l)];
                    }
                    div += ginv[(i, j)] * cov;
                }
            }
            worst = worst.max((div - 0.5 * ds[k]).abs());
        }
        Ok(worst)
    }
}
