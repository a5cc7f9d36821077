//! Strongly convex domains given by their positively 2-homogeneous gauge.
//!
//! A body `C ⊂ R^{2n}` is stored through `H_C` with `H_C ≡ 1` on `∂C`.
//! Coordinates are interleaved, `(x₁,y₁,…,x_n,y_n)`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// JSON description of a body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum BodySpec {
    Ellipsoid {
        a: Vec<f64>,
    },
    Quadratic {
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
    },
    Transform {
        base: Box<BodySpec>,
        #[serde(rename = "M")]
        m: Vec<Vec<f64>>,
        #[serde(default)]
        b: Vec<f64>,
    },
}

/// How the Fenchel conjugate is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FenchelRoute {
    /// Closed forms (ellipsoid, quadratic, support function of a transform).
    Analytic,
    /// Damped Newton on `∇H(y) = w`, warm-started from the quadratic proxy.
    Newton,
}

#[derive(Debug, Clone)]
pub enum BodyKind {
    Ellipsoid {
        a: Vec<f64>,
    },
    Quadratic {
        q: DMatrix<f64>,
        q_inv: DMatrix<f64>,
    },
    Transform(Box<Transformed>),
}

#[derive(Debug, Clone)]
pub struct Transformed {
    pub base: ConvexBody,
    pub m: DMatrix<f64>,
    pub m_inv: DMatrix<f64>,
    pub b: DVector<f64>,
    /// `M⁻¹ b`
    beta: DVector<f64>,
    pub symplectic: bool,
}

impl Transformed {
    fn translated(&self) -> bool {
        self.b.iter().any(|&v| v != 0.0)
    }
}

/// A smooth strongly convex body with `H_C(x) = 1` on its boundary.
#[derive(Debug, Clone)]
pub struct ConvexBody {
    n: usize,
    kind: BodyKind,
    h_lo: f64,
    h_hi: f64,
    /// sup of |∇H(x)|²/H(x)
    kappa: f64,
    route: FenchelRoute,
    /// The body equals {½(x−c)ᵀQ(x−c) ≤ 1}; Q is also the Newton warm start.
    proxy_q: DMatrix<f64>,
    proxy_q_inv: DMatrix<f64>,
    proxy_center: DVector<f64>,
}

const FENCHEL_TOL: f64 = 1e-12;
const FENCHEL_MAX_ITER: usize = 50;

impl ConvexBody {
    /// Ellipsoid `E(a) = {π Σ|z_i|²/a_i ≤ 1}`.
    pub fn ellipsoid(a: &[f64]) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidBody(
                "ellipsoid needs at least one axis".into(),
            ));
        }
        if a.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::InvalidBody("ellipsoid axes must be positive".into()));
        }
        if a.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidBody(
                "ellipsoid axes must be non-decreasing".into(),
            ));
        }
        let n = a.len();
        let q = DMatrix::from_diagonal(&DVector::from_iterator(
            2 * n,
            (0..2 * n).map(|i| TAU / a[i / 2]),
        ));
        let q_inv = DMatrix::from_diagonal(&q.diagonal().map(|v| 1.0 / v));
        let h_lo = TAU / a[n - 1];
        let h_hi = TAU / a[0];
        Ok(ConvexBody {
            n,
            kind: BodyKind::Ellipsoid { a: a.to_vec() },
            h_lo,
            h_hi,
            kappa: 2.0 * h_hi,
            route: FenchelRoute::Analytic,
            proxy_q: q,
            proxy_q_inv: q_inv,
            proxy_center: DVector::zeros(2 * n),
        })
    }

    /// Quadratic gauge `H(x) = ½ xᵀQx`.
    pub fn quadratic(q: DMatrix<f64>) -> Result<Self> {
        let dim = q.nrows();
        if dim == 0 || !dim.is_multiple_of(2) || q.ncols() != dim {
            return Err(Error::InvalidBody(
                "Q must be a square matrix of even size".into(),
            ));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBody("Q has non-finite entries".into()));
        }
        if (&q - q.transpose()).amax() > 1e-12 * q.amax().max(1.0) {
            return Err(Error::InvalidBody("Q must be symmetric".into()));
        }
        let q = (&q + q.transpose()) * 0.5;
        let (vals, _) = linalg::sorted_eigen(&q);
        if vals[0] <= 0.0 {
            return Err(Error::InvalidBody("Q must be positive definite".into()));
        }
        let q_inv = q
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidBody("Q must be positive definite".into()))?
            .inverse();
        let h_hi = vals[dim - 1];
        Ok(ConvexBody {
            n: dim / 2,
            kind: BodyKind::Quadratic {
                q: q.clone(),
                q_inv: q_inv.clone(),
            },
            h_lo: vals[0],
            h_hi,
            kappa: 2.0 * h_hi,
            route: FenchelRoute::Analytic,
            proxy_q: q,
            proxy_q_inv: q_inv,
            proxy_center: DVector::zeros(dim),
        })
    }

    pub fn from_spec(spec: &BodySpec) -> Result<Self> {
        match spec {
            BodySpec::Ellipsoid { a } => Self::ellipsoid(a),
            BodySpec::Quadratic { q } => Self::quadratic(rows_to_matrix(q, "Q")?),
            BodySpec::Transform { base, m, b } => {
                let base = Self::from_spec(base)?;
                let m = rows_to_matrix(m, "M")?;
                let b = if b.is_empty() {
                    DVector::zeros(2 * base.n)
                } else {
                    DVector::from_column_slice(b)
                };
                transform(&base, &m, &b)
            }
        }
    }

    /// Parses a JSON body spec; syntax errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: BodySpec = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_spec(&spec)
    }

    pub fn to_spec(&self) -> BodySpec {
        match &self.kind {
            BodyKind::Ellipsoid { a } => BodySpec::Ellipsoid { a: a.clone() },
            BodyKind::Quadratic { q, .. } => BodySpec::Quadratic {
                q: matrix_to_rows(q),
            },
            BodyKind::Transform(t) => BodySpec::Transform {
                base: Box::new(t.base.to_spec()),
                m: matrix_to_rows(&t.m),
                b: t.b.iter().copied().collect(),
            },
        }
    }

    pub fn with_fenchel_route(mut self, route: FenchelRoute) -> Self {
        self.route = route;
        self
    }

    pub fn fenchel_route(&self) -> FenchelRoute {
        self.route
    }

    /// Half-dimension n.
    pub fn dim_n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &BodyKind {
        &self.kind
    }

    /// Lower strong-convexity bound of the gauge Hessian.
    pub fn h_lo(&self) -> f64 {
        self.h_lo
    }

    /// Upper strong-convexity bound of the gauge Hessian.
    pub fn h_hi(&self) -> f64 {
        self.h_hi
    }

    /// Upper bound on |∇H(x)|²/H(x).
    pub fn grad_sq_ratio(&self) -> f64 {
        self.kappa
    }

    /// Quadratic form and center with `C = {½(x−c)ᵀQ(x−c) ≤ 1}`.
    pub fn proxy(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.proxy_q, &self.proxy_center)
    }

    /// Axes `a` of the ellipsoid symplectomorphic to this body (up to translation),
    /// from the Williamson normal form of the proxy form. Sorted ascending.
    pub fn ellipsoid_equivalent(&self) -> Vec<f64> {
        if let BodyKind::Ellipsoid { a } = &self.kind {
            return a.clone();
        }
        let mut a: Vec<f64> = linalg::symplectic_modes(&self.proxy_q)
            .iter()
            .map(|m| TAU / m.omega)
            .collect();
        a.sort_by(f64::total_cmp);
        a
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != 2 * self.n {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.n,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `H_C(x)`.
    pub fn gauge_eval(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.h(&DVector::from_column_slice(x)))
    }

    /// `∇H_C(x)`, x ≠ 0.
    pub fn gauge_grad(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        let x = DVector::from_column_slice(x);
        if x.norm() == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(self.grad(&x))
    }

    /// `∇²H_C(x)`, x ≠ 0.
    pub fn gauge_hess(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let x = DVector::from_column_slice(x);
        if x.norm() == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(self.hess(&x))
    }

    /// `H_C*(w)`.
    pub fn fenchel_eval(&self, w: &[f64]) -> Result<f64> {
        self.check_dim(w)?;
        let w = DVector::from_column_slice(w);
        match self.route {
            FenchelRoute::Analytic => Ok(self.hstar(&w)),
            FenchelRoute::Newton => {
                if w.norm() == 0.0 {
                    return Ok(0.0);
                }
                let y = self.newton_conjugate(&w)?;
                Ok(w.dot(&y) - self.h(&y))
            }
        }
    }

    /// `∇H_C*(w)`, w ≠ 0.
    pub fn fenchel_grad(&self, w: &[f64]) -> Result<DVector<f64>> {
        self.check_dim(w)?;
        let w = DVector::from_column_slice(w);
        if w.norm() == 0.0 {
            return Err(Error::ZeroVector);
        }
        match self.route {
            FenchelRoute::Analytic => Ok(self.hstar_grad(&w)),
            FenchelRoute::Newton => self.newton_conjugate(&w),
        }
    }

    /// Support function `h_C(w) = 2 sqrt(H_C*(w))`.
    pub fn support_eval(&self, w: &[f64]) -> Result<f64> {
        Ok(2.0 * self.fenchel_eval(w)?.max(0.0).sqrt())
    }

    /// `∇²H_C*(w) = [∇²H_C(∇H_C*(w))]⁻¹`, w ≠ 0.
    pub fn fenchel_hess(&self, w: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(w)?;
        let w = DVector::from_column_slice(w);
        if w.norm() == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(self.hstar_hess(&w))
    }

    // Unchecked kernels used by the dual functionals.

    pub(crate) fn h(&self, x: &DVector<f64>) -> f64 {
        match &self.kind {
            BodyKind::Ellipsoid { a } => (0..self.n)
                .map(|i| PI * (x[2 * i].powi(2) + x[2 * i + 1].powi(2)) / a[i])
                .sum(),
            BodyKind::Quadratic { q, .. } => 0.5 * x.dot(&(q * x)),
            BodyKind::Transform(t) => {
                if !t.translated() {
                    t.base.h(&(&t.m_inv * x))
                } else {
                    match t.root(x) {
                        Some((s, _)) => 1.0 / (s * s),
                        None => 0.0,
                    }
                }
            }
        }
    }

    pub(crate) fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            BodyKind::Ellipsoid { a } => {
                DVector::from_iterator(2 * self.n, (0..2 * self.n).map(|i| TAU * x[i] / a[i / 2]))
            }
            BodyKind::Quadratic { q, .. } => q * x,
            BodyKind::Transform(t) => {
                if !t.translated() {
                    t.m_inv.transpose() * t.base.grad(&(&t.m_inv * x))
                } else {
                    match t.root(x) {
                        Some((s, u)) => {
                            let z = &u * s - &t.beta;
                            let nv = t.m_inv.transpose() * t.base.grad(&z);
                            let p = x * s;
                            let c = nv.dot(&p);
                            nv * (2.0 / (s * c))
                        }
                        None => DVector::zeros(2 * self.n),
                    }
                }
            }
        }
    }

    pub(crate) fn hess(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.kind {
            BodyKind::Ellipsoid { .. } | BodyKind::Quadratic { .. } => self.proxy_q.clone(),
            BodyKind::Transform(t) => {
                if !t.translated() {
                    let y = &t.m_inv * x;
                    t.m_inv.transpose() * t.base.hess(&y) * &t.m_inv
                } else {
                    let dim = 2 * self.n;
                    let Some((s, u)) = t.root(x) else {
                        return self.proxy_q.clone();
                    };
                    let g = 1.0 / s;
                    let z = &u * s - &t.beta;
                    let nv = t.m_inv.transpose() * t.base.grad(&z);
                    let phi2 = t.m_inv.transpose() * t.base.hess(&z) * &t.m_inv;
                    let p = x * s;
                    let c = nv.dot(&p);
                    let grad_g = &nv / c;
                    let left = (&phi2 - &nv * (&phi2 * &p + &nv).transpose() / c) / c;
                    let right = DMatrix::identity(dim, dim) - &p * nv.transpose() / c;
                    let hess_g = left * right / g;
                    let hm = &grad_g * grad_g.transpose() * 2.0 + hess_g * (2.0 * g);
                    (&hm + hm.transpose()) * 0.5
                }
            }
        }
    }

    pub(crate) fn hstar(&self, w: &DVector<f64>) -> f64 {
        match &self.kind {
            BodyKind::Ellipsoid { a } => {
                (0..self.n)
                    .map(|i| a[i] * (w[2 * i].powi(2) + w[2 * i + 1].powi(2)))
                    .sum::<f64>()
                    / (4.0 * PI)
            }
            BodyKind::Quadratic { q_inv, .. } => 0.5 * w.dot(&(q_inv * w)),
            BodyKind::Transform(t) => {
                let v = t.m.transpose() * w;
                if !t.translated() {
                    t.base.hstar(&v)
                } else {
                    let h = 2.0 * t.base.hstar(&v).max(0.0).sqrt() + w.dot(&t.b);
                    0.25 * h * h
                }
            }
        }
    }

    pub(crate) fn hstar_grad(&self, w: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            BodyKind::Ellipsoid { a } => {
                DVector::from_iterator(2 * self.n, (0..2 * self.n).map(|i| a[i / 2] * w[i] / TAU))
            }
            BodyKind::Quadratic { q_inv, .. } => q_inv * w,
            BodyKind::Transform(t) => {
                let v = t.m.transpose() * w;
                if !t.translated() {
                    &t.m * t.base.hstar_grad(&v)
                } else {
                    let hb = t.base.hstar(&v).max(0.0);
                    if hb == 0.0 {
                        return DVector::zeros(2 * self.n);
                    }
                    let rb = hb.sqrt();
                    let h = 2.0 * rb + w.dot(&t.b);
                    (&t.m * t.base.hstar_grad(&v) / rb + &t.b) * (0.5 * h)
                }
            }
        }
    }

    pub(crate) fn hstar_hess(&self, w: &DVector<f64>) -> DMatrix<f64> {
        match &self.kind {
            BodyKind::Ellipsoid { .. } | BodyKind::Quadratic { .. } => self.proxy_q_inv.clone(),
            BodyKind::Transform(t) if !t.translated() => {
                let v = t.m.transpose() * w;
                &t.m * t.base.hstar_hess(&v) * t.m.transpose()
            }
            BodyKind::Transform(_) => {
                let y = self.hstar_grad(w);
                spd_inverse(&self.hess(&y))
            }
        }
    }

    /// Damped Newton for `∇H(y) = w`, minimizing `H(y) − ⟨w,y⟩` with Armijo backtracking.
    fn newton_conjugate(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        let mut y = &self.proxy_q_inv * w;
        let scale = w.norm();
        let f = |y: &DVector<f64>| self.h(y) - w.dot(y);
        let mut fy = f(&y);
        let mut res = (self.grad(&y) - w).norm();
        let mut it = 0;
        while res > FENCHEL_TOL * scale && it < FENCHEL_MAX_ITER {
            let r = self.grad(&y) - w;
            let step = match self.hess(&y).cholesky() {
                Some(c) => -c.solve(&r),
                None => -&r / self.h_hi,
            };
            let slope = r.dot(&step);
            let mut t = 1.0;
            let new_res = loop {
                let cand = &y + &step * t;
                let fc = f(&cand);
                let rc = (self.grad(&cand) - w).norm();
                // near the optimum f stalls in rounding, the residual does not
                if fc <= fy + 1e-4 * t * slope || rc < 0.5 * res || t < 1e-12 {
                    y = cand;
                    fy = fc;
                    break rc;
                }
                t *= 0.5;
            };
            it += 1;
            if new_res >= res && new_res <= 1e3 * FENCHEL_TOL * scale {
                res = new_res;
                break;
            }
            res = new_res;
        }
        if !(res <= 1e3 * FENCHEL_TOL * scale) {
            return Err(Error::NewtonDivergence {
                residual: res,
                iterations: it,
            });
        }
        Ok(y)
    }
}

impl Transformed {
    /// Solves `F(s·M⁻¹x − β) = 1` for `s = 1/g(x)`; returns `(s, M⁻¹x)`.
    fn root(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        let u = &self.m_inv * x;
        let fu = self.base.h(&u);
        if fu <= 0.0 {
            return None;
        }
        let fb = self.base.h(&self.beta);
        let f = |s: f64| self.base.h(&(&u * s - &self.beta));
        let df = |s: f64| self.base.grad(&(&u * s - &self.beta)).dot(&u);
        let mut lo = 0.0;
        let mut hi = (1.0 + fb.sqrt()) / fu.sqrt();
        let mut s = hi;
        for _ in 0..200 {
            let v = f(s) - 1.0;
            if v.abs() <= 1e-15 {
                break;
            }
            if v > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let d = df(s);
            let mut next = s - v / d;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 1e-16 * s {
                s = next;
                break;
            }
            s = next;
        }
        Some((s, u))
    }
}

/// Body with gauge `x ↦ H_base(M⁻¹(x − b))`, i.e. the image `M·C + b`.
///
/// For `b ≠ 0` the stored gauge is the Minkowski gauge squared of the image,
/// so that it stays 2-homogeneous.
pub fn transform(base: &ConvexBody, m: &DMatrix<f64>, b: &DVector<f64>) -> Result<ConvexBody> {
    let dim = 2 * base.n;
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: m.nrows(),
        });
    }
    if b.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: b.len(),
        });
    }
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::SingularMatrix);
    }
    let m_inv = m.clone().try_inverse().ok_or(Error::SingularMatrix)?;
    let beta = &m_inv * b;
    let at_origin = base.h(&(-&beta));
    if at_origin >= 1.0 {
        return Err(Error::OriginNotInterior(at_origin));
    }
    let symplectic = linalg::is_symplectic(m, 1e-10);
    let proxy_q = m_inv.transpose() * &base.proxy_q * &m_inv;
    let proxy_q = (&proxy_q + proxy_q.transpose()) * 0.5;
    let proxy_q_inv = m * &base.proxy_q_inv * m.transpose();
    let proxy_center = b + m * &base.proxy_center;
    let data = Transformed {
        base: base.clone(),
        m: m.clone(),
        m_inv,
        b: b.clone(),
        beta,
        symplectic,
    };
    let translated = data.translated();
    // singular values of M⁻¹ are the reciprocals of those of M
    let mut body = ConvexBody {
        n: base.n,
        kind: BodyKind::Transform(Box::new(data)),
        h_lo: base.h_lo / (smax * smax),
        h_hi: base.h_hi / (smin * smin),
        kappa: 0.0,
        route: base.route,
        proxy_q: proxy_q.clone(),
        proxy_q_inv,
        proxy_center,
    };
    if translated
        || !matches!(
            base.kind,
            BodyKind::Ellipsoid { .. } | BodyKind::Quadratic { .. }
        )
    {
        sample_bounds(&mut body, translated);
    } else {
        body.kappa = 2.0 * linalg::sorted_eigen(&proxy_q).0[dim - 1];
    }
    Ok(body)
}

/// Empirical Hessian bounds and |∇H|²/H ratio from seeded directional samples.
fn sample_bounds(body: &mut ConvexBody, replace_hessian_bounds: bool) {
    let dim = 2 * body.n;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut lo, mut hi, mut kappa) = (f64::INFINITY, 0.0f64, 0.0f64);
    for _ in 0..400 {
        let x = DVector::from_iterator(dim, (0..dim).map(|_| rng.gen_range(-1.0..1.0)));
        if x.norm() < 1e-3 {
            continue;
        }
        let (vals, _) = linalg::sorted_eigen(&body.hess(&x));
        lo = lo.min(vals[0]);
        hi = hi.max(vals[dim - 1]);
        let g = body.grad(&x);
        kappa = kappa.max(g.norm_squared() / body.h(&x));
    }
    if replace_hessian_bounds {
        body.h_lo = 0.7 * lo;
        body.h_hi = 1.4 * hi;
    }
    body.kappa = 1.25 * kappa;
}

fn spd_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    match a.clone().cholesky() {
        Some(c) => c.inverse(),
        None => a
            .clone()
            .try_inverse()
            .unwrap_or_else(|| DMatrix::identity(a.nrows(), a.ncols())),
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    if r == 0 || rows.iter().any(|row| row.len() != r) {
        return Err(Error::InvalidBody(format!(
            "{name} must be a non-empty square matrix"
        )));
    }
    Ok(DMatrix::from_fn(r, r, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}
