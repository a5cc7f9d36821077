//! Clarke dual functionals on the truncated Fourier model.
//!
//! With `w = −J₀ẋ`, the mode-`k` coefficient of `w` is `2πk·x̂(k)`. All
//! integrals use the uniform trapezoid rule on a [`LoopGrid`]. Gradients
//! are taken with respect to the raw coefficient vector of a
//! [`FourierLoop`], which by Parseval is the L² gradient.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::body::ConvexBody;
use crate::error::{Error, Result};
use crate::linalg;
use crate::loops::{FourierLoop, LoopGrid};
use crate::profile::{smoothed_k, ApproximationProfile};

/// Body, optional profile and discretization.
#[derive(Debug, Clone)]
pub struct DualConfig {
    pub body: ConvexBody,
    pub profile: Option<ApproximationProfile>,
    pub grid_size: usize,
    pub l_max: usize,
    grid: LoopGrid,
}

/// Which pointwise conjugate enters ∫H*(−J₀ẋ).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conjugate {
    /// `H_C*`
    Gauge,
    /// `H*_η` from the profile
    Smoothed,
}

/// `ℋ` together with its coefficient gradient and `β = ∫∇H*(−J₀ẋ)`.
#[derive(Debug, Clone)]
pub struct ConjIntegral {
    pub value: f64,
    pub grad: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Pointwise conjugate Hessians along a loop, for Hessian-vector products.
#[derive(Debug, Clone)]
pub struct Linearization {
    mats: Vec<DMatrix<f64>>,
}

impl DualConfig {
    pub fn new(
        body: ConvexBody,
        profile: Option<ApproximationProfile>,
        l_max: usize,
        grid_size: usize,
    ) -> Result<Self> {
        let grid = LoopGrid::new(body.dim_n(), l_max, grid_size)?;
        Ok(DualConfig {
            body,
            profile,
            grid_size,
            l_max,
            grid,
        })
    }

    /// Same body and profile with another truncation; the grid grows if needed.
    pub fn with_l_max(&self, l_max: usize) -> Result<Self> {
        let mut g = self.grid_size;
        while g < 4 * l_max {
            g *= 2;
        }
        Self::new(self.body.clone(), self.profile.clone(), l_max, g)
    }

    pub fn with_profile(&self, profile: Option<ApproximationProfile>) -> Self {
        let mut c = self.clone();
        c.profile = profile;
        c
    }

    pub fn grid(&self) -> &LoopGrid {
        &self.grid
    }

    pub fn dim_n(&self) -> usize {
        self.body.dim_n()
    }

    pub fn zero_loop(&self) -> FourierLoop {
        FourierLoop::zeros(self.dim_n(), self.l_max)
    }

    fn conj_kind(&self) -> Conjugate {
        if self.profile.is_some() {
            Conjugate::Smoothed
        } else {
            Conjugate::Gauge
        }
    }

    /// Upper bound `h̄` on the Hessian of the Hamiltonian entering the free functional.
    pub fn hbar(&self) -> f64 {
        let hi = self.body.h_hi();
        match &self.profile {
            None => hi,
            Some(p) => {
                let kappa = self.body.grad_sq_ratio();
                let steps = 4000;
                let mut best = p.eta * hi;
                for j in 0..=steps {
                    let s = p.s_eps + (p.s_eta - p.s_eps) * j as f64 / steps as f64;
                    let (_, d, dd) = p.eval(s);
                    best = best.max(d * hi + dd * s * kappa);
                }
                best
            }
        }
    }

    /// Smallest `l` with `2π(l+1) > h̄`.
    pub fn reduction_level(&self) -> usize {
        let hb = self.hbar();
        let mut l = 1usize;
        while TAU * (l + 1) as f64 <= hb {
            l += 1;
        }
        l
    }

    fn pointwise(&self, conj: Conjugate, w: &DVector<f64>) -> (f64, DVector<f64>) {
        let b = &self.body;
        if w.iter().all(|&v| v == 0.0) {
            let v = match (conj, &self.profile) {
                (Conjugate::Smoothed, Some(p)) => p.zeta_eps,
                _ => 0.0,
            };
            return (v, DVector::zeros(w.len()));
        }
        let h = b.hstar(w);
        let g = b.hstar_grad(w);
        match (conj, &self.profile) {
            (Conjugate::Smoothed, Some(p)) => {
                let k = smoothed_k(p, h).map(|r| r.0).unwrap_or(1.0 / p.eta);
                (2.0 * k * h - p.phi(k * k * h), g * k)
            }
            _ => (h, g),
        }
    }

    fn pointwise_hess(&self, conj: Conjugate, w: &DVector<f64>) -> DMatrix<f64> {
        let b = &self.body;
        let dim = w.len();
        if w.iter().all(|&v| v == 0.0) {
            let (q, _) = b.proxy();
            let inv = q
                .clone()
                .try_inverse()
                .unwrap_or_else(|| DMatrix::identity(dim, dim));
            return match (conj, &self.profile) {
                (Conjugate::Smoothed, Some(p)) => inv / p.delta,
                _ => inv,
            };
        }
        let ph = b.hstar_hess(w);
        match (conj, &self.profile) {
            (Conjugate::Smoothed, Some(p)) => {
                let h = b.hstar(w);
                let k = smoothed_k(p, h).map(|r| r.0).unwrap_or(1.0 / p.eta);
                let (_, _, dd) = p.eval(k * k * h);
                // Sherman–Morrison inverse of φ''k²wwᵀ + φ'∇²H, with φ' = 1/k
                let y0 = b.hstar_grad(w);
                let c = dd * k.powi(4) / (1.0 + 2.0 * dd * k.powi(3) * h);
                &ph * k - &y0 * y0.transpose() * c
            }
            _ => ph,
        }
    }

    /// `∫H*(−J₀ẋ)` with coefficient gradient and `β`.
    pub fn conj_integral(&self, x: &FourierLoop, conj: Conjugate) -> ConjIntegral {
        let d = 2 * self.dim_n();
        let g = self.grid.size();
        let w = self.grid.neg_j_velocity(x);
        let mut total = 0.0;
        let mut gs = vec![0.0; g * d];
        for j in 0..g {
            let wj = DVector::from_column_slice(&w[j * d..(j + 1) * d]);
            let (v, gr) = self.pointwise(conj, &wj);
            total += v;
            gs[j * d..(j + 1) * d].copy_from_slice(gr.as_slice());
        }
        let (ghat, beta) = self.grid.analyze(&gs);
        let mut grad = ghat.into_vec();
        scale_by_k(&mut grad, d, self.l_max);
        ConjIntegral {
            value: total / g as f64,
            grad,
            beta,
        }
    }

    pub fn linearize(&self, x: &FourierLoop, conj: Conjugate) -> Linearization {
        let d = 2 * self.dim_n();
        let w = self.grid.neg_j_velocity(x);
        let mats = w
            .chunks_exact(d)
            .map(|c| self.pointwise_hess(conj, &DVector::from_column_slice(c)))
            .collect();
        Linearization { mats }
    }

    /// Euclidean Hessian of `∫H*(−J₀ẋ)` applied to `v`.
    pub fn conj_hvp(&self, lin: &Linearization, v: &[f64]) -> Vec<f64> {
        let d = 2 * self.dim_n();
        let vl = FourierLoop::from_vec(self.dim_n(), self.l_max, v.to_vec());
        let dw = self.grid.neg_j_velocity(&vl);
        let mut out = vec![0.0; dw.len()];
        for (j, m) in lin.mats.iter().enumerate() {
            let r = m * DVector::from_column_slice(&dw[j * d..(j + 1) * d]);
            out[j * d..(j + 1) * d].copy_from_slice(r.as_slice());
        }
        let (hat, _) = self.grid.analyze(&out);
        let mut res = hat.into_vec();
        scale_by_k(&mut res, d, self.l_max);
        res
    }
}

/// Multiplies mode-k blocks by 2πk.
fn scale_by_k(v: &mut [f64], d: usize, l_max: usize) {
    for (s, block) in v.chunks_exact_mut(d).enumerate() {
        let k = crate::loops::mode_of_slot(l_max, s) as f64;
        block.iter_mut().for_each(|c| *c *= TAU * k);
    }
}

/// Euclidean gradient of the action: `2πk x̂(k)`.
pub fn action_grad(x: &FourierLoop) -> Vec<f64> {
    let mut g = x.as_slice().to_vec();
    scale_by_k(&mut g, 2 * x.dim_n(), x.l_max());
    g
}

/// Gauge mode: `∫H_C*(−J₀ẋ)`. Profile present: `−A(x) + ∫H*_η(−J₀ẋ)`.
pub fn psi_value(cfg: &DualConfig, x: &FourierLoop) -> f64 {
    match cfg.conj_kind() {
        Conjugate::Gauge => cfg.conj_integral(x, Conjugate::Gauge).value,
        Conjugate::Smoothed => free_value(cfg, x),
    }
}

/// The free functional `−A(x) + ∫H*(−J₀ẋ)`, with `H*_η` if a profile is present
/// and `H_C*` otherwise; [`psi_grad_h1`] is its H¹ gradient.
pub fn free_value(cfg: &DualConfig, x: &FourierLoop) -> f64 {
    -x.action() + cfg.conj_integral(x, cfg.conj_kind()).value
}

/// Value and Euclidean gradient of the free functional.
pub fn free_value_grad(cfg: &DualConfig, x: &FourierLoop) -> (f64, Vec<f64>) {
    let ci = cfg.conj_integral(x, cfg.conj_kind());
    let ag = action_grad(x);
    let grad = ci.grad.iter().zip(&ag).map(|(a, b)| a - b).collect();
    (-x.action() + ci.value, grad)
}

/// `Ψ̃_C = ℋ_C / 𝒜` on the positive cone (always with the gauge conjugate).
pub fn psi_ratio_value(cfg: &DualConfig, x: &FourierLoop) -> Result<f64> {
    let a = x.action();
    if !(a > 0.0) {
        return Err(Error::NonpositiveAction(a));
    }
    Ok(cfg.conj_integral(x, Conjugate::Gauge).value / a)
}

/// L² (coefficient) gradient of `Ψ̃_C`.
pub fn psi_ratio_grad(cfg: &DualConfig, x: &FourierLoop) -> Result<FourierLoop> {
    let (_, g) = ratio_value_grad(cfg, x)?;
    Ok(FourierLoop::from_vec(x.dim_n(), x.l_max(), g))
}

pub(crate) fn ratio_value_grad(cfg: &DualConfig, x: &FourierLoop) -> Result<(f64, Vec<f64>)> {
    let a = x.action();
    if !(a > 0.0) {
        return Err(Error::NonpositiveAction(a));
    }
    let ci = cfg.conj_integral(x, Conjugate::Gauge);
    let psi = ci.value / a;
    let ag = action_grad(x);
    let g = ci
        .grad
        .iter()
        .zip(&ag)
        .map(|(h, da)| (h - psi * da) / a)
        .collect();
    Ok((psi, g))
}

/// H¹ gradient of the free functional: `Π(−J₀(x − ∇H*(−J₀ẋ)))`, per mode
/// `(ĝ(k) − x̂(k)) / (2πk)` where `g = ∇H*(−J₀ẋ)`.
pub fn psi_grad_h1(cfg: &DualConfig, x: &FourierLoop) -> FourierLoop {
    let (_, g) = free_value_grad(cfg, x);
    FourierLoop::from_vec(x.dim_n(), x.l_max(), to_h1(g, x.dim_n(), x.l_max()))
}

/// Converts a Euclidean coefficient gradient into the H¹ gradient.
pub(crate) fn to_h1(mut g: Vec<f64>, n: usize, l_max: usize) -> Vec<f64> {
    for (s, block) in g.chunks_exact_mut(2 * n).enumerate() {
        let k = crate::loops::mode_of_slot(l_max, s) as f64;
        block.iter_mut().for_each(|c| *c /= (TAU * k).powi(2));
    }
    g
}

/// `2π|k|` per coefficient: the H¹-orthonormal scaling.
pub(crate) fn h1_scale(n: usize, l_max: usize) -> Vec<f64> {
    (0..4 * n * l_max)
        .map(|i| TAU * crate::loops::mode_of_slot(l_max, i / (2 * n)).abs() as f64)
        .collect()
}

/// Euclidean Hessian of the free functional applied to `v`.
pub(crate) fn free_hvp(cfg: &DualConfig, lin: &Linearization, v: &[f64]) -> Vec<f64> {
    let mut out = cfg.conj_hvp(lin, v);
    let d = 2 * cfg.dim_n();
    for (s, (o, vb)) in out.chunks_exact_mut(d).zip(v.chunks_exact(d)).enumerate() {
        let k = crate::loops::mode_of_slot(cfg.l_max, s) as f64;
        for (a, b) in o.iter_mut().zip(vb) {
            *a -= TAU * k * b;
        }
    }
    out
}

/// Dense matrix `Dᵢ⁻¹ H Dⱼ⁻¹` over the index set `idx`, where `D = 2π|k|` and
/// `H` is given by its action on full coefficient vectors.
pub(crate) fn scaled_dense(
    idx: &[usize],
    scale: &[f64],
    n_full: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
) -> DMatrix<f64> {
    let m = idx.len();
    let mut h = DMatrix::zeros(m, m);
    let mut e = vec![0.0; n_full];
    for (c, &j) in idx.iter().enumerate() {
        e[j] = 1.0 / scale[j];
        let col = apply(&e);
        e[j] = 0.0;
        for (r, &i) in idx.iter().enumerate() {
            h[(r, c)] = col[i] / scale[i];
        }
    }
    (&h + h.transpose()) * 0.5
}

/// Coefficient indices of the complement of `ℍ_l`: modes `≤ −1` and `> l`.
fn complement_indices(n: usize, l_max: usize, l: usize) -> Vec<usize> {
    let d = 2 * n;
    (0..2 * l_max)
        .filter(|&s| {
            let k = crate::loops::mode_of_slot(l_max, s);
            k < 0 || k > l as i64
        })
        .flat_map(|s| s * d..(s + 1) * d)
        .collect()
}

fn low_indices(n: usize, l_max: usize, l: usize) -> Vec<usize> {
    let d = 2 * n;
    (1..=l as i64)
        .flat_map(|k| {
            let s = crate::loops::slot(l_max, k);
            s * d..(s + 1) * d
        })
        .collect()
}

fn check_threshold(cfg: &DualConfig, l: usize) -> Result<()> {
    let hbar = cfg.hbar();
    let lhs = TAU * (l + 1) as f64;
    if lhs <= hbar {
        return Err(Error::ThresholdViolated { lhs, hbar });
    }
    Ok(())
}

/// Factored complement Hessian reused across nearby reductions.
struct ComplementSolver {
    idx: Vec<usize>,
    scale: Vec<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl ComplementSolver {
    fn new(cfg: &DualConfig, x: &FourierLoop, idx: Vec<usize>) -> Result<Self> {
        let lin = cfg.linearize(x, cfg.conj_kind());
        let scale = h1_scale(cfg.dim_n(), cfg.l_max);
        let n_full = scale.len();
        let h = scaled_dense(&idx, &scale, n_full, |v| free_hvp(cfg, &lin, v));
        let chol = h.cholesky().ok_or_else(|| {
            Error::NoConvergence("complement hessian is not positive definite".into())
        })?;
        Ok(ComplementSolver { idx, scale, chol })
    }

    /// Chord-Newton iteration on the complement gradient.
    fn solve(&self, cfg: &DualConfig, x: &mut FourierLoop, tol: f64) -> Result<f64> {
        let mut res = f64::INFINITY;
        for _ in 0..60 {
            let (_, g) = free_value_grad(cfg, x);
            let rhs = DVector::from_iterator(
                self.idx.len(),
                self.idx.iter().map(|&i| g[i] / self.scale[i]),
            );
            res = rhs.norm();
            if res < tol {
                return Ok(res);
            }
            let step = self.chol.solve(&rhs);
            let data = x.as_mut_slice();
            for (r, &i) in self.idx.iter().enumerate() {
                data[i] -= step[r] / self.scale[i];
            }
        }
        if res < 1e3 * tol {
            return Ok(res);
        }
        Err(Error::NoConvergence(format!(
            "saddle reduction residual {res:e}"
        )))
    }
}

const REDUCE_TOL: f64 = 1e-13;

/// Minimizer `Y` of `y ↦ Ψ(x_low + y)` over the complement of `ℍ_l`, truncated at `L_big`.
pub fn saddle_reduce(
    cfg: &DualConfig,
    x_low: &FourierLoop,
    l: usize,
    l_big: usize,
) -> Result<FourierLoop> {
    if cfg.profile.is_none() {
        return Err(Error::InvalidInput(
            "saddle reduction needs a profile".into(),
        ));
    }
    if l_big < 2 * l {
        return Err(Error::InvalidInput(format!(
            "L_big = {l_big} must be at least 2l = {}",
            2 * l
        )));
    }
    check_threshold(cfg, l)?;
    let big = cfg.with_l_max(l_big)?;
    let n = cfg.dim_n();
    let mut x = x_low.project_modes(l).resized(l_big);
    let idx = complement_indices(n, l_big, l);
    // start from the convex quadratic model at the low part, polish with chord steps
    let solver = ComplementSolver::new(&big, &x, idx.clone())?;
    solver.solve(&big, &mut x, REDUCE_TOL).or_else(|_| {
        let again = ComplementSolver::new(&big, &x, idx.clone())?;
        again.solve(&big, &mut x, REDUCE_TOL)
    })?;
    let mut y = x;
    for k in 1..=l as i64 {
        y.mode_mut(k).iter_mut().for_each(|c| *c = 0.0);
    }
    Ok(y)
}

/// Result of [`reduced_hessian`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedHessian {
    /// Symmetrized Hessian of `ψ^l` in H¹-orthonormal coordinates.
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub index: usize,
    pub nullity: usize,
    pub null_tol: f64,
    pub asymmetry: f64,
    pub l: usize,
}

const FD_STEP: f64 = 1e-5;

/// Hessian of `ψ^l(x) = Ψ(x + Y(x))` at `ℙ_l(crit)` by Richardson-extrapolated
/// central differences of the reduced gradient.
pub fn reduced_hessian(cfg: &DualConfig, crit: &FourierLoop, l: usize) -> Result<ReducedHessian> {
    if cfg.profile.is_none() {
        return Err(Error::InvalidInput(
            "reduced hessian needs a profile".into(),
        ));
    }
    check_threshold(cfg, l)?;
    let n = cfg.dim_n();
    let l_big = cfg.l_max.max(2 * l);
    let big = cfg.with_l_max(l_big)?;
    let comp = complement_indices(n, l_big, l);
    let low = low_indices(n, l_big, l);
    let scale = h1_scale(n, l_big);

    let base_low = crit.project_modes(l).resized(l_big);
    let mut base = crit.resized(l_big);
    let solver = ComplementSolver::new(&big, &base, comp.clone())?;
    solver.solve(&big, &mut base, REDUCE_TOL)?;

    // reduced gradient in scaled coordinates at x_low + h·e_j
    let reduced_grad = |j: usize, h: f64| -> Result<Vec<f64>> {
        let mut x = base.clone();
        x.as_mut_slice()[low[j]] = base_low.as_slice()[low[j]] + h / scale[low[j]];
        solver.solve(&big, &mut x, REDUCE_TOL)?;
        let (_, g) = free_value_grad(&big, &x);
        Ok(low.iter().map(|&i| g[i] / scale[i]).collect())
    };

    let m = low.len();
    let mut raw = DMatrix::zeros(m, m);
    for j in 0..m {
        let gp1 = reduced_grad(j, FD_STEP)?;
        let gm1 = reduced_grad(j, -FD_STEP)?;
        let gp2 = reduced_grad(j, 2.0 * FD_STEP)?;
        let gm2 = reduced_grad(j, -2.0 * FD_STEP)?;
        for i in 0..m {
            let d1 = (gp1[i] - gm1[i]) / (2.0 * FD_STEP);
            let d2 = (gp2[i] - gm2[i]) / (4.0 * FD_STEP);
            raw[(i, j)] = (4.0 * d1 - d2) / 3.0;
        }
    }
    let norm = raw.amax().max(f64::MIN_POSITIVE);
    let asymmetry = (&raw - raw.transpose()).amax() / norm;
    if asymmetry > 1e-4 {
        return Err(Error::AsymmetryTooLarge(asymmetry));
    }
    let matrix = (&raw + raw.transpose()) * 0.5;
    let (vals, _) = linalg::sorted_eigen(&matrix);
    let spectral = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let null_tol = 1e-6 * spectral;
    let index = vals.iter().filter(|&&v| v < -null_tol).count();
    let nullity = vals.iter().filter(|&&v| v.abs() <= null_tol).count();
    Ok(ReducedHessian {
        matrix,
        eigenvalues: vals.iter().copied().collect(),
        index,
        nullity,
        null_tol,
        asymmetry,
        l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ellipse_cfg() -> DualConfig {
        DualConfig::new(ConvexBody::ellipsoid(&[1.0, 2.0]).unwrap(), None, 8, 64).unwrap()
    }

    #[test]
    fn plane_one_circle_value() {
        let cfg = ellipse_cfg();
        let r = 1.0 / PI.sqrt();
        let x = FourierLoop::single_mode(2, 8, 1, &[r, 0.0, 0.0, 0.0]);
        assert!((x.action() - 1.0).abs() < 1e-14);
        assert!((psi_value(&cfg, &x) - 1.0).abs() < 1e-13);
        assert_eq!(psi_value(&cfg, &cfg.zero_loop()), 0.0);
        let g = psi_ratio_grad(&cfg, &x.scaled(3.0)).unwrap();
        assert!(g.l2_norm_sq().sqrt() < 1e-12);
    }

    #[test]
    fn ratio_rejects_negative_action() {
        let cfg = ellipse_cfg();
        let x = FourierLoop::single_mode(2, 8, -1, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            psi_ratio_value(&cfg, &x),
            Err(Error::NonpositiveAction(_))
        ));
    }

    #[test]
    fn reduction_level_of_gauge_mode() {
        let cfg = ellipse_cfg();
        // h̄ = 2π for a₁ = 1, so l = 1 suffices
        assert_eq!(cfg.reduction_level(), 1);
    }
}
