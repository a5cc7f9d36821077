//! Critical points of the dual functionals.
//!
//! The ratio `Ψ̃_C` is descended in the H¹ metric and polished by Newton.
//! Saddles are reached by Newton from seeds close to them. The free smoothed
//! functional is solved by Newton on its gradient.

use std::f64::consts::TAU;

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dual::{
    action_grad, free_value_grad, h1_scale, ratio_value_grad, scaled_dense, to_h1, Conjugate,
    DualConfig, Linearization,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::loops::{circle_distance, FourierLoop};
use crate::spectrum::{CriticalCircle, Route};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Bound on the H^{1/2} norm of the H¹ gradient.
    pub grad_tol: f64,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    pub seed: u64,
    pub newton_polish: bool,
    /// Residual below which the Newton polish takes over.
    pub newton_switch: f64,
    pub max_newton: usize,
    pub dedup_action_tol: f64,
    pub dedup_distance_tol: f64,
    /// Highest iterate of the seed circles; derived from η when absent.
    pub m_max: Option<usize>,
    pub random_planes: usize,
    pub random_mixtures: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 2000,
            grad_tol: 1e-9,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            seed: 0,
            newton_polish: true,
            newton_switch: 1e-3,
            max_newton: 40,
            dedup_action_tol: 1e-6,
            dedup_distance_tol: 1e-4,
            m_max: None,
            random_planes: 4,
            random_mixtures: 4,
        }
    }
}

fn ratio_residual(x: &FourierLoop, g: &[f64]) -> f64 {
    let h1 = to_h1(g.to_vec(), x.dim_n(), x.l_max());
    FourierLoop::from_vec(x.dim_n(), x.l_max(), h1).h12_norm()
}

fn normalize(x: &FourierLoop) -> FourierLoop {
    x.scaled(1.0 / x.action().sqrt())
}

/// Descends `Ψ̃_C` from `seed`, returning the normalized representative.
pub fn minimize_ratio(
    cfg: &DualConfig,
    seed: &FourierLoop,
    opts: &SolverOptions,
) -> Result<CriticalCircle> {
    minimize_ratio_tagged(cfg, seed, opts, "seed")
}

fn minimize_ratio_tagged(
    cfg: &DualConfig,
    seed: &FourierLoop,
    opts: &SolverOptions,
    tag: &str,
) -> Result<CriticalCircle> {
    let a = seed.action();
    if !(a > 0.0) {
        return Err(Error::SeedNonpositiveAction(a));
    }
    let cfg_g = cfg.with_profile(None);
    let mut x = normalize(&seed.resized(cfg.l_max));
    let (mut psi, mut g) = ratio_value_grad(&cfg_g, &x)?;
    let mut res = ratio_residual(&x, &g);
    let mut it = 0;
    let mut t = 1.0;
    while res >= opts.grad_tol && it < opts.max_iter {
        if opts.newton_polish && res < opts.newton_switch {
            let (xn, pn, rn, used) = newton_ratio(&cfg_g, &x, opts)?;
            it += used;
            if rn < res {
                x = xn;
                psi = pn;
                res = rn;
                if res < opts.grad_tol {
                    break;
                }
                g = ratio_value_grad(&cfg_g, &x)?.1;
            }
        }
        let dir = to_h1(g.clone(), x.dim_n(), x.l_max());
        let slope: f64 = -g.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
        let mut accepted = false;
        for _ in 0..60 {
            let cand = x.add_scaled(
                &FourierLoop::from_vec(x.dim_n(), x.l_max(), dir.clone()),
                -t,
            );
            if cand.action() > 0.0 {
                let cand = normalize(&cand);
                let (pc, gc) = ratio_value_grad(&cfg_g, &cand)?;
                if pc <= psi + opts.armijo_c * t * slope {
                    x = cand;
                    psi = pc;
                    res = ratio_residual(&x, &gc);
                    g = gc;
                    accepted = true;
                    break;
                }
            }
            t *= opts.armijo_shrink;
        }
        it += 1;
        if !accepted {
            break;
        }
        t = (t * 2.0).min(4.0);
    }
    debug!(
        "{}",
        serde_json::json!({"event":"minimize_ratio","seed":tag,"value":psi,"residual":res,"iterations":it})
    );
    let mut c = CriticalCircle::new(x, psi, res, tag, Route::Ratio);
    c.converged = res < opts.grad_tol;
    c.iterations = it;
    Ok(c)
}

/// Euclidean Hessian of the ratio functional applied to `v`.
fn ratio_hvp(
    cfg: &DualConfig,
    lin: &Linearization,
    x: &FourierLoop,
    psi: f64,
    grad: &[f64],
    agrad: &[f64],
    v: &[f64],
) -> Vec<f64> {
    let a = x.action();
    let hv = cfg.conj_hvp(lin, v);
    let va = FourierLoop::from_vec(x.dim_n(), x.l_max(), v.to_vec());
    let hav = action_grad(&va);
    let ga: f64 = agrad.iter().zip(v).map(|(p, q)| p * q).sum();
    let gp: f64 = grad.iter().zip(v).map(|(p, q)| p * q).sum();
    hv.iter()
        .zip(&hav)
        .zip(grad.iter().zip(agrad))
        .map(|((h, ha), (gr, ag))| (h - psi * ha - gr * ga - ag * gp) / a)
        .collect()
}

/// Solves `M s = rhs` with `M = P H P + σ Σ uuᵀ`, the projection removing the
/// given null directions. LU first, symmetric pseudo-inverse as fallback.
fn projected_solve(h: &DMatrix<f64>, nulls: &[DVector<f64>], rhs: &DVector<f64>) -> DVector<f64> {
    let dim = h.nrows();
    let mut p = DMatrix::<f64>::identity(dim, dim);
    for u in nulls {
        p -= u * u.transpose();
    }
    let sigma = h.diagonal().amax().max(1e-12);
    let mut m = &p * h * &p;
    for u in nulls {
        m += u * u.transpose() * sigma;
    }
    let r = &p * rhs;
    if let Some(s) = m.clone().lu().solve(&r) {
        let err = (&m * &s - &r).norm();
        if s.iter().all(|v| v.is_finite())
            && err <= 1e-8 * r.norm().max(1e-300)
            && s.norm() <= 1e6 * r.norm() / sigma
        {
            return &p * s;
        }
    }
    let (vals, vecs) = linalg::sorted_eigen(&m);
    let cut = 1e-9 * vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let coords = vecs.transpose() * &r;
    let mut s = DVector::zeros(dim);
    for i in 0..dim {
        if vals[i].abs() > cut {
            s += vecs.column(i) * (coords[i] / vals[i]);
        }
    }
    &p * s
}

fn unit(v: DVector<f64>) -> Option<DVector<f64>> {
    let n = v.norm();
    (n > 0.0).then(|| v / n)
}

/// Orthonormal null directions in scaled coordinates.
fn null_directions(x: &FourierLoop, scale: &[f64], radial: bool) -> Vec<DVector<f64>> {
    let to_z = |l: &FourierLoop| {
        DVector::from_iterator(
            scale.len(),
            l.as_slice().iter().zip(scale).map(|(a, s)| a * s),
        )
    };
    let mut out = Vec::new();
    if radial {
        if let Some(u) = unit(to_z(x)) {
            out.push(u);
        }
    }
    let mut s1 = to_z(&x.shift_generator());
    for u in &out {
        let d = u.dot(&s1);
        s1 -= u * d;
    }
    if let Some(u) = unit(s1) {
        out.push(u);
    }
    out
}

/// Newton iterations on `∇Ψ̃ = 0`; returns the best iterate, its value, residual and steps.
fn newton_ratio(
    cfg: &DualConfig,
    x0: &FourierLoop,
    opts: &SolverOptions,
) -> Result<(FourierLoop, f64, f64, usize)> {
    let n = x0.dim_n();
    let l = x0.l_max();
    let scale = h1_scale(n, l);
    let idx: Vec<usize> = (0..scale.len()).collect();
    let mut x = x0.clone();
    let (mut psi, mut g) = ratio_value_grad(cfg, &x)?;
    let mut res = ratio_residual(&x, &g);
    let mut used = 0;
    for _ in 0..opts.max_newton {
        if res < 1e-3 * opts.grad_tol {
            break;
        }
        used += 1;
        let lin = cfg.linearize(&x, Conjugate::Gauge);
        let ag = action_grad(&x);
        let h = scaled_dense(&idx, &scale, scale.len(), |v| {
            ratio_hvp(cfg, &lin, &x, psi, &g, &ag, v)
        });
        let nulls = null_directions(&x, &scale, true);
        let rhs = -DVector::from_iterator(scale.len(), g.iter().zip(&scale).map(|(a, s)| a / s));
        let sz = projected_solve(&h, &nulls, &rhs);
        let step: Vec<f64> = sz.iter().zip(&scale).map(|(a, s)| a / s).collect();
        let step = FourierLoop::from_vec(n, l, step);
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..8 {
            let cand = x.add_scaled(&step, t);
            if cand.action() > 0.0 {
                let cand = normalize(&cand);
                let (pc, gc) = ratio_value_grad(cfg, &cand)?;
                let rc = ratio_residual(&cand, &gc);
                if rc < res {
                    x = cand;
                    psi = pc;
                    g = gc;
                    res = rc;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok((x, psi, res, used))
}

/// Newton from `seed` on the ratio functional; reaches saddles near the seed.
pub fn refine_critical_ratio(
    cfg: &DualConfig,
    seed: &FourierLoop,
    opts: &SolverOptions,
    tag: &str,
) -> Result<CriticalCircle> {
    let a = seed.action();
    if !(a > 0.0) {
        return Err(Error::SeedNonpositiveAction(a));
    }
    let cfg_g = cfg.with_profile(None);
    let x = normalize(&seed.resized(cfg.l_max));
    let (psi0, g0) = ratio_value_grad(&cfg_g, &x)?;
    let r0 = ratio_residual(&x, &g0);
    let (x, psi, res, used) = if r0 < opts.grad_tol {
        (x, psi0, r0, 0)
    } else {
        newton_ratio(&cfg_g, &x, opts)?
    };
    debug!(
        "{}",
        serde_json::json!({"event":"refine_ratio","seed":tag,"value":psi,"residual":res,"iterations":used})
    );
    let mut c = CriticalCircle::new(x, psi, res, tag, Route::Ratio);
    c.converged = res < opts.grad_tol;
    c.iterations = used;
    Ok(c)
}

fn free_residual(x: &FourierLoop, g: &[f64]) -> f64 {
    ratio_residual(x, g)
}

/// Zero of the H¹ gradient of the free smoothed functional near `seed`.
pub fn find_critical_free(
    cfg: &DualConfig,
    seed: &FourierLoop,
    opts: &SolverOptions,
) -> Result<CriticalCircle> {
    find_critical_free_tagged(cfg, seed, opts, "seed")
}

pub(crate) fn find_critical_free_tagged(
    cfg: &DualConfig,
    seed: &FourierLoop,
    opts: &SolverOptions,
    tag: &str,
) -> Result<CriticalCircle> {
    let profile = cfg
        .profile
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("free route needs a profile".into()))?;
    let collapse = 1e-8;
    let mut x = seed.resized(cfg.l_max);
    if x.h12_norm() < collapse {
        return Err(Error::CollapsedToZero);
    }
    let n = x.dim_n();
    let l = x.l_max();
    let scale = h1_scale(n, l);
    let idx: Vec<usize> = (0..scale.len()).collect();
    let (mut val, mut g) = free_value_grad(cfg, &x);
    let mut res = free_residual(&x, &g);
    let mut it = 0;
    while res >= 1e-3 * opts.grad_tol && it < opts.max_newton {
        it += 1;
        let lin = cfg.linearize(&x, Conjugate::Smoothed);
        let h = scaled_dense(&idx, &scale, scale.len(), |v| {
            crate::dual::free_hvp(cfg, &lin, v)
        });
        let nulls = null_directions(&x, &scale, false);
        let gz = DVector::from_iterator(scale.len(), g.iter().zip(&scale).map(|(a, s)| a / s));
        let mut sz = projected_solve(&h, &nulls, &(-&gz));
        let mut improved = false;
        for attempt in 0..12 {
            let step: Vec<f64> = sz.iter().zip(&scale).map(|(a, s)| a / s).collect();
            let cand = x.add_scaled(&FourierLoop::from_vec(n, l, step), 1.0);
            let (vc, gc) = free_value_grad(cfg, &cand);
            let rc = free_residual(&cand, &gc);
            if rc < res {
                x = cand;
                val = vc;
                g = gc;
                res = rc;
                improved = true;
                break;
            }
            // Gauss–Newton fallback: a damped least-squares step on ‖∇Ψ‖²
            let mu = 1e-6 * 10f64.powi(attempt) * h.amax();
            let hh = &h * &h + DMatrix::identity(h.nrows(), h.ncols()) * mu;
            sz = match hh.cholesky() {
                Some(c) => -c.solve(&(&h * &gz)),
                None => sz * 0.5,
            };
        }
        if x.h12_norm() < collapse {
            return Err(Error::CollapsedToZero);
        }
        if !improved {
            break;
        }
    }
    if x.h12_norm() < collapse {
        return Err(Error::CollapsedToZero);
    }
    let a = x.action();
    let action = if a > 0.0 {
        crate::dual::psi_ratio_value(&cfg.with_profile(None), &x)?
    } else {
        f64::NAN
    };
    let eps = profile.epsilon();
    let converged = res < opts.grad_tol;
    if converged && !(val > eps && val < profile.eta) {
        return Err(Error::ValueOutOfBand {
            value: val,
            lo: eps,
            hi: profile.eta,
        });
    }
    debug!(
        "{}",
        serde_json::json!({"event":"find_critical_free","seed":tag,"value":val,"action":action,"residual":res,"iterations":it})
    );
    let mut c = CriticalCircle::new(x, action, res, tag, Route::Free);
    c.converged = converged;
    c.iterations = it;
    c.free_value = Some(val);
    Ok(c)
}

/// Free critical point matching a ratio-route circle of value `T`:
/// `λ·x_c` with `λ = √(T s_T)` and `φ'(s_T) = T`.
pub fn free_seed_from_ratio(cfg: &DualConfig, circle: &CriticalCircle) -> Option<FourierLoop> {
    let p = cfg.profile.as_ref()?;
    let t = circle.action;
    let s = p.slope_preimage(t)?;
    let x = circle.normalized_loop().resized(cfg.l_max);
    Some(x.scaled((t * s).sqrt()))
}

/// A named starting loop.
#[derive(Debug, Clone)]
pub struct Seed {
    pub id: String,
    pub loop_: FourierLoop,
    /// Newton from the seed (saddle search) or descent (minimum search).
    pub newton: bool,
}

/// Real loop `Re(e^{2πimt}(re + i·im))` sampled and analyzed into modes.
fn complex_circle(cfg: &DualConfig, m: usize, re: &[f64], im: &[f64]) -> FourierLoop {
    let n = cfg.dim_n();
    let d = 2 * n;
    let g = cfg.grid().size();
    let mut samples = vec![0.0; g * d];
    for j in 0..g {
        let th = TAU * m as f64 * j as f64 / g as f64;
        for c in 0..d {
            samples[j * d + c] = th.cos() * re[c] - th.sin() * im[c];
        }
    }
    let (x, _) = cfg.grid().analyze(&samples);
    let mut x = x;
    for v in x.as_mut_slice() {
        if v.abs() < 1e-15 {
            *v = 0.0;
        }
    }
    x
}

/// The seed bank for a body.
pub fn seed_bank(cfg: &DualConfig, m_max: usize, opts: &SolverOptions) -> Vec<Seed> {
    let n = cfg.dim_n();
    let l = cfg.l_max;
    let m_max = m_max.min(l).max(1);
    let mut seeds = Vec::new();
    let (q, _) = cfg.body.proxy();
    for (j, mode) in linalg::symplectic_modes(q).iter().enumerate() {
        for m in 1..=m_max {
            let x = complex_circle(cfg, m, mode.re.as_slice(), mode.im.as_slice());
            if x.action() > 0.0 {
                seeds.push(Seed {
                    id: format!("proxy{j}_m{m}"),
                    loop_: x,
                    newton: true,
                });
            }
        }
    }
    for p in 0..n {
        for m in 1..=m_max {
            let mut c = vec![0.0; 2 * n];
            c[2 * p] = 1.0;
            seeds.push(Seed {
                id: format!("plane{p}_m{m}"),
                loop_: FourierLoop::single_mode(n, l, m as i64, &c),
                newton: true,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for i in 0..opts.random_planes {
        let u = linalg::random_unitary(n, &mut rng);
        let mut c = vec![0.0; 2 * n];
        c[0] = 1.0;
        let v = &u * DVector::from_vec(c);
        seeds.push(Seed {
            id: format!("rplane{i}"),
            loop_: FourierLoop::single_mode(n, l, 1, v.as_slice()),
            newton: false,
        });
    }
    for i in 0..opts.random_mixtures {
        let mut x = FourierLoop::zeros(n, l);
        for k in (-3i64..=3).filter(|&k| k != 0 && k.unsigned_abs() as usize <= l) {
            let amp = 1.0 / (k as f64).abs().powi(2);
            let amp = if k > 0 { amp } else { 0.3 * amp };
            for v in x.mode_mut(k) {
                *v = amp * rng.gen_range(-1.0..1.0);
            }
        }
        if x.action() <= 0.0 {
            continue;
        }
        seeds.push(Seed {
            id: format!("mix{i}"),
            loop_: x,
            newton: false,
        });
    }
    seeds
}

/// Runs every seed of the bank and deduplicates the converged circles.
pub fn multistart(
    cfg: &DualConfig,
    k_max: usize,
    opts: &SolverOptions,
) -> Result<Vec<CriticalCircle>> {
    if k_max == 0 {
        return Err(Error::InvalidInput("k_max must be at least 1".into()));
    }
    let cfg_g = cfg.with_profile(None);
    let m_max = match opts.m_max {
        Some(m) => m,
        None => default_m_max(cfg, k_max),
    };
    let mut out = Vec::new();
    for seed in seed_bank(&cfg_g, m_max, opts) {
        let r = if seed.newton {
            refine_critical_ratio(&cfg_g, &seed.loop_, opts, &seed.id)
        } else {
            minimize_ratio_tagged(&cfg_g, &seed.loop_, opts, &seed.id)
        };
        match r {
            Ok(c) if c.converged => out.push(c),
            Ok(c) => debug!(
                "{}",
                serde_json::json!({"event":"seed_unconverged","seed":seed.id,"residual":c.residual})
            ),
            Err(e) => debug!(
                "{}",
                serde_json::json!({"event":"seed_failed","seed":seed.id,"error":e.to_string()})
            ),
        }
    }
    let mut circles = deduplicate(out, opts.dedup_action_tol, opts.dedup_distance_tol);
    for (i, c) in circles.iter_mut().enumerate() {
        c.id = format!("c{i}");
    }
    Ok(circles)
}

/// `⌈η/T_min⌉ + 1` with η from the profile or estimated from the proxy spectrum.
pub fn default_m_max(cfg: &DualConfig, k_max: usize) -> usize {
    let a = cfg.body.ellipsoid_equivalent();
    let t_min = a[0];
    let eta = match &cfg.profile {
        Some(p) => p.eta,
        None => 1.05 * crate::capacities::ellipsoid_oracle(&a, k_max)[k_max - 1],
    };
    (eta / t_min).ceil() as usize + 1
}

/// Merges circles that agree in action and lie on the same S¹-orbit.
pub fn deduplicate(
    circles: Vec<CriticalCircle>,
    action_tol: f64,
    distance_tol: f64,
) -> Vec<CriticalCircle> {
    let mut sorted = circles;
    sorted.sort_by(|a, b| a.action.total_cmp(&b.action));
    let mut reps: Vec<CriticalCircle> = Vec::new();
    for c in sorted {
        let cn = c.normalized_loop();
        let hit = reps.iter().position(|r| {
            (r.action - c.action).abs() < action_tol
                && circle_distance(&r.normalized_loop(), &cn) < distance_tol
        });
        match hit {
            Some(i) => {
                let r = &mut reps[i];
                let mult = r.multiplicity + c.multiplicity;
                if c.residual < r.residual {
                    *r = c;
                }
                r.multiplicity = mult;
            }
            None => reps.push(c),
        }
    }
    reps.sort_by(|a, b| a.action.total_cmp(&b.action));
    reps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::ConvexBody;
    use std::f64::consts::PI;

    fn cfg(a: &[f64]) -> DualConfig {
        DualConfig::new(ConvexBody::ellipsoid(a).unwrap(), None, 8, 64).unwrap()
    }

    #[test]
    fn critical_seed_returns_immediately() {
        let c = cfg(&[1.0, 2.0]);
        let x = FourierLoop::single_mode(2, 8, 1, &[1.0 / PI.sqrt(), 0.0, 0.0, 0.0]);
        let r = minimize_ratio(&c, &x, &SolverOptions::default()).unwrap();
        assert!(r.iterations <= 1 && r.converged);
        assert!((r.action - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_seed_rejected() {
        let c = cfg(&[1.0, 2.0]);
        let x = FourierLoop::single_mode(2, 8, -1, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            minimize_ratio(&c, &x, &SolverOptions::default()),
            Err(Error::SeedNonpositiveAction(_))
        ));
    }

    #[test]
    fn dedup_of_shifted_copies() {
        let x = FourierLoop::single_mode(2, 4, 1, &[0.5, 0.1, 0.0, 0.0]);
        let a = CriticalCircle::new(x.clone(), 1.0, 1e-12, "a", Route::Ratio);
        let b = CriticalCircle::new(x.shift(0.37), 1.0, 1e-11, "b", Route::Ratio);
        let d = deduplicate(vec![a, b], 1e-6, 1e-4);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].multiplicity, 2);
        assert!(deduplicate(vec![], 1e-6, 1e-4).is_empty());
    }
}
