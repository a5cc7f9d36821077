//! Finite-difference and identity checks over the calculus of a body and its
//! dual functionals.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::body::ConvexBody;
use crate::capacities::ellipsoid_oracle;
use crate::dual::{
    free_value, psi_grad_h1, psi_ratio_grad, psi_ratio_value, reduced_hessian, DualConfig,
};
use crate::error::Result;
use crate::loops::FourierLoop;
use crate::profile::{build_profile, ProfileFamily};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub check: String,
    pub samples: usize,
    pub max_error: f64,
    pub tol: f64,
    pub pass: bool,
}

impl CheckRow {
    fn new(check: &str, samples: usize, max_error: f64, tol: f64) -> Self {
        CheckRow {
            check: check.into(),
            samples,
            max_error,
            tol,
            pass: max_error < tol,
        }
    }
}

fn random_point(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
        if v.norm() > 0.2 {
            return v;
        }
    }
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Central difference gradient of a scalar function, Richardson extrapolated.
fn fd_grad(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    for i in 0..x.len() {
        let at = |s: f64| {
            let mut y = x.clone();
            y[i] += s;
            f(&y)
        };
        let d1 = (at(h) - at(-h)) / (2.0 * h);
        let d2 = (at(2.0 * h) - at(-2.0 * h)) / (4.0 * h);
        g[i] = (4.0 * d1 - d2) / 3.0;
    }
    g
}

fn random_loop(rng: &mut ChaCha8Rng, n: usize, l: usize) -> FourierLoop {
    let mut x = FourierLoop::zeros(n, l);
    for k in x.modes().collect::<Vec<_>>() {
        let amp = if k > 0 { 1.0 } else { 0.2 } / (k as f64).powi(2);
        for v in x.mode_mut(k) {
            *v = amp * rng.gen_range(-1.0..1.0);
        }
    }
    x
}

/// Directional derivative by Richardson extrapolated central differences.
fn fd_dir(f: impl Fn(&FourierLoop) -> f64, x: &FourierLoop, v: &FourierLoop, h: f64) -> f64 {
    let at = |s: f64| f(&x.add_scaled(v, s));
    let d1 = (at(h) - at(-h)) / (2.0 * h);
    let d2 = (at(2.0 * h) - at(-2.0 * h)) / (4.0 * h);
    (4.0 * d1 - d2) / 3.0
}

/// Every gradient and identity check for `body`, on `samples` random points.
pub fn gradcheck(
    body: &ConvexBody,
    l_max: usize,
    grid: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<CheckRow>> {
    let n = body.dim_n();
    let d = 2 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<DVector<f64>> = (0..samples).map(|_| random_point(&mut rng, d)).collect();
    let mut rows = Vec::new();

    let (mut eg, mut eh, mut efg, mut efh, mut inv, mut sup) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for x in &pts {
        let g = body.gauge_grad(x.as_slice())?;
        eg = eg.max(rel(&fd_grad(|y| body.h(y), x, 1e-4), &g));
        let hm = body.gauge_hess(x.as_slice())?;
        let mut fdh = hm.clone();
        for i in 0..d {
            let col = fd_grad(|y| body.grad(y)[i], x, 1e-4);
            fdh.set_row(i, &col.transpose());
        }
        eh = eh.max((&fdh - &hm).norm() / hm.norm());
        let w = x;
        let fg = body.fenchel_grad(w.as_slice())?;
        efg = efg.max(rel(&fd_grad(|y| body.hstar(y), w, 1e-4), &fg));
        let fh = body.fenchel_hess(w.as_slice())?;
        let mut fdf = fh.clone();
        for i in 0..d {
            let col = fd_grad(|y| body.hstar_grad(y)[i], w, 1e-4);
            fdf.set_row(i, &col.transpose());
        }
        efh = efh.max((&fdf - &fh).norm() / fh.norm());
        let back = body.fenchel_grad(g.as_slice())?;
        inv = inv.max(rel(&back, x));
        let hs = body.fenchel_eval(w.as_slice())?;
        let h = body.support_eval(w.as_slice())?;
        sup = sup.max((hs - 0.25 * h * h).abs() / hs);
    }
    rows.push(CheckRow::new("gauge_grad_fd", samples, eg, 1e-6));
    rows.push(CheckRow::new("gauge_hess_fd", samples, eh, 1e-6));
    rows.push(CheckRow::new("fenchel_grad_fd", samples, efg, 1e-6));
    rows.push(CheckRow::new("fenchel_hess_fd", samples, efh, 1e-6));
    rows.push(CheckRow::new("fenchel_inverse", samples, inv, 1e-9));
    rows.push(CheckRow::new("support_identity", samples, sup, 1e-9));

    let cfg = DualConfig::new(body.clone(), None, l_max, grid)?;
    let loops = samples.min(10);
    let mut er = 0.0f64;
    for _ in 0..loops {
        let x = random_loop(&mut rng, n, l_max)
            .add_scaled(&FourierLoop::single_mode(n, l_max, 1, &vec![0.5; d]), 1.0);
        let v = random_loop(&mut rng, n, l_max);
        let g = psi_ratio_grad(&cfg, &x)?;
        let an: f64 = g
            .as_slice()
            .iter()
            .zip(v.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        let fd = fd_dir(
            |y| psi_ratio_value(&cfg, y).unwrap_or(f64::NAN),
            &x,
            &v,
            1e-4,
        );
        er = er.max((an - fd).abs() / an.abs().max(1e-3));
    }
    rows.push(CheckRow::new("ratio_grad_fd", loops, er, 1e-6));

    let axes = body.ellipsoid_equivalent();
    let spec = ellipsoid_oracle(&axes, 6);
    let eta = 1.05 * spec[2];
    let eta = if spec.iter().any(|t| (t - eta).abs() < 1e-3 * eta) {
        eta * 1.01
    } else {
        eta
    };
    let profile = build_profile(eta, &spec, ProfileFamily::FstarLin)?;
    let pcfg = cfg.with_profile(Some(profile));
    let mut ef = 0.0f64;
    for _ in 0..loops {
        let x = random_loop(&mut rng, n, l_max).scaled(0.3);
        let v = random_loop(&mut rng, n, l_max);
        let an = psi_grad_h1(&pcfg, &x).h1_inner(&v);
        let fd = fd_dir(|y| free_value(&pcfg, y), &x, &v, 1e-4);
        ef = ef.max((an - fd).abs() / an.abs().max(1e-3));
    }
    rows.push(CheckRow::new("free_grad_h1_fd", loops, ef, 1e-6));

    // reduced Hessian at the minimizing circle of the free functional
    let a0 = axes[0];
    let p = pcfg.profile.as_ref().unwrap();
    let asym = match p.slope_preimage(a0) {
        Some(s) => {
            let cfg_r = pcfg.clone();
            let circles = crate::solver::multistart(
                &cfg.with_l_max(l_max.min(16))?,
                1,
                &crate::solver::SolverOptions {
                    m_max: Some(1),
                    random_planes: 1,
                    random_mixtures: 0,
                    ..Default::default()
                },
            )?;
            match circles.first() {
                Some(c) => {
                    let x = c.normalized_loop().resized(l_max).scaled((a0 * s).sqrt());
                    let free = crate::solver::find_critical_free(&cfg_r, &x, &Default::default())?;
                    let rh = reduced_hessian(&cfg_r, &free.loop_, cfg_r.reduction_level())?;
                    rh.asymmetry
                }
                None => f64::INFINITY,
            }
        }
        None => f64::INFINITY,
    };
    rows.push(CheckRow::new("reduced_hessian_symmetry", 1, asym, 1e-6));
    Ok(rows)
}
