//! Critical circles, reconstructed Reeb orbits and transverse indices.

use std::f64::consts::TAU;

use nalgebra::DVector;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::body::ConvexBody;
use crate::dual::{reduced_hessian, Conjugate, DualConfig, ReducedHessian};
use crate::error::{Error, Result};
use crate::loops::FourierLoop;

/// Which functional produced a circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Ratio,
    Free,
}

/// How a transverse index was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexSource {
    Hessian,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed_id: String,
    pub route: Route,
}

/// A deduplicated S¹-orbit of critical points of the dual functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalCircle {
    pub id: String,
    /// Normalized representative (A = 1) on the ratio route, raw critical point on the free route.
    #[serde(rename = "loop")]
    pub loop_: FourierLoop,
    /// `Ψ_C` of the normalized loop.
    pub action: f64,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub transverse_index: Option<usize>,
    pub nullity: Option<usize>,
    pub degenerate: bool,
    pub index_source: Option<IndexSource>,
    pub multiplicity: usize,
    pub provenance: Provenance,
    /// Value of the free functional at the matching free critical point.
    pub free_value: Option<f64>,
    pub boundary_residual: Option<f64>,
    pub ode_residual: Option<f64>,
}

impl CriticalCircle {
    pub(crate) fn new(
        loop_: FourierLoop,
        action: f64,
        residual: f64,
        seed_id: &str,
        route: Route,
    ) -> Self {
        CriticalCircle {
            id: String::new(),
            loop_,
            action,
            residual,
            converged: false,
            iterations: 0,
            transverse_index: None,
            nullity: None,
            degenerate: false,
            index_source: None,
            multiplicity: 1,
            provenance: Provenance {
                seed_id: seed_id.to_string(),
                route,
            },
            free_value: None,
            boundary_residual: None,
            ode_residual: None,
        }
    }

    /// The representative rescaled to action one.
    pub fn normalized_loop(&self) -> FourierLoop {
        let a = self.loop_.action();
        self.loop_.scaled(1.0 / a.sqrt())
    }
}

/// Samples of a closed characteristic with its period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub points: Vec<Vec<f64>>,
    pub period: f64,
}

/// `y = (Ψx + β)/√Ψ`, `T = Ψ`, from the normalized loop of the circle.
pub fn reconstruct_orbit(body: &ConvexBody, circle: &CriticalCircle) -> Result<Orbit> {
    let x = &circle.loop_;
    let a = x.action();
    if !(a > 0.0) {
        return Err(Error::NonpositiveAction(a));
    }
    let x = circle.normalized_loop();
    let l = x.l_max();
    let mut size = 512;
    while size < 8 * l {
        size *= 2;
    }
    let cfg = DualConfig::new(body.clone(), None, l, size)?;
    let ci = cfg.conj_integral(&x, Conjugate::Gauge);
    let psi = ci.value;
    let pos = cfg.grid().positions(&x);
    let d = 2 * body.dim_n();
    let rt = psi.sqrt();
    let points = pos
        .chunks_exact(d)
        .map(|p| {
            p.iter()
                .zip(&ci.beta)
                .map(|(xi, b)| (psi * xi + b) / rt)
                .collect()
        })
        .collect();
    Ok(Orbit {
        points,
        period: psi,
    })
}

/// `(max |H(y_j) − 1|, max ‖ẏ_j − T J₀∇H(y_j)‖ / (T max‖∇H‖))`, with `ẏ` from
/// spectral differentiation of the samples.
pub fn orbit_residual(body: &ConvexBody, orbit: &Orbit, period: f64) -> (f64, f64) {
    let g = orbit.points.len();
    let d = 2 * body.dim_n();
    let mut vel = vec![vec![0.0; d]; g];
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(g);
    let inv = planner.plan_fft_inverse(g);
    let mut buf = vec![Complex64::new(0.0, 0.0); g];
    for c in 0..d {
        for (j, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(orbit.points[j][c], 0.0);
        }
        fwd.process(&mut buf);
        for (m, b) in buf.iter_mut().enumerate() {
            let k = if m <= g / 2 {
                m as f64
            } else {
                m as f64 - g as f64
            };
            if 2 * m == g {
                *b = Complex64::new(0.0, 0.0);
            } else {
                *b *= Complex64::new(0.0, TAU * k) / g as f64;
            }
        }
        inv.process(&mut buf);
        for (j, b) in buf.iter().enumerate() {
            vel[j][c] = b.re;
        }
    }
    let mut boundary: f64 = 0.0;
    let mut gmax: f64 = 0.0;
    let mut defects = Vec::with_capacity(g);
    for (p, v) in orbit.points.iter().zip(&vel) {
        let y = DVector::from_column_slice(p);
        boundary = boundary.max((body.h(&y) - 1.0).abs());
        let gr = body.grad(&y);
        gmax = gmax.max(gr.norm());
        let mut defect = 0.0;
        for q in 0..body.dim_n() {
            let jx = -gr[2 * q + 1] * period;
            let jy = gr[2 * q] * period;
            defect += (v[2 * q] - jx).powi(2) + (v[2 * q + 1] - jy).powi(2);
        }
        defects.push(defect.sqrt());
    }
    let ode = defects.iter().copied().fold(0.0, f64::max) / (period * gmax);
    (boundary, ode)
}

/// `(transverse_index, nullity)` from the reduced Hessian at a free critical point.
///
/// The radial direction is always one negative direction of the free
/// functional, so the transverse index is the Morse index minus one.
pub fn index_of(cfg: &DualConfig, circle: &CriticalCircle) -> Result<(usize, usize)> {
    let rh = index_hessian(cfg, circle)?;
    transverse_from(&rh)
}

pub(crate) fn transverse_from(rh: &ReducedHessian) -> Result<(usize, usize)> {
    if rh.nullity > 1 {
        return Err(Error::DegenerateCircle(rh.nullity));
    }
    if rh.index == 0 {
        return Err(Error::NoConvergence(
            "free critical point shows no radial descent direction".into(),
        ));
    }
    Ok((rh.index - 1, rh.nullity))
}

/// The reduced Hessian used by [`index_of`].
pub fn index_hessian(cfg: &DualConfig, circle: &CriticalCircle) -> Result<ReducedHessian> {
    if cfg.profile.is_none() {
        return Err(Error::InvalidInput(
            "index computation needs a profile".into(),
        ));
    }
    let l = cfg.reduction_level();
    reduced_hessian(cfg, &circle.loop_.resized(cfg.l_max), l)
}
