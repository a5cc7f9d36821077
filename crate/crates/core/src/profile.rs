//! Admissible approximating profiles `φ_η` and the smoothed Hamiltonian `H_η = φ_η ∘ H_C`.
//!
//! `φ` is linear on `[0, s_ε]` and on `[s_η, ∞)`. In between it is a quintic
//! Hermite spline through knots carrying `(φ, φ', φ'')`. The builder chooses
//! `φ'` as a monotone C¹ cubic, so `φ` is C² and convex by construction.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::body::ConvexBody;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileFamily {
    FstarLin,
    FLin,
}

/// Spectral data a profile was built against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumContext {
    pub epsilon: f64,
    pub gap: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Distinct spectrum values used (sorted).
    pub spectrum: Vec<f64>,
    /// Relative factor applied to ε (1 for exact spectra).
    pub eps_safety: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximationProfile {
    pub delta: f64,
    pub zeta_eps: f64,
    pub s_eps: f64,
    pub eta: f64,
    pub zeta_eta: f64,
    pub s_eta: f64,
    pub knots: Vec<f64>,
    /// `(φ, φ', φ'')` per knot, flattened.
    pub coeffs: Vec<f64>,
    pub family: ProfileFamily,
    pub context: SpectrumContext,
}

/// Builder knobs.
#[derive(Debug, Clone, Copy)]
pub struct ProfileOptions {
    pub s_eps: f64,
    /// Defaults to `max(2, 1.5·T_max/η)`.
    pub s_eta: Option<f64>,
    pub eps_safety: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            s_eps: 0.25,
            s_eta: None,
            eps_safety: 1.0,
        }
    }
}

impl ApproximationProfile {
    /// `(φ(s), φ'(s), φ''(s))`.
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        if s <= self.s_eps {
            return (self.delta * s - self.zeta_eps, self.delta, 0.0);
        }
        if s >= self.s_eta {
            return (self.eta * s - self.zeta_eta, self.eta, 0.0);
        }
        let i = match self.knots.iter().rposition(|&k| k <= s) {
            Some(i) => i.min(self.knots.len() - 2),
            None => 0,
        };
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        let c0 = &self.coeffs[3 * i..3 * i + 3];
        let c1 = &self.coeffs[3 * i + 3..3 * i + 6];
        quintic_hermite(a, b, c0, c1, s)
    }

    pub fn phi(&self, s: f64) -> f64 {
        self.eval(s).0
    }

    pub fn dphi(&self, s: f64) -> f64 {
        self.eval(s).1
    }

    /// `g(s) = φ'(s)s − φ(s)`, the value of the free functional along critical rays.
    pub fn g(&self, s: f64) -> f64 {
        let (p, d, _) = self.eval(s);
        d * s - p
    }

    /// Unique `s` with `φ'(s) = slope`, for `δ < slope < η`.
    pub fn slope_preimage(&self, slope: f64) -> Option<f64> {
        if !(slope > self.delta && slope < self.eta) {
            return None;
        }
        let (mut lo, mut hi) = (self.s_eps, self.s_eta);
        let mut s = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (_, d, dd) = self.eval(s);
            let f = d - slope;
            if f == 0.0 {
                return Some(s);
            }
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let mut next = if dd > 0.0 {
                s - f / dd
            } else {
                0.5 * (lo + hi)
            };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 1e-16 * s.abs().max(1.0) || hi - lo <= 1e-16 * hi {
                return Some(next);
            }
            s = next;
        }
        Some(s)
    }

    /// `ε = ½ min σ` (times the safety factor).
    pub fn epsilon(&self) -> f64 {
        self.context.epsilon
    }

    /// `H_η(x) = φ(H_C(x))`.
    pub fn smoothed_gauge(&self, body: &ConvexBody, x: &[f64]) -> Result<f64> {
        Ok(self.phi(body.gauge_eval(x)?))
    }

    /// `∇H_η(x) = φ'(H_C(x))∇H_C(x)`.
    pub fn smoothed_gauge_grad(&self, body: &ConvexBody, x: &[f64]) -> Result<DVector<f64>> {
        let h = body.gauge_eval(x)?;
        Ok(body.gauge_grad(x)? * self.dphi(h))
    }
}

fn quintic_hermite(a: f64, b: f64, c0: &[f64], c1: &[f64], s: f64) -> (f64, f64, f64) {
    let h = b - a;
    let u = (s - a) / h;
    let (u2, u3, u4, u5) = (u * u, u * u * u, u.powi(4), u.powi(5));
    let basis = [
        1.0 - 10.0 * u3 + 15.0 * u4 - 6.0 * u5,
        u - 6.0 * u3 + 8.0 * u4 - 3.0 * u5,
        0.5 * (u2 - 3.0 * u3 + 3.0 * u4 - u5),
        0.5 * (u3 - 2.0 * u4 + u5),
        -4.0 * u3 + 7.0 * u4 - 3.0 * u5,
        10.0 * u3 - 15.0 * u4 + 6.0 * u5,
    ];
    let d1 = [
        -30.0 * u2 + 60.0 * u3 - 30.0 * u4,
        1.0 - 18.0 * u2 + 32.0 * u3 - 15.0 * u4,
        0.5 * (2.0 * u - 9.0 * u2 + 12.0 * u3 - 5.0 * u4),
        0.5 * (3.0 * u2 - 8.0 * u3 + 5.0 * u4),
        -12.0 * u2 + 28.0 * u3 - 15.0 * u4,
        30.0 * u2 - 60.0 * u3 + 30.0 * u4,
    ];
    let d2 = [
        -60.0 * u + 180.0 * u2 - 120.0 * u3,
        -36.0 * u + 96.0 * u2 - 60.0 * u3,
        0.5 * (2.0 - 18.0 * u + 36.0 * u2 - 20.0 * u3),
        0.5 * (6.0 * u - 24.0 * u2 + 20.0 * u3),
        -24.0 * u + 84.0 * u2 - 60.0 * u3,
        60.0 * u - 180.0 * u2 + 120.0 * u3,
    ];
    let w = [
        c0[0],
        h * c0[1],
        h * h * c0[2],
        h * h * c1[2],
        h * c1[1],
        c1[0],
    ];
    let dot = |bs: &[f64; 6]| bs.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>();
    (dot(&basis), dot(&d1) / h, dot(&d2) / (h * h))
}

/// Per-condition outcome of [`profile_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub family: ProfileFamily,
    pub s_min: Option<f64>,
    pub s_max: Option<f64>,
    pub conditions: Vec<ConditionCheck>,
}

impl ProfileReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn failing(&self) -> Vec<&ConditionCheck> {
        self.conditions.iter().filter(|c| !c.pass).collect()
    }

    pub fn margin(&self, name: &str) -> Option<f64> {
        self.conditions
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.margin)
    }
}

const CHECK_GRID: usize = 20_000;

/// Evaluates every defining inequality of the profile's family.
pub fn profile_check(p: &ApproximationProfile) -> ProfileReport {
    let ctx = &p.context;
    let eps = ctx.epsilon;
    let mut out = Vec::new();
    let mut push = |name: &str, margin: f64| {
        out.push(ConditionCheck {
            name: name.to_string(),
            pass: margin > 0.0,
            margin,
        })
    };

    // (1) initial linear piece: 0 < ζ_ε < ε, 0 < δ < ε/4
    push(
        "initial_linear",
        p.zeta_eps
            .min(eps - p.zeta_eps)
            .min(p.delta)
            .min(eps / 4.0 - p.delta),
    );

    // (2) final linear piece: η > min σ and η ∉ σ
    let dist = ctx
        .spectrum
        .iter()
        .map(|t| (t - p.eta).abs())
        .fold(f64::INFINITY, f64::min);
    push("final_linear", (p.eta - ctx.t_min).min(dist - 1e-9));

    // C² matching of the spline with both linear pieces
    let mismatch = {
        let k = &p.knots;
        let c = &p.coeffs;
        let last = k.len() - 1;
        let e0 = [
            k[0] - p.s_eps,
            c[0] - (p.delta * p.s_eps - p.zeta_eps),
            c[1] - p.delta,
            c[2],
        ];
        let e1 = [
            k[last] - p.s_eta,
            c[3 * last] - (p.eta * p.s_eta - p.zeta_eta),
            c[3 * last + 1] - p.eta,
            c[3 * last + 2],
        ];
        e0.iter().chain(&e1).map(|v| v.abs()).fold(0.0, f64::max)
    };
    push("c2_matching", 1e-9 - mismatch);

    // (3) φ'' > 0 on (s_ε, s_η), plus φ' non-decreasing on the grid
    let mut min_dd = f64::INFINITY;
    let mut min_increment = f64::INFINITY;
    let mut prev = p.delta;
    for j in 1..CHECK_GRID {
        let s = p.s_eps + (p.s_eta - p.s_eps) * j as f64 / CHECK_GRID as f64;
        let (_, d, dd) = p.eval(s);
        min_dd = min_dd.min(dd);
        min_increment = min_increment.min(d - prev);
        prev = d;
    }
    push("strict_convexity", min_dd);
    push("monotone_slope", min_increment);

    let s_min = p.slope_preimage(ctx.t_min);
    let s_max = p.slope_preimage(ctx.t_max);
    // (4) g(s_min) > ε, (5) g(s_max) < η
    push(
        "lower_band",
        s_min.map_or(f64::NEG_INFINITY, |s| p.g(s) - eps),
    );
    push(
        "upper_band",
        s_max.map_or(f64::NEG_INFINITY, |s| p.eta - p.g(s)),
    );

    if p.family == ProfileFamily::FLin {
        push("knots_straddle_one", (1.0 - p.s_eps).min(p.s_eta - 1.0));
        push("phi_at_one_negative", -p.phi(1.0));
        push("slope_at_one", ctx.t_min - p.dphi(1.0));
        let bound = (1.0 / p.eta).min(ctx.gap / 3.0);
        push(
            "gap_condition",
            s_max.map_or(f64::NEG_INFINITY, |s| {
                let (ph, d, _) = p.eval(s);
                bound - (d * (s - 1.0) - ph)
            }),
        );
    }
    ProfileReport {
        family: p.family,
        s_min,
        s_max,
        conditions: out,
    }
}

/// Builds an admissible profile with default options.
pub fn build_profile(
    eta: f64,
    spectrum: &[f64],
    family: ProfileFamily,
) -> Result<ApproximationProfile> {
    build_profile_with(eta, spectrum, family, ProfileOptions::default())
}

/// Distinct sorted values, merging entries closer than `1e-9` relative.
pub fn distinct_spectrum(spectrum: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = spectrum.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for t in v {
        match out.last() {
            Some(&l) if (t - l).abs() <= 1e-9 * l.abs().max(1.0) => {}
            _ => out.push(t),
        }
    }
    out
}

pub fn build_profile_with(
    eta: f64,
    spectrum: &[f64],
    family: ProfileFamily,
    opts: ProfileOptions,
) -> Result<ApproximationProfile> {
    if spectrum.is_empty() {
        return Err(Error::InvalidInput("spectrum must be non-empty".into()));
    }
    if spectrum.iter().any(|t| !(t.is_finite() && *t > 0.0)) || !eta.is_finite() {
        return Err(Error::InvalidInput(
            "spectrum values and eta must be positive and finite".into(),
        ));
    }
    let sigma = distinct_spectrum(spectrum);
    let t_min = sigma[0];
    if eta <= t_min {
        return Err(Error::InfeasibleConditions(format!(
            "final_linear: eta = {eta} must exceed min spectrum = {t_min}"
        )));
    }
    let dist = sigma
        .iter()
        .map(|t| (t - eta).abs())
        .fold(f64::INFINITY, f64::min);
    if dist <= 1e-9 {
        return Err(Error::EtaInSpectrum {
            eta,
            distance: dist,
        });
    }
    let below: Vec<f64> = sigma.iter().copied().filter(|&t| t < eta).collect();
    let t_max = *below.last().unwrap();
    let gap = if below.len() >= 2 {
        below
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    } else {
        match sigma.iter().find(|&&t| t > eta) {
            Some(&next) => next - t_max,
            None => eta - t_max,
        }
    };
    let context = SpectrumContext {
        epsilon: 0.5 * t_min * opts.eps_safety,
        gap,
        t_min,
        t_max,
        spectrum: sigma.clone(),
        eps_safety: opts.eps_safety,
    };
    let s_eta_default = opts.s_eta.unwrap_or_else(|| 2.0_f64.max(1.5 * t_max / eta));
    match family {
        ProfileFamily::FstarLin => build_fstar(eta, context, opts.s_eps, s_eta_default),
        ProfileFamily::FLin => build_flin(eta, context, opts.s_eps, s_eta_default),
    }
}

/// Assembles a profile from knot slopes `p_i = φ'(s_i)`, using monotone
/// interior second derivatives and exact integration of the cubic slope.
fn assemble(
    family: ProfileFamily,
    context: SpectrumContext,
    delta: f64,
    zeta_eps: f64,
    eta: f64,
    knots: Vec<f64>,
    slopes: Vec<f64>,
) -> ApproximationProfile {
    let m = knots.len();
    let sec: Vec<f64> = (0..m - 1)
        .map(|i| (slopes[i + 1] - slopes[i]) / (knots[i + 1] - knots[i]))
        .collect();
    let mut dd = vec![0.0; m];
    for i in 1..m - 1 {
        dd[i] = sec[i - 1].min(sec[i]);
    }
    let mut vals = vec![delta * knots[0] - zeta_eps; m];
    for i in 0..m - 1 {
        let h = knots[i + 1] - knots[i];
        vals[i + 1] =
            vals[i] + h * (slopes[i] + slopes[i + 1]) / 2.0 + h * h * (dd[i] - dd[i + 1]) / 12.0;
    }
    let s_eta = knots[m - 1];
    let zeta_eta = eta * s_eta - vals[m - 1];
    let coeffs = (0..m).flat_map(|i| [vals[i], slopes[i], dd[i]]).collect();
    ApproximationProfile {
        delta,
        zeta_eps,
        s_eps: knots[0],
        eta,
        zeta_eta,
        s_eta,
        knots,
        coeffs,
        family,
        context,
    }
}

fn build_fstar(
    eta: f64,
    ctx: SpectrumContext,
    s_eps: f64,
    s_eta0: f64,
) -> Result<ApproximationProfile> {
    let eps = ctx.epsilon;
    let delta = eps / 8.0;
    let zeta_eps = 0.75 * eps;
    let p2 = ctx.t_max + 0.5 * (eta - ctx.t_max);
    let p3 = p2 + 0.5 * (eta - p2);
    let mut gamma = 1.5f64.max(0.5 * (s_eta0 - s_eps));
    let mut last_failure = String::new();
    for _ in 0..80 {
        let s2 = s_eps + gamma;
        let s_eta = s_eta0.max(s2 + 0.5);
        let knots = vec![s_eps, s_eps + 0.5 * gamma, s2, 0.5 * (s2 + s_eta), s_eta];
        let slopes = vec![delta, 0.5 * (delta + p2), p2, p3, eta];
        let p = assemble(
            ProfileFamily::FstarLin,
            ctx.clone(),
            delta,
            zeta_eps,
            eta,
            knots,
            slopes,
        );
        let rep = profile_check(&p);
        // keep some room below η for the critical values
        let upper = rep.margin("upper_band").unwrap_or(f64::NEG_INFINITY);
        if rep.all_pass() && upper >= 1e-3 * (eta - ctx.t_max) {
            return Ok(p);
        }
        last_failure = rep
            .failing()
            .iter()
            .map(|c| c.name.clone())
            .collect::<Vec<_>>()
            .join(",");
        if last_failure.is_empty() {
            last_failure = "upper_band".into();
        }
        gamma *= 0.85;
    }
    Err(Error::InfeasibleConditions(last_failure))
}

fn build_flin(
    eta: f64,
    ctx: SpectrumContext,
    s_eps: f64,
    s_eta0: f64,
) -> Result<ApproximationProfile> {
    if s_eps >= 1.0 {
        return Err(Error::InfeasibleConditions(
            "knots_straddle_one: s_eps must be below 1".into(),
        ));
    }
    let eps = ctx.epsilon;
    let delta = eps / 8.0;
    let p1 = 0.9 * ctx.t_min;
    let bound = (1.0 / eta).min(ctx.gap / 3.0).min(0.9 * (eta - ctx.t_max));
    let p2 = ctx.t_max + 0.5 * (eta - ctx.t_max);
    let p3 = p2 + 0.5 * (eta - p2);
    let mut tau = 0.25 * bound;
    let mut width_frac = 0.9;
    let mut last_failure = String::new();
    for _ in 0..60 {
        let w = width_frac * 0.5 * bound / (p2 - p1);
        let s2 = 1.0 + w;
        let s_eta = s_eta0.max(s2 + 0.5);
        let knots = vec![s_eps, 1.0, s2, 0.5 * (s2 + s_eta), s_eta];
        let slopes = vec![delta, p1, p2, p3, eta];
        // choose ζ_ε so that φ(1) = −τ
        let trial = assemble(
            ProfileFamily::FLin,
            ctx.clone(),
            delta,
            0.0,
            eta,
            knots.clone(),
            slopes.clone(),
        );
        let zeta_eps = trial.phi(1.0) + tau;
        let p = assemble(
            ProfileFamily::FLin,
            ctx.clone(),
            delta,
            zeta_eps,
            eta,
            knots,
            slopes,
        );
        let rep = profile_check(&p);
        if rep.all_pass() {
            return Ok(p);
        }
        last_failure = rep
            .failing()
            .iter()
            .map(|c| c.name.clone())
            .collect::<Vec<_>>()
            .join(",");
        if zeta_eps >= eps {
            tau *= 0.7;
        } else {
            width_frac *= 0.8;
        }
    }
    Err(Error::InfeasibleConditions(last_failure))
}

/// Solution `k` of `φ'(k²H*(w))·k = 1` and its scalar residual.
pub fn smoothed_k(p: &ApproximationProfile, hstar: f64) -> Result<(f64, f64)> {
    let (klo, khi) = (1.0 / p.eta, 1.0 / p.delta);
    if hstar <= 0.0 {
        return Ok((khi, 0.0));
    }
    if hstar * khi * khi <= p.s_eps {
        return Ok((khi, 0.0));
    }
    if hstar * klo * klo >= p.s_eta {
        return Ok((klo, 0.0));
    }
    let f = |k: f64| {
        let s = k * k * hstar;
        let (_, d, dd) = p.eval(s);
        (d * k - 1.0, dd * 2.0 * s + d)
    };
    let (mut lo, mut hi) = (klo, khi);
    if f(lo).0 > 1e-14 || f(hi).0 < -1e-14 {
        return Err(Error::BracketFailure);
    }
    let mut k = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, dv) = f(k);
        if v.abs() < 1e-15 {
            return Ok((k, v.abs()));
        }
        if v > 0.0 {
            hi = k;
        } else {
            lo = k;
        }
        let mut next = k - v / dv;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - k).abs() <= 1e-17 * k || hi - lo <= 4.0 * f64::EPSILON * hi {
            k = next;
            break;
        }
        k = next;
    }
    let r = f(k).0.abs();
    if r >= 1e-12 {
        return Err(Error::BracketFailure);
    }
    Ok((k, r))
}

/// `∇H*_η(w) = k(w)∇H_C*(w)`.
pub fn smoothed_fenchel_grad(
    body: &ConvexBody,
    p: &ApproximationProfile,
    w: &[f64],
) -> Result<DVector<f64>> {
    let grad = body.fenchel_grad(w)?;
    let (k, _) = smoothed_k(p, body.fenchel_eval(w)?)?;
    Ok(grad * k)
}

/// `H*_η(w) = 2kH*(w) − φ(k²H*(w))`; equals `ζ_ε` at `w = 0`.
pub fn smoothed_fenchel_eval(
    body: &ConvexBody,
    p: &ApproximationProfile,
    w: &[f64],
) -> Result<f64> {
    let h = body.fenchel_eval(w)?;
    let (k, _) = smoothed_k(p, h)?;
    Ok(2.0 * k * h - p.phi(k * k * h))
}
