//! Full analysis of a body: spectrum, indices, capacities, verdicts.

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::body::ConvexBody;
use crate::capacities::{
    capacities_from_spectrum, compare_with_oracle, ellipsoid_oracle, oracle_position,
    CapacityReport, OracleComparison,
};
use crate::dual::DualConfig;
use crate::error::{Error, Result};
use crate::profile::{build_profile_with, ApproximationProfile, ProfileFamily, ProfileOptions};
use crate::solver::{find_critical_free_tagged, free_seed_from_ratio, multistart, SolverOptions};
use crate::spectrum::{
    index_hessian, orbit_residual, reconstruct_orbit, transverse_from, CriticalCircle, IndexSource,
};

/// Relative tolerance for two actions to count as the same spectral value.
pub const SAME_ACTION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub l_max: usize,
    pub grid: usize,
    pub k_max: usize,
    pub eta: Option<f64>,
    pub family: ProfileFamily,
    pub eps_safety: f64,
    pub solver: SolverOptions,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            l_max: 32,
            grid: 512,
            k_max: 4,
            eta: None,
            family: ProfileFamily::FstarLin,
            eps_safety: 0.99,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub eta: f64,
    pub profile: ApproximationProfile,
    pub circles: Vec<CriticalCircle>,
    pub capacities: CapacityReport,
    pub oracle: OracleComparison,
}

/// `1.05 ×` the `k_max`-th oracle value of the ellipsoid-equivalent axes, moved
/// off the detected spectrum if it lands too close.
pub fn auto_eta(body: &ConvexBody, k_max: usize, spectrum: &[f64]) -> f64 {
    let axes = body.ellipsoid_equivalent();
    let mut eta = 1.05 * ellipsoid_oracle(&axes, k_max)[k_max - 1];
    let near = |e: f64| spectrum.iter().any(|t| (t - e).abs() < 1e-3 * e);
    while near(eta) {
        eta *= 1.01;
    }
    eta
}

fn distinct_actions(circles: &[CriticalCircle]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for c in circles {
        match out.last() {
            Some(&l) if (c.action - l).abs() <= SAME_ACTION * l => {}
            _ => out.push(c.action),
        }
    }
    out
}

/// Critical circles of the ratio functional with orbit residuals attached.
pub fn spectrum(body: &ConvexBody, opts: &PipelineOptions) -> Result<Vec<CriticalCircle>> {
    let cfg = DualConfig::new(body.clone(), None, opts.l_max, opts.grid)?;
    let mut sopts = opts.solver.clone();
    if sopts.m_max.is_none() {
        let axes = body.ellipsoid_equivalent();
        let eta = opts
            .eta
            .unwrap_or_else(|| 1.05 * ellipsoid_oracle(&axes, opts.k_max)[opts.k_max - 1]);
        sopts.m_max = Some((eta / axes[0]).ceil() as usize + 1);
    }
    let mut circles = multistart(&cfg, opts.k_max, &sopts)?;
    for c in circles.iter_mut() {
        let orbit = reconstruct_orbit(body, c)?;
        let (b, o) = orbit_residual(body, &orbit, orbit.period);
        c.boundary_residual = Some(b);
        c.ode_residual = Some(o);
    }
    if circles.is_empty() {
        warn!("{}", serde_json::json!({"event":"empty_spectrum"}));
    }
    Ok(circles)
}

/// Spectrum, free-route indices below `η`, capacities and the oracle comparison.
pub fn analyze(body: &ConvexBody, opts: &PipelineOptions) -> Result<Analysis> {
    if opts.k_max == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let mut circles = spectrum(body, opts)?;
    if circles.is_empty() {
        return Err(Error::NoConvergence("no critical circle found".into()));
    }
    let actions = distinct_actions(&circles);
    let eta = match opts.eta {
        Some(e) => e,
        None => auto_eta(body, opts.k_max, &actions),
    };
    let profile = build_profile_with(
        eta,
        &actions,
        opts.family,
        ProfileOptions {
            eps_safety: opts.eps_safety,
            ..ProfileOptions::default()
        },
    )?;
    info!(
        "{}",
        serde_json::json!({"event":"profile","eta":eta,"epsilon":profile.epsilon()})
    );
    let cfg = DualConfig::new(body.clone(), Some(profile.clone()), opts.l_max, opts.grid)?;
    let axes = body.ellipsoid_equivalent();
    let mut extra = Vec::new();

    let below = circles.iter().filter(|c| c.action < eta).count();
    for i in 0..below {
        let seed = free_seed_from_ratio(&cfg, &circles[i]).ok_or_else(|| {
            Error::InfeasibleConditions(format!("no slope preimage for {}", circles[i].action))
        })?;
        let free = find_critical_free_tagged(&cfg, &seed, &opts.solver, &circles[i].id)?;
        if !free.converged {
            extra.push(format!(
                "index unavailable: free route did not converge for {}",
                circles[i].id
            ));
            continue;
        }
        circles[i].free_value = free.free_value;
        let labelled = index_hessian(&cfg, &free).and_then(|rh| transverse_from(&rh));
        match labelled {
            Ok((m, nu)) => {
                circles[i].transverse_index = Some(m);
                circles[i].nullity = Some(nu);
                circles[i].index_source = Some(IndexSource::Hessian);
            }
            Err(Error::DegenerateCircle(nu)) => {
                circles[i].degenerate = true;
                circles[i].nullity = Some(nu);
            }
            Err(e) => extra.push(format!("index unavailable for {}: {e}", circles[i].id)),
        }
    }

    // Degenerate circles take the oracle label of their position in the multiset.
    let mut i = 0;
    while i < below {
        let t = circles[i].action;
        let mut j = i;
        while j < below && (circles[j].action - t).abs() <= SAME_ACTION * t {
            j += 1;
        }
        let (before, equal) = oracle_position(&axes, t, SAME_ACTION);
        let mut surplus = Vec::new();
        for (rank, c) in circles[i..j].iter_mut().enumerate() {
            if !c.degenerate {
                continue;
            }
            if rank < equal {
                c.transverse_index = Some(2 * (before + rank));
                c.index_source = Some(IndexSource::Oracle);
            } else {
                surplus.push(c.id.clone());
            }
        }
        if !surplus.is_empty() {
            extra.push(format!(
                "index unavailable: {} beyond the multiplicity {equal} of action {t}",
                surplus.join(",")
            ));
        }
        i = j;
    }

    let indexed: Vec<CriticalCircle> = circles
        .iter()
        .filter(|c| c.transverse_index.is_some())
        .cloned()
        .collect();
    let mut capacities = capacities_from_spectrum(&indexed, body.dim_n(), opts.k_max)?;
    capacities.warnings.extend(extra);
    let oracle = compare_with_oracle(&capacities, &axes, 1e-4);
    Ok(Analysis {
        eta,
        profile,
        circles,
        capacities,
        oracle,
    })
}
