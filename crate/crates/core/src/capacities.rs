//! Spectral capacities from indexed critical circles, the ellipsoid oracle,
//! and Besse/Zoll detection.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{CriticalCircle, IndexSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapMethod {
    IndexDictionary,
    Oracle,
}

/// One slot `c_k`. `value` is `None` when no candidate circle was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capacity {
    pub k: usize,
    pub value: Option<f64>,
    pub source: Option<String>,
    pub method: Option<CapMethod>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Besse {
    pub i: usize,
    pub tau: f64,
    pub mu: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub n: usize,
    pub k_max: usize,
    pub caps: Vec<Capacity>,
    pub besse: Option<Besse>,
    pub zoll: bool,
    pub warnings: Vec<String>,
}

impl CapacityReport {
    /// `c_k` if detected.
    pub fn value(&self, k: usize) -> Option<f64> {
        self.caps.iter().find(|c| c.k == k).and_then(|c| c.value)
    }

    /// Detected values in slot order, stopping at the first gap.
    pub fn values(&self) -> Vec<f64> {
        self.caps.iter().map_while(|c| c.value).collect()
    }

    /// True when some warning came from monotonicity enforcement.
    pub fn monotonicity_fired(&self) -> bool {
        self.warnings.iter().any(|w| w.starts_with("monotonicity"))
    }
}

/// Assembles `c_1..c_{k_max}`: a circle of transverse index `m` is a candidate for
/// slot `k = m/2 + 1`, and `c_k` is the least candidate action.
pub fn capacities_from_spectrum(
    circles: &[CriticalCircle],
    n: usize,
    k_max: usize,
) -> Result<CapacityReport> {
    let mut warnings = Vec::new();
    let mut best: Vec<Option<(f64, String, CapMethod)>> = vec![None; k_max];
    for c in circles {
        let m = c
            .transverse_index
            .ok_or_else(|| Error::MissingIndexData(c.id.clone()))?;
        if m % 2 == 1 {
            let e = Error::OddIndexPresent {
                id: c.id.clone(),
                index: m,
            };
            warn!("{e}");
            warnings.push(format!("odd index: {e}"));
            continue;
        }
        let k = m / 2 + 1;
        if k > k_max {
            continue;
        }
        let method = match c.index_source {
            Some(IndexSource::Oracle) => CapMethod::Oracle,
            _ => CapMethod::IndexDictionary,
        };
        let slot = &mut best[k - 1];
        if slot.as_ref().is_none_or(|(v, _, _)| c.action < *v) {
            *slot = Some((c.action, c.id.clone(), method));
        }
    }
    let mut caps = Vec::with_capacity(k_max);
    let mut prev: Option<f64> = None;
    for (i, b) in best.into_iter().enumerate() {
        let k = i + 1;
        match b {
            Some((v, id, method)) => {
                let v = match prev {
                    Some(p) if p > v => {
                        warnings.push(format!(
                            "monotonicity: c_{k} raised from {v} to {p}; an orbit is probably undetected"
                        ));
                        p
                    }
                    _ => v,
                };
                prev = Some(v);
                caps.push(Capacity {
                    k,
                    value: Some(v),
                    source: Some(id),
                    method: Some(method),
                });
            }
            None => {
                warnings.push(format!(
                    "missing: no circle with transverse index {} for c_{k}",
                    2 * k - 2
                ));
                caps.push(Capacity {
                    k,
                    value: None,
                    source: None,
                    method: None,
                });
            }
        }
    }
    let mut report = CapacityReport {
        n,
        k_max,
        caps,
        besse: None,
        zoll: false,
        warnings,
    };
    fill_verdicts(&mut report, 1e-6);
    Ok(report)
}

fn fill_verdicts(report: &mut CapacityReport, tol: f64) {
    match besse_check(report, tol) {
        Ok(b) => report.besse = b,
        Err(e) => report.warnings.push(format!("besse: {e}")),
    }
    match zoll_check(report, tol) {
        Ok(z) => report.zoll = z,
        Err(e) => report.warnings.push(format!("zoll: {e}")),
    }
}

/// The `k_max` smallest elements of `{m·a_i : m ≥ 1}` with multiplicity.
pub fn ellipsoid_oracle(a: &[f64], k_max: usize) -> Vec<f64> {
    let mut all: Vec<f64> = a
        .iter()
        .flat_map(|&ai| (1..=k_max).map(move |m| m as f64 * ai))
        .collect();
    all.sort_by(f64::total_cmp);
    all.truncate(k_max);
    all
}

/// Number of oracle values strictly below `t - tol·t` and within `tol·t` of `t`.
pub(crate) fn oracle_position(a: &[f64], t: f64, tol: f64) -> (usize, usize) {
    let bound = (t / a[0]).ceil() as usize + 2;
    let vals = ellipsoid_oracle(a, bound * a.len());
    let below = vals.iter().filter(|&&v| v < t - tol * t).count();
    let equal = vals.iter().filter(|&&v| (v - t).abs() <= tol * t).count();
    (below, equal)
}

/// Smallest `i` with `c_i = c_{i+n−1}` within `tol·c_i`, as `(i, τ = c_i, μ = 2(i−1)+n)`.
pub fn besse_check(report: &CapacityReport, tol: f64) -> Result<Option<Besse>> {
    let n = report.n;
    let vals = report.values();
    if vals.len() < n {
        return Err(Error::InsufficientCapacities {
            needed: n,
            have: vals.len(),
        });
    }
    for i in 1..=vals.len() + 1 - n {
        let (ci, cj) = (vals[i - 1], vals[i + n - 2]);
        if (ci - cj).abs() < tol * ci {
            return Ok(Some(Besse {
                i,
                tau: ci,
                mu: 2 * (i - 1) + n,
            }));
        }
    }
    Ok(None)
}

/// `c_1 = c_n` within `tol·c_1`.
pub fn zoll_check(report: &CapacityReport, tol: f64) -> Result<bool> {
    let n = report.n;
    let vals = report.values();
    if vals.len() < n {
        return Err(Error::InsufficientCapacities {
            needed: n,
            have: vals.len(),
        });
    }
    Ok((vals[0] - vals[n - 1]).abs() < tol * vals[0])
}

/// Detected capacities against the oracle of the ellipsoid-equivalent axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub axes: Vec<f64>,
    pub oracle: Vec<f64>,
    pub max_rel_error: Option<f64>,
    pub tol: f64,
    #[serde(rename = "match")]
    pub matches: bool,
}

pub fn compare_with_oracle(report: &CapacityReport, axes: &[f64], tol: f64) -> OracleComparison {
    let oracle = ellipsoid_oracle(axes, report.k_max);
    let mut worst: Option<f64> = None;
    let mut complete = true;
    for (c, o) in report.caps.iter().zip(&oracle) {
        match c.value {
            Some(v) => {
                let e = (v - o).abs() / o;
                worst = Some(worst.map_or(e, |w: f64| w.max(e)));
            }
            None => complete = false,
        }
    }
    let matches = complete && worst.is_some_and(|w| w < tol);
    OracleComparison {
        axes: axes.to_vec(),
        oracle,
        max_rel_error: worst,
        tol,
        matches,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loops::FourierLoop;
    use crate::spectrum::Route;

    fn circ(id: &str, action: f64, m: usize) -> CriticalCircle {
        let mut c = CriticalCircle::new(FourierLoop::zeros(1, 1), action, 0.0, id, Route::Free);
        c.id = id.into();
        c.transverse_index = Some(m);
        c.index_source = Some(IndexSource::Hessian);
        c
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(
            ellipsoid_oracle(&[1.0, 1.0], 5),
            vec![1.0, 1.0, 2.0, 2.0, 3.0]
        );
        assert_eq!(
            ellipsoid_oracle(&[1.0, 2.0], 5),
            vec![1.0, 2.0, 2.0, 3.0, 4.0]
        );
        assert_eq!(oracle_position(&[1.0, 2.0], 2.0, 1e-9), (1, 2));
    }

    #[test]
    fn e12_assembly_and_besse() {
        let cs = [
            circ("a", 1.0, 0),
            circ("b", 2.0, 2),
            circ("c", 2.0, 4),
            circ("d", 3.0, 6),
        ];
        let r = capacities_from_spectrum(&cs, 2, 4).unwrap();
        assert_eq!(r.values(), vec![1.0, 2.0, 2.0, 3.0]);
        assert_eq!(
            r.besse,
            Some(Besse {
                i: 2,
                tau: 2.0,
                mu: 4
            })
        );
        assert!(!r.zoll && r.warnings.is_empty());
    }

    #[test]
    fn gaps_are_missing() {
        let cs = [circ("a", 1.0, 0), circ("c", 2.0, 4), circ("d", 3.0, 6)];
        let r = capacities_from_spectrum(&cs, 2, 4).unwrap();
        assert_eq!(r.value(2), None);
        assert_eq!(r.value(3), Some(2.0));
        assert!(r.warnings.iter().any(|w| w.starts_with("missing")));
        assert!(!r.monotonicity_fired());
    }

    #[test]
    fn odd_and_missing_index() {
        let cs = [circ("a", 1.0, 0), circ("o", 1.5, 1)];
        let r = capacities_from_spectrum(&cs, 1, 1).unwrap();
        assert!(r.warnings.iter().any(|w| w.starts_with("odd")));
        let mut bad = circ("x", 1.0, 0);
        bad.transverse_index = None;
        assert!(matches!(
            capacities_from_spectrum(&[bad], 1, 1),
            Err(Error::MissingIndexData(_))
        ));
    }

    #[test]
    fn zoll_tolerance() {
        let cs = [circ("a", 1.0, 0), circ("b", 1.0 + 1e-9, 2)];
        let r = capacities_from_spectrum(&cs, 2, 2).unwrap();
        assert!(zoll_check(&r, 1e-6).unwrap());
        let short = capacities_from_spectrum(&cs[..1], 2, 1).unwrap();
        assert!(matches!(
            zoll_check(&short, 1e-6),
            Err(Error::InsufficientCapacities { .. })
        ));
    }
}
