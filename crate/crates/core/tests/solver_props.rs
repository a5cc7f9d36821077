use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use symcap::body::ConvexBody;
use symcap::dual::DualConfig;
use symcap::linalg::random_unitary;
use symcap::loops::FourierLoop;
use symcap::profile::{build_profile, ProfileFamily};
use symcap::solver::{
    deduplicate, find_critical_free, minimize_ratio, multistart, refine_critical_ratio,
    SolverOptions,
};
use symcap::Error;

const L: usize = 8;

fn cfg(a: &[f64]) -> DualConfig {
    DualConfig::new(ConvexBody::ellipsoid(a).unwrap(), None, L, 64).unwrap()
}

fn circle(n: usize, l: usize, m: i64, plane: usize) -> FourierLoop {
    let mut c = vec![0.0; 2 * n];
    c[2 * plane] = 1.0 / (PI * m as f64).sqrt();
    FourierLoop::single_mode(n, l, m, &c)
}

fn perturbed(x: &FourierLoop, noise: &[f64], size: f64) -> FourierLoop {
    let mut y = x.clone();
    for (v, e) in y.as_mut_slice().iter_mut().zip(noise) {
        *v += size * e;
    }
    y
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rotated_seed_descends_to_systole(seed in 0u64..10_000, noise in prop::collection::vec(-1.0f64..1.0, 4 * 2 * L)) {
        let c = cfg(&[1.0, 2.0]);
        let u = random_unitary(2, &mut ChaCha8Rng::seed_from_u64(seed));
        let x = perturbed(&circle(2, L, 1, 0).map_coeffs(&u), &noise, 0.02);
        prop_assume!(x.action() > 0.1);
        let r = minimize_ratio(&c, &x, &SolverOptions::default()).unwrap();
        prop_assert!(r.converged);
        prop_assert!((r.action - 1.0).abs() < 1e-7, "{}", r.action);
        prop_assert!(r.residual < 1e-9);
        prop_assert!(r.iterations <= 200, "{}", r.iterations);
    }

    #[test]
    fn shifted_seed_gives_same_value(th in 0.0f64..1.0, noise in prop::collection::vec(-1.0f64..1.0, 4 * 2 * L)) {
        let c = cfg(&[1.0, 1.6]);
        let x = perturbed(&circle(2, L, 1, 0).add_scaled(&circle(2, L, 1, 1), 0.5), &noise, 0.02);
        let o = SolverOptions::default();
        let a = minimize_ratio(&c, &x, &o).unwrap();
        let b = minimize_ratio(&c, &x.shift(th), &o).unwrap();
        prop_assert!((a.action - b.action).abs() < 1e-9);
    }

    #[test]
    fn scaled_body_scales_value(lam in 0.5f64..2.0) {
        let o = SolverOptions::default();
        let x = perturbed(&circle(2, L, 1, 0), &[0.01; 4 * 2 * L], 1.0);
        let base = minimize_ratio(&cfg(&[1.0, 1.5]), &x, &o).unwrap().action;
        let big = minimize_ratio(&cfg(&[lam * lam, 1.5 * lam * lam]), &x, &o).unwrap().action;
        prop_assert!((big - lam * lam * base).abs() < 1e-8 * big);
    }
}

#[test]
fn ball_systole_is_one() {
    let c = cfg(&[1.0, 1.0]);
    let noise: Vec<f64> = (0..4 * 2 * L)
        .map(|i| ((i * 37 % 11) as f64 - 5.0) / 5.0)
        .collect();
    let x = perturbed(&circle(2, L, 1, 0), &noise, 0.03);
    let r = minimize_ratio(&c, &x, &SolverOptions::default()).unwrap();
    assert!((r.action - 1.0).abs() < 1e-7 && r.residual < 1e-9);
}

fn free_cfg() -> DualConfig {
    let p = build_profile(2.5, &[1.0, 2.0, 2.0, 3.0], ProfileFamily::FstarLin).unwrap();
    DualConfig::new(ConvexBody::ellipsoid(&[1.0, 2.0]).unwrap(), Some(p), 16, 64).unwrap()
}

#[test]
fn free_route_recovers_circles_below_eta() {
    let c = free_cfg();
    let p = c.profile.clone().unwrap();
    let o = SolverOptions::default();
    for (m, t) in [(1i64, 1.0f64), (2, 2.0)] {
        // free critical points sit at λ·x with λ² = T·s_T, φ'(s_T) = T
        let lam = (t * p.slope_preimage(t).unwrap()).sqrt();
        let seed = circle(2, 16, m, 0).scaled(lam * 1.1);
        let r = find_critical_free(&c, &seed, &o).unwrap();
        assert!(r.converged);
        assert!((r.action - t).abs() < 1e-6, "{m}: {}", r.action);
        let fv = r.free_value.unwrap();
        assert!(fv > p.epsilon() && fv < p.eta);
    }
}

#[test]
fn free_route_rejects_zero() {
    let c = free_cfg();
    let seed = FourierLoop::zeros(2, 16);
    assert!(matches!(
        find_critical_free(&c, &seed, &SolverOptions::default()),
        Err(Error::CollapsedToZero)
    ));
}

fn actions(a: &[f64], m_max: usize) -> Vec<f64> {
    let c = cfg(a);
    let o = SolverOptions {
        m_max: Some(m_max),
        ..SolverOptions::default()
    };
    multistart(&c, 4, &o)
        .unwrap()
        .iter()
        .map(|c| c.action)
        .collect()
}

#[test]
fn multistart_finds_low_spectrum() {
    let got = actions(&[1.0, 2.0], 3);
    for (g, e) in got.iter().zip([1.0, 2.0, 2.0, 3.0]) {
        assert!((g - e).abs() < 1e-9, "{got:?}");
    }
    let r = 2f64.sqrt();
    let got = actions(&[1.0, r], 3);
    for (g, e) in got.iter().zip([1.0, r, 2.0, 2.0 * r]) {
        assert!((g - e).abs() < 1e-9, "{got:?}");
    }
}

#[test]
fn dedup_merges_time_shifts_only() {
    let c = cfg(&[1.0, 2.0]);
    let o = SolverOptions::default();
    let x = perturbed(&circle(2, L, 1, 0), &[0.005; 4 * 2 * L], 1.0);
    let a = minimize_ratio(&c, &x, &o).unwrap();
    let b = minimize_ratio(&c, &x.shift(0.3), &o).unwrap();
    let merged = deduplicate(vec![a.clone(), b], 1e-6, 1e-4);
    assert_eq!(merged.len(), 1);
    assert_eq!(merged[0].multiplicity, 2);

    // equal action, different planes: kept apart
    let circ =
        |m: i64, plane: usize| refine_critical_ratio(&c, &circle(2, L, m, plane), &o, "t").unwrap();
    let p = circ(2, 0);
    let q = circ(1, 1);
    assert!((p.action - q.action).abs() < 1e-9);
    assert_eq!(deduplicate(vec![p, q], 1e-6, 1e-4).len(), 2);
}
