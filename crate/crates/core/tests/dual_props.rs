use std::f64::consts::PI;

use proptest::prelude::*;
use symcap::body::ConvexBody;
use symcap::dual::{
    free_value, psi_grad_h1, psi_ratio_grad, psi_ratio_value, psi_value, reduced_hessian,
    saddle_reduce, DualConfig,
};
use symcap::loops::FourierLoop;
use symcap::profile::{build_profile, ProfileFamily};
use symcap::Error;

const L: usize = 6;

fn cfg(a: &[f64]) -> DualConfig {
    DualConfig::new(ConvexBody::ellipsoid(a).unwrap(), None, L, 32).unwrap()
}

fn positive_loop() -> impl Strategy<Value = FourierLoop> {
    prop::collection::vec(-1.0f64..1.0, 4 * 2 * L).prop_map(|v| {
        let mut x = FourierLoop::from_vec(2, L, v);
        for k in x.modes().collect::<Vec<_>>() {
            let damp = if k > 0 { 1.0 } else { 0.2 } / (k as f64).powi(2);
            x.mode_mut(k).iter_mut().for_each(|c| *c *= damp);
        }
        x.mode_mut(1)[0] += 1.0;
        x
    })
}

// Parseval: ∫ H*(−J₀ẋ) = π Σ_i a_i Σ_k k² |x̂_{k,i}|² on E(a)
fn closed_form_h(a: &[f64], x: &FourierLoop) -> f64 {
    let mut s = 0.0;
    for k in x.modes() {
        let c = x.mode(k);
        for (i, ai) in a.iter().enumerate() {
            s += PI * ai * (k * k) as f64 * (c[2 * i].powi(2) + c[2 * i + 1].powi(2));
        }
    }
    s
}

fn directional_fd(f: impl Fn(&FourierLoop) -> f64, x: &FourierLoop, v: &FourierLoop) -> f64 {
    let h = 1e-5;
    (f(&x.add_scaled(v, h)) - f(&x.add_scaled(v, -h))) / (2.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dual_value_matches_parseval(a in prop::collection::vec(0.5f64..3.0, 2), x in positive_loop()) {
        let mut a = a;
        a.sort_by(f64::total_cmp);
        let c = cfg(&a);
        let exact = closed_form_h(&a, &x);
        prop_assert!((psi_value(&c, &x) - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn ratio_is_scale_and_shift_invariant(x in positive_loop(), s in 0.2f64..4.0, th in 0.0f64..1.0) {
        let c = cfg(&[1.0, 1.7]);
        let v = psi_ratio_value(&c, &x).unwrap();
        prop_assert!((psi_ratio_value(&c, &x.scaled(s)).unwrap() - v).abs() < 1e-12 * v);
        prop_assert!((psi_ratio_value(&c, &x.shift(th)).unwrap() - v).abs() < 1e-11 * v);
    }

    #[test]
    fn ratio_gradient_matches_fd(x in positive_loop(), v in positive_loop()) {
        let c = cfg(&[1.0, 1.7]);
        let g = psi_ratio_grad(&c, &x).unwrap();
        let an: f64 = g.as_slice().iter().zip(v.as_slice()).map(|(p, q)| p * q).sum();
        let fd = directional_fd(|y| psi_ratio_value(&c, y).unwrap(), &x, &v);
        prop_assert!((an - fd).abs() < 1e-6 * an.abs().max(1e-2), "{an} {fd}");
        // 0-homogeneity: the gradient is orthogonal to the radial direction
        let radial: f64 = g.as_slice().iter().zip(x.as_slice()).map(|(p, q)| p * q).sum();
        prop_assert!(radial.abs() < 1e-10);
    }

    #[test]
    fn free_h1_gradient_matches_fd(x in positive_loop(), v in positive_loop()) {
        let p = build_profile(3.15, &[1.0, 1.7, 2.0, 3.4], ProfileFamily::FstarLin).unwrap();
        let c = DualConfig::new(ConvexBody::ellipsoid(&[1.0, 1.7]).unwrap(), Some(p), L, 32).unwrap();
        let x = x.scaled(0.4);
        let an = psi_grad_h1(&c, &x).h1_inner(&v);
        let fd = directional_fd(|y| free_value(&c, y), &x, &v);
        prop_assert!((an - fd).abs() < 1e-6 * an.abs().max(1e-2), "{an} {fd}");
    }
}

#[test]
fn iterated_circles_have_iterated_values() {
    let c = cfg(&[1.0, 1.7]);
    for m in 1..=3i64 {
        for (plane, a) in [(0usize, 1.0), (1, 1.7)] {
            let mut coef = [0.0; 4];
            coef[2 * plane] = 1.0 / (PI * m as f64).sqrt();
            let x = FourierLoop::single_mode(2, L, m, &coef);
            assert!((x.action() - 1.0).abs() < 1e-14);
            assert!((psi_value(&c, &x) - m as f64 * a).abs() < 1e-12);
            assert!(psi_ratio_grad(&c, &x).unwrap().l2_norm_sq() < 1e-24);
        }
    }
}

#[test]
fn nonpositive_action_rejected() {
    let c = cfg(&[1.0, 2.0]);
    let x = FourierLoop::single_mode(2, L, -1, &[1.0, 0.0, 0.0, 0.0]);
    assert!(matches!(
        psi_ratio_value(&c, &x),
        Err(Error::NonpositiveAction(_))
    ));
}

fn free_cfg(a: &[f64], eta: f64, spectrum: &[f64], l_max: usize) -> DualConfig {
    let p = build_profile(eta, spectrum, ProfileFamily::FstarLin).unwrap();
    DualConfig::new(ConvexBody::ellipsoid(a).unwrap(), Some(p), l_max, 4 * l_max).unwrap()
}

#[test]
fn saddle_reduction_zeroes_complement_gradient() {
    let c = free_cfg(&[1.0, 1.3], 2.2, &[1.0, 1.3, 2.0, 2.6], 16);
    let l = c.reduction_level();
    let mut low = FourierLoop::zeros(2, 16);
    low.mode_mut(1).copy_from_slice(&[0.3, 0.1, -0.05, 0.2]);
    low.mode_mut(2).copy_from_slice(&[0.02, 0.0, 0.03, -0.01]);
    let y = saddle_reduce(&c, &low, l, 16).unwrap();
    for k in 1..=l as i64 {
        assert!(y.mode(k).iter().all(|v| *v == 0.0));
    }
    let x = low.project_modes(l).add_scaled(&y, 1.0);
    let g = psi_grad_h1(&c, &x);
    for k in g.modes().filter(|&k| k < 0 || k > l as i64) {
        for v in g.mode(k) {
            assert!(v.abs() < 1e-10, "mode {k}: {v}");
        }
    }
}

#[test]
fn threshold_is_enforced() {
    let c = free_cfg(&[1.0, 2.0], 3.15, &[1.0, 2.0, 2.0, 3.0, 4.0], 16);
    let l = c.reduction_level();
    assert!(l >= 2);
    let x = FourierLoop::single_mode(2, 16, 1, &[0.5, 0.0, 0.0, 0.0]);
    assert!(matches!(
        reduced_hessian(&c, &x, l - 1),
        Err(Error::ThresholdViolated { .. })
    ));
}

#[test]
fn reduced_hessian_is_symmetric() {
    let c = free_cfg(&[1.0, 1.3], 2.2, &[1.0, 1.3, 2.0, 2.6], 16);
    let l = c.reduction_level();
    let x = FourierLoop::single_mode(2, 16, 1, &[0.35, 0.0, 0.0, 0.0]);
    let rh = reduced_hessian(&c, &x, l).unwrap();
    assert_eq!(rh.matrix.nrows(), 4 * l);
    assert!(rh.asymmetry < 1e-6);
    assert_eq!(rh.matrix, rh.matrix.transpose());
}
