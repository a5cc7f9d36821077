use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use symcap::loops::{action, circle_distance, project_modes, shift, synthesize, FourierLoop};
use symcap::Error;

fn any_loop(n: usize, l: usize) -> impl Strategy<Value = FourierLoop> {
    prop::collection::vec(-1.0f64..1.0, 4 * n * l).prop_map(move |v| FourierLoop::from_vec(n, l, v))
}

// ½∫⟨ẋ, J₀x⟩ by the trapezoid rule, exact for trigonometric polynomials
fn quadrature_action(x: &FourierLoop, grid: usize) -> f64 {
    let (pos, vel) = synthesize(x, grid).unwrap();
    let mut s = 0.0;
    for (p, v) in pos.iter().zip(&vel) {
        for q in 0..x.dim_n() {
            // J₀(a, b) = (−b, a)
            s += v[2 * q] * (-p[2 * q + 1]) + v[2 * q + 1] * p[2 * q];
        }
    }
    0.5 * s / grid as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn action_matches_quadrature(x in any_loop(2, 5)) {
        let a = action(&x);
        prop_assert!((a - quadrature_action(&x, 64)).abs() < 1e-11 * (1.0 + a.abs()));
    }

    #[test]
    fn shift_preserves_norms_and_action(x in any_loop(2, 4), th in 0.0f64..1.0) {
        let y = shift(&x, th);
        prop_assert!((action(&y) - action(&x)).abs() < 1e-12);
        prop_assert!((y.h12_norm_sq() - x.h12_norm_sq()).abs() < 1e-12);
        prop_assert!(circle_distance(&x, &y) < 1e-8);
    }

    #[test]
    fn shift_is_time_translation(x in any_loop(1, 3), th in 0.0f64..1.0) {
        let g = 48;
        let (p, _) = synthesize(&x, g).unwrap();
        let y = shift(&x, th);
        // y(t) = x(t − θ); check at t = θ + j/g
        for j in [0usize, 7, 30] {
            let t = th + j as f64 / g as f64;
            let mut val = [0.0; 2];
            for k in y.modes() {
                let c = y.mode(k);
                let ph = TAU * k as f64 * t;
                val[0] += c[0] * ph.cos() - c[1] * ph.sin();
                val[1] += c[0] * ph.sin() + c[1] * ph.cos();
            }
            prop_assert!((val[0] - p[j][0]).abs() < 1e-10 && (val[1] - p[j][1]).abs() < 1e-10);
        }
    }

    #[test]
    fn circle_distance_is_symmetric(x in any_loop(2, 3), y in any_loop(2, 3)) {
        let d1 = circle_distance(&x, &y);
        let d2 = circle_distance(&y, &x);
        prop_assert!((d1 - d2).abs() < 1e-8 * (1.0 + d1));
        prop_assert!(d1 <= (x.add_scaled(&y, -1.0)).h12_norm() + 1e-12);
    }

    #[test]
    fn projection_keeps_positive_modes(x in any_loop(2, 6), l in 1usize..6) {
        let p = project_modes(&x, l);
        for k in p.modes() {
            let keep = k >= 1 && k as usize <= l;
            for (a, b) in p.mode(k).iter().zip(x.mode(k)) {
                prop_assert_eq!(*a, if keep { *b } else { 0.0 });
            }
        }
        prop_assert_eq!(project_modes(&p, l), p);
    }

    #[test]
    fn json_roundtrip(x in any_loop(2, 3)) {
        let s = serde_json::to_string(&x).unwrap();
        let y: FourierLoop = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(x, y);
    }
}

#[test]
fn circle_action_is_pi_r_squared() {
    let x = FourierLoop::single_mode(1, 2, 1, &[2.0, 0.0]);
    assert!((action(&x) - 4.0 * PI).abs() < 1e-12);
    let x = FourierLoop::single_mode(1, 2, -1, &[2.0, 0.0]);
    assert!((action(&x) + 4.0 * PI).abs() < 1e-12);
}

#[test]
fn different_planes_are_far_apart() {
    let a =
        FourierLoop::single_mode(2, 2, 2, &[1.0, 0.0, 0.0, 0.0]).scaled(1.0 / (2.0 * PI).sqrt());
    let b = FourierLoop::single_mode(2, 2, 1, &[0.0, 0.0, 1.0, 0.0]).scaled(1.0 / PI.sqrt());
    assert!((action(&a) - 1.0).abs() < 1e-12 && (action(&b) - 1.0).abs() < 1e-12);
    assert!(circle_distance(&a, &b) > 0.1);
}

#[test]
fn coarse_grid_rejected() {
    let x = FourierLoop::zeros(1, 8);
    assert!(matches!(
        synthesize(&x, 16),
        Err(Error::GridTooCoarse { .. })
    ));
}

#[test]
fn malformed_loop_json_rejected() {
    assert!(
        serde_json::from_str::<FourierLoop>(r#"{"n":1,"l_max":2,"coeffs":{"0":[1.0,0.0]}}"#)
            .is_err()
    );
    assert!(
        serde_json::from_str::<FourierLoop>(r#"{"n":1,"l_max":2,"coeffs":{"3":[1.0,0.0]}}"#)
            .is_err()
    );
}
