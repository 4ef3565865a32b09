use gkp_core::model::{check_h, check_v, Gaussian};
use gkp_core::{Nonlinearity, Potential, PowerLaw};
use proptest::prelude::*;

fn potentials() -> impl Strategy<Value = Potential> {
    prop_oneof![
        (0.0f64..3.0).prop_map(Potential::constant),
        (0.0f64..2.0, 0.1f64..3.0, 0.3f64..4.0, -2.0f64..2.0, -2.0f64..2.0)
            .prop_map(|(b, a, s, x, y)| Potential::bump(b, a, s, [x, y])),
        (0.0f64..2.0, 0.1f64..2.0, 0.1f64..2.0, 0.5f64..3.0).prop_map(|(b, a1, a2, s)| {
            Potential::two_bump(
                b,
                Gaussian { height: a1, sigma: s, center: [-3.0, 0.0] },
                Gaussian { height: a2, sigma: s, center: [3.0, 1.0] },
            )
        }),
    ]
}

proptest! {
    #[test]
    fn h_odd_and_primitive_even(p in 0.05f64..3.95, t in -10.0f64..10.0) {
        let n = PowerLaw::new(p).unwrap();
        prop_assert_eq!(n.h(-t), -n.h(t));
        prop_assert_eq!(n.primitive(-t), n.primitive(t));
        prop_assert_eq!(n.h_prime(-t), n.h_prime(t));
    }

    #[test]
    fn theta_primitive_equals_h_t(p in 0.05f64..3.95, t in -10.0f64..10.0) {
        let n = PowerLaw::new(p).unwrap();
        let lhs = n.theta() * n.primitive(t);
        let rhs = n.h(t) * t;
        prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn derivatives_match_central_differences(p in 1.0f64..3.95, t in 0.1f64..3.0, neg in any::<bool>()) {
        let t = if neg { -t } else { t };
        let n = PowerLaw::new(p).unwrap();
        let d = 1e-4;
        let fd1 = (n.h(t + d) - n.h(t - d)) / (2.0 * d);
        let fd2 = (n.h_prime(t + d) - n.h_prime(t - d)) / (2.0 * d);
        let fd0 = (n.primitive(t + d) - n.primitive(t - d)) / (2.0 * d);
        // O(δ²) with third derivatives bounded on |t| ≥ 0.1
        prop_assert!((fd1 - n.h_prime(t)).abs() < 1e-5 * (1.0 + n.h_prime(t).abs()));
        prop_assert!((fd2 - n.h_second(t)).abs() < 1e-5 * (1.0 + n.h_second(t).abs()));
        prop_assert!((fd0 - n.h(t)).abs() < 1e-5 * (1.0 + n.h(t).abs()));
    }

    #[test]
    fn power_law_passes_check_h(p in 0.05f64..3.95) {
        let ts: Vec<f64> = (-20..=20).filter(|&k| k != 0).map(|k| k as f64 * 0.15).collect();
        let r = check_h(&PowerLaw::new(p).unwrap(), &ts);
        prop_assert!(r.passed);
    }

    #[test]
    fn potential_derivatives_match_differences(v in potentials(), x in -5.0f64..5.0, y in -5.0f64..5.0) {
        let d = 1e-4;
        let g = v.grad(x, y);
        let fx = (v.value(x + d, y) - v.value(x - d, y)) / (2.0 * d);
        let fy = (v.value(x, y + d) - v.value(x, y - d)) / (2.0 * d);
        prop_assert!((fx - g[0]).abs() < 1e-6);
        prop_assert!((fy - g[1]).abs() < 1e-6);
        let h = v.hessian(x, y);
        let gxp = v.grad(x + d, y);
        let gxm = v.grad(x - d, y);
        let gyp = v.grad(x, y + d);
        let gym = v.grad(x, y - d);
        prop_assert!(((gxp[0] - gxm[0]) / (2.0 * d) - h[0][0]).abs() < 1e-6);
        prop_assert!(((gyp[1] - gym[1]) / (2.0 * d) - h[1][1]).abs() < 1e-6);
        prop_assert!(((gxp[1] - gxm[1]) / (2.0 * d) - h[0][1]).abs() < 1e-6);
        prop_assert!((h[0][1] - h[1][0]).abs() < 1e-15);
    }

    #[test]
    fn potentials_respect_bounds(v in potentials(), x in -30.0f64..30.0, y in -30.0f64..30.0) {
        let [b0, b1, b2] = v.derivative_bounds();
        let g = v.grad(x, y);
        let h = v.hessian(x, y);
        prop_assert!(v.value(x, y) >= 0.0);
        prop_assert!(v.value(x, y) <= b0 + 1e-12);
        prop_assert!(v.value(x, y) <= v.v0() + 1e-12);
        prop_assert!(g[0].hypot(g[1]) <= b1 + 1e-12);
        prop_assert!(h.iter().flatten().all(|e| e.abs() <= b2 + 1e-12));
    }

    #[test]
    fn nonconstant_potentials_pass_check_v(v in potentials()) {
        let r = check_v(&v);
        prop_assert_eq!(r.passed, !v.is_constant());
    }
}
