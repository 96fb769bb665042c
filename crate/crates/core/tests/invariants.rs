use std::f64::consts::TAU;

use epiconj::flow::{ConstantPullback, FnPullback};
use epiconj::geometry::{Mat3, Vec3};
use epiconj::jacobi::reduced::j_matrix;
use epiconj::jacobi::{evolve_w, reduced_coefficients, solve_full_operator, WkbDirection};
use epiconj::ode::Tolerances;
use proptest::prelude::*;

fn tight() -> Tolerances {
    Tolerances::new(1e-11, 1e-13)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reduced_flow_is_unimodular(
        th in 0.2f64..2.9, ph in -3.0f64..3.0,
        a in -0.1f64..0.1, b in -0.1f64..0.1, w in 0.3f64..2.0,
        oz in 0.3f64..2.0,
    ) {
        let src = FnPullback {
            lambda: move |t: f64| Mat3::identity() + Mat3::new(a, b, 0.0, b, -a, a, 0.0, a, b) * (w * t).sin(),
            omega: Vec3::new(0.2, -0.1, oz),
        };
        let Ok(sys) = reduced_coefficients(&src, WkbDirection::from_angles(th, ph)) else { return Ok(()) };
        let path = evolve_w(&sys, 15.0, tight()).unwrap();
        prop_assert!(path.det_drift(200) < 1e-8);
        for k in 0..=30 {
            let t = 0.5 * k as f64;
            prop_assert!(path.closure_residual(t) < 1e-7);
            // det S = (2 − Tr W)/c²
            let lhs = path.s(t).determinant() * sys.c * sys.c;
            prop_assert!((lhs - (2.0 - path.trace(t))).abs() < 1e-7 * (1.0 + t * t));
        }
    }

    #[test]
    fn killing_determinant_closed_form(wx in -1.0f64..1.0, wy in -1.0f64..1.0, wz in 0.2f64..1.5) {
        let omega = Vec3::new(wx, wy, wz);
        let w = omega.norm();
        let path = solve_full_operator(&ConstantPullback::identity(omega), 12.0, tight()).unwrap();
        for k in 1..=24 {
            let t = 0.5 * k as f64;
            let want = t * (2.0 - 2.0 * (w * t).cos()) / (w * w);
            prop_assert!((path.upsilon(t).determinant() - want).abs() < 1e-7 * (1.0 + t));
        }
    }

    #[test]
    fn killing_times_are_two_pi_over_c(th in 0.05f64..1.4, ph in -3.0f64..3.0) {
        let src = ConstantPullback::identity(Vec3::z());
        let sys = reduced_coefficients(src, WkbDirection::from_angles(th, ph)).unwrap();
        let path = evolve_w(&sys, 2.2 * TAU / sys.c, tight()).unwrap();
        let want = TAU / sys.c;
        prop_assert!((path.trace(want) - 2.0).abs() < 1e-8);
        prop_assert!((path.w(want) - epiconj::jacobi::reduced::Mat2::identity()).norm() < 1e-7);
    }
}

#[test]
fn j_is_a_quarter_turn() {
    let j = j_matrix();
    assert_eq!(j * j, -epiconj::jacobi::reduced::Mat2::identity());
}
