use liyau_core::geometry::Geometry;
use liyau_core::statics::{seed_from_profile, static_residual, talenti_value, FdProfile, Talenti};
use proptest::prelude::*;

#[test]
fn seed_values_at_nodes() {
    // Nodes at r = 0, 1, 3 with spacing 1.
    let g = Geometry::radial_euclidean(6, 21, 20.0).unwrap();
    let u = seed_from_profile(&Talenti, &g).unwrap();
    assert_eq!(u[0], 24.0);
    assert_eq!(u[1], 6.0);
    assert!((u[3] - 0.24).abs() < 1e-15);
    assert!(seed_from_profile(&Talenti, &Geometry::radial_euclidean(5, 21, 20.0).unwrap()).is_err());
    assert!(seed_from_profile(&Talenti, &Geometry::radial_sphere(6, 21).unwrap()).is_err());
}

#[test]
fn origin_residual_is_exact() {
    assert_eq!(static_residual(&Talenti, &[0.0]).unwrap(), vec![0.0]);
    assert!(static_residual(&Talenti, &[-1.0]).is_err());
}

#[test]
fn finite_differences_converge_at_second_order() {
    let radii = [0.5, 1.0, 2.0];
    let err = |h: f64| {
        let fd = FdProfile::new(talenti_value, h, 6, 2.0).unwrap();
        static_residual(&fd, &radii)
            .unwrap()
            .iter()
            .fold(0.0_f64, |m, r| m.max(r.abs()))
    };
    let order = (err(2e-2) / err(1e-2)).log2();
    assert!((order - 2.0).abs() < 0.1, "order {order}");
}

proptest! {
    #[test]
    fn analytic_residual_vanishes(r in 0.0f64..50.0) {
        let res = static_residual(&Talenti, &[r]).unwrap()[0];
        let u = talenti_value(r);
        prop_assert!(res.abs() <= 1e-9 * u * u);
    }

    // u_λ(r) = λ² u(λr) is again static for p = 2 in dimension 6.
    #[test]
    fn dilations_stay_static(lambda in 0.5f64..2.0, r in 0.1f64..5.0) {
        let scaled = move |s: f64| lambda * lambda * talenti_value(lambda * s);
        let fd = FdProfile::new(scaled, 1e-3, 6, 2.0).unwrap();
        let res = static_residual(&fd, &[r]).unwrap()[0];
        // Truncation error grows like h²·λ⁶ and picks up 1/r from the drift term.
        prop_assert!(res.abs() <= 1e-3 * lambda.powi(6) * (1.0 + 1.0 / r), "{}", res);
    }
}
