use proptest::prelude::*;

use santalo_core::duality::{ConvexPolygon, Partner, Route};
use santalo_core::inequality::{santalo_product, tau_product, Options};
use santalo_core::Potential;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn tau_quarter_holds_for_quadratics(lambda in -0.45f64..3.0, a in -2.0f64..2.0, k in -1.0f64..1.0) {
        let phi = Potential::quadratic(nalgebra::DMatrix::from_element(1, 1, lambda), vec![a], k).unwrap();
        let r = tau_product(&phi, 0.25, &Options::default()).unwrap();
        prop_assert!(r.product <= 1.0 + 1e-12, "product {}", r.product);
    }

    #[test]
    fn grid_partner_agrees_with_closed_form(lambda in 0.2f64..2.0, a in -1.0f64..1.0) {
        let phi = Potential::quadratic(nalgebra::DMatrix::from_element(1, 1, lambda), vec![a], 0.0).unwrap();
        let closed = tau_product(&phi, 0.25, &Options::default()).unwrap().product;
        let grid = tau_product(&phi, 0.25, &Options { route: Route::Grid, ..Options::default() }).unwrap().product;
        // the grid partner dominates the true one, so the product can only rise
        prop_assert!(grid >= closed - 1e-9);
        prop_assert!((grid - closed).abs() <= 1e-4 * closed, "grid {grid} closed {closed}");
    }

    #[test]
    fn partner_constraint_pointwise(coeff in 0.2f64..2.0, c in 0.1f64..1.0, x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let phi = Potential::quartic(1, coeff).unwrap();
        let psi = Partner::build(&phi, c, Route::Grid, None).unwrap();
        let py = psi.eval_points(&[y])[0];
        let lhs = phi.eval(&[x]).unwrap() + py;
        prop_assert!(lhs <= c * (x - y) * (x - y) + 1e-9, "lhs {lhs}");
    }

    #[test]
    fn scaled_gaussians_are_santalo_extremal(lambda in 0.3f64..3.0) {
        let f = Potential::isotropic(1, lambda).unwrap();
        let r = santalo_product(&f, &Options::default()).unwrap();
        prop_assert!((r.product - 2.0 * std::f64::consts::PI).abs() <= 1e-9, "product {}", r.product);
    }

    #[test]
    fn polar_is_an_involution(m in 3usize..12, phase in 0.0f64..6.3, s in 0.5f64..2.0, shear in -0.8f64..0.8) {
        let p = ConvexPolygon::regular(m, 1.0, phase).unwrap().transform([[s, shear], [0.0, 1.0 / s]]).unwrap();
        let pp = p.polar().unwrap().polar().unwrap();
        prop_assert!(p.approx_eq_cyclic(&pp, 1e-9));
    }

    #[test]
    fn volume_product_is_linearly_invariant(s in 0.3f64..3.0, shear in -2.0f64..2.0, rot in 0.0f64..6.3) {
        let (c, si) = (rot.cos(), rot.sin());
        let lin = [[s * c, s * (shear * c - si)], [s * si, s * (shear * si + c)]];
        let p = ConvexPolygon::square().transform(lin).unwrap();
        prop_assert!((p.volume_product().unwrap() - 8.0).abs() <= 1e-9);
        prop_assert!(p.volume_product().unwrap() <= std::f64::consts::PI.powi(2));
    }

    #[test]
    fn sharpness_follows_closed_form(a in -2.0f64..2.0, c in 0.05f64..2.0) {
        let r = tau_product(&Potential::linear(vec![a]).unwrap(), c, &Options::default()).unwrap();
        let closed = (a * a * (1.0 - 1.0 / (4.0 * c))).exp();
        prop_assert!((r.product - closed).abs() <= 1e-9 * closed.max(1.0));
    }
}
