//! Property tests for the error-combination formula, the ball schedule and
//! the frame decomposition.

use manifold_mc::integrator::make_schedule;
use manifold_mc::stats::combine_error;
use manifold_mc::zoo::{torus_manifold, TorusSpec};
use manifold_mc::TangentFrame;
use nalgebra::DVector;
use proptest::prelude::*;

proptest! {
    #[test]
    fn combine_error_is_monotone(
        rho in 0.0..0.5f64,
        p in 0.01..0.99f64,
        tau in 1.0..50.0f64,
        n in 10u64..100_000u64,
    ) {
        let base = combine_error(rho, &[(p, tau, n)]).unwrap();
        // Increasing tau increases the error.
        let more_tau = combine_error(rho, &[(p, tau * 1.5, n)]).unwrap();
        prop_assert!(more_tau >= base);
        // Increasing n decreases it.
        let more_n = combine_error(rho, &[(p, tau, n * 2)]).unwrap();
        prop_assert!(more_n <= base);
        // Increasing p decreases it.
        let more_p = combine_error(rho, &[(p + 0.009, tau, n)]).unwrap();
        prop_assert!(more_p <= base);
        // A p = 1 stage contributes exactly zero.
        let with_unit = combine_error(rho, &[(p, tau, n), (1.0, tau, n)]).unwrap();
        prop_assert_eq!(with_unit, base);
    }

    #[test]
    fn schedule_satisfies_both_radius_identities(
        r0 in 0.5..100.0f64,
        ratio in 1.01..50.0f64,
        k in 1usize..12,
        d in 1usize..20,
    ) {
        let rk = r0 / ratio;
        let s = make_schedule(DVector::zeros(3), r0, rk, k, d).unwrap();
        prop_assert_eq!(s.radii.len(), k + 1);
        prop_assert_eq!(s.radii[0], r0);
        prop_assert_eq!(s.radii[k], rk);
        for (i, &r) in s.radii.iter().enumerate() {
            let expected = r0 * s.nu.powf(-(i as f64) / d as f64);
            prop_assert!((r - expected).abs() <= 1e-12 * expected);
        }
        let total = (r0 / rk).powi(d as i32);
        prop_assert!((s.nu.powi(k as i32) - total).abs() <= 1e-10 * total);
        // Radii strictly decrease.
        for w in s.radii.windows(2) {
            prop_assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn torus_frame_decomposition_is_exact(
        theta in 0.0..std::f64::consts::TAU,
        phi in 0.0..std::f64::consts::TAU,
        d0 in -2.0..2.0f64,
        d1 in -2.0..2.0f64,
        d2 in -2.0..2.0f64,
    ) {
        let spec = TorusSpec::new(1.0, 0.5).unwrap();
        let torus = torus_manifold(spec);
        let x = spec.point(theta, phi);
        let f = TangentFrame::new(&torus, &x).unwrap();
        let delta = DVector::from_vec(vec![d0, d1, d2]);
        let (v, w) = f.decompose(&delta);
        prop_assert!((&v + &w - &delta).norm() <= 1e-14 * delta.norm().max(1e-12));
        prop_assert!(v.dot(&w).abs() <= 1e-12);
        // v is tangential: orthogonal to the constraint gradient.
        prop_assert!(f.q().tr_mul(&v).norm() <= 1e-10);
        // w is normal: killed by the tangential projector.
        prop_assert!(f.project_tangent(&w).norm() <= 1e-10);
    }
}
