use std::f64::consts::PI;

use conewalk::suites::{halfplane_walk, quadrant_drift_walk};
use conewalk::{direction_of, tilt_solve, tilted_law, Cone, Error, StepLaw};
use proptest::prelude::*;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `max alpha . q` over `R(alpha) <= 1`, by brute force over directions of
/// `alpha` with a 1-D root solve for the radius along each.
fn brute_decay(law: &StepLaw, q: &[f64]) -> f64 {
    // alpha = 0 is always on the set
    let mut best = 0.0f64;
    let n = 20_000;
    for i in 0..n {
        let phi = 2.0 * PI * i as f64 / n as f64;
        let dir = [phi.cos(), phi.sin()];
        // R(0) = 1; find the other root of R(s dir) = 1 along the ray.
        let r = |s: f64| law.generating_function(&[s * dir[0], s * dir[1]]).unwrap() - 1.0;
        let mut hi = 1e-3;
        if r(hi) >= 0.0 {
            continue;
        }
        while r(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e3 {
                break;
            }
        }
        let mut lo = hi / 2.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if r(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best = best.max(lo * dot(&dir, q));
    }
    best
}

#[test]
fn tilt_maximizes_decay_on_the_level_set() {
    let law = quadrant_drift_walk().law().clone();
    for deg in [10.0f64, 30.0, 45.0, 65.0, 85.0] {
        let q = [deg.to_radians().cos(), deg.to_radians().sin()];
        let sol = tilt_solve(&law, &q).unwrap();
        assert!((sol.r_value - 1.0).abs() < 1e-10);
        assert!(sol.direction_residual() < 1e-8);
        let brute = brute_decay(&law, &q);
        assert!(
            (sol.decay - brute).abs() < 1e-6,
            "{deg}: {} vs {brute}",
            sol.decay
        );
    }
}

#[test]
fn drift_direction_has_zero_tilt() {
    let law = halfplane_walk().law().clone();
    let m = law.mean();
    let n = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sol = tilt_solve(&law, &[m[0] / n, m[1] / n]).unwrap();
    assert!(sol.alpha.iter().all(|a| a.abs() < 1e-10));
    assert!(sol.decay.abs() < 1e-12);
}

#[test]
fn tilted_law_drifts_along_q() {
    let law = quadrant_drift_walk().law().clone();
    let q = [0.6, 0.8];
    let sol = tilt_solve(&law, &q).unwrap();
    let twisted = tilted_law(&law, &sol.alpha).unwrap();
    let m = twisted.mean();
    let n = (m[0] * m[0] + m[1] * m[1]).sqrt();
    assert!((m[0] / n - q[0]).abs() < 1e-8 && (m[1] / n - q[1]).abs() < 1e-8);
    let back = direction_of(&law, &sol.alpha).unwrap();
    assert!((back[0] - q[0]).abs() < 1e-8);
    assert!(matches!(
        tilted_law(&law, &[1.0, 1.0]),
        Err(Error::NotNormalized { .. })
    ));
}

#[test]
fn rate_function_is_the_conjugate_of_log_mgf() {
    let law = StepLaw::from_pairs(1, &[(&[1], 0.7), (&[-1], 0.3)]).unwrap();
    // Bernoulli closed form on {-1, 1}: v = 2p' - 1, KL(p' || p).
    for v in [-0.9f64, -0.3, 0.0, 0.4, 0.9] {
        let p = (1.0 + v) / 2.0;
        let want = p * (p / 0.7).ln() + (1.0 - p) * ((1.0 - p) / 0.3).ln();
        let got = law.rate_function(&[v]).unwrap().value;
        assert!((got - want).abs() < 1e-9, "{v}: {got} vs {want}");
    }
    assert!(law.rate_function(&[0.4]).unwrap().value.abs() < 1e-12);
    assert_eq!(law.rate_function(&[1.5]).unwrap_err(), Error::Unbounded);
}

#[test]
fn cone_geometry() {
    let c = Cone::half_space(vec![1.0, 2f64.sqrt()]).unwrap();
    assert!(c.contains(&[-2.0, 2.0]).unwrap());
    assert!(!c.contains(&[-2.0, 1.0]).unwrap());
    let circ = Cone::circular(vec![1.0, 0.0], PI / 4.0).unwrap();
    assert!((circ.boundary_distance(&[1.0, 0.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    assert_eq!(c.snap(&[3.2, 0.4]).unwrap(), vec![3, 0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tilt_solution_invariants(deg in 1.0f64..89.0) {
        let law = quadrant_drift_walk().law().clone();
        let q = [deg.to_radians().cos(), deg.to_radians().sin()];
        let sol = tilt_solve(&law, &q).unwrap();
        prop_assert!((sol.r_value - 1.0).abs() < 1e-10);
        prop_assert!(sol.direction_residual() < 1e-8);
        prop_assert!(sol.decay >= -1e-12);
        prop_assert_eq!(sol.certificate_violations, 0);
    }

    /// Fenchel-Young: `Lambda*(v) >= alpha . v - Lambda(alpha)` for all alpha.
    #[test]
    fn fenchel_young(v0 in -0.9f64..0.9, v1 in -0.9f64..0.9, a0 in -2.0f64..2.0, a1 in -2.0f64..2.0) {
        let law = StepLaw::from_pairs(
            2,
            &[(&[1, 0], 0.3), (&[-1, 0], 0.2), (&[0, 1], 0.3), (&[0, -1], 0.2)],
        ).unwrap();
        prop_assume!(v0.abs() + v1.abs() < 0.95);
        let rate = law.rate_function(&[v0, v1]).unwrap().value;
        let lam = law.generating_function(&[a0, a1]).unwrap().ln();
        prop_assert!(rate >= a0 * v0 + a1 * v1 - lam - 1e-9);
    }
}
