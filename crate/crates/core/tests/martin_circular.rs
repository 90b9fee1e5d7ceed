use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

use conewalk::circular::{dw_harmonic, hyp2f1, p_star, p_star_by_root, theta_star, DwHarmonic};
use conewalk::green::ProbeOptions;
use conewalk::ladder::RenewalOptions;
use conewalk::martin::{k_q_build, martin_limit_probe, monotonicity_check};
use conewalk::suites::{d1_drift_walk, isotropic_planar_law, quadrant_drift_walk};
use proptest::prelude::*;

#[test]
fn d1_candidate_is_the_closed_form() {
    let walk = d1_drift_walk();
    let cand = k_q_build(&walk, &[1.0], 20.0, 1e-12, RenewalOptions::default()).unwrap();
    for x in 0..20i64 {
        let want = 1.75 * (1.0 - (3.0f64 / 7.0).powi(x as i32 + 1));
        assert!((cand.get(&[x]).unwrap() - want).abs() < 1e-10, "x = {x}");
    }
    assert!(cand.residual.max < 1e-9);
}

#[test]
fn d1_martin_kernel_converges() {
    let walk = d1_drift_walk();
    let xs: Vec<Vec<i64>> = (0..4).map(|x| vec![x]).collect();
    let table = martin_limit_probe(
        &walk,
        &[1.0],
        &xs,
        &[15.0, 30.0, 60.0],
        &ProbeOptions::default(),
        RenewalOptions::default(),
    )
    .unwrap();
    assert!(table.final_gap() < 0.05, "{}", table.to_csv());
    // the kernel at x = 0 is 1 by construction
    for row in table.rows.iter().filter(|r| r.x == [0]) {
        assert!((row.kernel - 1.0).abs() < 1e-12);
    }
}

#[test]
fn quadrant_candidate_is_monotone_along_drift() {
    let walk = quadrant_drift_walk();
    let q = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
    let cand = k_q_build(&walk, &q, 10.0, 1e-11, RenewalOptions::default()).unwrap();
    assert!(cand.residual.max < 1e-3);
    let mono = monotonicity_check(&cand, 2000, 3, 1e-9).unwrap();
    assert_eq!(mono.violations, 0, "{mono:?}");
}

/// On the quadrant the harmonic function is `2xy`, and it is exactly
/// harmonic for the simple walk too.
#[test]
fn quadrant_profile_is_2xy_and_discrete_harmonic() {
    let u = DwHarmonic::new(FRAC_PI_4, vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap();
    assert!((u.exponent.p_star - 2.0).abs() < 1e-12);
    let law = isotropic_planar_law();
    for x in 0..15i64 {
        for y in 0..15i64 {
            let want = 2.0 * (x * y) as f64;
            let got = u.eval(&[x as f64, y as f64]);
            assert!(
                (got - want).abs() < 1e-9 * want.max(1.0),
                "({x},{y}): {got}"
            );
            if x > 0 && y > 0 {
                let mean: f64 = law
                    .atoms()
                    .iter()
                    .map(|a| a.p * u.eval(&[(x + a.x[0]) as f64, (y + a.x[1]) as f64]))
                    .sum();
                assert!((mean - got).abs() < 1e-9 * got);
            }
        }
    }
    assert_eq!(u.eval(&[-1.0, 3.0]), 0.0);
}

#[test]
fn half_space_profiles_are_linear() {
    for (k, axis) in [(2, vec![0.0, 1.0]), (3, vec![0.0, 0.0, 1.0])] {
        assert!((p_star(FRAC_PI_2, k).unwrap().p_star - 1.0).abs() < 1e-8);
        let pts: [[f64; 3]; 3] = [[0.3, 2.0, 1.5], [-4.0, 1.0, 0.2], [1.0, 1.0, 7.0]];
        for p in pts {
            let x = &p[..k];
            let got = dw_harmonic(FRAC_PI_2, &axis, x).unwrap();
            assert!(
                (got - x[k - 1]).abs() < 1e-6 * x[k - 1],
                "k={k} {x:?}: {got}"
            );
        }
    }
}

#[test]
fn hypergeometric_elementary_cases() {
    for t in [-0.9f64, -0.5, 0.1, 0.3, 0.6, 0.9] {
        let log = hyp2f1(1.0, 1.0, 2.0, -t).unwrap();
        assert!((log - (1.0 + t).ln() / t).abs() < 1e-12, "log at {t}");
        let pow = hyp2f1(0.7, 1.3, 1.3, t).unwrap();
        assert!(
            (pow - (1.0 - t).powf(-0.7)).abs() < 1e-11 * pow,
            "power at {t}"
        );
    }
    for s in [0.1f64, 0.5, 0.8, 0.95] {
        let got = hyp2f1(0.5, 0.5, 1.5, s * s).unwrap();
        assert!((got - s.asin() / s).abs() < 1e-12, "arcsin at {s}");
    }
    // terminating series: F(-2, b; c; t) is a quadratic
    let got = hyp2f1(-2.0, 3.0, 4.0, 5.0).unwrap();
    assert!((got - (1.0 - 2.0 * 3.0 / 4.0 * 5.0 + 3.0 * 4.0 / (4.0 * 5.0) * 25.0)).abs() < 1e-12);
}

#[test]
fn wedge_angle_and_exponent_are_inverse() {
    for p in [0.8f64, 1.0, 1.5, 2.0, 4.0] {
        // planar wedge: h = cos(p theta), first zero at pi / (2p)
        let theta = theta_star(p, 2).unwrap();
        assert!((theta - FRAC_PI_2 / p).abs() < 1e-12, "p = {p}");
        assert!((p_star_by_root(theta, 2).unwrap().p_star - p).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hyp2f1_is_symmetric_in_the_numerator(a in -3.0f64..3.0, b in -3.0f64..3.0, c in 0.5f64..4.0, t in -0.9f64..0.9) {
        let ab = hyp2f1(a, b, c, t).unwrap();
        let ba = hyp2f1(b, a, c, t).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-10 * ab.abs().max(1.0));
    }

    /// Monotone in the angle: a wider cone has a smaller exponent.
    #[test]
    fn exponent_decreases_with_angle(t1 in 0.2f64..2.9, dt in 0.05f64..0.2, k in 2usize..5) {
        let t2 = (t1 + dt).min(3.1);
        prop_assert!(p_star(t2, k).unwrap().p_star < p_star(t1, k).unwrap().p_star);
    }

    #[test]
    fn dw_harmonic_is_homogeneous(x in 0.1f64..5.0, y in 0.1f64..5.0, s in 0.5f64..3.0) {
        let axis = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
        let u = dw_harmonic(FRAC_PI_4, &axis, &[x, y]).unwrap();
        let us = dw_harmonic(FRAC_PI_4, &axis, &[s * x, s * y]).unwrap();
        prop_assert!((us - s * s * u).abs() <= 1e-9 * us.max(1e-12));
    }
}
