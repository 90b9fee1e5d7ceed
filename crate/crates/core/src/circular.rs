//! Exit exponents of circular cones: the hypergeometric profile `h`, its
//! first zero `theta_k(p)`, the inverse map `p_k(theta)`, the cone harmonic
//! `|x|^p h(angle)`, and a Monte Carlo survival-slope probe.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cone::Cone;
use crate::error::{Error, Result};
use crate::green::{shard_sizes, KilledWalk};
use crate::linalg::{angle, norm, to_f64};

const SERIES_EPS: f64 = 1e-15;
const SERIES_MAX_TERMS: usize = 20_000_000;
/// Arguments this close to 1 are refused rather than summed.
const SERIES_T_LIMIT: f64 = 1.0 - 1e-9;
const SCAN_STEPS: usize = 512;

fn non_positive_integer(v: f64) -> bool {
    v <= 0.0 && v.fract() == 0.0
}

/// Gauss hypergeometric series `2F1(a, b; c; t)`.
///
/// Stops once three consecutive terms are below `1e-15 |sum|` and the
/// geometric bound on the remaining tail is too; terminates exactly when
/// `a` or `b` is a non-positive integer.
pub fn hyp2f1(a: f64, b: f64, c: f64, t: f64) -> Result<f64> {
    if non_positive_integer(c) {
        return Err(Error::InvalidArgument(format!(
            "c = {c} is a non-positive integer"
        )));
    }
    let terminating = non_positive_integer(a) || non_positive_integer(b);
    if !t.is_finite() || (!terminating && t.abs() > SERIES_T_LIMIT) {
        return Err(Error::NonConvergent { t });
    }
    let mut sum = 1.0;
    let mut term = 1.0f64;
    let mut small = 0;
    for j in 0..SERIES_MAX_TERMS {
        let jf = j as f64;
        let ratio = (a + jf) * (b + jf) / ((c + jf) * (jf + 1.0)) * t;
        term *= ratio;
        if term == 0.0 {
            return Ok(sum);
        }
        sum += term;
        if term.abs() <= SERIES_EPS * sum.abs() {
            small += 1;
        } else {
            small = 0;
        }
        if small >= 3 {
            let rho = ratio.abs().max(t.abs());
            if rho < 1.0 && term.abs() * rho / (1.0 - rho) <= SERIES_EPS * sum.abs() {
                return Ok(sum);
            }
        }
    }
    Err(Error::NonConvergent { t })
}

/// Angular profile `h_p(theta) = 2F1(-p, p + k - 2; (k - 1)/2; sin^2(theta/2))`.
pub fn h_eval(p: f64, k: usize, theta: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidArgument("h needs k >= 2".into()));
    }
    if !(0.0..PI).contains(&theta) {
        return Err(Error::InvalidArgument(format!(
            "theta = {theta} outside [0, pi)"
        )));
    }
    if theta == 0.0 {
        return Ok(1.0);
    }
    let t = (theta / 2.0).sin().powi(2);
    hyp2f1(-p, p + k as f64 - 2.0, (k as f64 - 1.0) / 2.0, t)
}

/// Smallest zero of `h_p` in `[0, pi)`.
///
/// Scans in steps of `pi/512`, so for very large `p` (first zero below
/// the step) the bracket may skip zeros.
pub fn theta_star(p: f64, k: usize) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must be positive")));
    }
    let step = PI / SCAN_STEPS as f64;
    let mut lo = 0.0;
    let mut h_lo = 1.0;
    for i in 1..SCAN_STEPS {
        let hi = i as f64 * step;
        let h_hi = h_eval(p, k, hi)?;
        if h_hi == 0.0 {
            return Ok(hi);
        }
        if h_lo * h_hi < 0.0 {
            return bisect_zero(p, k, lo, hi);
        }
        lo = hi;
        h_lo = h_hi;
    }
    Err(Error::NoZeroFound)
}

/// Bisection down to floating-point resolution; `h(lo) > 0 > h(hi)`.
fn bisect_zero(p: f64, k: usize, mut lo: f64, mut hi: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let h = h_eval(p, k, mid)?;
        if h == 0.0 {
            return Ok(mid);
        }
        if h > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExponentMethod {
    ClosedFormK1,
    ClosedFormK2,
    HypergeometricRoot,
}

impl ExponentMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ExponentMethod::ClosedFormK1 => "closed-form-k1",
            ExponentMethod::ClosedFormK2 => "closed-form-k2",
            ExponentMethod::HypergeometricRoot => "hypergeometric-root",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentSolution {
    pub k: usize,
    pub theta: f64,
    pub p_star: f64,
    pub method: ExponentMethod,
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::InvalidArgument(format!(
            "theta = {theta} outside (0, pi)"
        )));
    }
    Ok(())
}

/// Exit exponent of the circular cone of half-angle `theta` in `R^k`.
pub fn p_star(theta: f64, k: usize) -> Result<ExponentSolution> {
    check_theta(theta)?;
    match k {
        0 => Err(Error::InvalidArgument("k must be at least 1".into())),
        1 => Ok(ExponentSolution {
            k,
            theta,
            p_star: 1.0,
            method: ExponentMethod::ClosedFormK1,
        }),
        2 => Ok(ExponentSolution {
            k,
            theta,
            p_star: PI / (2.0 * theta),
            method: ExponentMethod::ClosedFormK2,
        }),
        _ => p_star_by_root(theta, k),
    }
}

/// Inverts `p -> theta_star(p, k)` by bisection, for any `k >= 2`.
pub fn p_star_by_root(theta: f64, k: usize) -> Result<ExponentSolution> {
    check_theta(theta)?;
    if k < 2 {
        return Err(Error::InvalidArgument("root path needs k >= 2".into()));
    }
    // theta_star decreases in p; a missing zero means p is too small.
    let zero_at = |p: f64| -> Result<f64> {
        match theta_star(p, k) {
            Err(Error::NoZeroFound) => Ok(PI),
            other => other,
        }
    };
    let mut lo = 1.0;
    while zero_at(lo)? <= theta {
        lo /= 2.0;
        if lo < 1e-6 {
            return Err(Error::NoZeroFound);
        }
    }
    let mut hi = 1.0;
    while zero_at(hi)? > theta {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::NoZeroFound);
        }
    }
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if zero_at(mid)? > theta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ExponentSolution {
        k,
        theta,
        p_star: 0.5 * (lo + hi),
        method: ExponentMethod::HypergeometricRoot,
    })
}

/// Positive harmonic function of Brownian motion killed outside a circular
/// cone: `u(x) = |x|^p h_p(angle(x, axis))`, zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct DwHarmonic {
    pub k: usize,
    pub theta: f64,
    pub axis: Vec<f64>,
    pub exponent: ExponentSolution,
}

impl DwHarmonic {
    pub fn new(theta: f64, axis: Vec<f64>) -> Result<Self> {
        let k = axis.len();
        if k == 0 || (norm(&axis) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("axis must be a unit vector".into()));
        }
        let exponent = p_star(theta, k)?;
        Ok(DwHarmonic {
            k,
            theta,
            axis,
            exponent,
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r = norm(x);
        if r == 0.0 {
            return 0.0;
        }
        if self.k == 1 {
            return (x[0] * self.axis[0]).max(0.0);
        }
        let a = angle(x, &self.axis);
        if a >= self.theta {
            return 0.0;
        }
        let h = h_eval(self.exponent.p_star, self.k, a).unwrap_or(0.0);
        r.powf(self.exponent.p_star) * h.max(0.0)
    }
}

pub fn dw_harmonic(theta: f64, axis: &[f64], x: &[f64]) -> Result<f64> {
    Ok(DwHarmonic::new(theta, axis.to_vec())?.eval(x))
}

/// Exit exponent of the cones the survival probe understands: circular
/// cones, half-spaces (angle `pi/2`) and planar wedges.
pub fn cone_exponent(cone: &Cone) -> Result<ExponentSolution> {
    let d = cone.dim();
    match cone {
        Cone::Circular { theta, .. } => p_star(*theta, d),
        Cone::HalfSpace { .. } => p_star(PI / 2.0, d),
        Cone::Polyhedral { normals } if normals.len() == 1 => p_star(PI / 2.0, d),
        Cone::Polyhedral { normals } if d == 2 && normals.len() == 2 => {
            let opening = PI - angle(&normals[0], &normals[1]);
            p_star(opening / 2.0, 2)
        }
        _ => Err(Error::InvalidArgument(
            "exit exponent needs a circular cone, a half-space or a planar wedge".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentOptions {
    pub t_max: u64,
    pub trials: u64,
    pub seed: u64,
}

impl Default for ExponentOptions {
    fn default() -> Self {
        ExponentOptions {
            t_max: 10_000,
            trials: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRow {
    pub t: u64,
    pub survivors: u64,
    pub p_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitExponent {
    /// Fitted slope of `log P(tau > t)` against `log t`.
    pub slope: f64,
    /// Delete-one-shard jackknife error of the slope.
    pub stderr: f64,
    /// `-p*/2`.
    pub reference: f64,
    pub exponent: ExponentSolution,
    pub rows: Vec<SurvivalRow>,
}

impl ExitExponent {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,survivors,P_hat\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.t, r.survivors, r.p_hat));
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        format!(
            "slope,stderr,reference\n{},{},{}\n",
            self.slope, self.stderr, self.reference
        )
    }
}

const MIN_SURVIVORS: u64 = 100;

/// Survival curve `P_x(tau > t)` on the grid `t_max / 2^j` and its
/// log-log slope over the top decade, weighted by survivor counts.
///
/// The walk must be centered with covariance a multiple of the identity.
pub fn exit_exponent(walk: &KilledWalk, x: &[i64], opts: ExponentOptions) -> Result<ExitExponent> {
    let law = walk.law();
    let d = walk.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    if opts.trials == 0 || opts.t_max < 2 {
        return Err(Error::InvalidArgument(
            "need trials >= 1 and t_max >= 2".into(),
        ));
    }
    let moments = law.moments();
    if norm(&moments.mean) > 1e-12 {
        return Err(Error::NotCentered);
    }
    let scale = moments.covariance.trace() / d as f64;
    for i in 0..d {
        for j in 0..d {
            let want = if i == j { scale } else { 0.0 };
            if (moments.covariance[(i, j)] - want).abs() > 1e-9 {
                return Err(Error::AnisotropicCovariance);
            }
        }
    }
    let exponent = cone_exponent(walk.cone())?;
    if !(walk.cone().boundary_distance(&to_f64(x))? > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "start {x:?} is not strictly inside the cone"
        )));
    }

    let mut grid: Vec<u64> = (0..64)
        .map(|j| (opts.t_max as f64 / 2f64.powi(j)).round() as u64)
        .take_while(|&t| t >= 1)
        .collect();
    grid.dedup();
    grid.reverse();

    let sizes = shard_sizes(opts.trials);
    let shard_counts: Vec<Vec<u64>> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &n)| {
            survival_counts(
                walk,
                x,
                &grid,
                opts.t_max,
                n,
                opts.seed.wrapping_add(b as u64),
            )
        })
        .collect();
    let mut totals = vec![0u64; grid.len()];
    for counts in &shard_counts {
        for (t, c) in totals.iter_mut().zip(counts) {
            *t += c;
        }
    }
    let quarter = grid
        .iter()
        .position(|&t| t >= opts.t_max / 4)
        .unwrap_or(grid.len() - 1);
    if totals[quarter] < MIN_SURVIVORS {
        return Err(Error::TooFewSurvivors {
            survivors: totals[quarter],
        });
    }
    let slope =
        fit_slope(&grid, &totals, opts.trials, opts.t_max).ok_or(Error::TooFewSurvivors {
            survivors: totals[quarter],
        })?;

    let b = shard_counts.len();
    let stderr = if b >= 2 {
        let mut leave_out = Vec::with_capacity(b);
        for (counts, &n) in shard_counts.iter().zip(&sizes) {
            let rest: Vec<u64> = totals.iter().zip(counts).map(|(t, c)| t - c).collect();
            if let Some(s) = fit_slope(&grid, &rest, opts.trials - n, opts.t_max) {
                leave_out.push(s);
            }
        }
        let m = leave_out.len() as f64;
        let mean = leave_out.iter().sum::<f64>() / m;
        ((m - 1.0) / m * leave_out.iter().map(|s| (s - mean).powi(2)).sum::<f64>()).sqrt()
    } else {
        0.0
    };

    let rows = grid
        .iter()
        .zip(&totals)
        .map(|(&t, &s)| SurvivalRow {
            t,
            survivors: s,
            p_hat: s as f64 / opts.trials as f64,
        })
        .collect();
    Ok(ExitExponent {
        slope,
        stderr,
        reference: -exponent.p_star / 2.0,
        exponent,
        rows,
    })
}

/// Weighted least squares over grid points with `t >= t_max / 10`.
fn fit_slope(grid: &[u64], survivors: &[u64], trials: u64, t_max: u64) -> Option<f64> {
    let pts: Vec<(f64, f64, f64)> = grid
        .iter()
        .zip(survivors)
        .filter(|(&t, &s)| 10 * t >= t_max && s > 0)
        .map(|(&t, &s)| ((t as f64).ln(), (s as f64 / trials as f64).ln(), s as f64))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let w: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / w;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / w;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Per grid point, how many of `n` trials are still inside after `t` steps.
fn survival_counts(
    walk: &KilledWalk,
    x: &[i64],
    grid: &[u64],
    t_max: u64,
    n: u64,
    seed: u64,
) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = walk.law().sampler();
    let cone = walk.cone();
    let mut counts = vec![0u64; grid.len()];
    let mut z = x.to_vec();
    for _ in 0..n {
        z.copy_from_slice(x);
        let mut alive_until = t_max;
        for step in 1..=t_max {
            let s = sampler.step(rng.random::<f64>());
            for (zi, si) in z.iter_mut().zip(s) {
                *zi += si;
            }
            if !cone.contains_lattice(&z) {
                alive_until = step - 1;
                break;
            }
        }
        // tau > t  iff  the walk is still inside after t steps.
        for (c, &t) in counts.iter_mut().zip(grid) {
            if alive_until >= t {
                *c += 1;
            }
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steplaw::StepLaw;
    use proptest::prelude::*;
    use rand::Rng;

    fn pochhammer(x: f64, j: usize) -> f64 {
        (0..j).map(|i| x + i as f64).product()
    }

    #[test]
    fn series_examples() {
        assert_eq!(hyp2f1(0.3, 1.7, 2.2, 0.0).unwrap(), 1.0);
        for &(b, c, t) in &[(2.0, 0.5, 0.3), (0.7, 3.1, -0.9), (5.0, 1.5, 0.99)] {
            let want = 1.0 - b / c * t;
            assert!((hyp2f1(-1.0, b, c, t).unwrap() - want).abs() < 1e-15);
        }
        let direct: f64 = (0..3)
            .map(|j| {
                pochhammer(-2.0, j) * pochhammer(2.0, j) / pochhammer(0.5, j) / pochhammer(1.0, j)
                    * 0.5f64.powi(j as i32)
            })
            .sum();
        assert!((hyp2f1(-2.0, 2.0, 0.5, 0.5).unwrap() - direct).abs() < 1e-14);
        // 2F1(1,1;2;t) = -ln(1-t)/t
        let t = 0.9;
        assert!((hyp2f1(1.0, 1.0, 2.0, t).unwrap() + (1.0 - t).ln() / t).abs() < 1e-12);
        assert!(matches!(
            hyp2f1(1.0, 1.0, 2.0, 1.0),
            Err(Error::NonConvergent { .. })
        ));
        assert!(hyp2f1(1.0, 1.0, -2.0, 0.1).is_err());
        // terminating series are fine even at t = 1
        assert!((hyp2f1(-1.0, 2.0, 1.0, 1.0).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn profile_in_the_plane_is_a_cosine() {
        assert_eq!(h_eval(2.7, 3, 0.0).unwrap(), 1.0);
        assert!(h_eval(1.0, 2, PI / 2.0).unwrap().abs() < 1e-12);
        assert!((h_eval(2.0, 2, PI / 8.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        for &p in &[0.5, 1.3, 3.0] {
            for i in 0..20 {
                let th = i as f64 * 0.15;
                assert!(
                    (h_eval(p, 2, th).unwrap() - (p * th).cos()).abs() < 1e-11,
                    "{p} {th}"
                );
            }
        }
        // k = 3 is the Legendre function: P_2(cos) = (3 cos^2 - 1)/2
        let th = 0.8f64;
        assert!((h_eval(2.0, 3, th).unwrap() - (3.0 * th.cos().powi(2) - 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn first_zero() {
        for k in 2..=4 {
            assert!(
                (theta_star(1.0, k).unwrap() - PI / 2.0).abs() < 1e-9,
                "k={k}"
            );
            assert!(theta_star(2.0, k).unwrap() < theta_star(1.0, k).unwrap());
        }
        for &p in &[1.0, 2.0, 4.0, 0.6] {
            assert!((theta_star(p, 2).unwrap() - PI / (2.0 * p)).abs() < 1e-9);
        }
        // the zero of cos(theta/2) sits at pi itself
        assert_eq!(theta_star(0.5, 2), Err(Error::NoZeroFound));
    }

    #[test]
    fn exponents() {
        let s = p_star(PI / 4.0, 2).unwrap();
        assert_eq!((s.p_star, s.method), (2.0, ExponentMethod::ClosedFormK2));
        assert_eq!(p_star(PI / 2.0, 2).unwrap().p_star, 1.0);
        assert_eq!(p_star(1.0, 1).unwrap().method, ExponentMethod::ClosedFormK1);
        let s3 = p_star(PI / 2.0, 3).unwrap();
        assert_eq!(s3.method, ExponentMethod::HypergeometricRoot);
        assert!((s3.p_star - 1.0).abs() < 1e-8);
        for i in 0..32 {
            let th = PI * (i + 1) as f64 / 34.0;
            let root = p_star_by_root(th, 2).unwrap().p_star;
            assert!((root - PI / (2.0 * th)).abs() <= 1e-10, "{th}: {root}");
        }
        assert!(p_star(0.0, 2).is_err() && p_star(PI, 3).is_err());
    }

    #[test]
    fn inverse_consistency() {
        for k in [2, 3] {
            let mut last = f64::INFINITY;
            for i in 0..16 {
                let th = PI * (i + 1) as f64 / 18.0;
                let p = p_star(th, k).unwrap().p_star;
                assert!((theta_star(p, k).unwrap() - th).abs() < 1e-8);
                assert!(p < last, "p_k not decreasing at {th}");
                last = p;
            }
        }
    }

    #[test]
    fn cone_harmonic() {
        let v = vec![0.0, 1.0];
        let half = DwHarmonic::new(PI / 2.0, v.clone()).unwrap();
        for x in [[1.0, 2.0], [-3.0, 0.5], [0.2, 7.0]] {
            assert!((half.eval(&x) - x[1]).abs() < 1e-12);
        }
        let axis = vec![0.6, 0.8, 0.0];
        let u = DwHarmonic::new(1.0, axis.clone()).unwrap();
        let x = [0.5, 1.0, 0.2];
        let p = u.exponent.p_star;
        assert!((u.eval(&[1.5, 3.0, 0.6]) - 3f64.powf(p) * u.eval(&x)).abs() < 1e-10 * u.eval(&x));
        assert_eq!(u.eval(&[-1.0, 0.0, 0.0]), 0.0);
        assert_eq!(dw_harmonic(1.0, &axis, &[0.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn boundary_zero_and_interior_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (theta, axis) in [(PI / 4.0, vec![0.6, 0.8]), (1.1, vec![0.0, 0.0, 1.0])] {
            let u = DwHarmonic::new(theta, axis.clone()).unwrap();
            let k = axis.len();
            for _ in 0..1000 {
                let x: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
                let a = angle(&x, &axis);
                let val = u.eval(&x);
                if a < theta - 1e-6 {
                    assert!(val > 0.0, "{x:?}");
                } else if a > theta {
                    assert_eq!(val, 0.0);
                }
            }
            // a point exactly at the boundary angle
            let mut perp = vec![0.0; k];
            perp[if axis[0] == 0.0 { 0 } else { 1 }] = 1.0;
            let w: f64 = perp.iter().zip(&axis).map(|(a, b)| a * b).sum();
            let perp: Vec<f64> = perp.iter().zip(&axis).map(|(p, a)| p - w * a).collect();
            let pn = norm(&perp);
            let b: Vec<f64> = axis
                .iter()
                .zip(&perp)
                .map(|(a, p)| 2.0 * (a * theta.cos() + p / pn * theta.sin()))
                .collect();
            assert!(u.eval(&b).abs() < 1e-9, "{}", u.eval(&b));
        }
    }

    #[test]
    fn exponent_preconditions() {
        let drift = KilledWalk::new(
            StepLaw::from_pairs(1, &[(&[1], 0.6), (&[-1], 0.4)]).unwrap(),
            Cone::half_line(),
        )
        .unwrap();
        assert_eq!(
            exit_exponent(&drift, &[1], ExponentOptions::default()),
            Err(Error::NotCentered)
        );
        let aniso = KilledWalk::new(
            StepLaw::from_pairs(
                2,
                &[
                    (&[1, 0], 0.3),
                    (&[-1, 0], 0.3),
                    (&[0, 1], 0.2),
                    (&[0, -1], 0.2),
                ],
            )
            .unwrap(),
            Cone::quadrant(),
        )
        .unwrap();
        assert_eq!(
            exit_exponent(&aniso, &[1, 1], ExponentOptions::default()),
            Err(Error::AnisotropicCovariance)
        );
        let walk = KilledWalk::new(
            StepLaw::from_pairs(1, &[(&[1], 0.5), (&[-1], 0.5)]).unwrap(),
            Cone::half_line(),
        )
        .unwrap();
        let few = ExponentOptions {
            t_max: 10_000,
            trials: 200,
            seed: 1,
        };
        assert!(matches!(
            exit_exponent(&walk, &[1], few),
            Err(Error::TooFewSurvivors { .. })
        ));
    }

    #[test]
    fn half_line_slope_small_run() {
        let walk = KilledWalk::new(
            StepLaw::from_pairs(1, &[(&[1], 0.5), (&[-1], 0.5)]).unwrap(),
            Cone::half_line(),
        )
        .unwrap();
        let opts = ExponentOptions {
            t_max: 2000,
            trials: 40_000,
            seed: 9,
        };
        let e = exit_exponent(&walk, &[1], opts).unwrap();
        assert_eq!(e.reference, -0.5);
        assert!((e.slope + 0.5).abs() < 0.1, "{e:?}");
        assert!(e.stderr > 0.0 && e.stderr < 0.1);
        assert_eq!(e.rows.last().unwrap().t, 2000);
        assert_eq!(e.rows.first().unwrap().t, 1);
        assert_eq!(exit_exponent(&walk, &[1], opts).unwrap(), e);
    }

    proptest! {
        #[test]
        fn zero_map_strictly_decreasing(p in 0.6f64..6.0, dp in 0.01f64..1.0, k in 2usize..5) {
            prop_assert!(theta_star(p + dp, k).unwrap() < theta_star(p, k).unwrap());
        }
    }
}
