//! Cramér exponential change of measure.
//!
//! For a direction `q` on the unit sphere, `alpha(q)` is the point of the
//! level set `{R = 1}` where `grad R` points along `q`; equivalently the
//! maximizer of `alpha . q` over `D = {R <= 1}`. The tilted law
//! `mu_alpha(x) = exp(alpha . x) mu(x)` then drifts along `q`, and
//! `alpha(q) . q` is the exponential decay rate of the Green function in
//! direction `q`.
//!
//! The set of directions whose twisted walk has a non-integrable exit time
//! is not decidable by finite computation; for circular cones it coincides
//! with the full set of cone directions, which is what the probes assume.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{dot, min_eigenvalue, norm, normalized, solve};
use crate::steplaw::{Atom, StepLaw};

const MAX_ITER: usize = 200;
const CERTIFICATE_PROBES: usize = 100;
const CERTIFICATE_SEED: u64 = 0x7117_5eed;

#[derive(Debug, Clone, PartialEq)]
pub struct TiltSolution {
    pub q: Vec<f64>,
    pub alpha: Vec<f64>,
    /// `R(alpha)`, one up to rounding.
    pub r_value: f64,
    /// `grad R(alpha)`, parallel to `q`.
    pub grad: Vec<f64>,
    /// `alpha . q`, the large-deviation decay rate along `q`.
    pub decay: f64,
    /// Random boundary points of `D` that beat `alpha` on `alpha . q`.
    pub certificate_violations: usize,
}

impl TiltSolution {
    /// Worst coordinate gap between `grad / |grad|` and `q`.
    pub fn direction_residual(&self) -> f64 {
        let g = normalized(&self.grad).unwrap_or_else(|| vec![f64::NAN; self.q.len()]);
        g.iter()
            .zip(&self.q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// CSV row: q coords, alpha coords, decay, |R - 1|, direction residual.
    pub fn csv_row(&self) -> String {
        let mut cols: Vec<String> = self.q.iter().map(|v| v.to_string()).collect();
        cols.extend(self.alpha.iter().map(|v| v.to_string()));
        cols.push(self.decay.to_string());
        cols.push((self.r_value - 1.0).abs().to_string());
        cols.push(self.direction_residual().to_string());
        cols.join(",")
    }

    pub fn csv_header(d: usize) -> String {
        let mut cols: Vec<String> = (0..d).map(|i| format!("q{i}")).collect();
        cols.extend((0..d).map(|i| format!("alpha{i}")));
        cols.extend(["decay", "r_residual", "direction_residual"].map(String::from));
        cols.join(",")
    }
}

/// Solves for the tilt `alpha(q)`.
pub fn tilt_solve(law: &StepLaw, q: &[f64]) -> Result<TiltSolution> {
    let d = law.dim();
    if q.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: q.len(),
        });
    }
    if (norm(q) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("q must be a unit vector".into()));
    }
    let moments = law.moments();
    if min_eigenvalue(&moments.covariance) <= 1e-12 {
        return Err(Error::DegenerateLaw);
    }
    if norm(&moments.mean) < 1e-12 {
        return Err(Error::ZeroDrift);
    }

    let alpha = if d == 1 {
        solve_on_line(law, q[0])?
    } else {
        match newton_lagrange(law, q, &moments.mean, &moments.covariance) {
            Some(a) => a,
            None => {
                log::debug!(
                    "Lagrange-Newton failed for q = {q:?}; falling back to level-set search"
                );
                level_set_search(law, q)?
            }
        }
    };
    finish(law, q, alpha)
}

fn finish(law: &StepLaw, q: &[f64], alpha: Vec<f64>) -> Result<TiltSolution> {
    let r_value = law.generating_function(&alpha)?;
    let grad = law.gradient(&alpha)?;
    let decay = dot(&alpha, q);
    let certificate_violations = maximality_certificate(law, q, decay);
    let sol = TiltSolution {
        q: q.to_vec(),
        alpha,
        r_value,
        grad,
        decay,
        certificate_violations,
    };
    if (sol.r_value - 1.0).abs() > 1e-10 || sol.direction_residual() > 1e-8 {
        return Err(Error::NoConvergence {
            iterations: MAX_ITER,
        });
    }
    Ok(sol)
}

/// In one dimension `{R = 1}` is `{0, a}`; pick the point whose derivative
/// has the sign of `q` and find `a` by bisection along its ray.
fn solve_on_line(law: &StepLaw, q: f64) -> Result<Vec<f64>> {
    let m = law.mean()[0];
    if m * q > 0.0 {
        return Ok(vec![0.0]);
    }
    let dir = -m.signum();
    let lam = |t: f64| law.log_mgf_value(&[dir * t]);
    let mut hi = 1.0;
    let mut iters = 0;
    while lam(hi) <= 0.0 {
        hi *= 2.0;
        iters += 1;
        if iters > 60 {
            return Err(Error::NoConvergence { iterations: iters });
        }
    }
    let mut lo = 0.0;
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if lam(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    // Final Newton polish on R(alpha) = 1 from the outer bracket.
    let mut a = dir * 0.5 * (lo + hi);
    for _ in 0..5 {
        let r = law.generating_function(&[a])?;
        let g = law.gradient(&[a])?[0];
        if g == 0.0 {
            break;
        }
        let next = a - (r - 1.0) / g;
        if (next / dir) <= 0.0 {
            break;
        }
        a = next;
    }
    Ok(vec![a])
}

/// Newton on `grad R(alpha) = lambda q`, `R(alpha) = 1` with backtracking
/// on the residual norm. Returns `None` when it stalls or lands on the
/// antipodal solution (`lambda < 0`).
fn newton_lagrange(law: &StepLaw, q: &[f64], mean: &[f64], cov: &DMatrix<f64>) -> Option<Vec<f64>> {
    let d = q.len();
    // Gaussian approximation: log R(a) ~ m.a + a'Γa/2.
    let cinv_q = solve(cov, &DVector::from_column_slice(q))?;
    let cinv_m = solve(cov, &DVector::from_column_slice(mean))?;
    let lam0 = (dot(mean, cinv_m.as_slice()) / dot(q, cinv_q.as_slice())).sqrt();
    let mut alpha: Vec<f64> = (0..d).map(|i| lam0 * cinv_q[i] - cinv_m[i]).collect();
    // Backtrack toward the origin until R is finite and moderate.
    for _ in 0..60 {
        match law.generating_function(&alpha) {
            Ok(r) if r < 4.0 => break,
            _ => alpha.iter_mut().for_each(|a| *a *= 0.5),
        }
    }
    let mut lambda = lam0;

    let residual = |alpha: &[f64], lambda: f64| -> Option<Vec<f64>> {
        let g = law.gradient(alpha).ok()?;
        let r = law.generating_function(alpha).ok()?;
        let mut f: Vec<f64> = g.iter().zip(q).map(|(gi, qi)| gi - lambda * qi).collect();
        f.push(r - 1.0);
        Some(f)
    };

    let mut f = residual(&alpha, lambda)?;
    for _ in 0..MAX_ITER {
        if norm(&f) < 1e-15 {
            break;
        }
        let h = law.hessian(&alpha).ok()?;
        let g = law.gradient(&alpha).ok()?;
        let mut jac = DMatrix::zeros(d + 1, d + 1);
        for i in 0..d {
            for j in 0..d {
                jac[(i, j)] = h[(i, j)];
            }
            jac[(i, d)] = -q[i];
            jac[(d, i)] = g[i];
        }
        let rhs = DVector::from_iterator(d + 1, f.iter().map(|v| -v));
        let step = jac.lu().solve(&rhs)?;
        let base = norm(&f);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let trial_alpha: Vec<f64> = (0..d).map(|i| alpha[i] + t * step[i]).collect();
            let trial_lambda = lambda + t * step[d];
            if let Some(tf) = residual(&trial_alpha, trial_lambda) {
                if norm(&tf) < base || norm(&tf) < 1e-15 {
                    alpha = trial_alpha;
                    lambda = trial_lambda;
                    f = tf;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let good = norm(&f) < 1e-11 && lambda > 0.0;
    good.then_some(alpha)
}

/// Fallback: the curve `{alpha : grad log R(alpha) = t q}` for `t > 0`
/// crosses `{R = 1}` exactly once, and `log R` increases along it. Each
/// point of the curve is a conjugate maximizer, found by the rate-function
/// ascent; `t` is located by bisection.
fn level_set_search(law: &StepLaw, q: &[f64]) -> Result<Vec<f64>> {
    let at = |t: f64| -> Result<(f64, Vec<f64>)> {
        let v: Vec<f64> = q.iter().map(|c| t * c).collect();
        let sol = law.rate_function(&v)?;
        Ok((law.log_mgf_value(&sol.alpha), sol.alpha))
    };
    let mut lo = 0.0;
    let mut hi = law.max_step();
    // Shrink until t q is inside the hull, then find a positive level.
    let mut iters = 0;
    loop {
        iters += 1;
        if iters > MAX_ITER {
            return Err(Error::NoConvergence { iterations: iters });
        }
        match at(hi) {
            Ok((l, _)) if l > 0.0 => break,
            Ok(_) => {
                lo = hi;
                hi *= 1.5;
            }
            Err(Error::Unbounded) => hi = 0.5 * (lo + hi),
            Err(e) => return Err(e),
        }
    }
    let mut best = at(lo)?.1;
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let (l, a) = at(mid)?;
        if l <= 0.0 {
            lo = mid;
            best = a;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi.max(1e-300) {
            break;
        }
    }
    Ok(best)
}

/// Counts random boundary points `a'` of `D` with `a' . q` above the
/// solution's value, probing along seeded random rays.
fn maximality_certificate(law: &StepLaw, q: &[f64], decay: f64) -> usize {
    let d = q.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(CERTIFICATE_SEED);
    let mut violations = 0;
    for _ in 0..CERTIFICATE_PROBES {
        let u: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let Some(u) = normalized(&u) else { continue };
        let lam = |t: f64| law.log_mgf_value(&u.iter().map(|c| t * c).collect::<Vec<_>>());
        // Boundary of D along the ray, capped for unbounded directions.
        let mut hi = 1.0;
        while lam(hi) <= 0.0 && hi < 1e3 {
            hi *= 2.0;
        }
        let boundary = if lam(hi) <= 0.0 {
            hi
        } else {
            let mut lo = 0.0;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if lam(mid) <= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let value = boundary * dot(&u, q);
        if value > decay + 1e-9 * (1.0 + decay.abs()) {
            violations += 1;
        }
    }
    violations
}

/// The twisted law `mu_alpha(x) = mu(x) exp(alpha . x)`.
///
/// Requires `R(alpha) = 1` within `1e-10`; the masses are renormalized by
/// `R(alpha)` so the result is exactly a probability law.
pub fn tilted_law(law: &StepLaw, alpha: &[f64]) -> Result<StepLaw> {
    let r = law.generating_function(alpha)?;
    if (r - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { sum: r });
    }
    let atoms = law
        .atoms()
        .iter()
        .map(|a| Atom {
            x: a.x.clone(),
            p: a.p * crate::linalg::dot_lattice(alpha, &a.x).exp() / r,
        })
        .collect();
    StepLaw::new(law.dim(), atoms)
}

/// The gradient map `q(alpha) = grad R(alpha) / |grad R(alpha)|`.
pub fn direction_of(law: &StepLaw, alpha: &[f64]) -> Result<Vec<f64>> {
    let g = law.gradient(alpha)?;
    if norm(&g) < 1e-12 {
        return Err(Error::CriticalPoint);
    }
    Ok(normalized(&g).expect("non-zero gradient"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drift1() -> StepLaw {
        StepLaw::from_pairs(1, &[(&[1], 0.7), (&[-1], 0.3)]).unwrap()
    }

    fn tri() -> StepLaw {
        StepLaw::from_pairs(2, &[(&[1, 0], 0.4), (&[0, 1], 0.4), (&[-1, -1], 0.2)]).unwrap()
    }

    fn unit(angle: f64) -> Vec<f64> {
        vec![angle.cos(), angle.sin()]
    }

    #[test]
    fn drift_direction_gives_zero_tilt() {
        let s = tilt_solve(&drift1(), &[1.0]).unwrap();
        assert_eq!(s.alpha, vec![0.0]);
        assert_eq!(s.decay, 0.0);

        let m = tri().mean();
        let q = normalized(&m).unwrap();
        let s = tilt_solve(&tri(), &q).unwrap();
        assert!(norm(&s.alpha) < 1e-12, "{:?}", s.alpha);
        assert!(s.decay.abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_reflection() {
        let s = tilt_solve(&drift1(), &[-1.0]).unwrap();
        assert!((s.alpha[0] - (3.0f64 / 7.0).ln()).abs() < 1e-14);
        assert!((s.decay - (7.0f64 / 3.0).ln()).abs() < 1e-14);
        assert_eq!(s.certificate_violations, 0);
    }

    #[test]
    fn invariants_on_arc_of_directions() {
        let law = tri();
        let mut prev: Option<f64> = None;
        for k in 0..64 {
            let q = unit(2.0 * std::f64::consts::PI * k as f64 / 64.0);
            let s = tilt_solve(&law, &q).unwrap();
            assert!((s.r_value - 1.0).abs() <= 1e-10);
            assert!(s.direction_residual() <= 1e-8);
            assert!(s.decay >= -1e-12);
            assert_eq!(s.certificate_violations, 0, "q = {q:?}");
            let back = direction_of(&law, &s.alpha).unwrap();
            for (a, b) in back.iter().zip(&q) {
                assert!((a - b).abs() <= 1e-8);
            }
            if let Some(p) = prev {
                assert!((s.decay - p).abs() <= 0.2);
            }
            prev = Some(s.decay);
        }
    }

    #[test]
    fn decay_respects_symmetry_of_the_law() {
        // invariant under swapping coordinates
        let law = tri();
        for k in 0..16 {
            let a = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
            let q = unit(a);
            let swapped = vec![q[1], q[0]];
            let s = tilt_solve(&law, &q).unwrap();
            let t = tilt_solve(&law, &swapped).unwrap();
            assert!((s.decay - t.decay).abs() < 1e-10);
            assert!((s.alpha[0] - t.alpha[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn fallback_agrees_with_newton() {
        let law = tri();
        for k in 0..8 {
            let q = unit(0.3 + k as f64 * 0.7);
            let newton = tilt_solve(&law, &q).unwrap();
            let fallback = level_set_search(&law, &q).unwrap_or_else(|e| panic!("{q:?}: {e}"));
            for (a, b) in newton.alpha.iter().zip(&fallback) {
                assert!((a - b).abs() < 1e-7, "{:?} vs {:?}", newton.alpha, fallback);
            }
        }
    }

    #[test]
    fn tilted_law_examples() {
        let law = drift1();
        assert_eq!(tilted_law(&law, &[0.0]).unwrap(), law);
        let a = (3.0f64 / 7.0).ln();
        let t = tilted_law(&law, &[a]).unwrap();
        assert!((t.mass(&[1]) - 0.3).abs() < 1e-14);
        assert!((t.mass(&[-1]) - 0.7).abs() < 1e-14);
        assert!((t.mean()[0] + 0.4).abs() < 1e-14);
        assert!(matches!(
            tilted_law(&law, &[0.3]),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn tilted_mean_is_gradient() {
        let law = tri();
        let s = tilt_solve(&law, &unit(0.4)).unwrap();
        let t = tilted_law(&law, &s.alpha).unwrap();
        for (a, b) in t.mean().iter().zip(&s.grad) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn direction_examples() {
        let law = drift1();
        assert_eq!(direction_of(&law, &[0.0]).unwrap(), vec![1.0]);
        assert_eq!(
            direction_of(&law, &[(3.0f64 / 7.0).ln()]).unwrap(),
            vec![-1.0]
        );
        let centered = StepLaw::from_pairs(1, &[(&[1], 0.5), (&[-1], 0.5)]).unwrap();
        assert_eq!(direction_of(&centered, &[0.0]), Err(Error::CriticalPoint));
    }

    #[test]
    fn degenerate_and_centered_laws_are_rejected() {
        let line = StepLaw::from_pairs(2, &[(&[1, 1], 0.6), (&[-1, -1], 0.4)]).unwrap();
        assert_eq!(tilt_solve(&line, &unit(0.0)), Err(Error::DegenerateLaw));
        let nn = StepLaw::from_pairs(
            2,
            &[
                (&[1, 0], 0.25),
                (&[-1, 0], 0.25),
                (&[0, 1], 0.25),
                (&[0, -1], 0.25),
            ],
        )
        .unwrap();
        assert_eq!(tilt_solve(&nn, &unit(0.0)), Err(Error::ZeroDrift));
    }
}
