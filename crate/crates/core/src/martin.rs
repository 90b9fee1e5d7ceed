//! Martin-boundary candidates `k_q(x) = exp(alpha(q) . x) V_alpha(x)`,
//! built from the renewal function of the walk tilted toward `q`, and the
//! checks that tie them to the Martin kernel.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cone::LatticeWindow;
use crate::error::{Error, Result};
use crate::green::{check_direction, ray_points, twisted_engine, KilledWalk, ProbeOptions};
use crate::ladder::{renewal_series, RenewalOptions, RenewalTable};
use crate::linalg::{dot_lattice, lattice_norm};
use crate::tilt::{tilt_solve, TiltSolution};

/// Worst relative harmonic defect and where it occurs.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub max: f64,
    pub argmax: Vec<i64>,
    pub points_checked: usize,
}

/// `max |sum_y p(x, y) f(y) - f(x)| / f(x)` over window points whose
/// one-step neighbourhood stays in the window (steps out of the cone count
/// as `f = 0`). `mask`, when given, further restricts the points checked.
pub fn harmonic_residual(
    walk: &KilledWalk,
    window: &LatticeWindow,
    f: &[f64],
    mask: Option<&[bool]>,
) -> Result<ResidualReport> {
    if f.len() != window.len() {
        return Err(Error::InvalidArgument(
            "function length does not match window".into(),
        ));
    }
    let d = walk.dim();
    let mut best: Option<ResidualReport> = None;
    let mut checked = 0;
    let mut y = vec![0i64; d];
    'points: for (i, x) in window.points().iter().enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        if !(f[i] > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "f is not positive at {x:?}"
            )));
        }
        let mut pf = 0.0;
        for a in walk.law().atoms() {
            for j in 0..d {
                y[j] = x[j] + a.x[j];
            }
            if !walk.cone().contains_lattice(&y) {
                continue;
            }
            match window.index_of(&y) {
                Some(k) => pf += a.p * f[k],
                None => continue 'points,
            }
        }
        checked += 1;
        let r = (pf - f[i]).abs() / f[i];
        if best.as_ref().is_none_or(|b| r > b.max) {
            best = Some(ResidualReport {
                max: r,
                argmax: x.clone(),
                points_checked: 0,
            });
        }
    }
    let mut report = best.ok_or(Error::NoInteriorPoints)?;
    report.points_checked = checked;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct HarmonicCandidate {
    pub q: Vec<f64>,
    pub tilt: TiltSolution,
    /// Renewal function of the tilted walk; its window and edge flags are
    /// shared by `values`.
    pub renewal: RenewalTable,
    /// `k_q` on the padded window.
    pub values: Vec<f64>,
    /// Harmonic residual over the non-edge interior.
    pub residual: ResidualReport,
}

impl HarmonicCandidate {
    pub fn window(&self) -> &Arc<LatticeWindow> {
        &self.renewal.window
    }

    pub fn get(&self, x: &[i64]) -> Option<f64> {
        self.window().index_of(x).map(|i| self.values[i])
    }

    pub fn to_csv(&self) -> String {
        let d = self.q.len();
        let mut out: String = (0..d).map(|i| format!("x{i},")).collect();
        out.push_str("k_q,edge\n");
        for (i, x) in self.window().points().iter().enumerate() {
            for c in x {
                out.push_str(&format!("{c},"));
            }
            out.push_str(&format!("{},{}\n", self.values[i], self.renewal.edge[i]));
        }
        out
    }
}

/// Builds `k_q` on the cone window of radius `radius` (plus the renewal
/// padding) and measures its harmonic residual.
pub fn k_q_build(
    walk: &KilledWalk,
    q: &[f64],
    radius: f64,
    tol: f64,
    opts: RenewalOptions,
) -> Result<HarmonicCandidate> {
    check_direction(walk, q)?;
    let tilt = tilt_solve(walk.law(), q)?;
    let twisted = walk.twisted(&tilt.alpha)?;
    let renewal = renewal_series(&twisted, radius, tol, opts)?;
    let values: Vec<f64> = renewal
        .window
        .points()
        .iter()
        .zip(&renewal.values)
        .map(|(x, v)| dot_lattice(&tilt.alpha, x).exp() * v)
        .collect();
    let interior: Vec<bool> = renewal.edge.iter().map(|e| !e).collect();
    let residual = harmonic_residual(walk, &renewal.window, &values, Some(&interior))?;
    Ok(HarmonicCandidate {
        q: q.to_vec(),
        tilt,
        renewal,
        values,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub checked: usize,
    pub violations: usize,
    /// Largest relative shortfall `(rhs - lhs) / lhs` seen.
    pub worst: f64,
}

/// Samples pairs `(x, y)` of non-edge points with `x + y` non-edge and
/// checks `k(x + y) >= exp(alpha . x) k(y) - tol k(x + y)`.
pub fn monotonicity_check(
    candidate: &HarmonicCandidate,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<MonotonicityReport> {
    let window = candidate.window();
    let inner: Vec<usize> = (0..window.len())
        .filter(|&i| !candidate.renewal.edge[i])
        .collect();
    if inner.is_empty() {
        return Err(Error::NoValidPairs);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = window.dim();
    let mut sum = vec![0i64; d];
    let mut report = MonotonicityReport {
        checked: 0,
        violations: 0,
        worst: f64::NEG_INFINITY,
    };
    let max_attempts = 1000 * samples.max(1);
    let mut attempts = 0;
    while report.checked < samples {
        attempts += 1;
        if attempts > max_attempts {
            break;
        }
        let i = inner[rng.random_range(0..inner.len())];
        let j = inner[rng.random_range(0..inner.len())];
        let (x, y) = (&window.points()[i], &window.points()[j]);
        for k in 0..d {
            sum[k] = x[k] + y[k];
        }
        let Some(s) = window.index_of(&sum) else {
            continue;
        };
        if candidate.renewal.edge[s] {
            continue;
        }
        let lhs = candidate.values[s];
        let rhs = dot_lattice(&candidate.tilt.alpha, x).exp() * candidate.values[j];
        let shortfall = (rhs - lhs) / lhs;
        report.worst = report.worst.max(shortfall);
        if shortfall > tol {
            report.violations += 1;
        }
        report.checked += 1;
    }
    if report.checked == 0 {
        return Err(Error::NoValidPairs);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartinRow {
    pub r: f64,
    pub x: Vec<i64>,
    pub kernel: f64,
    pub k_q: f64,
    /// `|K - k_q| / k_q`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartinTable {
    pub q: Vec<f64>,
    pub rows: Vec<MartinRow>,
}

impl MartinTable {
    /// Largest gap among the rows at the largest radius.
    pub fn final_gap(&self) -> f64 {
        let rmax = self
            .rows
            .iter()
            .map(|r| r.r)
            .fold(f64::NEG_INFINITY, f64::max);
        self.rows
            .iter()
            .filter(|r| r.r == rmax)
            .map(|r| r.gap)
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let d = self.q.len();
        let mut out = String::from("r,");
        out.push_str(&(0..d).map(|i| format!("x{i},")).collect::<String>());
        out.push_str("K,k_q,gap\n");
        for row in &self.rows {
            out.push_str(&format!("{},", row.r));
            for c in &row.x {
                out.push_str(&format!("{c},"));
            }
            out.push_str(&format!("{},{},{}\n", row.kernel, row.k_q, row.gap));
        }
        out
    }
}

/// `K(x, y_r) = exp(alpha . x) G_alpha(x, y_r) / G_alpha(0, y_r)` along the
/// ray of `q`, next to `k_q(x)`.
pub fn martin_limit_probe(
    walk: &KilledWalk,
    q: &[f64],
    x_set: &[Vec<i64>],
    radii: &[f64],
    probe: &ProbeOptions,
    renewal: RenewalOptions,
) -> Result<MartinTable> {
    check_direction(walk, q)?;
    let ys = ray_points(walk.cone(), q, radii)?;
    let mut reach = ys.clone();
    reach.extend(x_set.iter().cloned());
    let (tilt, engine) = twisted_engine(walk, q, &reach, probe)?;
    let zero = vec![0i64; walk.dim()];
    let mut sources = vec![zero];
    sources.extend(x_set.iter().cloned());
    let tables = engine.converged_many(&sources, probe.tol)?;
    let reach_x = x_set.iter().map(|x| lattice_norm(x)).fold(0.0, f64::max);
    let candidate = k_q_build(walk, q, reach_x.max(1.0), probe.tol.max(1e-12), renewal)?;
    let mut rows = Vec::new();
    for (&r, y) in radii.iter().zip(&ys) {
        let den = tables[0].get(y).unwrap_or(0.0);
        if den < 1e-300 {
            return Err(Error::ZeroDenominator);
        }
        for (x, table) in x_set.iter().zip(&tables[1..]) {
            let kernel = dot_lattice(&tilt.alpha, x).exp() * table.get(y).unwrap_or(0.0) / den;
            let k_q = candidate.get(x).ok_or_else(|| {
                Error::InvalidArgument(format!("{x:?} outside the candidate window"))
            })?;
            rows.push(MartinRow {
                r,
                x: x.clone(),
                kernel,
                k_q,
                gap: (kernel - k_q).abs() / k_q,
            });
        }
    }
    Ok(MartinTable {
        q: q.to_vec(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::{lattice_window, Cone};
    use crate::green::KilledWalk;
    use crate::steplaw::StepLaw;

    fn drift1() -> KilledWalk {
        KilledWalk::new(
            StepLaw::from_pairs(1, &[(&[1], 0.7), (&[-1], 0.3)]).unwrap(),
            Cone::half_line(),
        )
        .unwrap()
    }

    fn quadrant_walk() -> KilledWalk {
        KilledWalk::new(
            StepLaw::from_pairs(2, &[(&[1, 0], 0.4), (&[0, 1], 0.4), (&[-1, -1], 0.2)]).unwrap(),
            Cone::quadrant(),
        )
        .unwrap()
    }

    #[test]
    fn one_dimensional_candidate_is_the_renewal_function() {
        let w = drift1();
        let k = k_q_build(&w, &[1.0], 15.0, 1e-12, RenewalOptions::default()).unwrap();
        assert_eq!(k.tilt.alpha, vec![0.0]);
        assert_eq!(k.get(&[0]).unwrap(), 1.0);
        for x in 0..15 {
            let want = 1.75 * (1.0 - (3.0f64 / 7.0).powi(x + 1));
            assert!((k.get(&[x as i64]).unwrap() - want).abs() < 1e-9);
        }
        assert!(k.residual.max <= 1e-6, "{:?}", k.residual);
        assert_eq!(
            k_q_build(&w, &[-1.0], 5.0, 1e-12, RenewalOptions::default()).unwrap_err(),
            Error::QNotInCone
        );
    }

    #[test]
    fn constant_function_detects_killing() {
        let w = drift1();
        let window = lattice_window(w.cone(), 5.0).unwrap();
        let ones = vec![1.0; window.len()];
        let r = harmonic_residual(&w, &window, &ones, None).unwrap();
        assert!((r.max - 0.3).abs() < 1e-15);
        assert_eq!(r.argmax, vec![0]);
        let tiny = lattice_window(w.cone(), 0.0).unwrap();
        assert_eq!(
            harmonic_residual(&w, &tiny, &[1.0], None),
            Err(Error::NoInteriorPoints)
        );
    }

    #[test]
    fn monotone_in_one_dimension() {
        let w = drift1();
        let k = k_q_build(&w, &[1.0], 15.0, 1e-12, RenewalOptions::default()).unwrap();
        assert!(k.get(&[2]).unwrap() >= k.get(&[1]).unwrap());
        let rep = monotonicity_check(&k, 2000, 5, 1e-9).unwrap();
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.checked, 2000);
    }

    #[test]
    fn drift_direction_candidate_matches_untwisted_renewal() {
        let w = quadrant_walk();
        let m = w.law().mean();
        let n = (m[0] * m[0] + m[1] * m[1]).sqrt();
        let q = [m[0] / n, m[1] / n];
        let k = k_q_build(&w, &q, 6.0, 1e-11, RenewalOptions::default()).unwrap();
        let v = renewal_series(&w, 6.0, 1e-11, RenewalOptions::default()).unwrap();
        for (i, x) in v.window.points().iter().enumerate() {
            let kx = k.get(x).unwrap();
            assert!((kx - v.values[i]).abs() <= 1e-9 * v.values[i], "{x:?}");
        }
        assert!((k.get(&[0, 0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn martin_probe_in_one_dimension() {
        let w = drift1();
        let t = martin_limit_probe(
            &w,
            &[1.0],
            &[vec![0], vec![1]],
            &[20.0, 40.0, 60.0],
            &ProbeOptions::default(),
            RenewalOptions::default(),
        )
        .unwrap();
        for row in &t.rows {
            if row.x == vec![0] {
                assert_eq!(row.kernel, 1.0);
                assert_eq!(row.k_q, 1.0);
            }
        }
        assert!(t.final_gap() <= 0.05);
        assert!(t.to_csv().starts_with("r,x0,K,k_q,gap\n"));
    }
}
