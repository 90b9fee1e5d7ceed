//! Finite-support step distributions on the integer lattice and their
//! analytic companions: moments, the generating function `R`, the
//! log-moment generating function and its convex conjugate.

use std::collections::{HashMap, HashSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cone::{lattice_window, Cone};
use crate::error::{Error, Result};
use crate::linalg::{dot, dot_lattice, lattice_norm, norm, solve};

const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: Vec<i64>,
    pub p: f64,
}

/// A probability measure on `Z^d` with finitely many atoms.
///
/// Immutable after construction; the constructor enforces positive masses
/// summing to one, distinct atoms and a common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStepLaw", into = "RawStepLaw")]
pub struct StepLaw {
    dim: usize,
    atoms: Vec<Atom>,
}

#[derive(Serialize, Deserialize)]
struct RawStepLaw {
    d: usize,
    atoms: Vec<Atom>,
}

impl TryFrom<RawStepLaw> for StepLaw {
    type Error = Error;
    fn try_from(raw: RawStepLaw) -> Result<Self> {
        StepLaw::new(raw.d, raw.atoms)
    }
}

impl From<StepLaw> for RawStepLaw {
    fn from(law: StepLaw) -> Self {
        RawStepLaw {
            d: law.dim,
            atoms: law.atoms,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

impl StepLaw {
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidLaw("dimension must be positive".into()));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidLaw("empty support".into()));
        }
        let mut seen = HashSet::new();
        for a in &atoms {
            if a.x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.x.len(),
                });
            }
            if !(a.p > 0.0 && a.p <= 1.0) {
                return Err(Error::InvalidLaw(format!("mass {} outside (0,1]", a.p)));
            }
            if !seen.insert(a.x.clone()) {
                return Err(Error::InvalidLaw(format!("duplicate atom {:?}", a.x)));
            }
        }
        let sum: f64 = atoms.iter().map(|a| a.p).sum();
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(StepLaw { dim, atoms })
    }

    /// Convenience constructor from `(vector, mass)` pairs.
    pub fn from_pairs(dim: usize, pairs: &[(&[i64], f64)]) -> Result<Self> {
        Self::new(
            dim,
            pairs
                .iter()
                .map(|(x, p)| Atom {
                    x: x.to_vec(),
                    p: *p,
                })
                .collect(),
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("step law serializes")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn mass(&self, x: &[i64]) -> f64 {
        self.atoms
            .iter()
            .find(|a| a.x.as_slice() == x)
            .map_or(0.0, |a| a.p)
    }

    /// Largest Euclidean length of a support vector.
    pub fn max_step(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| lattice_norm(&a.x))
            .fold(0.0, f64::max)
    }

    pub fn moments(&self) -> Moments {
        let d = self.dim;
        let mut mean = vec![0.0; d];
        for a in &self.atoms {
            for (m, &x) in mean.iter_mut().zip(&a.x) {
                *m += a.p * x as f64;
            }
        }
        let mut cov = DMatrix::zeros(d, d);
        for a in &self.atoms {
            for i in 0..d {
                let di = a.x[i] as f64 - mean[i];
                for j in 0..d {
                    let dj = a.x[j] as f64 - mean[j];
                    cov[(i, j)] += a.p * di * dj;
                }
            }
        }
        Moments {
            mean,
            covariance: cov,
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        self.moments().mean
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `R(alpha) = sum_x mu(x) exp(alpha . x)`.
    pub fn generating_function(&self, alpha: &[f64]) -> Result<f64> {
        self.check_dim(alpha)?;
        let mut r = 0.0;
        for a in &self.atoms {
            let e = dot_lattice(alpha, &a.x).exp();
            if !e.is_finite() {
                return Err(Error::Overflow);
            }
            r += a.p * e;
        }
        Ok(r)
    }

    /// `grad R(alpha) = sum_x x mu(x) exp(alpha . x)`.
    pub fn gradient(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(alpha)?;
        let mut g = vec![0.0; self.dim];
        for a in &self.atoms {
            let e = dot_lattice(alpha, &a.x).exp();
            if !e.is_finite() {
                return Err(Error::Overflow);
            }
            for (gi, &xi) in g.iter_mut().zip(&a.x) {
                *gi += a.p * e * xi as f64;
            }
        }
        Ok(g)
    }

    /// Hessian of `R` at `alpha`.
    pub fn hessian(&self, alpha: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(alpha)?;
        let d = self.dim;
        let mut h = DMatrix::zeros(d, d);
        for a in &self.atoms {
            let e = dot_lattice(alpha, &a.x).exp();
            if !e.is_finite() {
                return Err(Error::Overflow);
            }
            for i in 0..d {
                for j in 0..d {
                    h[(i, j)] += a.p * e * (a.x[i] * a.x[j]) as f64;
                }
            }
        }
        Ok(h)
    }

    /// `log R`, its gradient and Hessian, evaluated without overflow.
    pub fn log_mgf(&self, alpha: &[f64]) -> (f64, Vec<f64>, DMatrix<f64>) {
        let d = self.dim;
        let exps: Vec<f64> = self
            .atoms
            .iter()
            .map(|a| a.p.ln() + dot_lattice(alpha, &a.x))
            .collect();
        let top = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = exps.iter().map(|e| (e - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        let value = top + total.ln();
        let mut grad = vec![0.0; d];
        for (a, w) in self.atoms.iter().zip(&weights) {
            for (g, &x) in grad.iter_mut().zip(&a.x) {
                *g += w / total * x as f64;
            }
        }
        let mut hess = DMatrix::zeros(d, d);
        for (a, w) in self.atoms.iter().zip(&weights) {
            let w = w / total;
            for i in 0..d {
                for j in 0..d {
                    hess[(i, j)] += w * (a.x[i] as f64 - grad[i]) * (a.x[j] as f64 - grad[j]);
                }
            }
        }
        (value, grad, hess)
    }

    pub fn log_mgf_value(&self, alpha: &[f64]) -> f64 {
        let exps: Vec<f64> = self
            .atoms
            .iter()
            .map(|a| a.p.ln() + dot_lattice(alpha, &a.x))
            .collect();
        let top = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        top + exps.iter().map(|e| (e - top).exp()).sum::<f64>().ln()
    }

    /// Convex conjugate `sup_alpha (alpha . v - log R(alpha))`.
    ///
    /// Damped Newton ascent from `alpha = 0`. Points on the boundary of the
    /// convex hull of the support are handled by the same iteration: the
    /// gradient decays geometrically while `alpha` runs off to infinity, so
    /// the objective converges to the supremum. Points outside the closed
    /// hull keep a gradient bounded away from zero and are reported as
    /// [`Error::Unbounded`].
    pub fn rate_function(&self, v: &[f64]) -> Result<RateValue> {
        self.check_dim(v)?;
        let d = self.dim;
        let objective = |alpha: &[f64]| dot(alpha, v) - self.log_mgf_value(alpha);
        let mut alpha = vec![0.0; d];
        let mut value = objective(&alpha);
        const MAX_ITER: usize = 600;
        for iter in 0..MAX_ITER {
            let (_, grad_l, hess) = self.log_mgf(&alpha);
            let g: Vec<f64> = v.iter().zip(&grad_l).map(|(a, b)| a - b).collect();
            if norm(&g) <= 1e-10 {
                return Ok(RateValue {
                    value: value.max(0.0),
                    alpha,
                    iterations: iter,
                });
            }
            let ridge = 1e-14 * (1.0 + hess.norm());
            let mut h = hess.clone();
            for i in 0..d {
                h[(i, i)] += ridge;
            }
            let step = solve(&h, &DVector::from_column_slice(&g))
                .map(|s| s.as_slice().to_vec())
                .unwrap_or_else(|| g.clone());
            let mut t = 1.0;
            let mut improved = false;
            for _ in 0..60 {
                let trial: Vec<f64> = alpha.iter().zip(&step).map(|(a, s)| a + t * s).collect();
                let f = objective(&trial);
                if f > value {
                    alpha = trial;
                    value = f;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                // Objective is flat to rounding; the gradient test decides.
                let (_, grad_l, _) = self.log_mgf(&alpha);
                let gn = norm(
                    &v.iter()
                        .zip(&grad_l)
                        .map(|(a, b)| a - b)
                        .collect::<Vec<_>>(),
                );
                if gn <= 1e-8 {
                    return Ok(RateValue {
                        value: value.max(0.0),
                        alpha,
                        iterations: iter,
                    });
                }
                return Err(Error::Unbounded);
            }
        }
        Err(Error::Unbounded)
    }

    /// Positive root `beta` of `R(-beta u) = 1` for a unit vector `u` with
    /// `u . m > 0`: the exponential rate at which the walk avoids moving a
    /// distance `s` against `u` (`P(ever) <= exp(-beta s)`).
    ///
    /// Returns `0` when `u . m <= 0` and `+inf` when no atom has a negative
    /// component along `u`.
    pub fn escape_rate(&self, u: &[f64]) -> f64 {
        let drift: f64 = self.atoms.iter().map(|a| a.p * dot_lattice(u, &a.x)).sum();
        if drift <= 0.0 {
            return 0.0;
        }
        if self.atoms.iter().all(|a| dot_lattice(u, &a.x) >= 0.0) {
            return f64::INFINITY;
        }
        let f = |beta: f64| {
            let minus: Vec<f64> = u.iter().map(|c| -beta * c).collect();
            self.log_mgf_value(&minus)
        };
        let mut hi = 1.0;
        while f(hi) <= 0.0 {
            hi *= 2.0;
        }
        // f <= 0 exactly on [0, root] by convexity and f'(0) = -u.m < 0
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * hi {
                break;
            }
        }
        lo
    }

    /// Cumulative table for sampling steps by inversion.
    pub fn sampler(&self) -> StepSampler {
        let mut cumulative = Vec::with_capacity(self.atoms.len());
        let mut acc = 0.0;
        for a in &self.atoms {
            acc += a.p;
            cumulative.push(acc);
        }
        StepSampler {
            cumulative,
            steps: self.atoms.iter().map(|a| a.x.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateValue {
    pub value: f64,
    /// Maximizing (or, on the hull boundary, far-out) tilt.
    pub alpha: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct StepSampler {
    cumulative: Vec<f64>,
    steps: Vec<Vec<i64>>,
}

impl StepSampler {
    /// Index of the atom selected by a uniform draw `u` in `[0,1)`.
    #[inline]
    pub fn index(&self, u: f64) -> usize {
        let last = self.cumulative.len() - 1;
        self.cumulative[..last]
            .iter()
            .position(|&c| u < c)
            .unwrap_or(last)
    }

    #[inline]
    pub fn step(&self, u: f64) -> &[i64] {
        &self.steps[self.index(u)]
    }
}

/// Outcome of the communication check on a lattice window.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunicationReport {
    pub ok: bool,
    /// Smallest `kappa` with `dist(x,y) <= kappa |y - x|` over all checked pairs.
    pub kappa0: Option<f64>,
    /// First pair found with no connecting path.
    pub witness: Option<(Vec<i64>, Vec<i64>)>,
    pub pairs_checked: usize,
}

/// Checks that all pairs of cone lattice points within `radius` are joined
/// by paths of support steps that stay in the cone.
///
/// Searches run on the cone lattice points within `2 radius + max_step`,
/// which lets connecting paths leave the test ball.
pub fn check_communication(law: &StepLaw, cone: &Cone, radius: f64) -> Result<CommunicationReport> {
    if cone.dim() != law.dim() {
        return Err(Error::DimensionMismatch {
            expected: law.dim(),
            got: cone.dim(),
        });
    }
    let window = lattice_window(cone, radius)?;
    if window.len() < 2 {
        return Err(Error::EmptyWindow);
    }
    let domain = lattice_window(cone, 2.0 * radius + law.max_step())?;
    let index: HashMap<&[i64], usize> = domain
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_slice(), i))
        .collect();
    let neighbors: Vec<Vec<usize>> = domain
        .points()
        .iter()
        .map(|p| {
            law.atoms()
                .iter()
                .filter_map(|a| {
                    let y: Vec<i64> = p.iter().zip(&a.x).map(|(u, v)| u + v).collect();
                    index.get(y.as_slice()).copied()
                })
                .collect()
        })
        .collect();
    let targets: Vec<usize> = window
        .points()
        .iter()
        .map(|p| index[p.as_slice()])
        .collect();
    let mut kappa0: f64 = 0.0;
    let mut pairs = 0;
    let mut dist = vec![usize::MAX; domain.len()];
    for (si, &s) in targets.iter().enumerate() {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &v in &neighbors[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (ti, &t) in targets.iter().enumerate() {
            if si == ti {
                continue;
            }
            pairs += 1;
            if dist[t] == usize::MAX {
                return Ok(CommunicationReport {
                    ok: false,
                    kappa0: None,
                    witness: Some((window.points()[si].clone(), window.points()[ti].clone())),
                    pairs_checked: pairs,
                });
            }
            let sep = lattice_norm(&crate::linalg::sub_lattice(
                &window.points()[ti],
                &window.points()[si],
            ));
            kappa0 = kappa0.max(dist[t] as f64 / sep);
        }
    }
    Ok(CommunicationReport {
        ok: true,
        kappa0: Some(kappa0),
        witness: None,
        pairs_checked: pairs,
    })
}
