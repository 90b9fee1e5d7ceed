//! Ladder heights: the successive positions at which the walk leaves the
//! cone translated to its previous ladder height, their sub-stochastic
//! transition kernel and the renewal function `V(x) = E_x(number of
//! ladder epochs)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cone::{lattice_window, Cone, LatticeWindow};
use crate::error::{Error, Result};
use crate::green::{batch_stats, shard_sizes, GreenEngine, GreenTable, KilledWalk};
use crate::linalg::{dot_lattice, sub_lattice};
use crate::steplaw::StepSampler;

/// Entries of `a_u` more negative than this reject the kernel.
const NEGATIVITY_TOL: f64 = 1e-12;
pub const RENEWAL_MAX_ITER: usize = 10_000;

/// `a_u(x, y)` for every `y` of the window, in window order.
///
/// `a_u(x, y) = p(x + u, y) - p(x, y - u)` when `y - u` lies in the cone and
/// `p(x + u, y)` otherwise.
pub fn a_kernel(
    walk: &KilledWalk,
    u: &[i64],
    x: &[i64],
    window: &LatticeWindow,
) -> Result<Vec<f64>> {
    for p in [u, x] {
        if p.len() != walk.dim() {
            return Err(Error::DimensionMismatch {
                expected: walk.dim(),
                got: p.len(),
            });
        }
        if !walk.cone().contains_lattice(p) {
            return Err(Error::Outside);
        }
    }
    let xu: Vec<i64> = x.iter().zip(u).map(|(a, b)| a + b).collect();
    window
        .points()
        .iter()
        .map(|y| {
            let yu = sub_lattice(y, u);
            let mut v = walk.transition(&xu, y);
            if walk.cone().contains_lattice(&yu) {
                v -= walk.transition(x, &yu);
            }
            if v < -NEGATIVITY_TOL {
                return Err(Error::NegativeKernel { value: v });
            }
            Ok(v.max(0.0))
        })
        .collect()
}

/// One row of the ladder kernel `p_H(x, .)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderKernelRow {
    pub x: Vec<i64>,
    /// `(y, p_H(x, y))` in lexicographic order of `y`.
    pub masses: Vec<(Vec<i64>, f64)>,
    /// `1 - sum(masses) - truncation_slack`.
    pub death_mass: f64,
    pub truncation_slack: f64,
}

impl LadderKernelRow {
    pub fn total(&self) -> f64 {
        self.masses.iter().map(|(_, p)| p).sum()
    }

    pub fn mass(&self, y: &[i64]) -> f64 {
        self.masses
            .iter()
            .find(|(z, _)| z.as_slice() == y)
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn to_csv(&self) -> String {
        let d = self.x.len();
        let mut head: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        head.extend((0..d).map(|i| format!("y{i}")));
        head.push("mass".into());
        let mut out = head.join(",") + "\n";
        let xs: Vec<String> = self.x.iter().map(|c| c.to_string()).collect();
        for (y, p) in &self.masses {
            let ys: Vec<String> = y.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!("{},{},{}\n", xs.join(","), ys.join(","), p));
        }
        out
    }
}

/// The ladder kernel, built from one Green table `G(0, .)`.
///
/// For a homogeneous walk `a_x(z, y) = mu(y - x - z) 1{y in E, y - x not in E}`,
/// so `p_H(x, x + w) = sum_{z + s = w} G(0, z) mu(s)` over steps `s` that
/// take `z` out of the cone. The exit weights depend on `w` only and are
/// aggregated once; rows are translates.
#[derive(Debug, Clone)]
pub struct LadderKernel {
    walk: KilledWalk,
    green: GreenTable,
    /// Exit displacement `w` (outside the cone) and its weight.
    exits: Vec<(Vec<i64>, f64)>,
}

impl LadderKernel {
    /// Computes `G(0, .)` on the cone window of radius `radius`.
    pub fn new(walk: &KilledWalk, radius: f64, tol: f64) -> Result<Self> {
        let engine = GreenEngine::on_radius(walk.clone(), radius)?;
        let zero = vec![0i64; walk.dim()];
        let green = engine.converged(&zero, tol)?;
        Ok(Self::from_green(walk, green))
    }

    pub fn from_green(walk: &KilledWalk, green: GreenTable) -> Self {
        let mut agg: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
        for (z, &g) in green.window.points().iter().zip(&green.values) {
            if g == 0.0 {
                continue;
            }
            for a in walk.law().atoms() {
                let w: Vec<i64> = z.iter().zip(&a.x).map(|(p, s)| p + s).collect();
                if !walk.cone().contains_lattice(&w) {
                    *agg.entry(w).or_insert(0.0) += g * a.p;
                }
            }
        }
        LadderKernel {
            walk: walk.clone(),
            green,
            exits: agg.into_iter().collect(),
        }
    }

    pub fn green(&self) -> &GreenTable {
        &self.green
    }

    /// Bound on the exit mass missed by the truncated Green table.
    pub fn slack(&self) -> f64 {
        self.green.boundary_slack
    }

    /// Calls `f(y, mass)` for every `y = x + w` landing in the cone.
    fn for_each_entry(&self, x: &[i64], mut f: impl FnMut(&[i64], f64)) {
        if x.iter().all(|&c| c == 0) {
            return;
        }
        let mut y = vec![0i64; x.len()];
        for (w, p) in &self.exits {
            for i in 0..x.len() {
                y[i] = x[i] + w[i];
            }
            if self.walk.cone().contains_lattice(&y) {
                f(&y, *p);
            }
        }
    }

    pub fn row(&self, x: &[i64]) -> Result<LadderKernelRow> {
        if x.len() != self.walk.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.walk.dim(),
                got: x.len(),
            });
        }
        if !self.walk.cone().contains_lattice(x) {
            return Err(Error::Outside);
        }
        let mut masses = Vec::new();
        self.for_each_entry(x, |y, p| masses.push((y.to_vec(), p)));
        masses.sort_by(|a, b| a.0.cmp(&b.0));
        let slack = if x.iter().all(|&c| c == 0) {
            0.0
        } else {
            self.slack()
        };
        let total: f64 = masses.iter().map(|(_, p)| p).sum();
        Ok(LadderKernelRow {
            x: x.to_vec(),
            masses,
            death_mass: (1.0 - total - slack).max(0.0),
            truncation_slack: slack,
        })
    }
}

/// `p_H(x, .)` from a Green table on the cone window of radius `radius`.
pub fn ladder_kernel_row(
    walk: &KilledWalk,
    x: &[i64],
    radius: f64,
    tol: f64,
) -> Result<LadderKernelRow> {
    LadderKernel::new(walk, radius, tol)?.row(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderCaps {
    /// Steps an epoch must last before it may be declared infinite.
    pub max_steps_per_epoch: u64,
    /// Required distance from the translated cone's boundary at declaration.
    pub safety_distance: f64,
    /// Hard cap on the steps of one trajectory.
    pub max_total_steps: u64,
}

impl Default for LadderCaps {
    fn default() -> Self {
        LadderCaps {
            max_steps_per_epoch: 10_000,
            safety_distance: 25.0,
            max_total_steps: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpochEnd {
    /// The epoch ended after this many steps.
    Finite(u64),
    /// Declared infinite by the safety rule.
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fate {
    /// The last epoch left the cone itself.
    Killed,
    /// The last epoch was declared infinite.
    Escaped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderTrajectory {
    /// Finite heights `H(0), ..., H(T-1)`; `H(T)` is the cemetery.
    pub heights: Vec<Vec<i64>>,
    pub epochs: Vec<EpochEnd>,
    pub fate: Fate,
    /// Bound on the probability that the infinite declaration was wrong.
    pub misdeclaration_bound: Option<f64>,
}

impl LadderTrajectory {
    /// The ladder count `T`.
    pub fn count(&self) -> usize {
        self.heights.len()
    }
}

/// Shared state for simulating ladder epochs of one walk.
struct LadderSimulator<'a> {
    walk: &'a KilledWalk,
    sampler: StepSampler,
    caps: LadderCaps,
    /// Unit face normals with their escape rates, for the declaration bound.
    faces: Option<Vec<(Vec<f64>, f64)>>,
}

impl<'a> LadderSimulator<'a> {
    fn new(walk: &'a KilledWalk, x: &[i64], caps: LadderCaps) -> Result<Self> {
        if x.len() != walk.dim() {
            return Err(Error::DimensionMismatch {
                expected: walk.dim(),
                got: x.len(),
            });
        }
        if !walk.cone().contains_lattice(x) {
            return Err(Error::Outside);
        }
        let mean = walk.law().mean();
        let inside = walk.cone().contains(&mean)? && walk.cone().boundary_distance(&mean)? > 0.0;
        if !inside {
            return Err(Error::DriftNotInCone);
        }
        if caps.max_steps_per_epoch == 0 || !(caps.safety_distance >= 0.0) {
            return Err(Error::InvalidArgument("ladder caps".into()));
        }
        let faces = walk.cone().unit_normals().map(|ns| {
            ns.into_iter()
                .map(|n| {
                    let beta = walk.law().escape_rate(&n);
                    (n, beta)
                })
                .collect()
        });
        Ok(LadderSimulator {
            walk,
            sampler: walk.law().sampler(),
            caps,
            faces,
        })
    }

    fn declaration_bound(&self, z: &[i64]) -> Option<f64> {
        self.faces.as_ref().map(|faces| {
            faces
                .iter()
                .map(|(n, beta)| (-beta * dot_lattice(n, z).max(0.0)).exp())
                .sum::<f64>()
                .min(1.0)
        })
    }

    /// Runs up to `max_epochs` epochs from `x`.
    fn run(&self, x: &[i64], rng: &mut ChaCha8Rng, max_epochs: usize) -> Result<LadderTrajectory> {
        let cone: &Cone = self.walk.cone();
        let d = x.len();
        let mut pos = x.to_vec();
        let mut height = x.to_vec();
        let mut rel = vec![0i64; d];
        let mut rel_f = vec![0.0; d];
        let mut heights = vec![x.to_vec()];
        let mut epochs = Vec::new();
        let mut total: u64 = 0;
        loop {
            let mut steps: u64 = 0;
            loop {
                if total >= self.caps.max_total_steps {
                    return Err(Error::CapExhausted {
                        steps: self.caps.max_total_steps,
                    });
                }
                let s = self.sampler.step(rng.random::<f64>());
                for i in 0..d {
                    pos[i] += s[i];
                    rel[i] = pos[i] - height[i];
                }
                steps += 1;
                total += 1;
                if !cone.contains_lattice(&rel) {
                    break;
                }
                if steps >= self.caps.max_steps_per_epoch {
                    for i in 0..d {
                        rel_f[i] = rel[i] as f64;
                    }
                    if cone.boundary_distance(&rel_f)? >= self.caps.safety_distance {
                        epochs.push(EpochEnd::Infinite);
                        return Ok(LadderTrajectory {
                            heights,
                            epochs,
                            fate: Fate::Escaped,
                            misdeclaration_bound: self.declaration_bound(&rel),
                        });
                    }
                }
            }
            epochs.push(EpochEnd::Finite(steps));
            if !cone.contains_lattice(&pos) {
                return Ok(LadderTrajectory {
                    heights,
                    epochs,
                    fate: Fate::Killed,
                    misdeclaration_bound: None,
                });
            }
            height.copy_from_slice(&pos);
            heights.push(pos.clone());
            if heights.len() > max_epochs {
                return Ok(LadderTrajectory {
                    heights,
                    epochs,
                    fate: Fate::Escaped,
                    misdeclaration_bound: None,
                });
            }
        }
    }
}

/// Simulates the ladder heights of one trajectory from `x`.
pub fn simulate_ladder(
    walk: &KilledWalk,
    x: &[i64],
    seed: u64,
    caps: LadderCaps,
) -> Result<LadderTrajectory> {
    let sim = LadderSimulator::new(walk, x, caps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sim.run(x, &mut rng, usize::MAX)
}

/// Empirical law of the first ladder height `H(1)` from `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstHeightSample {
    pub counts: BTreeMap<Vec<i64>, u64>,
    /// Samples whose first epoch left the cone or was declared infinite.
    pub cemetery: u64,
    pub samples: u64,
}

impl FirstHeightSample {
    /// Total-variation distance to a kernel row, counting the cemetery as
    /// one more atom with mass `1 - sum(row masses)`.
    pub fn tv_distance(&self, row: &LadderKernelRow) -> f64 {
        let n = self.samples as f64;
        let mut seen = 0.0;
        let mut diff = 0.0;
        for (y, p) in &row.masses {
            let emp = self.counts.get(y).copied().unwrap_or(0) as f64 / n;
            diff += (emp - p).abs();
            seen += emp;
        }
        let unmatched: f64 = self
            .counts
            .iter()
            .filter(|(y, _)| row.mass(y) == 0.0)
            .map(|(_, &c)| c as f64 / n)
            .sum();
        debug_assert!((seen + unmatched + self.cemetery as f64 / n - 1.0).abs() < 1e-9);
        diff += unmatched;
        diff += (self.cemetery as f64 / n - (1.0 - row.total())).abs();
        0.5 * diff
    }
}

pub fn sample_first_height(
    walk: &KilledWalk,
    x: &[i64],
    samples: u64,
    seed: u64,
    caps: LadderCaps,
) -> Result<FirstHeightSample> {
    let sim = LadderSimulator::new(walk, x, caps)?;
    let sizes = shard_sizes(samples.max(1));
    let shards: Vec<Result<(BTreeMap<Vec<i64>, u64>, u64)>> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &n)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(b as u64));
            let mut counts = BTreeMap::new();
            let mut cemetery = 0;
            for _ in 0..n {
                let traj = sim.run(x, &mut rng, 1)?;
                match traj.heights.get(1) {
                    Some(h) => *counts.entry(h.clone()).or_insert(0) += 1,
                    None => cemetery += 1,
                }
            }
            Ok((counts, cemetery))
        })
        .collect();
    let mut counts = BTreeMap::new();
    let mut cemetery = 0;
    for shard in shards {
        let (c, dead) = shard?;
        for (y, k) in c {
            *counts.entry(y).or_insert(0) += k;
        }
        cemetery += dead;
    }
    Ok(FirstHeightSample {
        counts,
        cemetery,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenewalMethod {
    Series,
    Mc,
}

impl RenewalMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            RenewalMethod::Series => "series",
            RenewalMethod::Mc => "mc",
        }
    }
}

/// Renewal function on a padded window.
#[derive(Debug, Clone)]
pub struct RenewalTable {
    pub window: Arc<LatticeWindow>,
    pub values: Vec<f64>,
    /// Per-entry error estimate.
    pub errors: Vec<f64>,
    /// Points in the padding ring, excluded from invariant checks.
    pub edge: Vec<bool>,
    pub method: RenewalMethod,
    pub iterations: usize,
    /// Largest row slack (missed exit mass plus mass landing off-window).
    pub max_row_slack: f64,
    pub tol: f64,
}

impl RenewalTable {
    pub fn get(&self, x: &[i64]) -> Option<f64> {
        self.window.index_of(x).map(|i| self.values[i])
    }

    pub fn error(&self, x: &[i64]) -> Option<f64> {
        self.window.index_of(x).map(|i| self.errors[i])
    }

    pub fn to_csv(&self) -> String {
        let d = self.window.dim();
        let mut out: String = (0..d).map(|i| format!("x{i},")).collect();
        out.push_str("V,error,method\n");
        for (i, x) in self.window.points().iter().enumerate() {
            for c in x {
                out.push_str(&format!("{c},"));
            }
            out.push_str(&format!(
                "{},{},{}\n",
                self.values[i],
                self.errors[i],
                self.method.as_str()
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewalOptions {
    /// Width of the ring added around the requested window. Rows near the
    /// outer edge lose mass to points beyond it.
    pub pad: f64,
}

impl Default for RenewalOptions {
    fn default() -> Self {
        RenewalOptions { pad: 60.0 }
    }
}

/// `V = sum_n P_H^n 1` on the cone window of radius `radius` plus padding.
pub fn renewal_series(
    walk: &KilledWalk,
    radius: f64,
    tol: f64,
    opts: RenewalOptions,
) -> Result<RenewalTable> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol}")));
    }
    let diam = 2.0 * walk.law().max_step();
    let pad = opts.pad.max(diam);
    let outer = radius + pad;
    let window = Arc::new(lattice_window(walk.cone(), outer)?);
    let user = lattice_window(walk.cone(), radius)?;
    let kernel = LadderKernel::new(walk, 2.0 * outer + diam, tol.min(1e-12))?;
    let n = window.len();
    // Sparse rows restricted to the window; the rest becomes slack.
    let rows: Vec<(Vec<(u32, f64)>, f64)> = window
        .points()
        .par_iter()
        .map(|x| {
            let mut entries = Vec::new();
            let mut outside = 0.0;
            kernel.for_each_entry(x, |y, p| match window.index_of(y) {
                Some(j) => entries.push((j as u32, p)),
                None => outside += p,
            });
            let slack = if x.iter().all(|&c| c == 0) {
                0.0
            } else {
                outside + kernel.slack()
            };
            (entries, slack)
        })
        .collect();
    let apply = |v: &[f64], base: &[f64]| -> Vec<f64> {
        rows.par_iter()
            .enumerate()
            .map(|(i, (entries, _))| {
                base[i] + entries.iter().map(|&(j, p)| p * v[j as usize]).sum::<f64>()
            })
            .collect()
    };
    let ones = vec![1.0; n];
    let mut values = ones.clone();
    let mut iterations = 0;
    let mut last_inc = f64::INFINITY;
    while last_inc > tol {
        if iterations >= RENEWAL_MAX_ITER {
            return Err(Error::NonContracting { iterations });
        }
        let next = apply(&values, &ones);
        last_inc = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        iterations += 1;
    }
    // Errors: e = s Vmax + P_H e, where V beyond the window is bounded by
    // the largest value inside it, plus the series tail.
    let vmax = values.iter().cloned().fold(1.0, f64::max);
    let source: Vec<f64> = rows.iter().map(|(_, s)| s * vmax + last_inc).collect();
    let mut errors = source.clone();
    for _ in 0..RENEWAL_MAX_ITER {
        let next = apply(&errors, &source);
        let inc = next
            .iter()
            .zip(&errors)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        errors = next;
        if inc <= tol * 1e-3 {
            break;
        }
    }
    let max_row_slack = rows.iter().map(|(_, s)| *s).fold(0.0, f64::max);
    let edge = window.points().iter().map(|x| !user.contains(x)).collect();
    Ok(RenewalTable {
        window,
        values,
        errors,
        edge,
        method: RenewalMethod::Series,
        iterations,
        max_row_slack,
        tol,
    })
}

/// `E_x(T)` by simulating whole ladder trajectories.
pub fn renewal_mc(
    walk: &KilledWalk,
    x: &[i64],
    trials: u64,
    seed: u64,
    caps: LadderCaps,
) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let sim = LadderSimulator::new(walk, x, caps)?;
    let sizes = shard_sizes(trials);
    let sums: Vec<Result<f64>> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &n)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(b as u64));
            let mut sum = 0.0;
            for _ in 0..n {
                sum += sim.run(x, &mut rng, usize::MAX)?.count() as f64;
            }
            Ok(sum)
        })
        .collect();
    let sums: Vec<f64> = sums.into_iter().collect::<Result<_>>()?;
    Ok(batch_stats(&sums, &sizes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::lattice_window;
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

    fn closed_form_v(x: i64) -> f64 {
        1.75 * (1.0 - (3.0f64 / 7.0).powi(x as i32 + 1))
    }

    #[test]
    fn a_kernel_examples() {
        let w = drift1();
        let window = lattice_window(w.cone(), 6.0).unwrap();
        let a0 = a_kernel(&w, &[0], &[2], &window).unwrap();
        assert!(a0.iter().all(|&v| v == 0.0));
        let a1 = a_kernel(&w, &[1], &[0], &window).unwrap();
        assert!((a1[0] - 0.3).abs() < 1e-15);
        assert_eq!(a1[2], 0.0);
        let q = quadrant_walk();
        let window = lattice_window(q.cone(), 6.0).unwrap();
        for x in [[0, 0], [1, 2], [3, 0]] {
            for u in [[1, 0], [0, 2], [2, 1]] {
                assert!(a_kernel(&q, &u, &x, &window)
                    .unwrap()
                    .iter()
                    .all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn one_dimensional_rows() {
        let w = drift1();
        let kernel = LadderKernel::new(&w, 60.0, 1e-13).unwrap();
        let zero = kernel.row(&[0]).unwrap();
        assert!(zero.masses.is_empty());
        assert_eq!(zero.death_mass, 1.0);
        let one = kernel.row(&[1]).unwrap();
        assert!((one.mass(&[0]) - 3.0 / 7.0).abs() < 1e-6);
        assert!((one.death_mass - 4.0 / 7.0).abs() < 1e-6);
        assert_eq!(one.masses.len(), 1);
    }

    #[test]
    fn quadrant_rows_are_substochastic() {
        let w = quadrant_walk();
        let kernel = LadderKernel::new(&w, 60.0, 1e-12).unwrap();
        for x in [[0, 0], [1, 0], [3, 3], [5, 1], [10, 10]] {
            let row = kernel.row(&x).unwrap();
            assert!(row.total() <= 1.0 + 1e-9, "{x:?}: {}", row.total());
            assert!(row
                .masses
                .iter()
                .all(|(y, p)| *p >= 0.0 && w.cone().contains_lattice(y)));
            for (y, _) in &row.masses {
                // y leaves x + E
                assert!(!w.cone().contains_lattice(&sub_lattice(y, &x)));
            }
        }
    }

    #[test]
    fn trajectories_descend() {
        let w = drift1();
        let traj = simulate_ladder(&w, &[3], 7, LadderCaps::default()).unwrap();
        assert_eq!(traj.heights[0], vec![3]);
        for pair in traj.heights.windows(2) {
            assert_eq!(pair[1][0], pair[0][0] - 1);
        }
        assert_eq!(traj.epochs.len(), traj.count());
        let again = simulate_ladder(&w, &[3], 7, LadderCaps::default()).unwrap();
        assert_eq!(traj, again);
        for seed in 0..20 {
            let t = simulate_ladder(&w, &[0], seed, LadderCaps::default()).unwrap();
            assert_eq!(t.count(), 1);
        }
    }

    #[test]
    fn misdeclaration_bound_is_reported() {
        let w = drift1();
        let t = (0..50)
            .map(|s| simulate_ladder(&w, &[0], s, LadderCaps::default()).unwrap())
            .find(|t| t.fate == Fate::Escaped)
            .unwrap();
        assert!(t.misdeclaration_bound.unwrap() < 1e-100);
    }

    #[test]
    fn centered_walks_are_rejected() {
        let w = KilledWalk::new(
            StepLaw::from_pairs(1, &[(&[1], 0.5), (&[-1], 0.5)]).unwrap(),
            Cone::half_line(),
        )
        .unwrap();
        assert_eq!(
            simulate_ladder(&w, &[1], 0, LadderCaps::default()),
            Err(Error::DriftNotInCone)
        );
    }

    #[test]
    fn renewal_series_closed_form() {
        let w = drift1();
        let t = renewal_series(&w, 20.0, 1e-12, RenewalOptions::default()).unwrap();
        assert_eq!(t.get(&[0]).unwrap(), 1.0);
        for x in 0..20 {
            assert!(
                (t.get(&[x]).unwrap() - closed_form_v(x)).abs() < 1e-9,
                "x={x}"
            );
        }
        assert!((t.get(&[1]).unwrap() - 10.0 / 7.0).abs() < 1e-6);
        assert!((t.get(&[2]).unwrap() - 79.0 / 49.0).abs() < 1e-6);
        assert!(t.values.iter().all(|&v| v >= 1.0));
        assert!(t.edge.iter().any(|&e| e) && !t.edge[0]);
    }

    #[test]
    fn renewal_mc_small_run() {
        let w = drift1();
        let (v0, e0) = renewal_mc(&w, &[0], 1000, 3, LadderCaps::default()).unwrap();
        assert_eq!((v0, e0), (1.0, 0.0));
        let caps = LadderCaps {
            max_steps_per_epoch: 500,
            ..LadderCaps::default()
        };
        let (v1, s1) = renewal_mc(&w, &[1], 20_000, 11, caps).unwrap();
        assert!((v1 - 10.0 / 7.0).abs() <= 4.0 * s1, "{v1} {s1}");
    }
}
