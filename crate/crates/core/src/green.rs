//! Green functions of walks killed on leaving a cone.
//!
//! The exact engine propagates occupation vectors over a lattice window and
//! sums them; the Monte Carlo engine simulates (optionally tilted) walks and
//! reweights visits. The probes built on top read off ratio limits and
//! exponential decay rates along rays.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cone::{lattice_window, Cone, LatticeWindow};
use crate::error::{Error, Result};
use crate::linalg::{angle, dot, dot_lattice, lattice_norm, normalized, sub_lattice};
use crate::steplaw::{Atom, StepLaw};
use crate::tilt::{tilt_solve, tilted_law, TiltSolution};

/// First horizon of the doubling schedule.
const INITIAL_HORIZON: usize = 32;
pub const HORIZON_CAP: usize = 1_000_000;
/// Largest tolerated return-weighted leak from the window edge.
pub const LEAK_LIMIT: f64 = 0.1;
/// Switch from sparse push to dense pull above this occupied fraction.
const DENSE_FRACTION: f64 = 0.3;
const PULL_CHUNK: usize = 4096;
pub const MC_BATCHES: usize = 32;

const KILLED: u32 = u32::MAX;
const LEAKED: u32 = u32::MAX - 1;

/// A step law together with the cone it is killed on leaving.
#[derive(Debug, Clone, PartialEq)]
pub struct KilledWalk {
    law: StepLaw,
    cone: Cone,
}

impl KilledWalk {
    pub fn new(law: StepLaw, cone: Cone) -> Result<Self> {
        if law.dim() != cone.dim() {
            return Err(Error::DimensionMismatch {
                expected: law.dim(),
                got: cone.dim(),
            });
        }
        Ok(KilledWalk { law, cone })
    }

    pub fn law(&self) -> &StepLaw {
        &self.law
    }

    pub fn cone(&self) -> &Cone {
        &self.cone
    }

    pub fn dim(&self) -> usize {
        self.law.dim()
    }

    /// `p(x, y)`: the step mass when both points lie in the cone, else 0.
    pub fn transition(&self, x: &[i64], y: &[i64]) -> f64 {
        if !self.cone.contains_lattice(x) || !self.cone.contains_lattice(y) {
            return 0.0;
        }
        self.law.mass(&sub_lattice(y, x))
    }

    /// `p(x, ϑ)`: probability that the next step leaves the cone.
    pub fn kill_probability(&self, x: &[i64]) -> f64 {
        let mut y = x.to_vec();
        self.law
            .atoms()
            .iter()
            .filter(|a| {
                for (i, s) in a.x.iter().enumerate() {
                    y[i] = x[i] + s;
                }
                !self.cone.contains_lattice(&y)
            })
            .map(|a| a.p)
            .sum()
    }

    /// The same cone with the law tilted by `alpha` (requires `R(alpha) = 1`).
    pub fn twisted(&self, alpha: &[f64]) -> Result<KilledWalk> {
        KilledWalk::new(tilted_law(&self.law, alpha)?, self.cone.clone())
    }

    fn check_point(&self, x: &[i64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !self.cone.contains_lattice(x) {
            return Err(Error::Outside);
        }
        Ok(())
    }
}

/// Adds an atom of mass `eps` at the origin and scales the rest by `1 - eps`.
pub fn lazify(walk: &KilledWalk, eps: f64) -> Result<KilledWalk> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "laziness {eps} outside (0,1)"
        )));
    }
    let d = walk.dim();
    let zero = vec![0i64; d];
    let mut atoms: Vec<Atom> = walk
        .law
        .atoms()
        .iter()
        .map(|a| Atom {
            x: a.x.clone(),
            p: a.p * (1.0 - eps),
        })
        .collect();
    match atoms.iter_mut().find(|a| a.x == zero) {
        Some(a) => a.p += eps,
        None => atoms.push(Atom { x: zero, p: eps }),
    }
    KilledWalk::new(StepLaw::new(d, atoms)?, walk.cone.clone())
}

/// Exponential supermartingale `f(w) = exp(-rate dir . w)` for the free
/// walk: `E f(w + X) = ratio f(w)` with `ratio < 1`, so the expected number
/// of visits to `y` from `z` is at most `f(z) / (f(y) (1 - ratio))`.
#[derive(Debug, Clone, PartialEq)]
struct DriftBound {
    dir: Vec<f64>,
    rate: f64,
    ratio: f64,
}

impl DriftBound {
    fn for_law(law: &StepLaw) -> Option<Self> {
        let dir = normalized(&law.mean())?;
        if law.mean().iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-12 {
            return None;
        }
        let beta = law.escape_rate(&dir);
        let rate = if beta.is_finite() { 0.5 * beta } else { 1.0 };
        let minus: Vec<f64> = dir.iter().map(|c| -rate * c).collect();
        let ratio = law.generating_function(&minus).ok()?;
        (ratio < 1.0 && rate > 0.0).then_some(DriftBound { dir, rate, ratio })
    }

    fn weight(&self, w: &[i64]) -> f64 {
        (-self.rate * dot_lattice(&self.dir, w)).exp()
    }
}

/// Flattened transition structure of a killed walk on a window.
#[derive(Debug)]
struct Stencil {
    atoms: usize,
    probs: Vec<f64>,
    /// `targets[i * atoms + k]`: window index of `x_i + s_k`, or a sentinel.
    targets: Vec<u32>,
    /// `sources[i * atoms + k]`: window index of `x_i - s_k`, or `KILLED`.
    sources: Vec<u32>,
    kill: Vec<f64>,
    leak: Vec<f64>,
    /// Leak mass weighted by the drift supermartingale at the landing point.
    leak_drift: Vec<f64>,
    /// Leak mass weighted by the bound on ever leaving the cone afterwards.
    leak_exit: Vec<f64>,
}

/// Reusable DP engine for one killed walk on one window.
#[derive(Debug)]
pub struct GreenEngine {
    walk: KilledWalk,
    window: Arc<LatticeWindow>,
    stencil: Stencil,
    drift: Option<DriftBound>,
    drift_weight: Vec<f64>,
    exit_weight: Vec<f64>,
}

/// Bound on the probability that the free walk started at `w` ever leaves
/// the cone, from the escape rates against each face.
fn exit_weight_fn(walk: &KilledWalk) -> impl Fn(&[i64]) -> f64 {
    let faces: Option<Vec<(Vec<f64>, f64)>> = walk.cone.unit_normals().map(|ns| {
        ns.into_iter()
            .map(|n| {
                let beta = walk.law.escape_rate(&n);
                (n, beta)
            })
            .collect()
    });
    move |w: &[i64]| match &faces {
        None => 1.0,
        Some(faces) => {
            let mut total = 0.0;
            for (n, beta) in faces {
                let depth = dot_lattice(n, w).max(0.0);
                total += if beta.is_infinite() {
                    0.0
                } else {
                    (-beta * depth).exp()
                };
            }
            total.min(1.0)
        }
    }
}

impl GreenEngine {
    pub fn new(walk: KilledWalk, window: Arc<LatticeWindow>) -> Result<Self> {
        if window.is_empty() {
            return Err(Error::EmptyWindow);
        }
        if window.dim() != walk.dim() {
            return Err(Error::DimensionMismatch {
                expected: walk.dim(),
                got: window.dim(),
            });
        }
        if window.len() >= LEAKED as usize {
            return Err(Error::WindowTooLarge {
                points: window.len(),
                cap: LEAKED as usize - 1,
            });
        }
        let drift = DriftBound::for_law(&walk.law);
        let exit_of = exit_weight_fn(&walk);
        let atoms = walk.law.atoms();
        let na = atoms.len();
        let n = window.len();
        let mut targets = vec![KILLED; n * na];
        let mut sources = vec![KILLED; n * na];
        let mut kill = vec![0.0; n];
        let mut leak = vec![0.0; n];
        let mut leak_drift = vec![0.0; n];
        let mut leak_exit = vec![0.0; n];
        let mut y = vec![0i64; walk.dim()];
        for (i, x) in window.points().iter().enumerate() {
            for (k, a) in atoms.iter().enumerate() {
                for (j, s) in a.x.iter().enumerate() {
                    y[j] = x[j] + s;
                }
                targets[i * na + k] = match window.index_of(&y) {
                    Some(t) => t as u32,
                    None if walk.cone.contains_lattice(&y) => {
                        leak[i] += a.p;
                        if let Some(db) = &drift {
                            leak_drift[i] += a.p * db.weight(&y);
                        }
                        leak_exit[i] += a.p * exit_of(&y);
                        LEAKED
                    }
                    None => {
                        kill[i] += a.p;
                        KILLED
                    }
                };
                for (j, s) in a.x.iter().enumerate() {
                    y[j] = x[j] - s;
                }
                if let Some(src) = window.index_of(&y) {
                    sources[i * na + k] = src as u32;
                }
            }
        }
        let drift_weight = match &drift {
            Some(db) => window.points().iter().map(|w| db.weight(w)).collect(),
            None => Vec::new(),
        };
        let exit_weight = window.points().iter().map(|w| exit_of(w)).collect();
        Ok(GreenEngine {
            stencil: Stencil {
                atoms: na,
                probs: atoms.iter().map(|a| a.p).collect(),
                targets,
                sources,
                kill,
                leak,
                leak_drift,
                leak_exit,
            },
            walk,
            window,
            drift,
            drift_weight,
            exit_weight,
        })
    }

    /// Engine on the cone window of the given radius.
    pub fn on_radius(walk: KilledWalk, radius: f64) -> Result<Self> {
        let window = Arc::new(lattice_window(&walk.cone, radius)?);
        Self::new(walk, window)
    }

    pub fn walk(&self) -> &KilledWalk {
        &self.walk
    }

    pub fn window(&self) -> &Arc<LatticeWindow> {
        &self.window
    }

    fn source_index(&self, x: &[i64]) -> Result<usize> {
        self.walk.check_point(x)?;
        self.window
            .index_of(x)
            .ok_or_else(|| Error::InvalidArgument(format!("source {x:?} is not in the window")))
    }

    /// `sum_{t <= horizon} P_x(Z(t) = y, paths inside the window)` for every
    /// window point `y`.
    pub fn truncated(&self, x: &[i64], horizon: usize) -> Result<Vec<f64>> {
        let mut ev = Evolution::start(self, self.source_index(x)?);
        ev.advance(self, horizon);
        Ok(ev.values)
    }

    /// Calls `visit(t, values)` with the partial sums after every step
    /// `t = 0..=horizon`.
    pub fn trace(
        &self,
        x: &[i64],
        horizon: usize,
        mut visit: impl FnMut(usize, &[f64]),
    ) -> Result<()> {
        let mut ev = Evolution::start(self, self.source_index(x)?);
        visit(0, &ev.values);
        for t in 1..=horizon {
            ev.advance(self, 1);
            visit(t, &ev.values);
        }
        Ok(())
    }

    /// Green function from `x`, doubling the horizon until the last doubling
    /// moved no entry by more than `tol`.
    pub fn converged(&self, x: &[i64], tol: f64) -> Result<GreenTable> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance {tol}")));
        }
        let src = self.source_index(x)?;
        let mut ev = Evolution::start(self, src);
        ev.advance(self, INITIAL_HORIZON);
        let mut horizon = INITIAL_HORIZON;
        let mut snapshot = ev.values.clone();
        let mut increments: Vec<f64> = Vec::new();
        loop {
            if 2 * horizon > HORIZON_CAP {
                return Err(Error::HorizonCap {
                    horizon: 2 * horizon,
                });
            }
            ev.advance(self, horizon);
            horizon *= 2;
            let inc = ev
                .values
                .iter()
                .zip(&snapshot)
                .map(|(a, b)| a - b)
                .fold(0.0, f64::max);
            increments.push(inc);
            if inc <= tol {
                break;
            }
            snapshot.copy_from_slice(&ev.values);
        }
        self.assemble(x, ev, horizon, tol, &increments)
    }

    /// Converged tables from several sources, computed in parallel and
    /// returned in input order.
    pub fn converged_many(&self, sources: &[Vec<i64>], tol: f64) -> Result<Vec<GreenTable>> {
        sources
            .par_iter()
            .map(|x| self.converged(x, tol))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    }

    fn assemble(
        &self,
        x: &[i64],
        ev: Evolution,
        horizon: usize,
        tol: f64,
        increments: &[f64],
    ) -> Result<GreenTable> {
        let st = &self.stencil;
        let n = self.window.len();
        // Mass that made a transition from z equals values(z) - u_T(z).
        let departed = |i: usize| ev.values[i] - ev.current[i];
        let mut leaked = 0.0;
        let mut killed = 0.0;
        let mut alive = 0.0;
        let mut leak_drift = 0.0;
        let mut alive_drift = 0.0;
        let mut boundary_slack = 0.0;
        for i in 0..n {
            let dep = departed(i);
            leaked += dep * st.leak[i];
            killed += dep * st.kill[i];
            alive += ev.current[i];
            boundary_slack += dep * st.leak_exit[i] + ev.current[i] * self.exit_weight[i];
            if self.drift.is_some() {
                leak_drift += dep * st.leak_drift[i];
                alive_drift += ev.current[i] * self.drift_weight[i];
            }
        }
        let (gaps, certified) = match &self.drift {
            Some(db) => {
                let denom = 1.0 - db.ratio;
                let at_source = leak_drift / db.weight(x) / denom;
                if at_source > LEAK_LIMIT {
                    return Err(Error::WindowTooSmall { bound: at_source });
                }
                let total = leak_drift + alive_drift;
                let gaps = self
                    .window
                    .points()
                    .iter()
                    .map(|y| total / db.weight(y) / denom)
                    .collect();
                (gaps, true)
            }
            None => {
                if leaked > LEAK_LIMIT {
                    return Err(Error::WindowTooSmall { bound: leaked });
                }
                // Geometric extrapolation from the last two doublings.
                let last = increments.last().copied().unwrap_or(0.0);
                let prev = increments
                    .len()
                    .checked_sub(2)
                    .map_or(f64::INFINITY, |i| increments[i]);
                let ratio = if prev > 0.0 { last / prev } else { 0.0 };
                let tail = if ratio < 1.0 {
                    last * ratio / (1.0 - ratio)
                } else {
                    last
                };
                (vec![leaked + tail; n], false)
            }
        };
        let tail_bound = gaps.iter().cloned().fold(0.0, f64::max);
        Ok(GreenTable {
            source: x.to_vec(),
            window: Arc::clone(&self.window),
            horizon,
            values: ev.values,
            gaps,
            tail_bound,
            leaked,
            killed,
            alive,
            boundary_slack,
            certified,
            tol,
        })
    }
}

/// Occupation vector and running sums of one DP run.
struct Evolution {
    current: Vec<f64>,
    next: Vec<f64>,
    values: Vec<f64>,
    active: Vec<u32>,
    next_active: Vec<u32>,
    touched: Vec<bool>,
    dense: bool,
    empty: bool,
}

impl Evolution {
    fn start(engine: &GreenEngine, src: usize) -> Self {
        let n = engine.window.len();
        let mut current = vec![0.0; n];
        current[src] = 1.0;
        let mut values = vec![0.0; n];
        values[src] = 1.0;
        Evolution {
            current,
            next: vec![0.0; n],
            values,
            active: vec![src as u32],
            next_active: Vec::new(),
            touched: vec![false; n],
            dense: false,
            empty: false,
        }
    }

    fn advance(&mut self, engine: &GreenEngine, steps: usize) {
        for _ in 0..steps {
            if self.empty {
                return;
            }
            if self.dense {
                self.pull(engine);
            } else {
                self.push(engine);
            }
        }
    }

    fn push(&mut self, engine: &GreenEngine) {
        let st = &engine.stencil;
        let na = st.atoms;
        self.next_active.clear();
        for &z in &self.active {
            let mass = self.current[z as usize];
            let row = &st.targets[z as usize * na..(z as usize + 1) * na];
            for (k, &t) in row.iter().enumerate() {
                if t >= LEAKED {
                    continue;
                }
                let t = t as usize;
                if !self.touched[t] {
                    self.touched[t] = true;
                    self.next_active.push(t as u32);
                }
                self.next[t] += mass * st.probs[k];
            }
        }
        for &z in &self.active {
            self.current[z as usize] = 0.0;
        }
        std::mem::swap(&mut self.current, &mut self.next);
        std::mem::swap(&mut self.active, &mut self.next_active);
        for &y in &self.active {
            self.touched[y as usize] = false;
            self.values[y as usize] += self.current[y as usize];
        }
        self.empty = self.active.is_empty();
        if self.active.len() as f64 > DENSE_FRACTION * self.current.len() as f64 {
            self.dense = true;
        }
    }

    fn pull(&mut self, engine: &GreenEngine) {
        let st = &engine.stencil;
        let na = st.atoms;
        let current = &self.current;
        self.next
            .par_chunks_mut(PULL_CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                let base = c * PULL_CHUNK;
                for (off, out) in chunk.iter_mut().enumerate() {
                    let y = base + off;
                    let row = &st.sources[y * na..(y + 1) * na];
                    let mut acc = 0.0;
                    for (k, &z) in row.iter().enumerate() {
                        if z != KILLED {
                            acc += st.probs[k] * current[z as usize];
                        }
                    }
                    *out = acc;
                }
            });
        std::mem::swap(&mut self.current, &mut self.next);
        let mut any = false;
        for (v, &u) in self.values.iter_mut().zip(&self.current) {
            *v += u;
            any |= u > 0.0;
        }
        self.empty = !any;
    }
}

/// Truncated Green function `G(x, .)` on a window.
#[derive(Debug, Clone)]
pub struct GreenTable {
    pub source: Vec<i64>,
    pub window: Arc<LatticeWindow>,
    /// Number of steps summed.
    pub horizon: usize,
    /// Lower bounds on `G(x, y)`, indexed like the window points.
    pub values: Vec<f64>,
    /// Per-entry bound on `G(x, y) - values`, excluding `tol`.
    pub gaps: Vec<f64>,
    /// Largest per-entry gap over the window.
    pub tail_bound: f64,
    /// Mass that left the window while staying in the cone.
    pub leaked: f64,
    pub killed: f64,
    /// Mass still inside the window at the final horizon.
    pub alive: f64,
    /// Bound on the probability that the walk leaves the cone after it has
    /// left the window or outlived the horizon.
    pub boundary_slack: f64,
    /// Whether `gaps` is a proof (drifting walk) or an extrapolation.
    pub certified: bool,
    pub tol: f64,
}

impl GreenTable {
    pub fn get(&self, y: &[i64]) -> Option<f64> {
        self.window.index_of(y).map(|i| self.values[i])
    }

    pub fn gap(&self, y: &[i64]) -> Option<f64> {
        self.window.index_of(y).map(|i| self.gaps[i])
    }

    /// CSV with one row per window point: coordinates, value, gap bound.
    pub fn to_csv(&self) -> String {
        let d = self.source.len();
        let mut out = String::new();
        let head: Vec<String> = (0..d).map(|i| format!("y{i}")).collect();
        out.push_str(&head.join(","));
        out.push_str(",green,tail_bound\n");
        for (i, y) in self.window.points().iter().enumerate() {
            for c in y {
                out.push_str(&format!("{c},"));
            }
            out.push_str(&format!("{},{}\n", self.values[i], self.gaps[i] + self.tol));
        }
        out
    }
}

/// Converged Green function from `x` on `window`.
pub fn green_dp(
    walk: &KilledWalk,
    x: &[i64],
    window: Arc<LatticeWindow>,
    tol: f64,
) -> Result<GreenTable> {
    GreenEngine::new(walk.clone(), window)?.converged(x, tol)
}

/// Ratio `G(x, y) / G(0, y)` with a relative error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartinValue {
    pub value: f64,
    pub rel_error: f64,
}

pub fn martin_kernel(g_x: &GreenTable, g_0: &GreenTable, y: &[i64]) -> Result<MartinValue> {
    if g_0.source.iter().any(|&c| c != 0) {
        return Err(Error::InvalidArgument(
            "reference table must start at 0".into(),
        ));
    }
    if !Arc::ptr_eq(&g_x.window, &g_0.window) && *g_x.window != *g_0.window {
        return Err(Error::InvalidArgument(
            "tables use different windows".into(),
        ));
    }
    let i = g_x
        .window
        .index_of(y)
        .ok_or_else(|| Error::InvalidArgument(format!("{y:?} is not in the window")))?;
    let den = g_0.values[i];
    if den < 1e-300 {
        return Err(Error::ZeroDenominator);
    }
    let num = g_x.values[i];
    let rel = |v: f64, gap: f64, tol: f64| {
        if v > 0.0 {
            (gap + tol) / v
        } else {
            f64::INFINITY
        }
    };
    Ok(MartinValue {
        value: num / den,
        rel_error: rel(num, g_x.gaps[i], g_x.tol) + rel(den, g_0.gaps[i], g_0.tol),
    })
}

/// Result of comparing the Green function of the lazy walk against
/// `G / (1 - eps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LazinessReport {
    pub max_abs_dev: f64,
    /// Worst relative deviation over entries with `G >= floor`.
    pub max_rel_dev: f64,
    pub floor: f64,
}

pub fn laziness_check(
    walk: &KilledWalk,
    eps: f64,
    x: &[i64],
    window: Arc<LatticeWindow>,
    tol: f64,
    floor: f64,
) -> Result<LazinessReport> {
    let lazy = lazify(walk, eps)?;
    let g = green_dp(walk, x, Arc::clone(&window), tol)?;
    let gl = green_dp(&lazy, x, window, tol)?;
    let mut max_abs_dev: f64 = 0.0;
    let mut max_rel_dev: f64 = 0.0;
    for (a, b) in g.values.iter().zip(&gl.values) {
        let want = a / (1.0 - eps);
        let dev = (b - want).abs();
        max_abs_dev = max_abs_dev.max(dev);
        if *a >= floor {
            max_rel_dev = max_rel_dev.max(dev / want);
        }
    }
    Ok(LazinessReport {
        max_abs_dev,
        max_rel_dev,
        floor,
    })
}

/// Largest relative gap between the truncated Green function of the walk
/// tilted by `alpha` and `exp(alpha . (y - x))` times the untilted one, over
/// every window entry and every horizon up to `horizon`.
pub fn twisted_identity_deviation(
    walk: &KilledWalk,
    alpha: &[f64],
    x: &[i64],
    window: Arc<LatticeWindow>,
    horizon: usize,
) -> Result<f64> {
    let plain = GreenEngine::new(walk.clone(), Arc::clone(&window))?;
    let twisted = GreenEngine::new(walk.twisted(alpha)?, Arc::clone(&window))?;
    let mut plain_sums: Vec<Vec<f64>> = Vec::with_capacity(horizon + 1);
    plain.trace(x, horizon, |_, v| plain_sums.push(v.to_vec()))?;
    let factors: Vec<f64> = window
        .points()
        .iter()
        .map(|y| dot_lattice(alpha, &sub_lattice(y, x)).exp())
        .collect();
    let mut worst: f64 = 0.0;
    twisted.trace(x, horizon, |t, v| {
        for ((g_alpha, g), f) in v.iter().zip(&plain_sums[t]).zip(&factors) {
            let want = f * g;
            let dev = if want == 0.0 {
                if *g_alpha == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (g_alpha - want).abs() / want
            };
            worst = worst.max(dev);
        }
    })?;
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McOptions {
    pub trials: u64,
    pub seed: u64,
    /// Steps simulated per trial; visits after it are not counted.
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub target: Vec<i64>,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub estimates: Vec<McEstimate>,
    /// Set when the tilt drives the walk away from the targets.
    pub drift_mismatch: bool,
}

impl McResult {
    pub fn to_csv(&self) -> String {
        let d = self.estimates.first().map_or(0, |e| e.target.len());
        let mut out: String = (0..d).map(|i| format!("y{i},")).collect();
        out.push_str("estimate,stderr\n");
        for e in &self.estimates {
            for c in &e.target {
                out.push_str(&format!("{c},"));
            }
            out.push_str(&format!("{},{}\n", e.estimate, e.stderr));
        }
        out
    }
}

/// Splits `trials` into the fixed shards used by every Monte Carlo routine.
pub(crate) fn shard_sizes(trials: u64) -> Vec<u64> {
    let batches = (MC_BATCHES as u64).min(trials).max(1);
    (0..batches)
        .map(|b| trials / batches + u64::from(b < trials % batches))
        .collect()
}

/// Mean and batch-means standard error from per-shard sums.
pub(crate) fn batch_stats(sums: &[f64], sizes: &[u64]) -> (f64, f64) {
    let trials: u64 = sizes.iter().sum();
    let mean = sums.iter().sum::<f64>() / trials as f64;
    let b = sums.len();
    if b < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = sums
        .iter()
        .zip(sizes)
        .map(|(s, &n)| (s / n as f64 - mean).powi(2))
        .sum();
    (mean, (ss / (b * (b - 1)) as f64).sqrt())
}

/// Monte Carlo Green function from `x` to each target.
///
/// With a tilt the walk is simulated under the tilted law and each visit to
/// `y` is weighted by `exp(-alpha . (y - x))`, which keeps the estimator
/// unbiased for the untilted Green function truncated at the horizon.
pub fn green_mc(
    walk: &KilledWalk,
    x: &[i64],
    targets: &[Vec<i64>],
    tilt: Option<&TiltSolution>,
    opts: &McOptions,
) -> Result<McResult> {
    walk.check_point(x)?;
    if opts.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    for y in targets {
        walk.check_point(y)?;
    }
    let d = walk.dim();
    let (law, alpha) = match tilt {
        Some(t) => (tilted_law(&walk.law, &t.alpha)?, t.alpha.clone()),
        None => (walk.law.clone(), vec![0.0; d]),
    };
    let mut drift_mismatch = false;
    if let Some(t) = tilt {
        if !targets.is_empty() {
            let mut centroid = vec![0.0; d];
            for y in targets {
                for i in 0..d {
                    centroid[i] += (y[i] - x[i]) as f64 / targets.len() as f64;
                }
            }
            if dot(&centroid, &centroid) > 0.0
                && angle(&centroid, &t.q) > std::f64::consts::FRAC_PI_2
            {
                log::warn!("drift-mismatch: tilt direction points away from the targets");
                drift_mismatch = true;
            }
        }
    }
    let weights: Vec<f64> = targets
        .iter()
        .map(|y| (-dot_lattice(&alpha, &sub_lattice(y, x))).exp())
        .collect();
    let lookup: HashMap<&[i64], usize> = targets
        .iter()
        .enumerate()
        .map(|(i, y)| (y.as_slice(), i))
        .collect();
    let lo: Vec<i64> = (0..d)
        .map(|i| targets.iter().map(|y| y[i]).min().unwrap_or(0))
        .collect();
    let hi: Vec<i64> = (0..d)
        .map(|i| targets.iter().map(|y| y[i]).max().unwrap_or(-1))
        .collect();
    let sampler = law.sampler();
    let sizes = shard_sizes(opts.trials);
    let shard_counts: Vec<Vec<f64>> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &n)| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(b as u64));
            let mut counts = vec![0.0; targets.len()];
            let mut pos = vec![0i64; d];
            for _ in 0..n {
                pos.copy_from_slice(x);
                for t in 0..=opts.horizon {
                    if pos.iter().zip(&lo).all(|(p, l)| p >= l)
                        && pos.iter().zip(&hi).all(|(p, h)| p <= h)
                    {
                        if let Some(&i) = lookup.get(pos.as_slice()) {
                            counts[i] += 1.0;
                        }
                    }
                    if t == opts.horizon {
                        break;
                    }
                    let s = sampler.step(rng.random::<f64>());
                    for (p, v) in pos.iter_mut().zip(s) {
                        *p += v;
                    }
                    if !walk.cone.contains_lattice(&pos) {
                        break;
                    }
                }
            }
            counts
        })
        .collect();
    let estimates = targets
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let sums: Vec<f64> = shard_counts.iter().map(|c| c[i] * weights[i]).collect();
            let (estimate, stderr) = batch_stats(&sums, &sizes);
            McEstimate {
                target: y.clone(),
                estimate,
                stderr,
            }
        })
        .collect();
    Ok(McResult {
        estimates,
        drift_mismatch,
    })
}

/// Tolerances for the ray probes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    pub tol: f64,
    /// Extra window radius beyond the farthest probed point.
    pub pad: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            tol: 1e-12,
            pad: 20.0,
        }
    }
}

/// Snapped ray points `y_r` for each radius.
pub fn ray_points(cone: &Cone, q: &[f64], radii: &[f64]) -> Result<Vec<Vec<i64>>> {
    radii
        .iter()
        .map(|r| cone.snap(&q.iter().map(|c| r * c).collect::<Vec<_>>()))
        .collect()
}

pub fn check_direction(walk: &KilledWalk, q: &[f64]) -> Result<()> {
    if q.len() != walk.dim() {
        return Err(Error::DimensionMismatch {
            expected: walk.dim(),
            got: q.len(),
        });
    }
    if !walk.cone.contains(q)? {
        return Err(Error::QNotInCone);
    }
    Ok(())
}

/// Tilt for `q` and a DP engine for the tilted walk on a window holding
/// every point of `reach`.
pub fn twisted_engine(
    walk: &KilledWalk,
    q: &[f64],
    reach: &[Vec<i64>],
    opts: &ProbeOptions,
) -> Result<(TiltSolution, GreenEngine)> {
    check_direction(walk, q)?;
    let tilt = tilt_solve(&walk.law, q)?;
    let radius = reach.iter().map(|y| lattice_norm(y)).fold(0.0, f64::max) + opts.pad;
    let engine = GreenEngine::on_radius(walk.twisted(&tilt.alpha)?, radius)?;
    Ok((tilt, engine))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdRow {
    pub r: f64,
    pub y: Vec<i64>,
    /// `-log G(0, y_r) / |y_r|`.
    pub normalized_log_green: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdTable {
    pub q: Vec<f64>,
    /// `alpha(q) . q`.
    pub reference_decay: f64,
    pub rows: Vec<LdRow>,
}

impl LdTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,normalized_log_green,reference_decay\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                row.r, row.normalized_log_green, self.reference_decay
            ));
        }
        out
    }

    /// Gap to the reference decay at the largest radius.
    pub fn final_gap(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| {
            (r.normalized_log_green - self.reference_decay).abs()
        })
    }
}

/// Normalized log Green function along the ray of `q`.
///
/// `G(0, y)` is read from the exact DP of the walk tilted by `alpha(q)`,
/// which drifts toward the probed points: `G(0, y) = exp(-alpha . y) G_alpha(0, y)`.
pub fn ld_rate_probe(
    walk: &KilledWalk,
    q: &[f64],
    radii: &[f64],
    opts: &ProbeOptions,
) -> Result<LdTable> {
    check_direction(walk, q)?;
    let ys = ray_points(&walk.cone, q, radii)?;
    let (tilt, engine) = twisted_engine(walk, q, &ys, opts)?;
    let zero = vec![0i64; walk.dim()];
    let table = engine.converged(&zero, opts.tol)?;
    let rows = radii
        .iter()
        .zip(ys)
        .map(|(&r, y)| {
            let g_alpha = table.get(&y).unwrap_or(0.0);
            let norm_y = lattice_norm(&y);
            let value = if norm_y == 0.0 {
                0.0
            } else {
                (dot_lattice(&tilt.alpha, &y) - g_alpha.ln()) / norm_y
            };
            LdRow {
                r,
                y,
                normalized_log_green: value,
            }
        })
        .collect();
    Ok(LdTable {
        q: q.to_vec(),
        reference_decay: tilt.decay,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub r: f64,
    pub y: Vec<i64>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioTable {
    pub rows: Vec<RatioRow>,
    /// Smallest ratio over the largest quarter of the radii.
    pub liminf_proxy: f64,
}

impl RatioTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,ratio\n");
        for row in &self.rows {
            out.push_str(&format!("{},{}\n", row.r, row.ratio));
        }
        out
    }
}

/// Smallest value among the rows belonging to the top quarter of radii.
pub(crate) fn top_quartile_min(radii: &[f64], values: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));
    let keep = radii.len().div_ceil(4);
    order[radii.len() - keep..]
        .iter()
        .map(|&i| values[i])
        .fold(f64::INFINITY, f64::min)
}

/// Ratios `G(z + u, y_r) / G(z, y_r)` along the ray of `q`.
pub fn ratio_probe(
    walk: &KilledWalk,
    z: &[i64],
    u: &[i64],
    q: &[f64],
    radii: &[f64],
    opts: &ProbeOptions,
) -> Result<RatioTable> {
    if radii.is_empty() {
        return Err(Error::InvalidArgument("no radii".into()));
    }
    walk.check_point(z)?;
    walk.check_point(u)?;
    let zu: Vec<i64> = z.iter().zip(u).map(|(a, b)| a + b).collect();
    walk.check_point(&zu)?;
    check_direction(walk, q)?;
    let ys = ray_points(&walk.cone, q, radii)?;
    let mut reach = ys.clone();
    reach.push(zu.clone());
    let (tilt, engine) = twisted_engine(walk, q, &reach, opts)?;
    let tables = engine.converged_many(&[z.to_vec(), zu], opts.tol)?;
    let shift = dot_lattice(&tilt.alpha, u).exp();
    let rows: Vec<RatioRow> = radii
        .iter()
        .zip(ys)
        .map(|(&r, y)| {
            let den = tables[0].get(&y).unwrap_or(0.0);
            let num = tables[1].get(&y).unwrap_or(0.0);
            let ratio = if u.iter().all(|&c| c == 0) {
                1.0
            } else if den > 0.0 {
                shift * num / den
            } else {
                f64::NAN
            };
            RatioRow { r, y, ratio }
        })
        .collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    Ok(RatioTable {
        liminf_proxy: top_quartile_min(radii, &ratios),
        rows,
    })
}
