//! Bundled verification suites: fixed walks with closed-form or desk-run
//! reference values, each producing a table of named checks plus the CSV
//! artifacts the checks were computed from.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;
use std::time::Instant;

use crate::circular::{exit_exponent, p_star, p_star_by_root, theta_star, ExponentOptions};
use crate::cone::{lattice_window, Cone};
use crate::error::{Error, Result};
use crate::green::{
    green_dp, laziness_check, ld_rate_probe, ratio_probe, twisted_identity_deviation, KilledWalk,
    ProbeOptions,
};
use crate::ladder::{
    renewal_mc, renewal_series, sample_first_height, LadderCaps, LadderKernel, RenewalOptions,
};
use crate::linalg::normalized;
use crate::martin::{k_q_build, martin_limit_probe, monotonicity_check};
use crate::steplaw::StepLaw;
use crate::tilt::tilt_solve;

pub const SUITES: [&str; 4] = [
    "d1-drift",
    "quadrant-drift",
    "halfplane-irrational",
    "circular-exponent",
];

/// `+1` with probability 0.7, `-1` with 0.3, killed below 0.
pub fn d1_drift_walk() -> KilledWalk {
    KilledWalk::new(
        StepLaw::from_pairs(1, &[(&[1], 0.7), (&[-1], 0.3)]).expect("valid law"),
        Cone::half_line(),
    )
    .expect("valid walk")
}

/// Steps `(1,0)`, `(0,1)` at 0.4 each and `(-1,-1)` at 0.2 in the quadrant.
pub fn quadrant_drift_walk() -> KilledWalk {
    KilledWalk::new(
        StepLaw::from_pairs(2, &[(&[1, 0], 0.4), (&[0, 1], 0.4), (&[-1, -1], 0.2)])
            .expect("valid law"),
        Cone::quadrant(),
    )
    .expect("valid walk")
}

/// Nearest-neighbour walk with drift `(0.1, 0.1)` in `{x + sqrt(2) y >= 0}`.
pub fn halfplane_walk() -> KilledWalk {
    KilledWalk::new(
        StepLaw::from_pairs(
            2,
            &[
                (&[1, 0], 0.3),
                (&[-1, 0], 0.2),
                (&[0, 1], 0.3),
                (&[0, -1], 0.2),
            ],
        )
        .expect("valid law"),
        Cone::half_space(vec![1.0, 2f64.sqrt()]).expect("valid cone"),
    )
    .expect("valid walk")
}

/// Simple symmetric walk on `Z^2`.
pub fn isotropic_planar_law() -> StepLaw {
    StepLaw::from_pairs(
        2,
        &[
            (&[1, 0], 0.25),
            (&[-1, 0], 0.25),
            (&[0, 1], 0.25),
            (&[0, -1], 0.25),
        ],
    )
    .expect("valid law")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// `|measured - expected| <= tolerance`.
    Near,
    /// `measured <= expected + tolerance`.
    AtMost,
    /// `measured >= expected - tolerance`.
    AtLeast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub kind: CheckKind,
    pub pass: bool,
}

impl Check {
    pub fn new(
        id: impl Into<String>,
        kind: CheckKind,
        measured: f64,
        expected: f64,
        tolerance: f64,
    ) -> Self {
        let pass = match kind {
            CheckKind::Near => (measured - expected).abs() <= tolerance,
            CheckKind::AtMost => measured <= expected + tolerance,
            CheckKind::AtLeast => measured >= expected - tolerance,
        };
        Check {
            id: id.into(),
            measured,
            expected,
            tolerance,
            kind,
            pass,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
    /// `(file name, CSV body)` of every table behind the checks.
    pub tables: Vec<(String, String)>,
    /// Seeds handed to each stochastic step.
    pub seeds: Vec<(String, u64)>,
    clock: Instant,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        SuiteReport {
            suite: suite.to_string(),
            checks: Vec::new(),
            tables: Vec::new(),
            seeds: Vec::new(),
            clock: Instant::now(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,measured,expected,tolerance,pass\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.id,
                c.measured,
                c.expected,
                c.tolerance,
                if c.pass { "pass" } else { "fail" }
            ));
        }
        out
    }

    fn push(&mut self, check: Check) {
        log::debug!("{} {} ({:.2?})", self.suite, check.id, self.clock.elapsed());
        self.clock = Instant::now();
        self.checks.push(check);
    }

    fn table(&mut self, name: impl Into<String>, body: String) {
        self.tables.push((name.into(), body));
    }

    fn seed(&mut self, label: &str, base: u64, offset: u64) -> u64 {
        let s = base.wrapping_add(offset);
        self.seeds.push((label.to_string(), s));
        s
    }
}

pub fn verify(suite: &str, seed: u64) -> Result<SuiteReport> {
    match suite {
        "d1-drift" => d1_drift(seed),
        "quadrant-drift" => quadrant_drift(seed),
        "halfplane-irrational" => halfplane(seed),
        "circular-exponent" => circular_exponent(seed),
        other => Err(Error::UnknownSuite(other.to_string())),
    }
}

const TOL: f64 = 1e-12;
const TV_SAMPLES: u64 = 100_000;
const MONO_SAMPLES: usize = 10_000;
const LD_RADII: [f64; 5] = [20.0, 40.0, 80.0, 120.0, 160.0];

fn unit_at(deg: f64) -> Vec<f64> {
    let r = deg.to_radians();
    vec![r.cos(), r.sin()]
}

fn coords(x: &[i64]) -> String {
    x.iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join("_")
}

fn deg_label(q: &[f64]) -> String {
    format!("{:.0}deg", q[1].atan2(q[0]).to_degrees())
}

/// Largest total mass over the kernel rows of every window point.
fn max_row_total(kernel: &LadderKernel) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in kernel.green().window.points() {
        worst = worst.max(kernel.row(x)?.total());
    }
    Ok(worst)
}

fn ladder_checks(
    rep: &mut SuiteReport,
    walk: &KilledWalk,
    tv_at: Option<&[i64]>,
    seed: u64,
) -> Result<()> {
    let kernel = LadderKernel::new(walk, 30.0, TOL)?;
    rep.push(Check::new(
        "ladder.substochastic",
        CheckKind::AtMost,
        max_row_total(&kernel)?,
        1.0,
        1e-9,
    ));
    if let Some(x) = tv_at {
        let row = kernel.row(x)?;
        let s = rep.seed("ladder.tv", seed, 11);
        let sample = sample_first_height(walk, x, TV_SAMPLES, s, LadderCaps::default())?;
        rep.push(Check::new(
            format!("ladder.tv.{}", coords(x)),
            CheckKind::AtMost,
            sample.tv_distance(&row),
            0.0,
            0.02,
        ));
        rep.table(format!("ladder_row_{}.csv", coords(x)), row.to_csv());
    }
    Ok(())
}

fn identity_checks(
    rep: &mut SuiteReport,
    walk: &KilledWalk,
    alpha: &[f64],
    x: &[i64],
    lazy_radius: f64,
) -> Result<()> {
    let window = Arc::new(lattice_window(walk.cone(), 8.0)?);
    rep.push(Check::new(
        "green.twisted_identity",
        CheckKind::AtMost,
        twisted_identity_deviation(walk, alpha, x, window, 200)?,
        0.0,
        1e-12,
    ));
    let window = Arc::new(lattice_window(walk.cone(), lazy_radius)?);
    let lazy = laziness_check(walk, 0.5, x, window, TOL, 1e-6)?;
    rep.push(Check::new(
        "green.laziness",
        CheckKind::AtMost,
        lazy.max_rel_dev,
        0.0,
        1e-6,
    ));
    Ok(())
}

/// Harmonic residual, `k_q(0) = 1` and monotonicity of `k_q`.
fn candidate_checks(
    rep: &mut SuiteReport,
    walk: &KilledWalk,
    q: &[f64],
    mono: bool,
    seed: u64,
) -> Result<()> {
    let label = if q.len() == 1 {
        "ray".to_string()
    } else {
        deg_label(q)
    };
    let k = k_q_build(walk, q, 12.0, 1e-11, RenewalOptions::default())?;
    let zero = vec![0i64; walk.dim()];
    rep.push(Check::new(
        format!("martin.k0.{label}"),
        CheckKind::Near,
        k.get(&zero).unwrap_or(f64::NAN),
        1.0,
        1e-9,
    ));
    rep.push(Check::new(
        format!("martin.residual.{label}"),
        CheckKind::AtMost,
        k.residual.max,
        0.0,
        1e-3,
    ));
    if mono {
        let s = rep.seed(&format!("martin.monotonicity.{label}"), seed, 21);
        let m = monotonicity_check(&k, MONO_SAMPLES, s, 1e-9)?;
        rep.push(Check::new(
            format!("martin.monotonicity.{label}"),
            CheckKind::AtMost,
            m.violations as f64,
            0.0,
            0.0,
        ));
    }
    rep.table(format!("k_q_{label}.csv"), k.to_csv());
    Ok(())
}

fn martin_probe_check(
    rep: &mut SuiteReport,
    walk: &KilledWalk,
    q: &[f64],
    x_set: &[Vec<i64>],
    radii: &[f64],
) -> Result<()> {
    let label = if q.len() == 1 {
        "ray".to_string()
    } else {
        deg_label(q)
    };
    let t = martin_limit_probe(
        walk,
        q,
        x_set,
        radii,
        &ProbeOptions::default(),
        RenewalOptions::default(),
    )?;
    rep.push(Check::new(
        format!("martin.gap.{label}"),
        CheckKind::AtMost,
        t.final_gap(),
        0.0,
        0.05,
    ));
    rep.table(format!("martin_{label}.csv"), t.to_csv());
    Ok(())
}

fn ratio_check(
    rep: &mut SuiteReport,
    walk: &KilledWalk,
    z: &[i64],
    u: &[i64],
    q: &[f64],
    radii: &[f64],
) -> Result<()> {
    let t = ratio_probe(walk, z, u, q, radii, &ProbeOptions::default())?;
    rep.push(Check::new(
        "ratio.liminf",
        CheckKind::AtLeast,
        t.liminf_proxy,
        0.95,
        0.0,
    ));
    rep.table("ratio.csv", t.to_csv());
    Ok(())
}

fn ld_check(rep: &mut SuiteReport, walk: &KilledWalk, q: &[f64]) -> Result<()> {
    let label = if q.len() == 1 {
        "ray".to_string()
    } else {
        deg_label(q)
    };
    let t = ld_rate_probe(walk, q, &LD_RADII, &ProbeOptions::default())?;
    rep.push(Check::new(
        format!("ldrate.gap.{label}"),
        CheckKind::AtMost,
        t.final_gap(),
        0.0,
        0.1,
    ));
    rep.table(format!("ldrate_{label}.csv"), t.to_csv());
    Ok(())
}

fn drift_direction(walk: &KilledWalk) -> Vec<f64> {
    normalized(&walk.law().mean()).expect("suite walks drift")
}

fn d1_drift(seed: u64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("d1-drift");
    let walk = d1_drift_walk();
    let window = Arc::new(lattice_window(walk.cone(), 60.0)?);
    let g0 = green_dp(&walk, &[0], Arc::clone(&window), TOL)?;
    let g1 = green_dp(&walk, &[1], window, TOL)?;
    rep.push(Check::new(
        "green.G_0_0",
        CheckKind::Near,
        g0.get(&[0]).unwrap_or(f64::NAN),
        10.0 / 7.0,
        1e-9,
    ));
    rep.push(Check::new(
        "green.G_1_0",
        CheckKind::Near,
        g1.get(&[0]).unwrap_or(f64::NAN),
        30.0 / 49.0,
        1e-9,
    ));
    rep.table("green_0.csv", g0.to_csv());

    let v = renewal_series(&walk, 20.0, TOL, RenewalOptions::default())?;
    rep.push(Check::new(
        "renewal.V0",
        CheckKind::Near,
        v.get(&[0]).unwrap_or(f64::NAN),
        1.0,
        v.tol,
    ));
    rep.push(Check::new(
        "renewal.V1",
        CheckKind::Near,
        v.get(&[1]).unwrap_or(f64::NAN),
        10.0 / 7.0,
        1e-6,
    ));
    rep.push(Check::new(
        "renewal.V2",
        CheckKind::Near,
        v.get(&[2]).unwrap_or(f64::NAN),
        79.0 / 49.0,
        1e-6,
    ));
    rep.table("renewal.csv", v.to_csv());
    let s = rep.seed("renewal.mc", seed, 1);
    let (mc1, se1) = renewal_mc(&walk, &[1], 100_000, s, LadderCaps::default())?;
    rep.push(Check::new(
        "renewal.mc.V1",
        CheckKind::Near,
        mc1,
        10.0 / 7.0,
        3.0 * se1,
    ));
    let (mc0, _) = renewal_mc(&walk, &[0], 1_000, s, LadderCaps::default())?;
    rep.push(Check::new("renewal.mc.V0", CheckKind::Near, mc0, 1.0, 0.0));

    ladder_checks(&mut rep, &walk, Some(&[3]), seed)?;
    identity_checks(&mut rep, &walk, &[(3.0f64 / 7.0).ln()], &[1], 40.0)?;
    candidate_checks(&mut rep, &walk, &[1.0], true, seed)?;
    let x_set: Vec<Vec<i64>> = (0..4).map(|x| vec![x]).collect();
    martin_probe_check(&mut rep, &walk, &[1.0], &x_set, &[15.0, 30.0, 45.0, 60.0])?;
    ratio_check(
        &mut rep,
        &walk,
        &[1],
        &[1],
        &[1.0],
        &[10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
    )?;
    ld_check(&mut rep, &walk, &[1.0])?;
    Ok(rep)
}

fn planar_x_set() -> Vec<Vec<i64>> {
    vec![
        vec![0, 0],
        vec![1, 0],
        vec![0, 1],
        vec![1, 1],
        vec![2, 1],
        vec![3, 3],
    ]
}

fn quadrant_drift(seed: u64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("quadrant-drift");
    let walk = quadrant_drift_walk();
    let m = drift_direction(&walk);
    let (q30, q65) = (unit_at(30.0), unit_at(65.0));

    ladder_checks(&mut rep, &walk, Some(&[3, 3]), seed)?;
    let alpha = tilt_solve(walk.law(), &q30)?.alpha;
    identity_checks(&mut rep, &walk, &alpha, &[1, 1], 30.0)?;

    let v = renewal_series(&walk, 10.0, TOL, RenewalOptions::default())?;
    let x = [2, 1];
    let s = rep.seed("renewal.mc", seed, 1);
    let (mc, se) = renewal_mc(&walk, &x, 20_000, s, LadderCaps::default())?;
    let series = v.get(&x).unwrap_or(f64::NAN);
    rep.push(Check::new(
        "renewal.series_vs_mc",
        CheckKind::Near,
        mc,
        series,
        (3.0 * se).max(v.error(&x).unwrap_or(0.0)),
    ));
    rep.table("renewal.csv", v.to_csv());

    candidate_checks(&mut rep, &walk, &m, true, seed)?;
    candidate_checks(&mut rep, &walk, &q30, true, seed)?;
    candidate_checks(&mut rep, &walk, &q65, false, seed)?;
    martin_probe_check(
        &mut rep,
        &walk,
        &m,
        &planar_x_set(),
        &[10.0, 20.0, 30.0, 40.0],
    )?;
    martin_probe_check(
        &mut rep,
        &walk,
        &q30,
        &planar_x_set(),
        &[10.0, 20.0, 30.0, 40.0],
    )?;
    ratio_check(
        &mut rep,
        &walk,
        &[1, 1],
        &[1, 0],
        &m,
        &[10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0],
    )?;
    ld_check(&mut rep, &walk, &m)?;
    ld_check(&mut rep, &walk, &unit_at(30.0))?;
    Ok(rep)
}

fn halfplane(seed: u64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("halfplane-irrational");
    let walk = halfplane_walk();
    let m = drift_direction(&walk);
    let q = unit_at(90.0);

    ladder_checks(&mut rep, &walk, None, seed)?;
    let alpha = tilt_solve(walk.law(), &q)?.alpha;
    identity_checks(&mut rep, &walk, &alpha, &[0, 1], 30.0)?;
    candidate_checks(&mut rep, &walk, &m, true, seed)?;
    candidate_checks(&mut rep, &walk, &q, false, seed)?;
    let x_set = vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![-1, 1], vec![2, 2]];
    martin_probe_check(&mut rep, &walk, &m, &x_set, &[10.0, 20.0, 30.0, 40.0])?;
    ratio_check(
        &mut rep,
        &walk,
        &[1, 1],
        &[1, 0],
        &m,
        &[10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0],
    )?;
    ld_check(&mut rep, &walk, &m)?;
    ld_check(&mut rep, &walk, &q)?;
    Ok(rep)
}

fn circular_exponent(seed: u64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("circular-exponent");
    let mut worst: f64 = 0.0;
    for i in 0..32 {
        let th = PI * (i + 1) as f64 / 34.0;
        worst = worst.max((p_star_by_root(th, 2)?.p_star - PI / (2.0 * th)).abs());
    }
    rep.push(Check::new(
        "pstar.k2_grid",
        CheckKind::AtMost,
        worst,
        0.0,
        1e-10,
    ));
    for k in 2..=4 {
        rep.push(Check::new(
            format!("theta_star.k{k}.p1"),
            CheckKind::Near,
            theta_star(1.0, k)?,
            PI / 2.0,
            1e-9,
        ));
    }
    rep.push(Check::new(
        "pstar.k3.half",
        CheckKind::Near,
        p_star(PI / 2.0, 3)?.p_star,
        1.0,
        1e-8,
    ));

    let half_line = KilledWalk::new(
        StepLaw::from_pairs(1, &[(&[1], 0.5), (&[-1], 0.5)])?,
        Cone::half_line(),
    )?;
    let quadrant = KilledWalk::new(
        isotropic_planar_law(),
        Cone::circular(vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2], PI / 4.0)?,
    )?;
    let half_plane = KilledWalk::new(
        isotropic_planar_law(),
        Cone::circular(vec![0.0, 1.0], PI / 2.0)?,
    )?;
    let cases: [(&str, &KilledWalk, &[i64], f64); 3] = [
        ("half_line", &half_line, &[1], 0.1),
        ("quadrant", &quadrant, &[1, 1], 0.15),
        ("half_plane", &half_plane, &[0, 1], 0.1),
    ];
    for (offset, (name, walk, x, tol)) in cases.into_iter().enumerate() {
        let s = rep.seed(&format!("exponent.{name}"), seed, 31 + offset as u64);
        let e = exit_exponent(
            walk,
            x,
            ExponentOptions {
                t_max: 10_000,
                trials: 1_000_000,
                seed: s,
            },
        )?;
        rep.push(Check::new(
            format!("exponent.{name}"),
            CheckKind::Near,
            e.slope,
            e.reference,
            tol,
        ));
        rep.table(format!("survival_{name}.csv"), e.to_csv());
    }
    Ok(rep)
}
