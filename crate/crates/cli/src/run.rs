use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use conewalk::circular::{exit_exponent, ExponentOptions};
use conewalk::green::{ld_rate_probe, ratio_probe, McOptions, ProbeOptions};
use conewalk::ladder::{
    renewal_mc, renewal_series, sample_first_height, LadderKernel, RenewalOptions,
};
use conewalk::martin::{k_q_build, martin_limit_probe, monotonicity_check};
use conewalk::suites;
use conewalk::{
    green_mc, lattice_window, tilt_solve, Error, GreenEngine, KilledWalk, Result, TiltSolution,
};
use serde_json::{json, Value};

use crate::config::{Command, ExperimentConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECKS_FAILED: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_NUMERICAL
    }
}

/// What a command produced: CSV files, seeds it used, and whether every
/// verification row passed.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub seeds: Vec<(String, u64)>,
    pub passed: bool,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            passed: true,
            ..Default::default()
        }
    }

    fn file(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body));
    }
}

fn fmt_vec<T: ToString>(v: &[T]) -> String {
    v.iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn walk(cfg: &ExperimentConfig) -> Result<KilledWalk> {
    let law = cfg.law()?;
    cfg.check_dimensions(law.dim())?;
    KilledWalk::new(law, cfg.cone()?)
}

fn origin_or(x: &Option<Vec<i64>>, d: usize) -> Vec<i64> {
    x.clone().unwrap_or_else(|| vec![0; d])
}

/// Runs one command and returns its tables without touching the disk.
pub fn execute(command: Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::new();
    let tol = cfg.tol()?;
    match command {
        Command::Tilt => {
            let walk = walk(cfg)?;
            let q = ExperimentConfig::required(&cfg.q, "q")?;
            let sol = tilt_solve(walk.law(), q)?;
            out.file(
                "tilt.csv",
                format!(
                    "{}\n{}\n",
                    TiltSolution::csv_header(walk.dim()),
                    sol.csv_row()
                ),
            );
        }
        Command::Green => {
            let walk = walk(cfg)?;
            let x = origin_or(&cfg.x, walk.dim());
            let window = Arc::new(lattice_window(walk.cone(), cfg.radius.unwrap_or(30.0))?);
            let engine = GreenEngine::new(walk.clone(), window)?;
            out.file("green.csv", engine.converged(&x, tol)?.to_csv());
            if cfg.trials.is_some() {
                let targets = ExperimentConfig::required(&cfg.x_set, "x_set")?;
                let seed = cfg.seed()?;
                let opts = McOptions {
                    trials: ExperimentConfig::count(cfg.trials, "trials", 1)?,
                    seed,
                    horizon: cfg.t_max.unwrap_or(100_000) as usize,
                };
                let tilt = match &cfg.q {
                    Some(q) => Some(tilt_solve(walk.law(), q)?),
                    None => None,
                };
                out.seeds.push(("green_mc".into(), seed));
                out.file(
                    "green_mc.csv",
                    green_mc(&walk, &x, targets, tilt.as_ref(), &opts)?.to_csv(),
                );
            }
        }
        Command::Ladder => {
            let walk = walk(cfg)?;
            let x = ExperimentConfig::required(&cfg.x, "x")?;
            let kernel = LadderKernel::new(&walk, cfg.radius.unwrap_or(30.0), tol)?;
            let row = kernel.row(x)?;
            out.file("ladder_row.csv", row.to_csv());
            if cfg.samples.is_some() {
                let seed = cfg.seed()?;
                let n = ExperimentConfig::count(cfg.samples, "samples", 1)?;
                let sample = sample_first_height(&walk, x, n, seed, cfg.caps())?;
                out.seeds.push(("ladder_sample".into(), seed));
                out.file(
                    "ladder_summary.csv",
                    format!(
                        "samples,cemetery,tv_distance,truncation_slack\n{},{},{},{}\n",
                        n,
                        sample.cemetery,
                        sample.tv_distance(&row),
                        row.truncation_slack
                    ),
                );
            }
        }
        Command::Renewal => {
            let walk = walk(cfg)?;
            let opts = RenewalOptions {
                pad: cfg.pad.unwrap_or(RenewalOptions::default().pad),
            };
            let table = renewal_series(&walk, cfg.radius.unwrap_or(10.0), tol, opts)?;
            out.file("renewal.csv", table.to_csv());
            if cfg.trials.is_some() {
                let x = ExperimentConfig::required(&cfg.x, "x")?;
                let seed = cfg.seed()?;
                let n = ExperimentConfig::count(cfg.trials, "trials", 1)?;
                let (mean, stderr) = renewal_mc(&walk, x, n, seed, cfg.caps())?;
                out.seeds.push(("renewal_mc".into(), seed));
                let d = walk.dim();
                let head: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
                out.file(
                    "renewal_mc.csv",
                    format!(
                        "{},V,error,method\n{},{},{},mc\n",
                        head.join(","),
                        fmt_vec(x),
                        mean,
                        stderr
                    ),
                );
            }
        }
        Command::Martin => {
            let walk = walk(cfg)?;
            let q = ExperimentConfig::required(&cfg.q, "q")?;
            let renewal = RenewalOptions {
                pad: cfg.pad.unwrap_or(RenewalOptions::default().pad),
            };
            let k = k_q_build(
                &walk,
                q,
                cfg.radius.unwrap_or(12.0),
                tol.max(1e-11),
                renewal,
            )?;
            out.file("k_q.csv", k.to_csv());
            let seed = cfg.seed()?;
            let samples = ExperimentConfig::count(cfg.samples, "samples", 10_000)?;
            let mono = monotonicity_check(&k, samples as usize, seed, 1e-9)?;
            out.seeds.push(("monotonicity".into(), seed));
            if let Some(x_set) = &cfg.x_set {
                let probe = ProbeOptions {
                    tol,
                    ..ProbeOptions::default()
                };
                let table = martin_limit_probe(&walk, q, x_set, &cfg.radii()?, &probe, renewal)?;
                out.file("martin.csv", table.to_csv());
            }
            out.file(
                "martin_summary.csv",
                format!(
                    "max_residual,points_checked,pairs_checked,violations\n{},{},{},{}\n",
                    k.residual.max, k.residual.points_checked, mono.checked, mono.violations
                ),
            );
        }
        Command::Ratio => {
            let walk = walk(cfg)?;
            let z = ExperimentConfig::required(&cfg.z, "z")?;
            let u = ExperimentConfig::required(&cfg.u, "u")?;
            let q = ExperimentConfig::required(&cfg.q, "q")?;
            let probe = ProbeOptions {
                tol,
                ..ProbeOptions::default()
            };
            let table = ratio_probe(&walk, z, u, q, &cfg.radii()?, &probe)?;
            out.file("ratio.csv", table.to_csv());
            out.file(
                "ratio_summary.csv",
                format!("liminf_proxy\n{}\n", table.liminf_proxy),
            );
        }
        Command::Ldrate => {
            let walk = walk(cfg)?;
            let q = ExperimentConfig::required(&cfg.q, "q")?;
            let probe = ProbeOptions {
                tol,
                ..ProbeOptions::default()
            };
            out.file(
                "ldrate.csv",
                ld_rate_probe(&walk, q, &cfg.radii()?, &probe)?.to_csv(),
            );
        }
        Command::Exponent => {
            let walk = walk(cfg)?;
            let x = ExperimentConfig::required(&cfg.x, "x")?;
            let seed = cfg.seed()?;
            let opts = ExponentOptions {
                t_max: cfg.t_max.unwrap_or(10_000),
                trials: ExperimentConfig::count(cfg.trials, "trials", 1_000_000)?,
                seed,
            };
            let e = exit_exponent(&walk, x, opts)?;
            out.seeds.push(("exponent".into(), seed));
            out.file("survival.csv", e.to_csv());
            out.file("exponent.csv", e.summary_csv());
        }
        Command::Verify => {
            let suite = ExperimentConfig::required(&cfg.suite, "suite")?;
            let report = suites::verify(suite, cfg.seed()?)?;
            out.passed = report.passed();
            out.seeds = report.seeds.clone();
            out.file("report.csv", report.to_csv());
            for (name, body) in report.tables {
                out.file(&name, body);
            }
        }
    }
    Ok(out)
}

fn manifest(
    command: Command,
    cfg: &ExperimentConfig,
    started: Instant,
    result: &Result<Outcome>,
) -> Value {
    let (status, error, seeds, files) = match result {
        Ok(o) => (
            if o.passed { "ok" } else { "checks-failed" },
            Value::Null,
            o.seeds.iter().map(|(k, v)| (k.clone(), json!(v))).collect(),
            o.files.iter().map(|(n, _)| json!(n)).collect(),
        ),
        Err(e) => (
            "error",
            json!({"code": e.code(), "message": e.to_string()}),
            serde_json::Map::new(),
            Vec::new(),
        ),
    };
    json!({
        "command": command.as_str(),
        "status": status,
        "error": error,
        "config": cfg,
        "version": env!("CARGO_PKG_VERSION"),
        "seeds": seeds,
        "tol": cfg.tol.unwrap_or(1e-12),
        "threads": rayon::current_num_threads(),
        "wall_time_s": started.elapsed().as_secs_f64(),
        "files": files,
        "unix_time": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    })
}

/// Executes, writes every table and `manifest.json` under `out_dir`, and
/// returns the process exit code.
pub fn run(command: Command, cfg: &ExperimentConfig, out_dir: &Path) -> i32 {
    let started = Instant::now();
    let result = match cfg.command {
        Some(c) if c != command => Err(Error::InvalidArgument(format!(
            "config is for `{}`, invoked as `{}`",
            c.as_str(),
            command.as_str()
        ))),
        _ => execute(command, cfg),
    };
    let code = match &result {
        Ok(o) if o.passed => EXIT_OK,
        Ok(_) => EXIT_CHECKS_FAILED,
        Err(e) => {
            log::error!("{}: {e}", e.code());
            exit_code(e)
        }
    };
    if let Err(e) = write_outputs(out_dir, command, cfg, started, &result) {
        log::error!("writing outputs to {}: {e}", out_dir.display());
        return EXIT_NUMERICAL.max(code);
    }
    code
}

fn write_outputs(
    out_dir: &Path,
    command: Command,
    cfg: &ExperimentConfig,
    started: Instant,
    result: &Result<Outcome>,
) -> std::io::Result<()> {
    fs::create_dir_all(out_dir)?;
    if let Ok(outcome) = result {
        for (name, body) in &outcome.files {
            let path: PathBuf = out_dir.join(name);
            fs::write(&path, body)?;
            log::info!("wrote {}", path.display());
        }
    }
    let m = manifest(command, cfg, started, result);
    fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&m).expect("manifest serializes"),
    )
}
