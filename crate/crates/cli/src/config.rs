use std::path::{Path, PathBuf};

use clap::ValueEnum;
use conewalk::ladder::LadderCaps;
use conewalk::{Atom, Cone, Error, Result, StepLaw};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Tilt,
    Green,
    Ladder,
    Renewal,
    Martin,
    Ratio,
    Ldrate,
    Exponent,
    Verify,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Tilt => "tilt",
            Command::Green => "green",
            Command::Ladder => "ladder",
            Command::Renewal => "renewal",
            Command::Martin => "martin",
            Command::Ratio => "ratio",
            Command::Ldrate => "ldrate",
            Command::Exponent => "exponent",
            Command::Verify => "verify",
        }
    }
}

/// Step law as written in a config; validated by `StepLaw::new`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSpec {
    pub d: usize,
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum ConeSpec {
    HalfSpace { gamma: Vec<f64> },
    Polyhedral { normals: Vec<Vec<f64>> },
    Circular { axis: Vec<f64>, theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapsSpec {
    pub max_steps_per_epoch: Option<u64>,
    pub safety_distance: Option<f64>,
    pub max_total_steps: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub law: Option<LawSpec>,
    pub cone: Option<ConeSpec>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub trials: Option<u64>,
    pub samples: Option<u64>,
    /// Window radius.
    pub radius: Option<f64>,
    pub radii: Option<Vec<f64>>,
    pub pad: Option<f64>,
    pub q: Option<Vec<f64>>,
    pub x: Option<Vec<i64>>,
    pub x_set: Option<Vec<Vec<i64>>>,
    pub z: Option<Vec<i64>>,
    pub u: Option<Vec<i64>>,
    pub t_max: Option<u64>,
    pub caps: Option<CapsSpec>,
    pub suite: Option<String>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn law(&self) -> Result<StepLaw> {
        let raw = self
            .law
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("config has no `law`".into()))?;
        StepLaw::new(raw.d, raw.atoms.clone())
    }

    pub fn cone(&self) -> Result<Cone> {
        match self
            .cone
            .clone()
            .ok_or_else(|| Error::InvalidArgument("config has no `cone`".into()))?
        {
            ConeSpec::HalfSpace { gamma } => Cone::half_space(gamma),
            ConeSpec::Polyhedral { normals } => Cone::polyhedral(normals),
            ConeSpec::Circular { axis, theta } => Cone::circular(axis, theta),
        }
    }

    pub fn tol(&self) -> Result<f64> {
        let tol = self.tol.unwrap_or(1e-12);
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tol must be positive, got {tol}"
            )));
        }
        Ok(tol)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::InvalidArgument("stochastic command needs a `seed`".into()))
    }

    pub fn count(value: Option<u64>, name: &str, default: u64) -> Result<u64> {
        let n = value.unwrap_or(default);
        if n == 0 {
            return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
        }
        Ok(n)
    }

    pub fn caps(&self) -> LadderCaps {
        let mut caps = LadderCaps::default();
        if let Some(c) = self.caps {
            if let Some(v) = c.max_steps_per_epoch {
                caps.max_steps_per_epoch = v;
            }
            if let Some(v) = c.safety_distance {
                caps.safety_distance = v;
            }
            if let Some(v) = c.max_total_steps {
                caps.max_total_steps = v;
            }
        }
        caps
    }

    pub fn radii(&self) -> Result<Vec<f64>> {
        let radii = self
            .radii
            .clone()
            .ok_or_else(|| Error::InvalidArgument("config has no `radii`".into()))?;
        if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidArgument("radii must be positive".into()));
        }
        Ok(radii)
    }

    pub fn required<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T> {
        value
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("config has no `{name}`")))
    }

    /// Every vector field must match the dimension of the law.
    pub fn check_dimensions(&self, d: usize) -> Result<()> {
        let check = |len: usize| {
            if len != d {
                Err(Error::DimensionMismatch {
                    expected: d,
                    got: len,
                })
            } else {
                Ok(())
            }
        };
        if let Some(q) = &self.q {
            check(q.len())?;
        }
        for v in [&self.x, &self.z, &self.u].into_iter().flatten() {
            check(v.len())?;
        }
        for v in self.x_set.iter().flatten() {
            check(v.len())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = ExperimentConfig::from_json(
            r#"{"command":"martin","law":{"d":1,"atoms":[{"x":[1],"p":0.7},{"x":[-1],"p":0.3}]},
                "cone":{"variant":"halfspace","gamma":[1.0]},"q":[1.0],"x_set":[[0],[1]],
                "radii":[10,20],"seed":4,"caps":{"safety_distance":30}}"#,
        )
        .unwrap();
        assert_eq!(cfg.command, Some(Command::Martin));
        assert_eq!(cfg.law().unwrap().dim(), 1);
        assert_eq!(cfg.cone().unwrap(), Cone::half_line());
        assert_eq!(cfg.caps().safety_distance, 30.0);
        assert_eq!(cfg.caps().max_steps_per_epoch, 10_000);
        assert_eq!(cfg.radii().unwrap(), vec![10.0, 20.0]);
        cfg.check_dimensions(1).unwrap();
        assert!(cfg.check_dimensions(2).is_err());
    }

    #[test]
    fn law_errors_keep_their_codes() {
        let cfg = ExperimentConfig::from_json(
            r#"{"law":{"d":1,"atoms":[{"x":[1],"p":0.6},{"x":[-1],"p":0.3}]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.law().unwrap_err().code(), "not-normalized");
        assert!(ExperimentConfig::from_json(r#"{"bogus":1}"#).is_err());
        assert_eq!(
            ExperimentConfig::from_json(r#"{"tol":-1}"#)
                .unwrap()
                .tol()
                .unwrap_err()
                .code(),
            "invalid-argument"
        );
    }
}
