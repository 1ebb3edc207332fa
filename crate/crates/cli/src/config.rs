//! Flat `key = value` experiment files.
//!
//! ```text
//! # comments start with '#'
//! preset = test8
//! ell = 1.1
//! noise = 0.01, 0.001
//! seeds = 1, 2, 3
//! bounds = 0.05:0.95
//! out = results/test8
//! ```
//!
//! Keys: `preset` (required), `nx`, `nt`, `ell`, `t_final`, `t0`, `noise`
//! (fractions, 0.01 = 1%), `seeds`, `initial`, `truth`, `bounds` (`lo:hi`
//! per parameter), `out`. Lists are comma separated.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use degen_core::inversion::Bounds;
use degen_core::presets::Preset;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing key '{0}'")]
    Missing(&'static str),
    #[error("invalid setup: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: String,
    pub nx: Option<usize>,
    pub nt: Option<usize>,
    pub ell: Option<f64>,
    pub t_final: Option<f64>,
    pub t0: Option<f64>,
    pub noise: Vec<f64>,
    pub seeds: Vec<u64>,
    pub initial: Option<Vec<f64>>,
    pub truth: Option<Vec<f64>>,
    pub bounds: Option<Vec<(f64, f64)>>,
    pub out: PathBuf,
}

pub const DEFAULT_SEED: u64 = 42;

impl ExperimentConfig {
    pub fn new(preset: &str) -> Self {
        Self {
            preset: preset.to_string(),
            nx: None,
            nt: None,
            ell: None,
            t_final: None,
            t0: None,
            noise: vec![0.0],
            seeds: vec![DEFAULT_SEED],
            initial: None,
            truth: None,
            bounds: None,
            out: PathBuf::from("results").join(preset),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.parse()
    }

    /// Preset with every override applied.
    pub fn preset(&self) -> Result<Preset, ConfigError> {
        let mut p = Preset::by_name(&self.preset).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(v) = self.nx {
            p.nx = v;
        }
        if let Some(v) = self.nt {
            p.nt = v;
        }
        if let Some(v) = self.ell {
            p.ell = v;
        }
        if let Some(v) = self.t_final {
            p.t_final = v;
        }
        if let Some(v) = self.t0 {
            p.set_t0(v);
        }
        let dim = p.family.dim();
        let check = |name: &str, n: usize| {
            if n == dim {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{name} needs {dim} values, got {n}")))
            }
        };
        if let Some(v) = &self.initial {
            check("initial", v.len())?;
            p.initial = v.clone();
        }
        if let Some(v) = &self.truth {
            check("truth", v.len())?;
            p.truth = v.clone();
        }
        if let Some(v) = &self.bounds {
            check("bounds", v.len())?;
            p.bounds = v
                .iter()
                .map(|&(lo, hi)| Bounds::new(lo, hi))
                .collect::<Result<_, _>>()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        p.grid().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(t0) = p.t0() {
            if !(t0 > 0.0 && t0 < p.t_final) {
                return Err(ConfigError::Invalid(format!("t0 = {t0} outside (0, {})", p.t_final)));
            }
        }
        for (k, (i, b)) in p.initial.iter().zip(&p.bounds).enumerate() {
            if !b.strictly_contains(*i) {
                return Err(ConfigError::Invalid(format!(
                    "initial value {i} of parameter {k} is not inside [{}, {}]",
                    b.lo, b.hi
                )));
            }
        }
        if self.noise.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(ConfigError::Invalid("noise levels must be finite and >= 0".into()));
        }
        Ok(p)
    }

    pub fn to_text(&self) -> String {
        fn list<T: ToString>(v: &[T]) -> String {
            v.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
        }
        let mut s = String::new();
        let _ = writeln!(s, "preset = {}", self.preset);
        if let Some(v) = self.nx {
            let _ = writeln!(s, "nx = {v}");
        }
        if let Some(v) = self.nt {
            let _ = writeln!(s, "nt = {v}");
        }
        if let Some(v) = self.ell {
            let _ = writeln!(s, "ell = {v}");
        }
        if let Some(v) = self.t_final {
            let _ = writeln!(s, "t_final = {v}");
        }
        if let Some(v) = self.t0 {
            let _ = writeln!(s, "t0 = {v}");
        }
        let _ = writeln!(s, "noise = {}", list(&self.noise));
        let _ = writeln!(s, "seeds = {}", list(&self.seeds));
        if let Some(v) = &self.initial {
            let _ = writeln!(s, "initial = {}", list(v));
        }
        if let Some(v) = &self.truth {
            let _ = writeln!(s, "truth = {}", list(v));
        }
        if let Some(v) = &self.bounds {
            let b: Vec<String> = v.iter().map(|(lo, hi)| format!("{lo}:{hi}")).collect();
            let _ = writeln!(s, "bounds = {}", b.join(", "));
        }
        let _ = writeln!(s, "out = {}", self.out.display());
        s
    }
}

fn parse_list<T: FromStr>(v: &str) -> Result<Vec<T>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|x| {
            x.trim()
                .parse::<T>()
                .map_err(|_| format!("cannot parse '{}'", x.trim()))
        })
        .collect()
}

fn parse_one<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse '{v}'"))
}

impl FromStr for ExperimentConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut cfg: Option<ExperimentConfig> = None;
        let mut pending: Vec<(usize, String, String)> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: n + 1,
                    msg: "expected 'key = value'".into(),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if k == "preset" {
                cfg = Some(ExperimentConfig::new(v));
            } else {
                pending.push((n + 1, k.to_string(), v.to_string()));
            }
        }
        let mut cfg = cfg.ok_or(ConfigError::Missing("preset"))?;
        for (line, k, v) in pending {
            let syntax = |msg: String| ConfigError::Syntax { line, msg };
            match k.as_str() {
                "nx" => cfg.nx = Some(parse_one(&v).map_err(syntax)?),
                "nt" => cfg.nt = Some(parse_one(&v).map_err(syntax)?),
                "ell" => cfg.ell = Some(parse_one(&v).map_err(syntax)?),
                "t_final" => cfg.t_final = Some(parse_one(&v).map_err(syntax)?),
                "t0" => cfg.t0 = Some(parse_one(&v).map_err(syntax)?),
                "noise" => cfg.noise = parse_list(&v).map_err(syntax)?,
                "seeds" => cfg.seeds = parse_list(&v).map_err(syntax)?,
                "initial" => cfg.initial = Some(parse_list(&v).map_err(syntax)?),
                "truth" => cfg.truth = Some(parse_list(&v).map_err(syntax)?),
                "bounds" => {
                    let pairs = v
                        .split(',')
                        .map(|p| {
                            let (lo, hi) = p.trim().split_once(':').ok_or(format!("bound '{p}' is not lo:hi"))?;
                            Ok((parse_one(lo.trim())?, parse_one(hi.trim())?))
                        })
                        .collect::<Result<Vec<_>, String>>()
                        .map_err(syntax)?;
                    cfg.bounds = Some(pairs);
                }
                "out" => cfg.out = PathBuf::from(v),
                other => return Err(syntax(format!("unknown key '{other}'"))),
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let cfg: ExperimentConfig = "# c\npreset = test8\nell = 1.1\nnoise = 0.01, 0.001\nseeds = 1, 2, 3\nbounds = 0.05:0.95\nout = results/test8\n"
            .parse()
            .unwrap();
        assert_eq!(cfg.preset, "test8");
        assert_eq!(cfg.ell, Some(1.1));
        assert_eq!(cfg.noise, vec![0.01, 0.001]);
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.bounds, Some(vec![(0.05, 0.95)]));
        assert_eq!(cfg.preset().unwrap().ell, 1.1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            "nx = 3".parse::<ExperimentConfig>(),
            Err(ConfigError::Missing(_))
        ));
        assert!(matches!(
            "preset = test1\nfoo = 1".parse::<ExperimentConfig>(),
            Err(ConfigError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            "preset = test1\nnx = many".parse::<ExperimentConfig>(),
            Err(ConfigError::Syntax { .. })
        ));
        let cfg: ExperimentConfig = "preset = test1\nnx = 4".parse().unwrap();
        assert!(cfg.preset().is_err());
        let cfg: ExperimentConfig = "preset = test1\ninitial = 5".parse().unwrap();
        assert!(cfg.preset().is_err());
        let cfg: ExperimentConfig = "preset = nope".parse().unwrap();
        assert!(cfg.preset().is_err());
    }
}
