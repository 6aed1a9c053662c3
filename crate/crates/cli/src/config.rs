//! `key = value` run configuration files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use feec_heat_core::mms::{CaseName, InitKind, ManufacturedCase};
use feec_heat_core::stepper::{InitialData, TransientConfig};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Convergence,
    SingleRun,
    MeshInfo,
    PropertyCheck,
}

impl Mode {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "convergence" => Some(Self::Convergence),
            "run" | "single-run" => Some(Self::SingleRun),
            "mesh-info" => Some(Self::MeshInfo),
            "check" | "property-check" => Some(Self::PropertyCheck),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: CaseName,
    pub r: usize,
    pub dim: usize,
    pub levels: usize,
    pub dt: f64,
    pub t_final: f64,
    pub base_resolution: usize,
    pub init: InitKind,
    pub output: Option<PathBuf>,
    pub mode: Option<Mode>,
}

const KEYS: [&str; 10] = ["case", "r", "dim", "levels", "dt", "t_final", "base_resolution", "init", "output", "mode"];

impl RunConfig {
    pub fn manufactured_case(&self) -> ManufacturedCase {
        ManufacturedCase::by_name(self.case).with_base_resolution(self.base_resolution)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {line_no}: expected `key = value`")))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(ConfigError(format!("line {line_no}: unknown key `{k}`")));
            }
            if v.is_empty() {
                return Err(ConfigError(format!("line {line_no}: empty value for `{k}`")));
            }
            if map.insert(k, (line_no, v)).is_some() {
                return Err(ConfigError(format!("line {line_no}: duplicate key `{k}`")));
            }
        }
        let req = |k: &str| map.get(k).copied().ok_or_else(|| ConfigError(format!("missing key `{k}`")));
        let bad = |k: &str, (line, v): (usize, &str), why: &str| ConfigError(format!("line {line}: `{k} = {v}`: {why}"));
        let uint = |k: &str, e: (usize, &str)| e.1.parse::<usize>().map_err(|_| bad(k, e, "expected a nonnegative integer"));
        let float = |k: &str, e: (usize, &str)| e.1.parse::<f64>().map_err(|_| bad(k, e, "expected a number"));

        let e = req("case")?;
        let case: CaseName = e.1.parse().map_err(|_| bad("case", e, "unknown case"))?;
        let manufactured = ManufacturedCase::by_name(case);
        let e = req("r")?;
        let r = uint("r", e)?;
        if !(r == 1 || (r == 2 && manufactured.dim == 2)) {
            return Err(bad("r", e, "supported degrees are 1, and 2 in 2D"));
        }
        let dim = match map.get("dim").copied() {
            Some(e) => {
                let d = uint("dim", e)?;
                if d != manufactured.dim {
                    return Err(bad("dim", e, &format!("case {case} is {}D", manufactured.dim)));
                }
                d
            }
            None => manufactured.dim,
        };
        let e = req("levels")?;
        let levels = uint("levels", e)?;
        if levels == 0 {
            return Err(bad("levels", e, "need at least one level"));
        }
        let e = req("dt")?;
        let dt = float("dt", e)?;
        let e = req("t_final")?;
        let t_final = float("t_final", e)?;
        TransientConfig::new(dt, t_final, Arc::new(|_, _| [0.0; 3]), InitialData::Zero)
            .map_err(|err| ConfigError(format!("line {}: {err}", e.0)))?;
        let base_resolution = match map.get("base_resolution").copied() {
            Some(e) => match uint("base_resolution", e)? {
                0 => return Err(bad("base_resolution", e, "must be positive")),
                n => n,
            },
            None => manufactured.base_resolution,
        };
        let init = match map.get("init").copied() {
            None => InitKind::default(),
            Some((_, "elliptic_projection")) => InitKind::EllipticProjection,
            Some((_, "zero")) => InitKind::Zero,
            Some(e) => return Err(bad("init", e, "expected `elliptic_projection` or `zero`")),
        };
        let mode = match map.get("mode").copied() {
            None => None,
            Some(e) => Some(Mode::parse(e.1).ok_or_else(|| bad("mode", e, "unknown mode"))?),
        };
        Ok(Self {
            case,
            r,
            dim,
            levels,
            dt,
            t_final,
            base_resolution,
            init,
            output: map.get("output").map(|(_, v)| PathBuf::from(v)),
            mode,
        })
    }
}
