//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use divcol::colloc2d::{default_penalty, Formulation};
use divcol::mapped::{polar_sector_map, GeometryMap2D};
use divcol::solver::NewtonSettings;
use serde::Serialize;

/// Benchmark selected by `case`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Vortex2d,
    Vortex3d,
    Cavity2d,
    Cavity3d,
    Couette,
    Wavy,
}

impl CaseKind {
    pub fn is_mapped(self) -> bool {
        matches!(self, CaseKind::Couette | CaseKind::Wavy)
    }

    pub fn has_exact_solution(self) -> bool {
        matches!(self, CaseKind::Vortex2d | CaseKind::Vortex3d | CaseKind::Couette)
    }
}

impl FromStr for CaseKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Ok(match s {
            "vortex2d" => CaseKind::Vortex2d,
            "vortex3d" => CaseKind::Vortex3d,
            "cavity2d" => CaseKind::Cavity2d,
            "cavity3d" => CaseKind::Cavity3d,
            "couette" => CaseKind::Couette,
            "wavy" => CaseKind::Wavy,
            _ => return Err(ConfigError::Value { key: "case".into(), value: s.into(), expected: "vortex2d, vortex3d, cavity2d, cavity3d, couette or wavy" }),
        })
    }
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

/// Optional parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "values")]
pub enum Study {
    Convergence(Vec<usize>),
    Sigma(Vec<f64>),
    Reynolds(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    UnknownKey(String),
    Value { key: String, value: String, expected: &'static str },
    Syntax { line: usize, text: String },
    Invalid(String),
    Io(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::UnknownKey(k) => write!(f, "unknown configuration key '{k}'"),
            ConfigError::Value { key, value, expected } => write!(f, "invalid value '{value}' for '{key}': expected {expected}"),
            ConfigError::Syntax { line, text } => write!(f, "line {line}: expected 'key = value', got '{text}'"),
            ConfigError::Invalid(m) => f.write_str(m),
            ConfigError::Io(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub case: CaseKind,
    pub formulation: Formulation,
    pub kprime: usize,
    pub mesh: usize,
    pub stretched: bool,
    pub stokes: bool,
    pub nu: f64,
    pub sigma: f64,
    pub penalty: f64,
    pub geometry: GeometryMap2D,
    pub r_in: f64,
    pub r_out: f64,
    pub wall_speed: f64,
    pub newton_abs_tol: f64,
    pub newton_rel_tol: f64,
    pub newton_max_iters: usize,
    pub continuation: Option<Vec<f64>>,
    pub study: Option<Study>,
    pub samples: usize,
    pub profile_samples: usize,
    pub output: PathBuf,
}

const KEYS: &[&str] = &[
    "case",
    "formulation",
    "kprime",
    "mesh",
    "stretched",
    "stokes",
    "re",
    "nu",
    "sigma",
    "penalty",
    "geometry",
    "r_in",
    "r_out",
    "wall_speed",
    "newton_abs_tol",
    "newton_rel_tol",
    "newton_max_iters",
    "continuation",
    "convergence",
    "robustness_sigma",
    "robustness_re",
    "samples",
    "profile_samples",
    "output",
];

/// Raw key-value pairs; later insertions override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            raw.set(line).map_err(|e| match e {
                ConfigError::Syntax { .. } => ConfigError::Syntax { line: i + 1, text: line.into() },
                other => other,
            })?;
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies one `key=value` assignment.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: 0, text: assignment.into() })?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey(k.into()));
        }
        self.values.insert(k.into(), v.trim().into());
        Ok(())
    }

    fn get<T: FromStr>(&self, key: &str, expected: &'static str) -> Result<Option<T>, ConfigError> {
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|_| ConfigError::Value { key: key.into(), value: v.clone(), expected }))
            .transpose()
    }

    fn list<T: FromStr>(&self, key: &str, expected: &'static str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some(v) = self.values.get(key) else { return Ok(None) };
        let bad = || ConfigError::Value { key: key.into(), value: v.clone(), expected };
        let items = v.split(',').map(|s| s.trim().parse::<T>().map_err(|_| bad())).collect::<Result<Vec<_>, _>>()?;
        if items.is_empty() {
            return Err(bad());
        }
        Ok(Some(items))
    }

    /// Validates and fills defaults.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let case: CaseKind = self.get("case", "a case name")?.ok_or_else(|| ConfigError::Invalid("missing required key 'case'".into()))?;
        let formulation: Formulation = self.get("formulation", "vp or vvp")?.unwrap_or(Formulation::VVP);
        let kprime: usize = self.get("kprime", "a positive integer")?.unwrap_or(2);
        if kprime < 1 {
            return Err(ConfigError::Value { key: "kprime".into(), value: kprime.to_string(), expected: "k' ≥ 1" });
        }
        if kprime < formulation.min_kprime() {
            return Err(ConfigError::Invalid(format!("{formulation} needs k' ≥ {}", formulation.min_kprime())));
        }
        let mesh: usize = self.get("mesh", "an integer ≥ 2")?.unwrap_or(16);
        if mesh < 2 {
            return Err(ConfigError::Value { key: "mesh".into(), value: mesh.to_string(), expected: "an integer ≥ 2" });
        }
        let stretched: bool = self.get("stretched", "true or false")?.unwrap_or(false);
        let stokes: bool = self.get("stokes", "true or false")?.unwrap_or(case.is_mapped());
        let re: Option<f64> = self.get("re", "a positive number")?;
        let nu: Option<f64> = self.get("nu", "a positive number")?;
        let nu = match (re, nu) {
            (Some(_), Some(_)) => return Err(ConfigError::Invalid("set either 're' or 'nu', not both".into())),
            (Some(re), None) => 1.0 / re,
            (None, Some(nu)) => nu,
            (None, None) if matches!(case, CaseKind::Cavity2d | CaseKind::Cavity3d) => 0.01,
            (None, None) => 1.0,
        };
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(ConfigError::Invalid("viscosity must be positive and finite".into()));
        }
        let sigma: f64 = self.get("sigma", "a number")?.unwrap_or(1.0);
        let penalty: f64 = self.get("penalty", "a positive number")?.unwrap_or(default_penalty(kprime));
        if !(penalty > 0.0) {
            return Err(ConfigError::Value { key: "penalty".into(), value: penalty.to_string(), expected: "a positive number" });
        }
        let mut r_in: f64 = self.get("r_in", "a positive number")?.unwrap_or(1.0);
        let mut r_out: f64 = self.get("r_out", "a positive number")?.unwrap_or(2.0);
        let wall_speed: f64 = self.get("wall_speed", "a number")?.unwrap_or(1.0);
        let geometry = match self.values.get("geometry") {
            Some(g) => g.parse::<GeometryMap2D>().map_err(|e| ConfigError::Invalid(format!("geometry: {e}")))?,
            None => match case {
                CaseKind::Couette => polar_sector_map(r_in, r_out, 0.5 * std::f64::consts::PI).map_err(|e| ConfigError::Invalid(e.to_string()))?,
                CaseKind::Wavy => GeometryMap2D::Wavy { a: 1.0, b: 0.75, c: 1.0 },
                _ => GeometryMap2D::Identity,
            },
        };
        match case {
            CaseKind::Wavy if !matches!(geometry, GeometryMap2D::Wavy { .. }) => {
                return Err(ConfigError::Invalid("the wavy case needs a wavy(A,B,C) geometry".into()))
            }
            CaseKind::Couette if !matches!(geometry, GeometryMap2D::Polar { .. }) => {
                return Err(ConfigError::Invalid("the couette case needs a polar geometry".into()))
            }
            c if !c.is_mapped() && geometry != GeometryMap2D::Identity => {
                return Err(ConfigError::Invalid(format!("case {c} does not support a mapped geometry")))
            }
            _ => {}
        }
        if let GeometryMap2D::Polar { r_in: a, r_out: b, .. } = geometry {
            (r_in, r_out) = (a, b);
        }
        if case.is_mapped() && (formulation != Formulation::VVP || !stokes) {
            return Err(ConfigError::Invalid(format!("case {case} requires formulation = vvp and stokes = true")));
        }
        let defaults = NewtonSettings::default();
        let newton_abs_tol = self.get("newton_abs_tol", "a positive number")?.unwrap_or(defaults.abs_tol);
        let newton_rel_tol = self.get("newton_rel_tol", "a positive number")?.unwrap_or(defaults.rel_tol);
        let newton_max_iters = self.get("newton_max_iters", "a positive integer")?.unwrap_or(defaults.max_iters);
        let continuation = self.list::<f64>("continuation", "a comma-separated list of Reynolds numbers")?;
        let studies = [
            self.list::<usize>("convergence", "a comma-separated list of meshes")?.map(Study::Convergence),
            self.list::<f64>("robustness_sigma", "a comma-separated list of numbers")?.map(Study::Sigma),
            self.list::<f64>("robustness_re", "a comma-separated list of numbers")?.map(Study::Reynolds),
        ];
        let mut studies = studies.into_iter().flatten();
        let study = studies.next();
        if studies.next().is_some() {
            return Err(ConfigError::Invalid("at most one of convergence, robustness_sigma, robustness_re".into()));
        }
        match &study {
            Some(Study::Convergence(m)) => {
                if !case.has_exact_solution() {
                    return Err(ConfigError::Invalid(format!("a convergence study needs an exact solution; case {case} has none")));
                }
                if m.len() < 2 || m.iter().any(|&n| n < 2) || m.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(ConfigError::Invalid("convergence meshes must be increasing, at least two, each ≥ 2".into()));
                }
            }
            Some(Study::Sigma(v)) | Some(Study::Reynolds(v)) => {
                if case != CaseKind::Vortex2d {
                    return Err(ConfigError::Invalid("robustness studies are defined for vortex2d".into()));
                }
                if v.iter().any(|x| !(*x > 0.0)) {
                    return Err(ConfigError::Invalid("robustness values must be positive".into()));
                }
            }
            None => {}
        }
        let samples = self.get("samples", "an integer ≥ 2")?.unwrap_or(33);
        let profile_samples = self.get("profile_samples", "an integer ≥ 2")?.unwrap_or(101);
        if samples < 2 || profile_samples < 2 {
            return Err(ConfigError::Invalid("samples and profile_samples must be at least 2".into()));
        }
        let output = PathBuf::from(self.values.get("output").cloned().unwrap_or_else(|| "out".into()));
        Ok(RunConfig {
            case,
            formulation,
            kprime,
            mesh,
            stretched,
            stokes,
            nu,
            sigma,
            penalty,
            geometry,
            r_in,
            r_out,
            wall_speed,
            newton_abs_tol,
            newton_rel_tol,
            newton_max_iters,
            continuation,
            study,
            samples,
            profile_samples,
            output,
        })
    }
}

impl RunConfig {
    pub fn newton(&self) -> NewtonSettings {
        NewtonSettings {
            abs_tol: self.newton_abs_tol,
            rel_tol: self.newton_rel_tol,
            max_iters: self.newton_max_iters,
            continuation_ladder: self.continuation.clone(),
            ..NewtonSettings::default()
        }
    }
}

/// Reads the optional file, then applies `--set` overrides in order.
pub fn parse_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut raw = match path {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    for o in overrides {
        raw.set(o)?;
    }
    raw.resolve()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<RunConfig, ConfigError> {
        RawConfig::parse(text)?.resolve()
    }

    #[test]
    fn couette_defaults() {
        let c = cfg("case = couette").unwrap();
        assert_eq!((c.r_in, c.r_out, c.wall_speed), (1.0, 2.0, 1.0));
        assert!(c.stokes && c.formulation == Formulation::VVP);
        assert!(matches!(c.geometry, GeometryMap2D::Polar { .. }));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert_eq!(cfg("case = vortex2d\nmeshh = 4"), Err(ConfigError::UnknownKey("meshh".into())));
        assert!(matches!(cfg("case = vortex2d\nkprime = 0"), Err(ConfigError::Value { .. })));
        assert!(matches!(cfg("case = vortex2d\nkprime = two"), Err(ConfigError::Value { .. })));
        assert!(matches!(cfg("case = vortex2d\nmesh = 1"), Err(ConfigError::Value { .. })));
        assert!(matches!(cfg("case vortex2d"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(cfg("kprime = 2").is_err());
    }

    #[test]
    fn rejects_inconsistent_cases() {
        assert!(cfg("case = cavity3d\ngeometry = wavy(1,0.75,1)").is_err());
        assert!(cfg("case = couette\nformulation = vp").is_err());
        assert!(cfg("case = wavy\nstokes = false").is_err());
        assert!(cfg("case = cavity2d\nconvergence = 8,16").is_err());
        assert!(cfg("case = vortex2d\nconvergence = 16,8").is_err());
        assert!(cfg("case = vortex2d\nre = 10\nnu = 0.1").is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let mut raw = RawConfig::parse("case = vortex2d\nmesh = 8 # coarse").unwrap();
        raw.set("mesh=32").unwrap();
        assert_eq!(raw.resolve().unwrap().mesh, 32);
    }

    #[test]
    fn penalty_default_follows_degree() {
        assert_eq!(cfg("case = vortex2d\nkprime = 3").unwrap().penalty, 20.0);
        assert_eq!(cfg("case = cavity2d").unwrap().nu, 0.01);
    }
}
