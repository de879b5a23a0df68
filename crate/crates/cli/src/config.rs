//! Flat dotted-key JSON configuration.
//!
//! A config file is a JSON object whose keys are dotted paths
//! (`"mesh.nc": 32`) or nested objects (`"mesh": {"nc": 32}`); both flatten to
//! the same map. Unknown keys are rejected by name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rcnfem::baseline::IterationPolicy;
use rcnfem::{Error, InitialCondition, Potential, ProblemSpec, PsiInit, RectDomain, SolverConfig, SolverMethod};
use serde_json::{Map, Value};

use crate::CliError;

pub type ConfigMap = BTreeMap<String, Value>;

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "problem.preset",
    "problem.potential",
    "problem.alpha",
    "problem.mu",
    "problem.c",
    "problem.beta",
    "problem.include_cubic",
    "problem.initial",
    "mesh.nc",
    "mesh.domain",
    "fem.k",
    "time.tau",
    "time.T",
    "solver.rel_tol",
    "solver.method",
    "solver.max_iter",
    "scheme",
    "relaxation.psi_init",
    "iterative.mode",
    "iterative.tol",
    "iterative.max_iter",
    "iterative.fixed_steps",
    "output.dir",
    "output.snapshots",
    "output.snapshot_resolution",
    "compare.repeats",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    SpFull,
    SpConstcoef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Relaxation,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterMode {
    FixedSteps,
    Tolerance,
    /// Fixed steps plus every listed tolerance (comparison runs).
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub potential: String,
    pub alpha: f64,
    pub mu: f64,
    pub c: f64,
    pub beta: f64,
    pub include_cubic: bool,
    pub initial: String,
    pub nc: Vec<usize>,
    pub domain: [f64; 4],
    pub k: usize,
    pub tau: Vec<f64>,
    pub t_final: f64,
    pub solver: SolverConfig,
    pub scheme: SchemeKind,
    pub psi_init: PsiInit,
    pub iter_mode: IterMode,
    pub iter_tol: Vec<f64>,
    pub iter_max: usize,
    pub fixed_steps: usize,
    pub out_dir: PathBuf,
    pub snapshots: Vec<f64>,
    pub snapshot_resolution: Option<usize>,
    pub repeats: usize,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Core(Error::Config(format!("{key}: {msg}")))
}

/// Flattens nested objects into dotted keys; arrays and scalars are leaves.
pub fn flatten(value: &Value) -> Result<ConfigMap, CliError> {
    let Value::Object(obj) = value else {
        return Err(bad("<root>", "config must be a JSON object"));
    };
    let mut out = ConfigMap::new();
    flatten_into("", obj, &mut out)?;
    Ok(out)
}

fn flatten_into(prefix: &str, obj: &Map<String, Value>, out: &mut ConfigMap) -> Result<(), CliError> {
    for (k, v) in obj {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Object(inner) => flatten_into(&key, inner, out)?,
            _ => {
                if out.insert(key.clone(), v.clone()).is_some() {
                    return Err(bad(&key, "given more than once"));
                }
            }
        }
    }
    Ok(())
}

/// Parses a `key=value` override. The value is read as JSON when it parses,
/// otherwise as a bare string.
pub fn parse_override(s: &str) -> Result<(String, Value), CliError> {
    let (k, v) = s.split_once('=').ok_or_else(|| bad(s, "override must look like key=value"))?;
    let k = k.trim().to_string();
    let v = v.trim();
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k, value))
}

pub fn load_map(path: Option<&Path>, overrides: &[String]) -> Result<ConfigMap, CliError> {
    let mut map = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Io { path: p.to_path_buf(), source: e })?;
            flatten(&serde_json::from_str(&text)?)?
        }
        None => ConfigMap::new(),
    };
    for o in overrides {
        let (k, v) = parse_override(o)?;
        map.insert(k, v);
    }
    Ok(map)
}

fn get_f64(map: &ConfigMap, key: &str) -> Result<Option<f64>, CliError> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v.as_f64().map(Some).ok_or_else(|| bad(key, format!("expected a number, got {v}"))),
    }
}

fn get_usize(map: &ConfigMap, key: &str) -> Result<Option<usize>, CliError> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|u| Some(u as usize))
            .ok_or_else(|| bad(key, format!("expected a nonnegative integer, got {v}"))),
    }
}

fn get_str<'a>(map: &'a ConfigMap, key: &str) -> Result<Option<&'a str>, CliError> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v.as_str().map(Some).ok_or_else(|| bad(key, format!("expected a string, got {v}"))),
    }
}

fn get_bool(map: &ConfigMap, key: &str) -> Result<Option<bool>, CliError> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v.as_bool().map(Some).ok_or_else(|| bad(key, format!("expected true or false, got {v}"))),
    }
}

/// A number or a list of numbers.
fn get_f64_list(map: &ConfigMap, key: &str) -> Result<Option<Vec<f64>>, CliError> {
    match map.get(key) {
        None => Ok(None),
        Some(Value::Array(a)) => a
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| bad(key, format!("expected numbers, got {v}"))))
            .collect::<Result<Vec<_>, _>>()
            .map(Some),
        Some(v) => v.as_f64().map(|x| Some(vec![x])).ok_or_else(|| bad(key, format!("expected a number, got {v}"))),
    }
}

fn get_usize_list(map: &ConfigMap, key: &str) -> Result<Option<Vec<usize>>, CliError> {
    match map.get(key) {
        None => Ok(None),
        Some(Value::Array(a)) => a
            .iter()
            .map(|v| v.as_u64().map(|u| u as usize).ok_or_else(|| bad(key, format!("expected integers, got {v}"))))
            .collect::<Result<Vec<_>, _>>()
            .map(Some),
        Some(v) => v
            .as_u64()
            .map(|u| Some(vec![u as usize]))
            .ok_or_else(|| bad(key, format!("expected an integer, got {v}"))),
    }
}

impl RunConfig {
    pub fn from_map(map: &ConfigMap) -> Result<Self, CliError> {
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(CliError::Core(Error::Config(format!("unknown config key '{k}'"))));
        }
        let preset = match get_str(map, "problem.preset")?.unwrap_or("sp_full") {
            "sp_full" => Preset::SpFull,
            "sp_constcoef" => Preset::SpConstcoef,
            other => return Err(bad("problem.preset", format!("unknown preset '{other}'"))),
        };
        let base = match preset {
            Preset::SpFull => ProblemSpec::sp_full(Potential::Zero),
            Preset::SpConstcoef => ProblemSpec::sp_constcoef(1.0, 1.0),
        };
        let default_potential = if preset == Preset::SpFull { "V2" } else { "V0" };
        let potential = get_str(map, "problem.potential")?.unwrap_or(default_potential).to_string();
        potential.parse::<Potential>().map_err(|e| bad("problem.potential", e))?;
        let initial = get_str(map, "problem.initial")?.unwrap_or("vortex").to_string();
        initial.parse::<InitialCondition>().map_err(|e| bad("problem.initial", e))?;

        let domain = match map.get("mesh.domain") {
            None => [base.domain.xmin, base.domain.xmax, base.domain.ymin, base.domain.ymax],
            Some(_) => {
                let d = get_f64_list(map, "mesh.domain")?.unwrap_or_default();
                let arr: [f64; 4] =
                    d.try_into().map_err(|_| bad("mesh.domain", "expected [xmin, xmax, ymin, ymax]"))?;
                RectDomain::new(arr[0], arr[1], arr[2], arr[3]).map_err(|e| bad("mesh.domain", e))?;
                arr
            }
        };
        let nc = get_usize_list(map, "mesh.nc")?.unwrap_or_else(|| vec![32]);
        if nc.is_empty() || nc.contains(&0) {
            return Err(bad("mesh.nc", "cell counts must be positive"));
        }
        let k = get_usize(map, "fem.k")?.unwrap_or(2);
        if !(1..=2).contains(&k) {
            return Err(bad("fem.k", format!("degree {k} unsupported (use 1 or 2)")));
        }
        let tau = get_f64_list(map, "time.tau")?.unwrap_or_else(|| vec![2e-3]);
        if tau.is_empty() || tau.iter().any(|t| !(*t > 0.0)) {
            return Err(bad("time.tau", "time steps must be positive"));
        }
        let t_final = get_f64(map, "time.T")?.unwrap_or(1.0);

        let mut solver = SolverConfig::default();
        if let Some(t) = get_f64(map, "solver.rel_tol")? {
            solver.rel_tol = t;
        }
        if let Some(m) = get_str(map, "solver.method")? {
            solver.method = m.parse::<SolverMethod>().map_err(|e| bad("solver.method", e))?;
        }
        solver.max_iter = get_usize(map, "solver.max_iter")?;
        solver.validate().map_err(CliError::Core)?;

        let scheme = match get_str(map, "scheme")?.unwrap_or("relaxation") {
            "relaxation" => SchemeKind::Relaxation,
            "iterative" => SchemeKind::Iterative,
            other => return Err(bad("scheme", format!("unknown scheme '{other}'"))),
        };
        let psi_init = get_str(map, "relaxation.psi_init")?
            .unwrap_or("nodal")
            .parse::<PsiInit>()
            .map_err(|e| bad("relaxation.psi_init", e))?;
        let iter_mode = match get_str(map, "iterative.mode")?.unwrap_or("tolerance") {
            "fixed_steps" => IterMode::FixedSteps,
            "tolerance" => IterMode::Tolerance,
            "all" => IterMode::All,
            other => return Err(bad("iterative.mode", format!("unknown mode '{other}'"))),
        };
        let iter_tol = get_f64_list(map, "iterative.tol")?.unwrap_or_else(|| vec![1e-6]);
        if iter_tol.is_empty() || iter_tol.iter().any(|t| !(*t > 0.0)) {
            return Err(bad("iterative.tol", "tolerances must be positive"));
        }
        let iter_max = get_usize(map, "iterative.max_iter")?.unwrap_or(100);
        let fixed_steps = get_usize(map, "iterative.fixed_steps")?.unwrap_or(2);
        if iter_max == 0 || fixed_steps == 0 {
            return Err(bad("iterative", "iteration counts must be positive"));
        }

        let out_dir = PathBuf::from(get_str(map, "output.dir")?.unwrap_or("out"));
        let snapshots = get_f64_list(map, "output.snapshots")?.unwrap_or_default();
        let snapshot_resolution = get_usize(map, "output.snapshot_resolution")?;
        let repeats = get_usize(map, "compare.repeats")?.unwrap_or(5);
        if repeats == 0 {
            return Err(bad("compare.repeats", "must be positive"));
        }

        let cfg = Self {
            preset,
            potential,
            alpha: get_f64(map, "problem.alpha")?.unwrap_or(base.alpha),
            mu: get_f64(map, "problem.mu")?.unwrap_or(base.mu),
            c: get_f64(map, "problem.c")?.unwrap_or(base.c),
            beta: get_f64(map, "problem.beta")?.unwrap_or(base.beta),
            include_cubic: get_bool(map, "problem.include_cubic")?.unwrap_or(base.include_cubic),
            initial,
            nc,
            domain,
            k,
            tau,
            t_final,
            solver,
            scheme,
            psi_init,
            iter_mode,
            iter_tol,
            iter_max,
            fixed_steps,
            out_dir,
            snapshots,
            snapshot_resolution,
            repeats,
        };
        cfg.problem()?.validate().map_err(CliError::Core)?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        Self::from_map(&load_map(path, overrides)?)
    }

    /// Effective configuration as a flat map; parsing it back yields an
    /// identical config.
    pub fn echo(&self) -> ConfigMap {
        let mut m = ConfigMap::new();
        let preset = match self.preset {
            Preset::SpFull => "sp_full",
            Preset::SpConstcoef => "sp_constcoef",
        };
        m.insert("problem.preset".into(), preset.into());
        m.insert("problem.potential".into(), self.potential.clone().into());
        m.insert("problem.alpha".into(), self.alpha.into());
        m.insert("problem.mu".into(), self.mu.into());
        m.insert("problem.c".into(), self.c.into());
        m.insert("problem.beta".into(), self.beta.into());
        m.insert("problem.include_cubic".into(), self.include_cubic.into());
        m.insert("problem.initial".into(), self.initial.clone().into());
        m.insert("mesh.nc".into(), self.nc.clone().into());
        m.insert("mesh.domain".into(), self.domain.to_vec().into());
        m.insert("fem.k".into(), self.k.into());
        m.insert("time.tau".into(), self.tau.clone().into());
        m.insert("time.T".into(), self.t_final.into());
        m.insert("solver.rel_tol".into(), self.solver.rel_tol.into());
        m.insert("solver.method".into(), self.solver.method.as_str().into());
        if let Some(mi) = self.solver.max_iter {
            m.insert("solver.max_iter".into(), mi.into());
        }
        let scheme = match self.scheme {
            SchemeKind::Relaxation => "relaxation",
            SchemeKind::Iterative => "iterative",
        };
        m.insert("scheme".into(), scheme.into());
        m.insert("relaxation.psi_init".into(), self.psi_init.as_str().into());
        let mode = match self.iter_mode {
            IterMode::FixedSteps => "fixed_steps",
            IterMode::Tolerance => "tolerance",
            IterMode::All => "all",
        };
        m.insert("iterative.mode".into(), mode.into());
        m.insert("iterative.tol".into(), self.iter_tol.clone().into());
        m.insert("iterative.max_iter".into(), self.iter_max.into());
        m.insert("iterative.fixed_steps".into(), self.fixed_steps.into());
        m.insert("output.dir".into(), self.out_dir.to_string_lossy().into_owned().into());
        m.insert("output.snapshots".into(), self.snapshots.clone().into());
        if let Some(r) = self.snapshot_resolution {
            m.insert("output.snapshot_resolution".into(), r.into());
        }
        m.insert("compare.repeats".into(), self.repeats.into());
        m
    }

    pub fn echo_json(&self) -> Value {
        Value::Object(self.echo().into_iter().collect())
    }

    pub fn problem(&self) -> Result<ProblemSpec, CliError> {
        let potential = self.potential.parse::<Potential>().map_err(CliError::Core)?;
        let initial = self.initial.parse::<InitialCondition>().map_err(CliError::Core)?;
        let [xmin, xmax, ymin, ymax] = self.domain;
        Ok(ProblemSpec {
            alpha: self.alpha,
            mu: self.mu,
            c: self.c,
            beta: self.beta,
            include_cubic: self.include_cubic,
            potential,
            domain: RectDomain::new(xmin, xmax, ymin, ymax).map_err(CliError::Core)?,
            initial,
        })
    }

    /// The single mesh size of a run.
    pub fn single_nc(&self) -> Result<usize, CliError> {
        match self.nc.as_slice() {
            [n] => Ok(*n),
            _ => Err(bad("mesh.nc", "this command takes a single cell count")),
        }
    }

    pub fn single_tau(&self) -> Result<f64, CliError> {
        match self.tau.as_slice() {
            [t] => Ok(*t),
            _ => Err(bad("time.tau", "this command takes a single time step")),
        }
    }

    /// Iterative policies requested by `iterative.mode`.
    pub fn policies(&self) -> Vec<IterationPolicy> {
        let tol = || self.iter_tol.iter().map(|&t| IterationPolicy::Tolerance { tol: t, max_iter: self.iter_max });
        match self.iter_mode {
            IterMode::FixedSteps => vec![IterationPolicy::FixedSteps(self.fixed_steps)],
            IterMode::Tolerance => tol().collect(),
            IterMode::All => std::iter::once(IterationPolicy::FixedSteps(self.fixed_steps)).chain(tol()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn nested_and_dotted_keys_agree() {
        let a = flatten(&json!({"mesh": {"nc": 16}, "fem.k": 1})).unwrap();
        let b = flatten(&json!({"mesh.nc": 16, "fem": {"k": 1}})).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_key_is_named() {
        let m = flatten(&json!({"mesh.ncc": 4})).unwrap();
        let err = RunConfig::from_map(&m).unwrap_err().to_string();
        assert!(err.contains("mesh.ncc"), "{err}");
    }

    #[test]
    fn echo_is_a_fixpoint() {
        let m = flatten(&json!({
            "problem.potential": "V1", "mesh.nc": [20, 40], "time.tau": 0.01,
            "iterative.mode": "all", "iterative.tol": [1e-1, 1e-6], "solver.max_iter": 500
        }))
        .unwrap();
        let cfg = RunConfig::from_map(&m).unwrap();
        let echo = cfg.echo();
        let again = RunConfig::from_map(&echo).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(echo, again.echo());
        let text = serde_json::to_string(&cfg.echo_json()).unwrap();
        let reparsed = RunConfig::from_map(&flatten(&serde_json::from_str(&text).unwrap()).unwrap()).unwrap();
        assert_eq!(reparsed, cfg);
    }

    #[test]
    fn overrides() {
        assert_eq!(parse_override("mesh.nc=8").unwrap(), ("mesh.nc".into(), json!(8)));
        assert_eq!(parse_override("problem.potential=V1").unwrap(), ("problem.potential".into(), json!("V1")));
        assert_eq!(parse_override("time.tau=[0.1,0.05]").unwrap().1, json!([0.1, 0.05]));
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn constcoef_preset_defaults() {
        let cfg = RunConfig::from_map(&flatten(&json!({"problem.preset": "sp_constcoef"})).unwrap()).unwrap();
        let p = cfg.problem().unwrap();
        assert_eq!((p.mu, p.include_cubic, p.potential.name()), (-1.0, false, "V0"));
        assert_eq!(cfg.policies(), vec![IterationPolicy::Tolerance { tol: 1e-6, max_iter: 100 }]);
    }

    #[test]
    fn invalid_values_rejected() {
        for bad in [
            json!({"fem.k": 3}),
            json!({"time.tau": -1.0}),
            json!({"solver.method": "magic"}),
            json!({"problem.alpha": 0.0}),
            json!({"mesh.nc": "many"}),
        ] {
            assert!(RunConfig::from_map(&flatten(&bad).unwrap()).is_err(), "{bad}");
        }
    }
}
