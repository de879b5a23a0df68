//! The four study drivers. Each writes its files under `output.dir` and
//! returns the computed data for programmatic use.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rcnfem::baseline::{IterationPolicy, IterationStats, IterativeScheme};
use rcnfem::diagnostics::{convergence_table, original_energy, two_level_error_space, two_level_error_time};
use rcnfem::scheme::{step_count, Observer, Operators, SchemeState};
use rcnfem::{
    Complex64, ConvergenceRow, DiagnosticsRecord, Error, ProblemSpec, Recorder, RelaxationScheme, SolveReport,
};
use serde_json::{json, Value};

use crate::config::{RunConfig, SchemeKind};
use crate::output::{self, SnapshotPoint};
use crate::CliError;

pub fn operators(spec: &ProblemSpec, nc: usize, k: usize) -> Result<Arc<Operators>, CliError> {
    Ok(Arc::new(Operators::for_mesh(spec, nc, nc, k)?))
}

fn header(command: &str, cfg: &RunConfig) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), command.into());
    m.insert("version".into(), crate::version_string().into());
    m.insert("config".into(), cfg.echo_json());
    m
}

fn single_policy(cfg: &RunConfig) -> Result<IterationPolicy, CliError> {
    match cfg.policies().as_slice() {
        [p] => Ok(*p),
        _ => Err(Error::Config("iterative.mode/iterative.tol must select a single policy here".into()).into()),
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

struct SnapshotPlan {
    steps: Vec<(usize, f64)>,
    resolution: usize,
}

impl SnapshotPlan {
    fn new(cfg: &RunConfig, tau: f64, nc: usize) -> Result<Self, CliError> {
        let mut steps = Vec::new();
        for &t in &cfg.snapshots {
            if !(t >= 0.0) || t > cfg.t_final * (1.0 + 1e-12) {
                return Err(Error::Config(format!("snapshot time {t} lies outside [0, {}]", cfg.t_final)).into());
            }
            steps.push((step_count(t, tau)?, t));
        }
        let lattice = cfg.k * nc + 1;
        let resolution = cfg.snapshot_resolution.unwrap_or(lattice);
        if resolution < lattice {
            return Err(Error::Config(format!(
                "output.snapshot_resolution {resolution} is below the nodal resolution {lattice}"
            ))
            .into());
        }
        Ok(Self { steps, resolution })
    }

    fn wants(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().filter(move |(s, _)| *s == n).map(|(_, t)| *t)
    }
}

/// `|u|`, `Re u`, `Im u` on a uniform `res x res` grid covering the domain.
pub fn sample_grid(ops: &Operators, u: &[Complex64], res: usize) -> Vec<SnapshotPoint> {
    let field = ops.lift(u);
    let space = ops.space();
    let d = space.mesh().domain();
    let step = |lo: f64, len: f64, i: usize| if res > 1 { lo + len * i as f64 / (res - 1) as f64 } else { lo };
    let mut out = Vec::with_capacity(res * res);
    for j in 0..res {
        let y = step(d.ymin, d.height(), j);
        for i in 0..res {
            let x = step(d.xmin, d.width(), i);
            out.push(SnapshotPoint { x, y, u: space.eval_at(&field, x, y) });
        }
    }
    out
}

struct Snapshots<'a> {
    plan: &'a SnapshotPlan,
    taken: Vec<(f64, Vec<Complex64>)>,
}

impl Snapshots<'_> {
    fn offer(&mut self, n: usize, u: &[Complex64]) {
        for t in self.plan.wants(n) {
            self.taken.push((t, u.to_vec()));
        }
    }
}

impl Observer for Snapshots<'_> {
    fn initial(&mut self, s: &SchemeState, _: &Operators) -> rcnfem::Result<()> {
        self.offer(s.n, &s.u);
        Ok(())
    }

    fn step(&mut self, s: &SchemeState, _: &SolveReport, _: &Operators) -> rcnfem::Result<()> {
        self.offer(s.n, &s.u);
        Ok(())
    }
}

pub struct RunOutcome {
    pub records: Vec<DiagnosticsRecord>,
    pub final_u: Vec<Complex64>,
    pub operators: Arc<Operators>,
    /// Largest relative residual of any linear solve.
    pub worst_residual: f64,
    /// Fixed-point statistics of an iterative run.
    pub iterations: Option<IterationStats>,
    pub summary: Value,
}

/// Single run with per-level diagnostics and optional snapshots.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let spec = cfg.problem()?;
    let nc = cfg.single_nc()?;
    let tau = cfg.single_tau()?;
    let n_steps = step_count(cfg.t_final, tau)?;
    let plan = SnapshotPlan::new(cfg, tau, nc)?;
    let ops = operators(&spec, nc, cfg.k)?;

    let mut snaps = Snapshots { plan: &plan, taken: Vec::new() };
    let (records, final_u, worst_residual, iterations) = match cfg.scheme {
        SchemeKind::Relaxation => {
            let mut scheme =
                RelaxationScheme::new(spec.clone(), ops.clone(), tau, cfg.solver)?.with_psi_init(cfg.psi_init);
            let mut obs = (Recorder::new(spec.clone(), tau), snaps);
            let state = scheme.run(cfg.t_final, &mut obs)?;
            let (rec, s) = obs;
            snaps = s;
            (rec.records().to_vec(), state.u, rec.worst_residual(), None)
        }
        SchemeKind::Iterative => {
            let mut scheme = IterativeScheme::new(spec.clone(), ops.clone(), tau, single_policy(cfg)?, cfg.solver)?;
            let mut rec = Recorder::new(spec.clone(), tau);
            let mut last = Instant::now();
            let (u, stats) = scheme.run(cfg.t_final, |n, u, s| {
                let wall = if n == 0 { 0.0 } else { last.elapsed().as_secs_f64() * 1e3 };
                rec.push_level(n, u, ops.mass(), wall);
                let (phi, _) = s.coupling_fields(u, &mut IterationStats::default())?;
                rec.set_energies(None, Some(original_energy(&ops, &spec, u, &phi, &phi)?));
                snaps.offer(n, u);
                last = Instant::now();
                Ok(())
            })?;
            let worst = stats.worst_residual;
            (rec.into_records(), u, worst, Some(stats))
        }
    };

    let dir = cfg.out_dir.as_path();
    output::ensure_dir(dir)?;
    output::write_diagnostics(&dir.join("diagnostics.csv"), &records)?;
    let mut snapshot_files = Vec::new();
    for (t, u) in &snaps.taken {
        let name = output::snapshot_file_name(*t);
        output::write_snapshot(&dir.join(&name), &sample_grid(&ops, u, plan.resolution))?;
        snapshot_files.push(Value::from(name));
    }

    let last = records.last().expect("a run records its initial level");
    let max_of = |f: fn(&DiagnosticsRecord) -> Option<f64>| records.iter().filter_map(f).fold(f64::NAN, f64::max);
    let scheme_name = if cfg.scheme == SchemeKind::Relaxation { "relaxation" } else { "iterative" };
    let total_s: f64 = records.iter().map(|r| r.wall_ms).sum::<f64>() / 1e3;
    let mut summary = header("run", cfg);
    summary.insert("scheme".into(), scheme_name.into());
    summary.insert("steps".into(), n_steps.into());
    summary.insert(
        "final".into(),
        json!({
            "mass": last.mass, "mass_change": last.mass_change,
            "energy_mod": last.energy_mod, "energy_mod_change": last.energy_mod_change,
            "energy_orig": last.energy_orig, "energy_orig_change": last.energy_orig_change,
        }),
    );
    summary.insert(
        "max_change".into(),
        json!({
            "mass": max_of(|r| Some(r.mass_change)),
            "energy_mod": max_of(|r| r.energy_mod_change),
            "energy_orig": max_of(|r| r.energy_orig_change),
        }),
    );
    summary.insert("wall_s".into(), json!({ scheme_name: total_s }));
    summary.insert("snapshots".into(), snapshot_files.into());
    if let Some(stats) = &iterations {
        summary.insert(
            "iterations".into(),
            json!({"mean": stats.mean_iterations(), "total": stats.total_iterations(), "per_step": stats.iterations}),
        );
    }
    let summary = Value::Object(summary);
    output::write_json(&dir.join("summary.json"), &summary)?;
    Ok(RunOutcome { records, final_u, operators: ops, worst_residual, iterations, summary })
}

/// Final interior state of one run without diagnostics.
pub fn final_state(cfg: &RunConfig, spec: &ProblemSpec, ops: &Arc<Operators>, tau: f64) -> Result<Vec<Complex64>, CliError> {
    match cfg.scheme {
        SchemeKind::Relaxation => {
            let mut scheme =
                RelaxationScheme::new(spec.clone(), ops.clone(), tau, cfg.solver)?.with_psi_init(cfg.psi_init);
            Ok(scheme.run(cfg.t_final, &mut ())?.u)
        }
        SchemeKind::Iterative => {
            let mut scheme = IterativeScheme::new(spec.clone(), ops.clone(), tau, single_policy(cfg)?, cfg.solver)?;
            Ok(scheme.run(cfg.t_final, |_, _, _| Ok(()))?.0)
        }
    }
}

pub struct ConvOutcome {
    pub rows: Vec<ConvergenceRow>,
    pub summary: Value,
}

fn check_levels(what: &str, levels: &[f64], factor: f64) -> Result<(), CliError> {
    for (i, a) in levels.iter().enumerate() {
        if levels[..i].iter().any(|b| (a - b).abs() <= 1e-12 * a.abs()) {
            return Err(Error::Config(format!("{what}: duplicate level {a}")).into());
        }
    }
    for w in levels.windows(2) {
        if (w[1] - w[0] * factor).abs() > 1e-9 * w[1].abs() {
            let verb = if factor < 1.0 { "halve" } else { "double" };
            return Err(Error::Config(format!("{what}: successive levels must {verb} ({} then {})", w[0], w[1])).into());
        }
    }
    Ok(())
}

fn finish_conv(
    command: &str,
    cfg: &RunConfig,
    levels: &[f64],
    errors: &[f64],
    runs: Vec<Value>,
    integer_levels: bool,
) -> Result<ConvOutcome, CliError> {
    let rows = convergence_table(levels, errors)?;
    let dir = cfg.out_dir.as_path();
    output::ensure_dir(dir)?;
    output::write_convergence(&dir.join("convergence.csv"), &rows, integer_levels)?;
    let mut summary = header(command, cfg);
    let table: Vec<Value> =
        rows.iter().map(|r| json!({"level": r.level, "error": r.error, "order": r.order})).collect();
    summary.insert("convergence".into(), table.into());
    let total: f64 = runs.iter().filter_map(|r| r["wall_s"].as_f64()).sum();
    summary.insert("runs".into(), runs.into());
    summary.insert("wall_s".into(), json!({ "total": total }));
    let summary = Value::Object(summary);
    output::write_json(&dir.join("summary.json"), &summary)?;
    Ok(ConvOutcome { rows, summary })
}

/// Temporal study: each listed `tau` is paired with a run at `tau/2` on the
/// same mesh; the error is their M-norm distance at `T`.
pub fn conv_time(cfg: &RunConfig) -> Result<ConvOutcome, CliError> {
    check_levels("time.tau", &cfg.tau, 0.5)?;
    let spec = cfg.problem()?;
    let nc = cfg.single_nc()?;
    for &tau in &cfg.tau {
        step_count(cfg.t_final, tau / 2.0)?;
    }
    let ops = operators(&spec, nc, cfg.k)?;
    let mut cache: Vec<(f64, Vec<Complex64>)> = Vec::new();
    let mut runs = Vec::new();
    let mut solve = |tau: f64, runs: &mut Vec<Value>| -> Result<Vec<Complex64>, CliError> {
        if let Some((_, u)) = cache.iter().find(|(t, _)| (t - tau).abs() <= 1e-12 * tau) {
            return Ok(u.clone());
        }
        let start = Instant::now();
        let u = final_state(cfg, &spec, &ops, tau)?;
        runs.push(json!({"tau": tau, "nc": nc, "wall_s": start.elapsed().as_secs_f64()}));
        cache.push((tau, u.clone()));
        Ok(u)
    };
    let mut errors = Vec::new();
    for &tau in &cfg.tau {
        let coarse = solve(tau, &mut runs)?;
        let fine = solve(tau / 2.0, &mut runs)?;
        errors.push(two_level_error_time(&coarse, &fine, ops.mass())?);
    }
    finish_conv("conv-time", cfg, &cfg.tau, &errors, runs, false)
}

/// Spatial study: each listed `NC` is paired with a run at `2 NC`; the
/// error is the L2 distance of the final fields on the finer mesh.
pub fn conv_space(cfg: &RunConfig) -> Result<ConvOutcome, CliError> {
    let levels: Vec<f64> = cfg.nc.iter().map(|&n| n as f64).collect();
    check_levels("mesh.nc", &levels, 2.0)?;
    let spec = cfg.problem()?;
    let tau = cfg.single_tau()?;
    step_count(cfg.t_final, tau)?;
    let mut cache: Vec<(usize, Arc<Operators>, Vec<Complex64>)> = Vec::new();
    let mut runs = Vec::new();
    let mut errors = Vec::new();
    for &nc in &cfg.nc {
        for n in [nc, 2 * nc] {
            if cache.iter().any(|(m, _, _)| *m == n) {
                continue;
            }
            let start = Instant::now();
            let ops = operators(&spec, n, cfg.k)?;
            let u = final_state(cfg, &spec, &ops, tau)?;
            runs.push(json!({"tau": tau, "nc": n, "wall_s": start.elapsed().as_secs_f64()}));
            cache.push((n, ops, u));
        }
        let find = |n: usize| cache.iter().find(|(m, _, _)| *m == n).expect("run cached above");
        let (_, co, cu) = find(nc);
        let (_, fo, fu) = find(2 * nc);
        errors.push(two_level_error_space(co.space(), &co.lift(cu), fo.space(), &fo.lift(fu))?);
        // Only the finer run can be reused by the next level.
        cache.retain(|(m, _, _)| *m == 2 * nc);
    }
    finish_conv("conv-space", cfg, &levels, &errors, runs, true)
}

pub struct PolicyResult {
    pub policy: IterationPolicy,
    /// Median wall time over the repeats, seconds.
    pub wall_s: f64,
    pub walls: Vec<f64>,
    /// Relaxation median wall time divided by this policy's.
    pub ratio: f64,
    /// M-norm distance of the final states of the two schemes.
    pub gap: f64,
    pub stats: IterationStats,
}

pub struct CompareOutcome {
    pub relaxation_wall_s: f64,
    pub relaxation_walls: Vec<f64>,
    pub policies: Vec<PolicyResult>,
    pub summary: Value,
}

/// Times relaxation against each requested iterative policy on one mesh.
/// Operator assembly is shared and not timed; solver setup is.
pub fn compare(cfg: &RunConfig) -> Result<CompareOutcome, CliError> {
    let spec = cfg.problem()?;
    let nc = cfg.single_nc()?;
    let tau = cfg.single_tau()?;
    step_count(cfg.t_final, tau)?;
    let policies = cfg.policies();
    let ops = operators(&spec, nc, cfg.k)?;

    let mut relax_walls = Vec::new();
    let mut relax_u = Vec::new();
    for _ in 0..cfg.repeats {
        let start = Instant::now();
        let mut scheme =
            RelaxationScheme::new(spec.clone(), ops.clone(), tau, cfg.solver)?.with_psi_init(cfg.psi_init);
        relax_u = scheme.run(cfg.t_final, &mut ())?.u;
        relax_walls.push(start.elapsed().as_secs_f64());
    }
    let relax_wall = median(&relax_walls);

    let mut results = Vec::new();
    for policy in policies {
        let mut walls = Vec::new();
        let mut last = None;
        for _ in 0..cfg.repeats {
            let start = Instant::now();
            let mut scheme = IterativeScheme::new(spec.clone(), ops.clone(), tau, policy, cfg.solver)?;
            let out = scheme.run(cfg.t_final, |_, _, _| Ok(()))?;
            walls.push(start.elapsed().as_secs_f64());
            last = Some(out);
        }
        let (u, stats) = last.expect("at least one repeat");
        let wall_s = median(&walls);
        let gap = two_level_error_time(&relax_u, &u, ops.mass())?;
        results.push(PolicyResult { policy, wall_s, walls, ratio: relax_wall / wall_s, gap, stats });
    }

    let dir = cfg.out_dir.as_path();
    output::ensure_dir(dir)?;
    write_compare_tables(dir, relax_wall, &results)?;
    let mut summary = header("compare", cfg);
    let mut wall = serde_json::Map::new();
    wall.insert("relaxation".into(), relax_wall.into());
    for r in &results {
        wall.insert(r.policy.label(), r.wall_s.into());
    }
    summary.insert("wall_s".into(), wall.into());
    let rows: Vec<Value> = results
        .iter()
        .map(|r| {
            json!({
                "policy": r.policy.label(), "wall_s": r.wall_s, "wall_s_repeats": r.walls,
                "ratio": r.ratio, "gap": r.gap,
                "mean_iterations": r.stats.mean_iterations(), "total_iterations": r.stats.total_iterations(),
                "max_iterations": r.stats.iterations.iter().copied().max().unwrap_or(0),
            })
        })
        .collect();
    summary.insert("relaxation_wall_s_repeats".into(), relax_walls.clone().into());
    summary.insert("iterative".into(), rows.into());
    let summary = Value::Object(summary);
    output::write_json(&dir.join("summary.json"), &summary)?;
    Ok(CompareOutcome { relaxation_wall_s: relax_wall, relaxation_walls: relax_walls, policies: results, summary })
}

fn write_compare_tables(dir: &Path, relax_wall: f64, results: &[PolicyResult]) -> Result<(), CliError> {
    use std::fmt::Write;
    let mut text = String::from("scheme,wall_s,ratio,gap,mean_iterations\n");
    let _ = writeln!(text, "relaxation,{},1,0,nan", output::fmt_f(relax_wall));
    for r in results {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            r.policy.label(),
            output::fmt_f(r.wall_s),
            output::fmt_f(r.ratio),
            output::fmt_f(r.gap),
            output::fmt_f(r.stats.mean_iterations())
        );
    }
    let path = dir.join("compare.csv");
    std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;

    let steps = results.iter().map(|r| r.stats.iterations.len()).max().unwrap_or(0);
    let mut text = String::from("n");
    for r in results {
        text.push(',');
        text.push_str(&r.policy.label());
    }
    text.push('\n');
    for n in 0..steps {
        text.push_str(&(n + 1).to_string());
        for r in results {
            let _ = write!(text, ",{}", r.stats.iterations.get(n).copied().unwrap_or(0));
        }
        text.push('\n');
    }
    let path = dir.join("iterations.csv");
    std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::flatten;

    fn cfg(extra: Value, dir: &Path) -> RunConfig {
        let Value::Object(mut m) = extra else { unreachable!() };
        m.insert("output.dir".into(), dir.to_string_lossy().into_owned().into());
        RunConfig::from_map(&flatten(&Value::Object(m)).unwrap()).unwrap()
    }

    #[test]
    fn level_checks() {
        assert!(check_levels("t", &[0.1, 0.05, 0.025], 0.5).is_ok());
        assert!(check_levels("t", &[0.1, 0.04], 0.5).is_err());
        assert!(check_levels("t", &[0.1, 0.1], 0.5).unwrap_err().to_string().contains("duplicate"));
        assert!(check_levels("n", &[8.0, 16.0, 32.0], 2.0).is_ok());
        assert!(check_levels("n", &[8.0, 12.0], 2.0).is_err());
    }

    #[test]
    fn small_run_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(
            json!({"mesh.nc": 6, "fem.k": 1, "time.tau": 0.05, "time.T": 0.2, "output.snapshots": [0.0, 0.1]}),
            dir.path(),
        );
        let out = run(&c).unwrap();
        assert_eq!(out.records.len(), 5);
        let diag = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
        assert_eq!(diag.lines().count(), 6);
        let snap = std::fs::read_to_string(dir.path().join("snapshot_t0.1.csv")).unwrap();
        assert_eq!(snap.lines().count(), 1 + 7 * 7);
        let summary: Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["steps"], 4);
        assert_eq!(RunConfig::from_map(&flatten(&summary["config"]).unwrap()).unwrap(), c);
    }

    #[test]
    fn snapshot_time_must_be_a_step() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(json!({"mesh.nc": 4, "fem.k": 1, "time.tau": 0.1, "time.T": 0.2, "output.snapshots": [0.15]}), dir.path());
        assert!(run(&c).is_err());
        let c = cfg(json!({"mesh.nc": 4, "fem.k": 1, "time.tau": 0.1, "time.T": 0.2, "output.snapshot_resolution": 3}), dir.path());
        assert!(run(&c).is_err());
    }

    #[test]
    fn iterative_run_has_nan_modified_energy() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(
            json!({"mesh.nc": 4, "fem.k": 1, "time.tau": 0.1, "time.T": 0.2, "scheme": "iterative"}),
            dir.path(),
        );
        let out = run(&c).unwrap();
        assert!(out.records.iter().all(|r| r.energy_mod.is_none() && r.energy_orig.is_some()));
        assert_eq!(out.iterations.unwrap().iterations.len(), 2);
        let diag = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
        assert!(diag.lines().nth(1).unwrap().split(',').nth(4) == Some("nan"));
    }

    #[test]
    fn single_tau_gives_orderless_table() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(json!({"mesh.nc": 4, "fem.k": 1, "time.tau": 0.1, "time.T": 0.2}), dir.path());
        let out = conv_time(&c).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert!(out.rows[0].order.is_none());
        let csv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
        assert_eq!(csv.lines().next(), Some("level,error"));
    }

    #[test]
    fn compare_reports_each_policy() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(
            json!({"mesh.nc": 4, "fem.k": 1, "time.tau": 0.1, "time.T": 0.2, "compare.repeats": 1,
                   "iterative.mode": "all", "iterative.tol": [1e-2, 1e-8]}),
            dir.path(),
        );
        let out = compare(&c).unwrap();
        assert_eq!(out.policies.len(), 3);
        assert_eq!(out.policies[0].stats.iterations, vec![2, 2]);
        assert!(out.policies.iter().all(|p| p.gap.is_finite() && p.ratio > 0.0));
        assert!(dir.path().join("iterations.csv").exists());
    }
}
