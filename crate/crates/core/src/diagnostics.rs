//! Conserved quantities, relative-change traces and two-level error norms.

use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fespace::{FeSpace, Field, QuadraturePurpose, QuadratureRule};
use crate::linalg::SolveReport;
use crate::problem::ProblemSpec;
use crate::scheme::{HalfStep, Observer, Operators, SchemeState};
use crate::sparse::CsrMatrix;

/// Denominators below this give absolute instead of relative changes.
pub const RELATIVE_FLOOR: f64 = 1e-14;

fn real_part(z: Complex64, what: &str) -> f64 {
    debug_assert!(
        z.im.abs() <= 1e-10 * z.re.abs().max(1.0),
        "{what} has imaginary residue {:e} for value {:e}",
        z.im,
        z.re
    );
    z.re
}

/// `int |u|^2 = Re(u^H M u)`.
pub fn mass(u: &[Complex64], m: &CsrMatrix<f64>) -> f64 {
    real_part(m.sesquilinear(u, u), "mass")
}

/// `alpha u^H K u + beta/(2 mu) Phi_+^T K Phi_- + u^H W_V u + [cubic] Psi_+^T M Psi_- / 2`,
/// the quantity kept constant by the relaxation scheme. `_-`/`_+` are the
/// half levels below and above `u`'s level.
pub fn modified_energy(
    ops: &Operators,
    spec: &ProblemSpec,
    u: &[Complex64],
    psi_prev: &[f64],
    psi_next: &[f64],
    phi_prev: &[f64],
    phi_next: &[f64],
) -> f64 {
    let kinetic = real_part(ops.stiffness().sesquilinear(u, u), "kinetic energy");
    let external = real_part(ops.potential_mass().sesquilinear(u, u), "potential energy");
    let poisson = ops.stiffness().sesquilinear(phi_next, phi_prev);
    let quartic = ops.mass().sesquilinear(psi_next, psi_prev);
    spec.alpha * kinetic + spec.beta / (2.0 * spec.mu) * poisson + external + 0.5 * spec.cubic_coefficient() * quartic
}

/// Direct approximation of the continuous energy with `Phi` averaged over
/// the two half levels and `int |u|^4` on the higher-order rule.
pub fn original_energy(
    ops: &Operators,
    spec: &ProblemSpec,
    u: &[Complex64],
    phi_prev: &[f64],
    phi_next: &[f64],
) -> Result<f64> {
    let kinetic = real_part(ops.stiffness().sesquilinear(u, u), "kinetic energy");
    let external = real_part(ops.potential_mass().sesquilinear(u, u), "potential energy");
    let phi_bar: Vec<f64> = phi_prev.iter().zip(phi_next).map(|(a, b)| 0.5 * (a + b)).collect();
    let poisson = ops.stiffness().sesquilinear(&phi_bar, &phi_bar);
    let quartic = if spec.include_cubic { quartic_integral(ops, u)? } else { 0.0 };
    Ok(spec.alpha * kinetic + spec.beta / (2.0 * spec.mu) * poisson + external + 0.5 * quartic)
}

/// `int |u|^4` on the quartic-diagnostic rule.
pub fn quartic_integral(ops: &Operators, u: &[Complex64]) -> Result<f64> {
    let eval = ops.quartic_evaluator();
    let vals: Vec<f64> = eval.values(u)?.iter().map(|v| v.norm_sqr() * v.norm_sqr()).collect();
    Ok(eval.integrate(&vals))
}

/// `|value - reference| / |reference|`, or the absolute change (flagged)
/// when the reference is too small to divide by.
pub fn relative_change(value: f64, reference: f64) -> (f64, bool) {
    let diff = (value - reference).abs();
    if reference.abs() < RELATIVE_FLOOR {
        (diff, true)
    } else {
        (diff / reference.abs(), false)
    }
}

/// M-weighted L2 norm of the difference of two runs on the same space.
pub fn two_level_error_time(a: &[Complex64], b: &[Complex64], m: &CsrMatrix<f64>) -> Result<f64> {
    if a.len() != b.len() || a.len() != m.nrows() {
        return Err(Error::Dimension(format!(
            "fields of length {} and {} against a {}-dimensional mass matrix",
            a.len(),
            b.len(),
            m.nrows()
        )));
    }
    let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(mass(&d, m).max(0.0).sqrt())
}

/// L2 distance between a field on a coarse space and one on a nested fine
/// space, integrated on the fine mesh.
pub fn two_level_error_space(
    coarse_space: &FeSpace,
    coarse: &Field<Complex64>,
    fine_space: &FeSpace,
    fine: &Field<Complex64>,
) -> Result<f64> {
    if coarse_space.degree() != fine_space.degree() {
        return Err(Error::NotNested("spaces have different polynomial degrees".into()));
    }
    if !coarse_space.mesh().is_refined_by(fine_space.mesh()) {
        return Err(Error::NotNested("fine mesh is not a uniform refinement of the coarse mesh".into()));
    }
    if coarse.len() != coarse_space.ndof() || fine.len() != fine_space.ndof() {
        return Err(Error::Dimension("field length does not match its space".into()));
    }
    let rule = QuadratureRule::for_degree(fine_space.degree(), QuadraturePurpose::QuarticDiagnostic)?;
    let tab = fine_space.tabulate(rule);
    let fine_vals = fine_space.values_at_points(&tab, fine);
    let points = fine_space.physical_points(&tab);
    let w = tab.rule.weights();
    let nq = w.len();
    let mut total = 0.0;
    for (idx, (fv, &(x, y))) in fine_vals.iter().zip(&points).enumerate() {
        let cv = coarse_space.eval_at(coarse, x, y);
        total += w[idx % nq] * (cv - fv).norm_sqr();
    }
    Ok((total * fine_space.det_jacobian()).sqrt())
}

/// `log2(e_i / e_{i+1})` for successive errors of a factor-2 refinement.
pub fn convergence_orders(errors: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = errors.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        return Err(Error::UndefinedOrder(format!("error {bad} is not positive")));
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub n: usize,
    pub t: f64,
    pub mass: f64,
    pub mass_change: f64,
    pub energy_mod: Option<f64>,
    pub energy_mod_change: Option<f64>,
    pub energy_orig: Option<f64>,
    pub energy_orig_change: Option<f64>,
    pub wall_ms: f64,
    /// Set when some change above is absolute because its reference vanished.
    pub absolute_change: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    /// The refinement parameter of the coarser run of the pair (tau or NC).
    pub level: f64,
    pub error: f64,
    pub order: Option<f64>,
}

/// Pairs levels with errors and orders; the first row has no order.
pub fn convergence_table(levels: &[f64], errors: &[f64]) -> Result<Vec<ConvergenceRow>> {
    if levels.len() != errors.len() {
        return Err(Error::Dimension("levels and errors differ in length".into()));
    }
    let orders = convergence_orders(errors)?;
    Ok(levels
        .iter()
        .zip(errors)
        .enumerate()
        .map(|(i, (&level, &error))| ConvergenceRow { level, error, order: i.checked_sub(1).map(|j| orders[j]) })
        .collect())
}

/// Observer that accumulates one [`DiagnosticsRecord`] per time level.
pub struct Recorder {
    spec: ProblemSpec,
    tau: f64,
    records: Vec<DiagnosticsRecord>,
    mass0: f64,
    emod0: Option<f64>,
    eorig0: Option<f64>,
    step_start: Instant,
    observer_time: Duration,
    max_report: SolveReport,
    solves: usize,
}

impl Recorder {
    pub fn new(spec: ProblemSpec, tau: f64) -> Self {
        Self {
            spec,
            tau,
            records: Vec::new(),
            mass0: 0.0,
            emod0: None,
            eorig0: None,
            step_start: Instant::now(),
            observer_time: Duration::ZERO,
            max_report: SolveReport::default(),
            solves: 0,
        }
    }

    pub fn records(&self) -> &[DiagnosticsRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<DiagnosticsRecord> {
        self.records
    }

    /// Largest relative residual seen among all recorded solves.
    pub fn worst_residual(&self) -> f64 {
        self.max_report.rel_residual
    }

    pub fn solve_count(&self) -> usize {
        self.solves
    }

    fn note(&mut self, r: &SolveReport) {
        self.solves += 1;
        if r.rel_residual > self.max_report.rel_residual {
            self.max_report = r.clone();
        }
    }

    /// Appends the mass row for a new level.
    pub fn push_level(&mut self, n: usize, u: &[Complex64], m: &CsrMatrix<f64>, wall_ms: f64) {
        let mass = mass(u, m);
        if n == 0 || self.records.is_empty() {
            self.mass0 = mass;
        }
        let (mass_change, abs) = relative_change(mass, self.mass0);
        self.records.push(DiagnosticsRecord {
            n,
            t: n as f64 * self.tau,
            mass,
            mass_change,
            energy_mod: None,
            energy_mod_change: None,
            energy_orig: None,
            energy_orig_change: None,
            wall_ms,
            absolute_change: abs,
        });
    }

    /// Attaches energies to the most recent level.
    pub fn set_energies(&mut self, energy_mod: Option<f64>, energy_orig: Option<f64>) {
        let first = self.records.len() == 1;
        if first {
            self.emod0 = energy_mod;
            self.eorig0 = energy_orig;
        }
        let (e0m, e0o) = (self.emod0, self.eorig0);
        let rec = self.records.last_mut().expect("a level row precedes its energies");
        rec.energy_mod = energy_mod;
        rec.energy_orig = energy_orig;
        if let (Some(e), Some(e0)) = (energy_mod, e0m) {
            let (c, abs) = relative_change(e, e0);
            rec.energy_mod_change = Some(c);
            rec.absolute_change |= abs;
        }
        if let (Some(e), Some(e0)) = (energy_orig, e0o) {
            let (c, abs) = relative_change(e, e0);
            rec.energy_orig_change = Some(c);
            rec.absolute_change |= abs;
        }
    }

    /// Per-step wall time excluding time spent in this recorder.
    pub fn lap_ms(&mut self) -> f64 {
        let total = self.step_start.elapsed();
        let net = total.saturating_sub(self.observer_time);
        self.step_start = Instant::now();
        self.observer_time = Duration::ZERO;
        net.as_secs_f64() * 1e3
    }

    pub fn max_mass_change(&self) -> f64 {
        self.records.iter().map(|r| r.mass_change).fold(0.0, f64::max)
    }

    pub fn max_energy_mod_change(&self) -> f64 {
        self.records.iter().filter_map(|r| r.energy_mod_change).fold(0.0, f64::max)
    }

    pub fn max_energy_orig_change(&self) -> f64 {
        self.records.iter().filter_map(|r| r.energy_orig_change).fold(0.0, f64::max)
    }
}

impl Observer for Recorder {
    fn initial(&mut self, state: &SchemeState, ops: &Operators) -> Result<()> {
        self.records.clear();
        self.push_level(state.n, &state.u, ops.mass(), 0.0);
        self.step_start = Instant::now();
        self.observer_time = Duration::ZERO;
        Ok(())
    }

    fn half_step(&mut self, state: &SchemeState, half: &HalfStep, ops: &Operators) -> Result<()> {
        let start = Instant::now();
        self.note(&half.psi_report);
        self.note(&half.phi_report);
        let em = modified_energy(ops, &self.spec, &state.u, &state.psi, &half.psi_next, &state.phi, &half.phi_next);
        let eo = original_energy(ops, &self.spec, &state.u, &state.phi, &half.phi_next)?;
        self.set_energies(Some(em), Some(eo));
        self.observer_time += start.elapsed();
        Ok(())
    }

    fn step(&mut self, state: &SchemeState, report: &SolveReport, ops: &Operators) -> Result<()> {
        self.note(report);
        let wall = self.lap_ms();
        let start = Instant::now();
        self.push_level(state.n, &state.u, ops.mass(), wall);
        self.observer_time += start.elapsed();
        Ok(())
    }
}
