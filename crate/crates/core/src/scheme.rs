//! Relaxation Crank-Nicolson time stepping.
//!
//! Each step from `(u^n, Psi^{n-1/2}, Phi^{n-1/2})` performs three linear
//! solves on the interior DOFs:
//!
//! ```text
//! M Psi^{n+1/2} = b(2|u^n|^2) - M Psi^{n-1/2}
//! K Phi^{n+1/2} = mu (M Psi^{n+1/2} - c l)
//! [(i/tau) M - S/2] u^{n+1} = [(i/tau) M + S/2] u^n,   S = alpha K + W(w)
//! ```
//!
//! with `w = beta Phi^{n+1/2} + V + [cubic] Psi^{n+1/2}` and `l_i = int phi_i`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::assembly::{Assembler, DirichletReduction, PointEvaluator, Weight};
use crate::error::{Error, Result};
use crate::fespace::{FeSpace, Field, QuadraturePurpose, QuadratureRule};
use crate::linalg::{LdltFactor, LdltSymbolic, Ordering, SolveReport, SolverConfig, SparseSolver, SystemKind};
use crate::mesh::StructuredQuadMesh;
use crate::problem::ProblemSpec;
use crate::sparse::CsrMatrix;

/// Spatial operators on the interior DOFs, shared by both time steppers.
#[derive(Debug, Clone)]
pub struct Operators {
    space: Arc<FeSpace>,
    reduction: DirichletReduction,
    assembler: Assembler,
    quartic: PointEvaluator,
    mass: CsrMatrix<f64>,
    stiffness: CsrMatrix<f64>,
    ones_load: Vec<f64>,
    potential_points: Vec<f64>,
    potential_mass: CsrMatrix<f64>,
    ordering: Ordering,
}

impl Operators {
    pub fn new(space: Arc<FeSpace>, spec: &ProblemSpec) -> Result<Self> {
        let reduction = DirichletReduction::from_mask(space.boundary_mask());
        let assembler = Assembler::new(space.clone(), Some(&reduction))?;
        let quartic_rule = QuadratureRule::for_degree(space.degree(), QuadraturePurpose::QuarticDiagnostic)?;
        let quartic = PointEvaluator::new(&space, quartic_rule, Some(&reduction));
        let mass = assembler.mass();
        let stiffness = assembler.stiffness();
        let ones_load = assembler.load(&Weight::new().constant(1.0))?;
        let potential_points = assembler.weight_values(&Weight::new().potential(&spec.potential))?;
        let mut potential_mass = CsrMatrix::zeros(assembler.pattern().clone());
        assembler.weighted_mass_into(&potential_points, &mut potential_mass)?;
        let (nlx, _) = space.lattice_dims();
        let coords = reduction.interior().iter().map(|&d| (d % nlx, d / nlx)).collect();
        let ordering = Ordering::Lattice { coords: Arc::new(coords), stride: space.degree() };
        Ok(Self {
            space,
            reduction,
            assembler,
            quartic,
            mass,
            stiffness,
            ones_load,
            potential_points,
            potential_mass,
            ordering,
        })
    }

    /// Builds a mesh and space for `spec.domain` and assembles its operators.
    pub fn for_mesh(spec: &ProblemSpec, ncx: usize, ncy: usize, k: usize) -> Result<Self> {
        let mesh = StructuredQuadMesh::new(spec.domain, ncx, ncy)?;
        Self::new(Arc::new(FeSpace::new(mesh, k)?), spec)
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn reduction(&self) -> &DirichletReduction {
        &self.reduction
    }

    pub fn assembler(&self) -> &Assembler {
        &self.assembler
    }

    /// Evaluator for the higher-order rule used by quartic integrals.
    pub fn quartic_evaluator(&self) -> &PointEvaluator {
        &self.quartic
    }

    pub fn mass(&self) -> &CsrMatrix<f64> {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix<f64> {
        &self.stiffness
    }

    /// `int phi_i` for interior basis functions.
    pub fn ones_load(&self) -> &[f64] {
        &self.ones_load
    }

    /// Weighted mass matrix of the external potential alone.
    pub fn potential_mass(&self) -> &CsrMatrix<f64> {
        &self.potential_mass
    }

    pub fn potential_points(&self) -> &[f64] {
        &self.potential_points
    }

    pub fn ordering(&self) -> &Ordering {
        &self.ordering
    }

    /// Number of interior unknowns.
    pub fn dim(&self) -> usize {
        self.reduction.reduced_dim()
    }

    /// `b_i = int rho phi_i` with `rho = scale |u|^2`.
    pub fn density_load(&self, u: &[Complex64], scale: f64) -> Result<Vec<f64>> {
        let vals = self.assembler.evaluator().values(u)?;
        let rho: Vec<f64> = vals.iter().map(|v| scale * v.norm_sqr()).collect();
        self.assembler.load_from_points(&rho)
    }

    /// Poisson right-hand side `mu (M psi - c l)`.
    pub fn poisson_rhs(&self, spec: &ProblemSpec, psi: &[f64]) -> Vec<f64> {
        let mpsi: Vec<f64> = self.mass.matvec(psi);
        mpsi.iter().zip(&self.ones_load).map(|(m, l)| spec.mu * (m - spec.c * l)).collect()
    }

    /// Values of `w = beta phi + V + cubic psi` at the assembly points.
    pub fn coupling_weight(&self, spec: &ProblemSpec, phi: &[f64], psi: &[f64]) -> Result<Vec<f64>> {
        let eval = self.assembler.evaluator();
        let phi_q = eval.values(phi)?;
        let psi_q = eval.values(psi)?;
        let cubic = spec.cubic_coefficient();
        Ok(phi_q
            .iter()
            .zip(&psi_q)
            .zip(&self.potential_points)
            .map(|((f, p), v)| spec.beta * f + v + cubic * p)
            .collect())
    }

    /// Interior coefficients of the nodal interpolant of a function.
    pub fn interpolate_interior(&self, f: impl Fn(f64, f64) -> Complex64) -> Vec<Complex64> {
        self.reduction.restrict(&self.space.interpolate(f).values)
    }

    /// Full-DOF field with zero boundary coefficients.
    pub fn lift<T: crate::scalar::Scalar>(&self, reduced: &[T]) -> Field<T> {
        self.reduction.lift(reduced)
    }
}

/// Time-stepper state on the interior DOFs: `u^n`, `Psi^{n-1/2}`,
/// `Phi^{n-1/2}`. Boundary coefficients are zero by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    pub n: usize,
    pub t: f64,
    pub u: Vec<Complex64>,
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
}

/// Half-level fields produced before the u-solve of a step.
#[derive(Debug, Clone)]
pub struct HalfStep {
    pub psi_next: Vec<f64>,
    pub phi_next: Vec<f64>,
    pub psi_report: SolveReport,
    pub phi_report: SolveReport,
}

/// Receives the stepper's intermediate results. The stepper stores no history.
pub trait Observer {
    fn initial(&mut self, _state: &SchemeState, _ops: &Operators) -> Result<()> {
        Ok(())
    }

    /// Called after the Psi and Phi solves of step `state.n -> state.n + 1`,
    /// and once more after the last step.
    fn half_step(&mut self, _state: &SchemeState, _half: &HalfStep, _ops: &Operators) -> Result<()> {
        Ok(())
    }

    /// Called after the u-solve with the advanced state.
    fn step(&mut self, _state: &SchemeState, _u_report: &SolveReport, _ops: &Operators) -> Result<()> {
        Ok(())
    }
}

impl Observer for () {}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn initial(&mut self, s: &SchemeState, ops: &Operators) -> Result<()> {
        self.0.initial(s, ops)?;
        self.1.initial(s, ops)
    }
    fn half_step(&mut self, s: &SchemeState, h: &HalfStep, ops: &Operators) -> Result<()> {
        self.0.half_step(s, h, ops)?;
        self.1.half_step(s, h, ops)
    }
    fn step(&mut self, s: &SchemeState, r: &SolveReport, ops: &Operators) -> Result<()> {
        self.0.step(s, r, ops)?;
        self.1.step(s, r, ops)
    }
}

/// Number of steps `T / tau`, required to be an integer to within `1e-9`.
pub fn step_count(t_final: f64, tau: f64) -> Result<usize> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Config(format!("time.tau must be positive, got {tau}")));
    }
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::Config(format!("time.T must be nonnegative, got {t_final}")));
    }
    let ratio = t_final / tau;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::Config(format!("T = {t_final} is not an integer multiple of tau = {tau}")));
    }
    Ok(n as usize)
}

/// Linear solvers for the mass, Poisson and Crank-Nicolson systems, with
/// factorizations kept across steps.
pub struct Solvers {
    mass: SparseSolver<f64>,
    poisson: SparseSolver<f64>,
    step: SparseSolver<Complex64>,
    step_matrix: CsrMatrix<Complex64>,
    weighted: CsrMatrix<f64>,
}

impl Solvers {
    pub fn new(ops: &Operators, spec: &ProblemSpec, tau: f64, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let mass = SparseSolver::new(cfg, SystemKind::Spd, ops.ordering.clone());
        let poisson = SparseSolver::new(cfg, SystemKind::Spd, ops.ordering.clone());
        let mut step = SparseSolver::new(cfg, SystemKind::General, ops.ordering.clone());
        let pattern = ops.assembler.pattern().clone();
        let mut step_matrix = CsrMatrix::zeros(pattern.clone());
        if !step.uses_direct(ops.dim()) && ops.dim() > 0 {
            // the W-independent part of the step matrix preconditions the Krylov solves
            fill_step_matrix(&mut step_matrix, ops, None, spec.alpha, tau);
            let sym = Arc::new(LdltSymbolic::analyze(&pattern, &ops.ordering)?);
            step.set_preconditioner(Arc::new(LdltFactor::factor(sym, &step_matrix)?));
        }
        Ok(Self { mass, poisson, step, step_matrix, weighted: CsrMatrix::zeros(pattern) })
    }

    pub fn solve_mass(&mut self, ops: &Operators, rhs: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        self.mass.solve(&ops.mass, rhs)
    }

    pub fn solve_poisson(&mut self, ops: &Operators, rhs: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        self.poisson.solve(&ops.stiffness, rhs)
    }

    /// Crank-Nicolson solve with weight values `w` at the assembly points.
    pub fn solve_cn(
        &mut self,
        ops: &Operators,
        alpha: f64,
        tau: f64,
        w: &[f64],
        u: &[Complex64],
    ) -> Result<(Vec<Complex64>, SolveReport)> {
        ops.assembler.weighted_mass_into(w, &mut self.weighted)?;
        // rhs = (i/tau) M u + S u / 2, by mat-vec
        let mu_: Vec<Complex64> = ops.mass.matvec(u);
        let ku: Vec<Complex64> = ops.stiffness.matvec(u);
        let wu: Vec<Complex64> = self.weighted.matvec(u);
        let it = Complex64::new(0.0, 1.0 / tau);
        let rhs: Vec<Complex64> =
            (0..u.len()).map(|i| it * mu_[i] + 0.5 * (alpha * ku[i] + wu[i])).collect();
        fill_step_matrix(&mut self.step_matrix, ops, Some(&self.weighted), alpha, tau);
        self.step.solve(&self.step_matrix, &rhs)
    }
}

fn fill_step_matrix(
    a: &mut CsrMatrix<Complex64>,
    ops: &Operators,
    w: Option<&CsrMatrix<f64>>,
    alpha: f64,
    tau: f64,
) {
    let m = ops.mass.values();
    let k = ops.stiffness.values();
    let inv_tau = 1.0 / tau;
    for (p, v) in a.values_mut().iter_mut().enumerate() {
        let wp = w.map_or(0.0, |w| w.values()[p]);
        *v = Complex64::new(-0.5 * (alpha * k[p] + wp), inv_tau * m[p]);
    }
}

/// How `Psi^{-1/2}` is built from `u^0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PsiInit {
    /// Nodal squares `Pi |u^0|^2`.
    #[default]
    Nodal,
    /// L2 projection of `|u^0|^2`, which makes `Psi^{1/2}` consistent with
    /// the projected density to `O(tau)` instead of `O(h^{k+1})`.
    Projection,
}

impl std::str::FromStr for PsiInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nodal" => Ok(PsiInit::Nodal),
            "projection" => Ok(PsiInit::Projection),
            _ => Err(Error::Config(format!("unknown psi initialization '{s}' (expected nodal or projection)"))),
        }
    }
}

impl PsiInit {
    pub fn as_str(&self) -> &'static str {
        match self {
            PsiInit::Nodal => "nodal",
            PsiInit::Projection => "projection",
        }
    }
}

/// The relaxation Crank-Nicolson stepper for one problem, mesh and `tau`.
pub struct RelaxationScheme {
    spec: ProblemSpec,
    tau: f64,
    ops: Arc<Operators>,
    solvers: Solvers,
    psi_init: PsiInit,
}

impl RelaxationScheme {
    pub fn new(spec: ProblemSpec, ops: Arc<Operators>, tau: f64, cfg: SolverConfig) -> Result<Self> {
        spec.validate()?;
        step_count(0.0, tau)?;
        let solvers = Solvers::new(&ops, &spec, tau, cfg)?;
        Ok(Self { spec, tau, ops, solvers, psi_init: PsiInit::Nodal })
    }

    pub fn with_psi_init(mut self, psi_init: PsiInit) -> Self {
        self.psi_init = psi_init;
        self
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn operators(&self) -> &Arc<Operators> {
        &self.ops
    }

    /// `u^0 = Pi u_0`, `Psi^{-1/2} = Pi |u^0|^2` (or its L2 projection),
    /// `Phi^{-1/2}` from the Poisson equation, all with zero boundary
    /// coefficients.
    pub fn init(&mut self) -> Result<SchemeState> {
        let u = self.ops.interpolate_interior(|x, y| self.spec.initial.eval(x, y));
        let psi: Vec<f64> = match self.psi_init {
            PsiInit::Nodal => u.iter().map(|v| v.norm_sqr()).collect(),
            PsiInit::Projection => self.solvers.solve_mass(&self.ops, &self.ops.density_load(&u, 1.0)?)?.0,
        };
        let (phi, _) = self.solvers.solve_poisson(&self.ops, &self.ops.poisson_rhs(&self.spec, &psi))?;
        Ok(SchemeState { n: 0, t: 0.0, u, psi, phi })
    }

    /// The Psi and Phi solves of the step leaving `state`.
    pub fn half_step(&mut self, state: &SchemeState) -> Result<HalfStep> {
        let ops = &self.ops;
        let b = ops.density_load(&state.u, 2.0)?;
        let mpsi: Vec<f64> = ops.mass.matvec(&state.psi);
        let rhs: Vec<f64> = b.iter().zip(&mpsi).map(|(b, m)| b - m).collect();
        let (psi_next, psi_report) = self.solvers.solve_mass(ops, &rhs)?;
        let (phi_next, phi_report) = self.solvers.solve_poisson(ops, &ops.poisson_rhs(&self.spec, &psi_next))?;
        Ok(HalfStep { psi_next, phi_next, psi_report, phi_report })
    }

    /// The u-solve completing a step, given its half-level fields.
    pub fn complete_step(&mut self, state: &SchemeState, half: HalfStep) -> Result<(SchemeState, SolveReport)> {
        let w = self.ops.coupling_weight(&self.spec, &half.phi_next, &half.psi_next)?;
        let (u, report) = self.solvers.solve_cn(&self.ops, self.spec.alpha, self.tau, &w, &state.u)?;
        let n = state.n + 1;
        let next = SchemeState { n, t: n as f64 * self.tau, u, psi: half.psi_next, phi: half.phi_next };
        Ok((next, report))
    }

    pub fn step(&mut self, state: &SchemeState) -> Result<(SchemeState, HalfStep, SolveReport)> {
        let half = self.half_step(state)?;
        let (next, report) = self.complete_step(state, half.clone())?;
        Ok((next, half, report))
    }

    /// Runs `n_steps` steps from `state`, notifying `obs`; the final half
    /// step is computed so energies are available at the last level.
    pub fn run_from(&mut self, mut state: SchemeState, n_steps: usize, obs: &mut dyn Observer) -> Result<SchemeState> {
        let ops = self.ops.clone();
        obs.initial(&state, &ops)?;
        for _ in 0..n_steps {
            let half = self.half_step(&state)?;
            obs.half_step(&state, &half, &ops)?;
            let (next, report) = self.complete_step(&state, half)?;
            obs.step(&next, &report, &ops)?;
            state = next;
        }
        let half = self.half_step(&state)?;
        obs.half_step(&state, &half, &ops)?;
        Ok(state)
    }

    /// Initializes and runs to `t_final`.
    pub fn run(&mut self, t_final: f64, obs: &mut dyn Observer) -> Result<SchemeState> {
        let n = step_count(t_final, self.tau)?;
        let state = self.init()?;
        self.run_from(state, n, obs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{InitialCondition, Potential};
    use crate::scalar::norm2;

    fn small(spec: &ProblemSpec, nc: usize, k: usize) -> Arc<Operators> {
        Arc::new(Operators::for_mesh(spec, nc, nc, k).unwrap())
    }

    #[test]
    fn step_count_validation() {
        assert_eq!(step_count(1.0, 1e-3).unwrap(), 1000);
        assert_eq!(step_count(0.1, 2.5e-3).unwrap(), 40);
        assert_eq!(step_count(0.0, 0.1).unwrap(), 0);
        assert!(step_count(1.0, 0.3).is_err());
        assert!(step_count(1.0, 0.0).is_err());
    }

    #[test]
    fn zero_initial_condition_is_a_fixed_point() {
        let spec = ProblemSpec { initial: InitialCondition::Zero, ..ProblemSpec::sp_full(Potential::Saddle) };
        let ops = small(&spec, 6, 1);
        let mut s = RelaxationScheme::new(spec, ops, 0.01, SolverConfig::default()).unwrap();
        let s0 = s.init().unwrap();
        assert!(s0.u.iter().all(|v| v.norm() == 0.0) && s0.psi.iter().all(|&v| v == 0.0));
        assert!(norm2(&s0.phi) > 0.0);
        let (s1, half, _) = s.step(&s0).unwrap();
        assert!(s1.u.iter().all(|v| v.norm() == 0.0));
        assert!(half.psi_next.iter().all(|&v| v == 0.0));
        assert_eq!(half.phi_next, s0.phi);
    }

    #[test]
    fn zero_background_gives_zero_potential() {
        let spec = ProblemSpec { initial: InitialCondition::Zero, c: 0.0, ..ProblemSpec::sp_full(Potential::Zero) };
        let ops = small(&spec, 4, 2);
        let mut s = RelaxationScheme::new(spec, ops, 0.01, SolverConfig::default()).unwrap();
        assert!(s.init().unwrap().phi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_steps_returns_initial_state() {
        let spec = ProblemSpec::sp_full(Potential::Harmonic);
        let ops = small(&spec, 4, 1);
        let mut s = RelaxationScheme::new(spec, ops, 0.05, SolverConfig::default()).unwrap();
        let s0 = s.init().unwrap();
        let out = s.run_from(s0.clone(), 0, &mut ()).unwrap();
        assert_eq!(out, s0);
    }

    #[test]
    fn time_is_step_times_tau() {
        let spec = ProblemSpec::sp_full(Potential::Zero);
        let ops = small(&spec, 4, 1);
        let mut s = RelaxationScheme::new(spec, ops, 0.1, SolverConfig::default()).unwrap();
        let out = s.run(0.3, &mut ()).unwrap();
        assert_eq!((out.n, out.t), (3, 3.0 * 0.1));
    }
}
