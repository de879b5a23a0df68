//! Fixed-point Crank-Nicolson baseline that treats `|u|^2` implicitly.
//!
//! Each inner iteration freezes the coefficients at the midpoint density of
//! the current iterate:
//!
//! ```text
//! ubar = (u^(s) + u^n) / 2,   rho~ = L2 projection of |ubar|^2
//! K Phi = mu (M rho~ - c l)
//! [(i/tau) M - S/2] u^(s+1) = [(i/tau) M + S/2] u^n,  w = beta Phi + V + [cubic] rho~
//! ```
//!
//! starting from `u^(0) = u^n`, stopping on the M-norm of successive iterates.

use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::diagnostics::mass;
use crate::error::{Error, Result};
use crate::linalg::{SolveReport, SolverConfig};
use crate::problem::ProblemSpec;
use crate::scheme::{step_count, Operators, Solvers};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IterationPolicy {
    FixedSteps(usize),
    Tolerance { tol: f64, max_iter: usize },
}

impl Default for IterationPolicy {
    fn default() -> Self {
        IterationPolicy::FixedSteps(2)
    }
}

impl IterationPolicy {
    pub fn tolerance(tol: f64) -> Self {
        IterationPolicy::Tolerance { tol, max_iter: 100 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            IterationPolicy::FixedSteps(0) => Err(Error::Config("iterative.fixed_steps must be positive".into())),
            IterationPolicy::Tolerance { tol, max_iter } if !(tol > 0.0) || max_iter == 0 => {
                Err(Error::Config(format!("invalid iterative tolerance {tol} / max_iter {max_iter}")))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            IterationPolicy::FixedSteps(s) => format!("fixed_steps({s})"),
            IterationPolicy::Tolerance { tol, .. } => format!("tolerance({tol:e})"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationStats {
    /// Fixed-point iterations taken in each time step.
    pub iterations: Vec<usize>,
    /// Linear solves performed (three per iteration).
    pub inner_solves: usize,
    pub wall: Duration,
    pub worst_residual: f64,
}

impl IterationStats {
    pub fn total_iterations(&self) -> usize {
        self.iterations.iter().sum()
    }

    pub fn mean_iterations(&self) -> f64 {
        if self.iterations.is_empty() {
            0.0
        } else {
            self.total_iterations() as f64 / self.iterations.len() as f64
        }
    }

    fn note(&mut self, r: &SolveReport) {
        self.inner_solves += 1;
        self.worst_residual = self.worst_residual.max(r.rel_residual);
    }
}

pub struct IterativeScheme {
    spec: ProblemSpec,
    tau: f64,
    policy: IterationPolicy,
    ops: Arc<Operators>,
    solvers: Solvers,
}

impl IterativeScheme {
    pub fn new(
        spec: ProblemSpec,
        ops: Arc<Operators>,
        tau: f64,
        policy: IterationPolicy,
        cfg: SolverConfig,
    ) -> Result<Self> {
        spec.validate()?;
        policy.validate()?;
        step_count(0.0, tau)?;
        let solvers = Solvers::new(&ops, &spec, tau, cfg)?;
        Ok(Self { spec, tau, policy, ops, solvers })
    }

    pub fn operators(&self) -> &Arc<Operators> {
        &self.ops
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn init(&self) -> Vec<Complex64> {
        self.ops.interpolate_interior(|x, y| self.spec.initial.eval(x, y))
    }

    /// Potential `Phi` and projected density for a given wave function,
    /// `K Phi = mu (P|v|^2 - c)`.
    pub fn coupling_fields(&mut self, v: &[Complex64], stats: &mut IterationStats) -> Result<(Vec<f64>, Vec<f64>)> {
        let ops = self.ops.clone();
        let load = ops.density_load(v, 1.0)?;
        let (rho, r1) = self.solvers.solve_mass(&ops, &load)?;
        stats.note(&r1);
        let rhs: Vec<f64> =
            load.iter().zip(ops.ones_load()).map(|(b, l)| self.spec.mu * (b - self.spec.c * l)).collect();
        let (phi, r2) = self.solvers.solve_poisson(&ops, &rhs)?;
        stats.note(&r2);
        Ok((phi, rho))
    }

    /// One time step; appends the iteration count to `stats`.
    pub fn step(&mut self, un: &[Complex64], stats: &mut IterationStats) -> Result<Vec<Complex64>> {
        let ops = self.ops.clone();
        let mut cur = un.to_vec();
        let mut iters = 0;
        loop {
            let ubar: Vec<Complex64> = cur.iter().zip(un).map(|(a, b)| 0.5 * (a + b)).collect();
            let (phi, rho) = self.coupling_fields(&ubar, stats)?;
            let w = ops.coupling_weight(&self.spec, &phi, &rho)?;
            let (next, r) = self.solvers.solve_cn(&ops, self.spec.alpha, self.tau, &w, un)?;
            stats.note(&r);
            iters += 1;
            let diff: Vec<Complex64> = next.iter().zip(&cur).map(|(a, b)| a - b).collect();
            let update = mass(&diff, ops.mass()).max(0.0).sqrt();
            cur = next;
            match self.policy {
                IterationPolicy::FixedSteps(s) if iters >= s => break,
                IterationPolicy::FixedSteps(_) => {}
                IterationPolicy::Tolerance { tol, .. } if update <= tol => break,
                IterationPolicy::Tolerance { max_iter, .. } if iters >= max_iter => {
                    return Err(Error::NonConvergence { iterations: iters, last_update: update });
                }
                IterationPolicy::Tolerance { .. } => {}
            }
        }
        stats.iterations.push(iters);
        Ok(cur)
    }

    /// Runs from the interpolated initial data to `t_final`, calling
    /// `visit(n, u^n)` at every level including the first.
    pub fn run(
        &mut self,
        t_final: f64,
        mut visit: impl FnMut(usize, &[Complex64], &mut Self) -> Result<()>,
    ) -> Result<(Vec<Complex64>, IterationStats)> {
        let n_steps = step_count(t_final, self.tau)?;
        let mut stats = IterationStats::default();
        let start = Instant::now();
        let mut u = self.init();
        visit(0, &u, self)?;
        for n in 1..=n_steps {
            u = self.step(&u, &mut stats)?;
            visit(n, &u, self)?;
        }
        stats.wall = start.elapsed();
        Ok((u, stats))
    }
}
