//! Linear solves under a relative-residual contract.
//!
//! Every successful solve has `||b - A x|| / ||b|| <= rel_tol`, checked with an
//! independent sparse mat-vec after the solver returns.

mod krylov;
mod ldlt;
mod ordering;

pub use krylov::{bicgstab, pcg, IdentityPreconditioner, Jacobi, KrylovOutcome, Preconditioner};
pub use ldlt::{LdltFactor, LdltSymbolic};
pub use ordering::{nested_dissection, Ordering};

use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scalar::{norm2, Scalar};
use crate::sparse::CsrMatrix;

/// Systems up to this size use a direct factorization under [`SolverMethod::Auto`].
pub const AUTO_DIRECT_LIMIT: usize = 30_000;

const MAX_REFINEMENTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    Direct,
    Iterative,
    /// Direct for symmetric positive definite systems and for general systems
    /// up to [`AUTO_DIRECT_LIMIT`] unknowns, iterative beyond.
    Auto,
}

impl std::str::FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" | "direct_factorization" => Ok(Self::Direct),
            "iterative" | "iterative_krylov" => Ok(Self::Iterative),
            "auto" => Ok(Self::Auto),
            _ => Err(Error::Config(format!("unknown solver method '{s}'"))),
        }
    }
}

impl SolverMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Direct => "direct",
            Self::Iterative => "iterative",
            Self::Auto => "auto",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub rel_tol: f64,
    /// Iteration cap; `None` means `10 n`.
    pub max_iter: Option<usize>,
    pub method: SolverMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-12, max_iter: None, method: SolverMethod::Auto }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-6) {
            return Err(Error::Config(format!("solver.rel_tol must lie in (0, 1e-6], got {}", self.rel_tol)));
        }
        if self.max_iter == Some(0) {
            return Err(Error::Config("solver.max_iter must be positive".into()));
        }
        Ok(())
    }

    fn cap(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(10 * n.max(1))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveReport {
    /// Krylov iterations, or one plus the refinement sweeps for direct solves.
    pub iterations: usize,
    pub rel_residual: f64,
    /// True when a previously computed symbolic analysis (or factorization)
    /// was reused.
    pub reused: bool,
    pub wall: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    /// Hermitian positive definite: conjugate gradients when iterative.
    Spd,
    /// Anything else: BiCGSTAB when iterative.
    General,
}

/// Solver for a family of matrices on one sparsity pattern. Direct solves
/// keep the symbolic analysis across calls and skip the numeric factorization
/// when the values have not changed.
pub struct SparseSolver<T: Scalar> {
    cfg: SolverConfig,
    kind: SystemKind,
    ordering: Ordering,
    symbolic: Option<Arc<LdltSymbolic>>,
    factor: Option<LdltFactor<T>>,
    factored_values: Vec<T>,
    precond: Option<Arc<dyn Preconditioner<T>>>,
}

impl<T: Scalar> SparseSolver<T> {
    pub fn new(cfg: SolverConfig, kind: SystemKind, ordering: Ordering) -> Self {
        Self { cfg, kind, ordering, symbolic: None, factor: None, factored_values: Vec::new(), precond: None }
    }

    /// Preconditioner for the iterative path (Jacobi when unset).
    pub fn set_preconditioner(&mut self, p: Arc<dyn Preconditioner<T>>) {
        self.precond = Some(p);
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn uses_direct(&self, n: usize) -> bool {
        match self.cfg.method {
            SolverMethod::Direct => true,
            SolverMethod::Iterative => false,
            SolverMethod::Auto => self.kind == SystemKind::Spd || n <= AUTO_DIRECT_LIMIT,
        }
    }

    /// The current numeric factorization, if a direct solve has happened.
    pub fn factorization(&self) -> Option<&LdltFactor<T>> {
        self.factor.as_ref()
    }

    pub fn solve(&mut self, a: &CsrMatrix<T>, b: &[T]) -> Result<(Vec<T>, SolveReport)> {
        let start = Instant::now();
        let n = a.nrows();
        if a.ncols() != n || b.len() != n {
            return Err(Error::Dimension(format!("{}x{} system with rhs of length {}", n, a.ncols(), b.len())));
        }
        if let Some(sym) = &self.symbolic {
            if !sym.matches(a.pattern()) {
                return Err(Error::Dimension("matrix pattern differs from the solver's pattern".into()));
            }
        }
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            return Ok((vec![T::zero(); n], SolveReport { wall: start.elapsed(), ..SolveReport::default() }));
        }
        let (x, mut report) = if self.uses_direct(n) { self.solve_direct(a, b)? } else { self.solve_iterative(a, b)? };
        report.wall = start.elapsed();
        if !(report.rel_residual <= self.cfg.rel_tol) {
            return Err(Error::SolverFailure {
                reason: format!("relative residual above tolerance {:.1e}", self.cfg.rel_tol),
                report,
            });
        }
        Ok((x, report))
    }

    fn solve_direct(&mut self, a: &CsrMatrix<T>, b: &[T]) -> Result<(Vec<T>, SolveReport)> {
        let mut reused = true;
        if self.symbolic.is_none() {
            self.symbolic = Some(Arc::new(LdltSymbolic::analyze(a.pattern(), &self.ordering)?));
            reused = false;
        }
        if self.factor.is_none() || self.factored_values != a.values() {
            let sym = self.symbolic.clone().expect("analyzed above");
            self.factor = Some(LdltFactor::factor(sym, a)?);
            self.factored_values.clear();
            self.factored_values.extend_from_slice(a.values());
        }
        let f = self.factor.as_ref().expect("factored above");
        let bnorm = norm2(b);
        let mut x = f.solve(b);
        let mut r = residual(a, b, &x);
        let mut rel = norm2(&r) / bnorm;
        let mut sweeps = 1;
        while rel > self.cfg.rel_tol && sweeps <= MAX_REFINEMENTS {
            let d = f.solve(&r);
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += *di;
            }
            r = residual(a, b, &x);
            let new_rel = norm2(&r) / bnorm;
            sweeps += 1;
            if new_rel >= rel {
                rel = new_rel;
                break;
            }
            rel = new_rel;
        }
        Ok((x, SolveReport { iterations: sweeps, rel_residual: rel, reused, wall: Duration::ZERO }))
    }

    fn solve_iterative(&mut self, a: &CsrMatrix<T>, b: &[T]) -> Result<(Vec<T>, SolveReport)> {
        let jacobi;
        let pc: &dyn Preconditioner<T> = match &self.precond {
            Some(p) => p.as_ref(),
            None => {
                jacobi = Jacobi::new(a);
                &jacobi
            }
        };
        let mut x = vec![T::zero(); a.nrows()];
        let cap = self.cfg.cap(a.nrows());
        let out = match self.kind {
            SystemKind::Spd => pcg(a, b, &mut x, pc, self.cfg.rel_tol, cap),
            SystemKind::General => bicgstab(a, b, &mut x, pc, self.cfg.rel_tol, cap),
        };
        let rel = norm2(&residual(a, b, &x)) / norm2(b);
        Ok((x, SolveReport { iterations: out.iterations, rel_residual: rel, reused: false, wall: Duration::ZERO }))
    }
}

fn residual<T: Scalar>(a: &CsrMatrix<T>, b: &[T], x: &[T]) -> Vec<T> {
    let mut r: Vec<T> = a.matvec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = *bi - *ri;
    }
    r
}

/// Solves a real symmetric positive definite system.
pub fn solve_spd(a: &CsrMatrix<f64>, b: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    let asym = a.asymmetry();
    if asym > 1e-12 {
        return Err(Error::Contract(format!("matrix is not symmetric (relative asymmetry {asym:.2e})")));
    }
    SparseSolver::new(*cfg, SystemKind::Spd, Ordering::Natural).solve(a, b)
}

/// Solves a complex system; the matrix must be structurally symmetric for the
/// direct path.
pub fn solve_complex(
    a: &CsrMatrix<Complex64>,
    b: &[Complex64],
    cfg: &SolverConfig,
) -> Result<(Vec<Complex64>, SolveReport)> {
    cfg.validate()?;
    SparseSolver::new(*cfg, SystemKind::General, Ordering::Natural).solve(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn spd_examples() {
        let cfg = SolverConfig::default();
        let id = CsrMatrix::<f64>::identity(3);
        let (x, _) = solve_spd(&id, &[1.0, -2.0, 3.5], &cfg).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 3.5]);

        let a = CsrMatrix::from_dense(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        for method in [SolverMethod::Direct, SolverMethod::Iterative] {
            let (x, rep) = solve_spd(&a, &[3.0, 3.0], &SolverConfig { method, ..cfg }).unwrap();
            assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
            assert!(rep.rel_residual <= 1e-12);
        }
        let (x, rep) = solve_spd(&a, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!((x, rep.iterations), (vec![0.0, 0.0], 0));
    }

    #[test]
    fn asymmetric_rejected() {
        let a = CsrMatrix::from_dense(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert!(matches!(solve_spd(&a, &[1.0, 1.0], &SolverConfig::default()), Err(Error::Contract(_))));
    }

    #[test]
    fn complex_examples() {
        let cfg = SolverConfig::default();
        let a = CsrMatrix::from_dense(3, 3, &[c(0., 1.), c(0., 0.), c(0., 0.), c(0., 0.), c(0., 1.), c(0., 0.), c(0., 0.), c(0., 0.), c(0., 1.)]);
        for method in [SolverMethod::Direct, SolverMethod::Iterative] {
            let (x, _) = solve_complex(&a, &[c(1., 0.); 3], &SolverConfig { method, ..cfg }).unwrap();
            assert!(x.iter().all(|v| (*v - c(0., -1.)).norm() < 1e-15));
        }
        let d = CsrMatrix::from_dense(2, 2, &[c(0., 1.), c(0., 0.), c(0., 0.), c(0., 2.)]);
        let (x, _) = solve_complex(&d, &[c(0., 1.), c(0., 2.)], &cfg).unwrap();
        assert!((x[0] - c(1., 0.)).norm() < 1e-15 && (x[1] - c(1., 0.)).norm() < 1e-15);
    }

    #[test]
    fn reuse_is_bit_identical_and_linear() {
        let a = CsrMatrix::from_dense(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let b = [1.0, 2.0, 3.0];
        let cfg = SolverConfig { method: SolverMethod::Direct, ..SolverConfig::default() };
        let mut s = SparseSolver::new(cfg, SystemKind::Spd, Ordering::Natural);
        let (x1, r1) = s.solve(&a, &b).unwrap();
        let (x2, r2) = s.solve(&a, &b).unwrap();
        assert_eq!(x1, x2);
        assert!(!r1.reused && r2.reused);
        let (x3, _) = s.solve(&a.scaled(2.0), &b.map(|v| 2.0 * v)).unwrap();
        for (p, q) in x1.iter().zip(&x3) {
            assert!((p - q).abs() < 1e-15);
        }
        let other = CsrMatrix::<f64>::identity(3);
        assert!(matches!(s.solve(&other, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn tolerance_validation() {
        let bad = SolverConfig { rel_tol: 1e-3, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
        assert!("banana".parse::<SolverMethod>().is_err());
    }
}
