//! Relaxation Crank-Nicolson finite element solver for the 2D
//! Schrodinger-Poisson equation, with an iterative Crank-Nicolson baseline,
//! conservation diagnostics and two-level convergence studies.

pub mod assembly;
pub mod baseline;
pub mod diagnostics;
pub mod error;
pub mod fespace;
pub mod linalg;
pub mod mesh;
pub mod problem;
pub mod scalar;
pub mod scheme;
pub mod sparse;

pub use num_complex::Complex64;

pub use assembly::{Assembler, DirichletReduction, PointEvaluator, Weight};
pub use baseline::{IterationPolicy, IterationStats, IterativeScheme};
pub use diagnostics::{ConvergenceRow, DiagnosticsRecord, Recorder};
pub use error::{Error, Result};
pub use fespace::{FeSpace, Field, QkBasis, QuadraturePurpose, QuadratureRule};
pub use linalg::{SolveReport, SolverConfig, SolverMethod};
pub use mesh::{RectDomain, StructuredQuadMesh};
pub use problem::{InitialCondition, Potential, ProblemSpec};
pub use scheme::{HalfStep, Observer, Operators, PsiInit, RelaxationScheme, SchemeState};
pub use sparse::{CsrMatrix, CsrPattern};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
