//! Criterion benchmarks for assembly, factorization and time stepping; see
//! `benches/solver.rs`.

use std::sync::Arc;

use rcnfem::{Operators, Potential, ProblemSpec};

/// Operators of the full model with the saddle potential on an `nc x nc` mesh.
pub fn operators(nc: usize, k: usize) -> Arc<Operators> {
    let spec = ProblemSpec::sp_full(Potential::Saddle);
    Arc::new(Operators::for_mesh(&spec, nc, nc, k).expect("benchmark mesh is valid"))
}
