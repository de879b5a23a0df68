use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rcnfem::linalg::{LdltFactor, LdltSymbolic};
use rcnfem::{Operators, Potential, ProblemSpec, RelaxationScheme, SolverConfig};
use rcnfem_bench::operators;

fn assembly(c: &mut Criterion) {
    let spec = ProblemSpec::sp_full(Potential::Saddle);
    let mut g = c.benchmark_group("assembly");
    for (nc, k) in [(32, 1), (32, 2)] {
        g.bench_with_input(BenchmarkId::new(format!("k{k}"), nc), &nc, |b, &nc| {
            b.iter(|| Operators::for_mesh(&spec, nc, nc, k).unwrap())
        });
    }
    g.finish();
}

fn factorization(c: &mut Criterion) {
    let mut g = c.benchmark_group("ldlt_stiffness");
    g.sample_size(20);
    for (nc, k) in [(32, 2), (64, 2)] {
        let ops = operators(nc, k);
        let sym = Arc::new(LdltSymbolic::analyze(ops.stiffness().pattern(), ops.ordering()).unwrap());
        g.bench_with_input(BenchmarkId::new(format!("k{k}"), nc), &nc, |b, _| {
            b.iter(|| LdltFactor::factor(sym.clone(), ops.stiffness()).unwrap())
        });
    }
    g.finish();
}

fn time_step(c: &mut Criterion) {
    let spec = ProblemSpec::sp_full(Potential::Saddle);
    let mut g = c.benchmark_group("relaxation_step");
    g.sample_size(20);
    for (nc, k) in [(32, 2), (40, 2)] {
        let ops = operators(nc, k);
        let mut scheme = RelaxationScheme::new(spec.clone(), ops, 0.01, SolverConfig::default()).unwrap();
        let state = scheme.init().unwrap();
        g.bench_with_input(BenchmarkId::new(format!("k{k}"), nc), &nc, |b, _| b.iter(|| scheme.step(&state).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, assembly, factorization, time_step);
criterion_main!(benches);
