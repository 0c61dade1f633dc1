use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use vqdyn_bench::{layered_circuit, redundant_circuit, tfim_terms};
use vqdyn_core::circuit::compile;
use vqdyn_core::hamiltonian::{eigenspectrum, hamiltonian_at};
use vqdyn_core::{expect_pauli, Schedule, StateVec};

fn gates(c: &mut Criterion) {
    let mut g = c.benchmark_group("apply_circuit");
    for n in [4, 8, 12, 16] {
        let circuit = layered_circuit(n, 4);
        g.bench_with_input(BenchmarkId::from_parameter(n), &circuit, |b, circuit| {
            b.iter(|| {
                let mut s = StateVec::zero(n);
                s.apply_all(circuit).unwrap();
                black_box(s)
            })
        });
    }
    g.finish();
}

fn expectation(c: &mut Criterion) {
    let mut g = c.benchmark_group("expect_tfim");
    for n in [4, 8, 12] {
        let (h0, ht) = tfim_terms(n);
        let h = hamiltonian_at(&h0, &ht, &Schedule::new(10.0).unwrap(), 5.0).unwrap();
        let mut s = StateVec::zero(n);
        s.apply_all(&layered_circuit(n, 2)).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &(s, h), |b, (s, h)| b.iter(|| black_box(expect_pauli(s, h).unwrap())));
    }
    g.finish();
}

fn compiler(c: &mut Criterion) {
    let mut g = c.benchmark_group("compile");
    for blocks in [10, 100, 1000] {
        let circuit = redundant_circuit(4, blocks);
        g.bench_with_input(BenchmarkId::from_parameter(blocks), &circuit, |b, circuit| b.iter(|| black_box(compile(circuit, 4))));
    }
    g.finish();
}

fn spectrum(c: &mut Criterion) {
    let mut g = c.benchmark_group("eigenspectrum");
    for n in [2, 4, 6, 8] {
        let (h0, ht) = tfim_terms(n);
        let h = hamiltonian_at(&h0, &ht, &Schedule::new(10.0).unwrap(), 5.0).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &h, |b, h| b.iter(|| black_box(eigenspectrum(h).unwrap())));
    }
    g.finish();
}

criterion_group!(benches, gates, expectation, compiler, spectrum);
criterion_main!(benches);
