use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use vqdyn_bench::{ansatz, problem, tfim_terms};
use vqdyn_core::circuit::AnsatzName;
use vqdyn_core::estimator::{Convention, Estimator, EstimatorConfig, EstimatorMode, GridDatabase};
use vqdyn_core::hamiltonian::hamiltonian_at;
use vqdyn_core::vqs::{bootstrap_errors, run};
use vqdyn_core::Schedule;

const MODES: [EstimatorMode; 3] = [EstimatorMode::Exact, EstimatorMode::HadamardExact, EstimatorMode::HadamardShots];

fn linear_system(c: &mut Criterion) {
    let mut g = c.benchmark_group("assemble_system");
    for name in [AnsatzName::Tfim2Even, AnsatzName::Tfim3Qaoa] {
        let circuit = ansatz(name);
        let (h0, ht) = tfim_terms(name.n_qubits());
        let h = hamiltonian_at(&h0, &ht, &Schedule::new(10.0).unwrap(), 5.0).unwrap();
        for mode in MODES {
            let config = EstimatorConfig::with_mode(mode);
            let est = Estimator::new(&circuit, &config).unwrap();
            g.bench_function(BenchmarkId::new(name.as_str(), mode.as_str()), |b| {
                b.iter(|| black_box(est.system(&[0.4, -0.2], Convention::Tdvp, &[&h], 0).unwrap()))
            });
        }
    }
    g.finish();
}

fn grid_build(c: &mut Criterion) {
    let circuit = ansatz(AnsatzName::Tfim2Even);
    let (h0, ht) = tfim_terms(2);
    let config = EstimatorConfig::with_mode(EstimatorMode::GridInterp);
    c.bench_function("grid_build_20x20", |b| {
        b.iter(|| black_box(GridDatabase::build(&circuit, &h0, &ht, Convention::Tdvp, &config).unwrap()))
    });
}

fn trajectories(c: &mut Criterion) {
    let mut g = c.benchmark_group("run_T1");
    g.sample_size(10);
    for name in [AnsatzName::Tfim2Even, AnsatzName::Tfim3Qaoa] {
        for mode in MODES {
            let p = problem(name, mode, 1.0);
            g.bench_function(BenchmarkId::new(name.as_str(), mode.as_str()), |b| b.iter(|| black_box(run(&p).unwrap())));
        }
    }
    g.finish();
}

fn bootstrap(c: &mut Criterion) {
    let p = problem(AnsatzName::Tfim2Even, EstimatorMode::Exact, 1.0);
    let tr = run(&p).unwrap();
    let mut g = c.benchmark_group("bootstrap_T1");
    g.sample_size(10);
    g.bench_function("100_samples", |b| b.iter(|| black_box(bootstrap_errors(&p, &tr, 100, 0.1, 1).unwrap())));
    g.finish();
}

criterion_group!(benches, linear_system, grid_build, trajectories, bootstrap);
criterion_main!(benches);
