// Hot kernels timed on a one-thread rayon pool and on the default pool.
// Building with `--no-default-features` swaps in the sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use su2qlm::ed::{build_hamiltonian, chain_gates, enumerate_sector_basis};
use su2qlm::record::measure_observables;
use su2qlm::tebd::{build_propagators, ground_state_search, trotter_sweep, AnnealSchedule, Stage};
use su2qlm::ModelParams;

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("one-thread", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("default", rayon::ThreadPoolBuilder::new().build().unwrap()),
    ]
}

fn warm_state(len: usize, chi: usize) -> su2qlm::mps::SymmetricMps {
    let p = ModelParams::new(2.0, len, len as u32).unwrap();
    let schedule = AnnealSchedule {
        stages: vec![Stage { dtau: 0.1, max_sweeps: 40, tolerance: 0.0 }],
        check_interval: 40,
    };
    ground_state_search(&p, chi, 1e-12, &schedule, &[1]).unwrap().state
}

fn bench_sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("trotter_sweep_L16_chi64");
    g.sample_size(10);
    let state = warm_state(16, 64);
    let gates = chain_gates(state.params()).unwrap();
    let half = build_propagators(&gates, 0.01).unwrap();
    let full = build_propagators(&gates, 0.02).unwrap();
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let mut s = state.clone();
                pool.install(|| trotter_sweep(&mut s, &half, &full, 64, 1e-12).unwrap())
            })
        });
    }
    g.finish();
}

fn bench_observables(c: &mut Criterion) {
    let mut g = c.benchmark_group("observables_L16_chi64");
    g.sample_size(10);
    let state = warm_state(16, 64);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| measure_observables(&state).unwrap()))
        });
    }
    g.finish();
}

fn bench_ed_build(c: &mut Criterion) {
    let mut g = c.benchmark_group("ed_hamiltonian_L6_N6");
    g.sample_size(10);
    let p = ModelParams::new(1.0, 6, 6).unwrap();
    let basis = enumerate_sector_basis(6, 6).unwrap();
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| build_hamiltonian(&p, &basis).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench_sweep, bench_observables, bench_ed_build);
criterion_main!(benches);
