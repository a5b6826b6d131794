use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use contact_qsd::exact::{build_generator, qsd_eigen, EigenOptions};
use contact_qsd::qsd::{fleming_viot_estimate, FlemingViotConfig};
use contact_qsd::structures::{find_cut_break, BreakCheck};
use contact_qsd::{jump::jump_evolve, EventField};
use contact_qsd_bench::interval;

fn simulators(c: &mut Criterion) {
    let mut g = c.benchmark_group("evolve_t5");
    for n in [1, 10, 30] {
        let eta0 = interval(n);
        g.bench_with_input(BenchmarkId::new("jump_chain", n), &eta0, |b, eta0| {
            let mut seed = 0;
            b.iter(|| {
                seed += 1;
                black_box(jump_evolve(eta0, 1.0, 5.0, seed))
            })
        });
        g.bench_with_input(BenchmarkId::new("graphical", n), &eta0, |b, eta0| {
            let mut seed = 0;
            b.iter(|| {
                seed += 1;
                let f = EventField::poisson(seed, 1, 1.0, 5.0).unwrap();
                black_box(f.evolve(eta0, 0.0, 5.0))
            })
        });
    }
    g.finish();
}

fn exact_solver(c: &mut Criterion) {
    let mut g = c.benchmark_group("exact");
    g.sample_size(10);
    for w in [8, 12] {
        g.bench_with_input(BenchmarkId::new("build_and_solve", w), &w, |b, &w| {
            b.iter(|| {
                let gen = build_generator(1, w, 1.0).unwrap();
                black_box(qsd_eigen(&gen, EigenOptions::default()).unwrap().alpha)
            })
        });
    }
    g.finish();
}

fn estimators(c: &mut Criterion) {
    let mut g = c.benchmark_group("estimators");
    g.sample_size(10);
    g.bench_function("fleming_viot_n1000_t50", |b| {
        b.iter(|| {
            let cfg = FlemingViotConfig {
                dim: 1,
                particles: 1000,
                lambda: 1.0,
                t_burn: 10.0,
                t_sample: 40.0,
                seed: 1,
                initial: None,
            };
            black_box(fleming_viot_estimate(&cfg).unwrap().alpha_hat)
        })
    });
    g.bench_function("cut_break_t10", |b| {
        let eta0 = interval(1);
        let mut seed = 0;
        b.iter(|| {
            seed += 1;
            let f = EventField::poisson(seed, 1, 1.0, 10.0).unwrap();
            black_box(find_cut_break(&f, &eta0, 10.0, 10f64.sqrt().exp(), BreakCheck::Dual).unwrap())
        })
    });
    g.finish();
}

criterion_group!(benches, simulators, exact_solver, estimators);
criterion_main!(benches);
