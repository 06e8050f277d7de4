use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use varopt_ais::{de_solve, dlog_g, exact_log_z, run_ais, GTable, Schedule};
use varopt_ais_bench::desk_path;

fn bench_ais(c: &mut Criterion) {
    let path = desk_path();
    let mut group = c.benchmark_group("run_ais");
    group.sample_size(10);
    for k in [200usize, 1000] {
        let schedule = Schedule::linear(k);
        group.bench_with_input(BenchmarkId::new("linear", k), &schedule, |b, schedule| {
            b.iter(|| run_ais(&path, schedule, 64, 7, &[], false).unwrap());
        });
    }
    group.finish();
}

fn bench_gibbs_sweep(c: &mut Criterion) {
    let path = desk_path();
    c.bench_function("gibbs_sweep", |b| {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut v = path.sample_base(&mut rng);
        b.iter(|| {
            v = path.gibbs_transition(&v, 0.7, &mut rng);
            black_box(v.bit(0))
        });
    });
}

fn bench_schedule_solver(c: &mut Criterion) {
    let table = dlog_g(&GTable::from_function(|b| (2.0 * b).exp(), 1000));
    c.bench_function("de_solve_exp_profile", |b| {
        b.iter(|| de_solve(black_box(&table), 1000, 1e-6, 100_000).unwrap());
    });
}

fn bench_exact_log_z(c: &mut Criterion) {
    let path = desk_path();
    c.bench_function("exact_log_z_d12_m10", |b| {
        b.iter(|| exact_log_z(black_box(path.target())).unwrap());
    });
}

criterion_group!(
    benches,
    bench_ais,
    bench_gibbs_sweep,
    bench_schedule_solver,
    bench_exact_log_z
);
criterion_main!(benches);
