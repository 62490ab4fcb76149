use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use satlab::counter::{count_models_with, CountMethod, CountOptions};
use satlab::gen::{build_pool, gen_ksat, grid_specs, Family, GridKind, PoolOptions};
use satlab::profile::{parse_alpha_list, phase_profile};
use satlab::solver::SolverOptions;
use satlab::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn pool(c: &mut Criterion) {
    let specs = grid_specs(Family::SAT3, 6..=8, GridKind::Dataset, 3, 1).unwrap();
    let mut g = c.benchmark_group("build_pool");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = PoolOptions { exec, ..PoolOptions::default() };
        g.bench_function(name, |b| b.iter(|| build_pool(black_box(&specs), &opts).unwrap()));
    }
    g.finish();
}

fn enumerate(c: &mut Criterion) {
    let mut g = c.benchmark_group("enum_count");
    g.sample_size(10);
    for n in [16u32, 20] {
        let f = gen_ksat(n, (4.0 * n as f64) as usize, 3, 5).unwrap();
        for (name, exec) in MODES {
            let opts = CountOptions { exec, ..CountOptions::default() };
            g.bench_with_input(BenchmarkId::new(name, n), &f, |b, f| {
                b.iter(|| count_models_with(f, CountMethod::Enum, &opts).unwrap())
            });
        }
    }
    g.finish();
}

fn profile(c: &mut Criterion) {
    let alphas = parse_alpha_list("3.6:5.0:0.2").unwrap();
    let mut g = c.benchmark_group("phase_profile_n50");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| phase_profile(Family::SAT3, 50, &alphas, 20, 3, &SolverOptions::default(), exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, pool, enumerate, profile);
criterion_main!(benches);
