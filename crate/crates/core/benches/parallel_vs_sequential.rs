use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mip_core::him::him_statistics;
use mip_core::mip::{min_max_clean_set, MipConfig};
use mip_core::robust_stats::standardize_with;
use mip_core::simbench::{gen_example2, ScenarioKind, ScenarioSpec};
use mip_core::subsample::{min_max_all, subset_size, SubsetParams};
use mip_core::{EstimatorMode, Exec};

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn data(p: usize) -> mip_core::Dataset {
    gen_example2(&ScenarioSpec::new(ScenarioKind::Example2, 8.0, 1).with_size(100, p))
        .unwrap()
        .data
}

fn standardization(c: &mut Criterion) {
    let d = data(1000);
    let mut group = c.benchmark_group("standardize");
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| {
            b.iter(|| standardize_with(&d, EstimatorMode::Robust, None, exec).unwrap())
        });
    }
    group.finish();
}

fn min_max_pass(c: &mut Criterion) {
    let mut group = c.benchmark_group("min_max_all");
    group.sample_size(10);
    for p in [200, 1000] {
        let z = standardize_with(&data(p), EstimatorMode::Robust, None, Exec::Parallel).unwrap();
        let active: Vec<usize> = (0..z.n()).collect();
        for shared in [false, true] {
            let params = SubsetParams {
                m: 100,
                n_sub: subset_size(z.n(), 0.5),
                seed: 3,
                round: 0,
                shared,
            };
            for (name, exec) in POLICIES {
                let id = format!("{name}/{}", if shared { "shared" } else { "per_target" });
                group.bench_with_input(BenchmarkId::new(id, p), &params, |b, params| {
                    b.iter(|| min_max_all(&z, &active, params, exec).unwrap())
                });
            }
        }
    }
    group.finish();
}

fn clean_set(c: &mut Criterion) {
    let z = standardize_with(&data(1000), EstimatorMode::Robust, None, Exec::Parallel).unwrap();
    let mut group = c.benchmark_group("min_max_clean_set");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        let cfg = MipConfig {
            exec,
            seed: 5,
            ..MipConfig::default()
        };
        group.bench_function(name, |b| b.iter(|| min_max_clean_set(&z, &cfg).unwrap()));
    }
    group.finish();
}

fn leave_one_out(c: &mut Criterion) {
    let z = standardize_with(&data(1000), EstimatorMode::Robust, None, Exec::Parallel).unwrap();
    let mut group = c.benchmark_group("him_statistics");
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| b.iter(|| him_statistics(&z, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, standardization, min_max_pass, clean_set, leave_one_out);
criterion_main!(benches);
