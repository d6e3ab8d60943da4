use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use genewton::exec::{self, map_range_parallel, map_range_sequential};
use genewton::harness::catalog;
use genewton::inner::enumerate_oracle;
use genewton::newton::solve;
use genewton::{sampling, OuterConfig, Vector};

type Runner = fn(usize, &(dyn Fn(usize) -> f64 + Sync)) -> Vec<f64>;

fn sequential(n: usize, f: &(dyn Fn(usize) -> f64 + Sync)) -> Vec<f64> {
    map_range_sequential(n, f)
}

fn parallel(n: usize, f: &(dyn Fn(usize) -> f64 + Sync)) -> Vec<f64> {
    map_range_parallel(n, f)
}

const RUNNERS: [(&str, Runner); 2] = [("sequential", sequential), ("parallel", parallel)];

fn oracle_batch(c: &mut Criterion) {
    let problems: Vec<_> = (0..64).map(|i| catalog::random_affine_box(8, i)).collect();
    let work = |i: usize| enumerate_oracle(&problems[i]).map(|s| s.residual).unwrap_or(f64::NAN);
    let mut g = c.benchmark_group("oracle_batch_n8");
    g.sample_size(10);
    for (name, run) in RUNNERS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| black_box(run(problems.len(), &work))));
    }
    g.finish();
}

fn probe_trials(c: &mut Criterion) {
    let params: BTreeMap<String, f64> = [("n".to_string(), 12.0)].into_iter().collect();
    let file = catalog::entry("affine-box-nd", &params).unwrap().file;
    let cfg = OuterConfig::default();
    let work = |i: usize| {
        let mut rng = exec::sample_rng(1, i as u64);
        let start = sampling::uniform_in_ball(&mut rng, &Vector::zeros(12), 5.0);
        let mut f = file.clone();
        f.x0 = Some(start.iter().copied().collect());
        let p = f.build().unwrap().problem;
        solve(&p, &cfg).iterations() as f64
    };
    let mut g = c.benchmark_group("probe_trials_n12");
    for (name, run) in RUNNERS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| black_box(run(256, &work))));
    }
    g.finish();
}

fn lipschitz_pairs(c: &mut Criterion) {
    let p = catalog::entry("exp-root", &BTreeMap::new()).unwrap().build().unwrap().problem;
    let work = |i: usize| {
        let mut rng = exec::sample_rng(2, i as u64);
        let x = sampling::uniform_in_ball(&mut rng, p.x0(), p.radius());
        let y = sampling::uniform_in_ball(&mut rng, p.x0(), p.radius());
        (p.eval_j(&x) - p.eval_j(&y)).norm() / (&x - &y).norm()
    };
    let mut g = c.benchmark_group("lipschitz_pairs");
    for (name, run) in RUNNERS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| black_box(run(20_000, &work))));
    }
    g.finish();
}

criterion_group!(benches, oracle_batch, probe_trials, lipschitz_pairs);
criterion_main!(benches);
