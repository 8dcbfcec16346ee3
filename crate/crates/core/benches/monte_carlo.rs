//! Parallel against sequential execution of the same campaign.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eqf_core::sim::{monte_carlo, Execution, MonteCarloConfig, ScenarioConfig};

fn campaign(c: &mut Criterion) {
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    for n_runs in [16, 64] {
        let cfg = MonteCarloConfig {
            scenario: ScenarioConfig { duration: 10.0, ..Default::default() },
            n_runs,
            ..Default::default()
        };
        for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, n_runs), &cfg, |b, cfg| {
                b.iter(|| monte_carlo(cfg, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, campaign);
criterion_main!(benches);
