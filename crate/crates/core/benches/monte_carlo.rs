use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use netlearn_core::dynamics::{run_monte_carlo, McOptions};
use netlearn_core::inference::EngineChoice;
use netlearn_core::network::{Network, Topology};
use netlearn_core::signal::SignalModel;

fn bench_monte_carlo(c: &mut Criterion) {
    let model = SignalModel::symmetric_binary(0.9).unwrap();
    let cases = [(Topology::Complete, 3, 20, 20_000u64), (Topology::Star, 11, 20, 5_000)];
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    for (topology, n, horizon, trials) in cases {
        let net = Network::make(topology, n, None).unwrap();
        let label = format!("{topology:?}-n{n}-T{horizon}");
        // threads = 1 runs the same chunks on a single worker
        for (name, threads) in [("sequential", Some(1)), ("parallel", None)] {
            let opts = McOptions {
                trials,
                seed: 1,
                threads,
                ..Default::default()
            };
            group.bench_with_input(BenchmarkId::new(name, &label), &opts, |b, opts| {
                b.iter(|| black_box(run_monte_carlo(&model, &net, horizon, EngineChoice::Auto, opts).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_monte_carlo);
criterion_main!(benches);
