//! Whole-method timings with the worker pool pinned to one thread against
//! the default pool. Built without the `parallel` feature both run sequentially.

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use dpa::dsl::{elaborate_with, parse_descriptor, parse_network};
use dpa::network::Network;
use dpa::patterns::PatternDescriptor;
use dpa::report::{run_dpa, DpaOptions};

const APHILS: &str = include_str!("../../../models/aphils.net");
const APHILS_PATTERN: &str = include_str!("../../../models/aphils.pattern.json");
const RINGBUFFER: &str = include_str!("../../../models/ringbuffer.net");
const LEADER: &str = include_str!("../../../models/leader-election.net");
const LEADER_PATTERN: &str = include_str!("../../../models/leader-election.pattern.json");

/// A fresh network each time, so no compiled state is reused between runs.
fn setup(src: &str, key: &str, n: i64, pattern: Option<&str>) -> (Network, Vec<PatternDescriptor>) {
    let net = elaborate_with(&parse_network(src).unwrap(), &[(key.into(), n)]).unwrap().network;
    let descs = pattern.map(|p| parse_descriptor(p, &net).unwrap()).into_iter().collect();
    (net, descs)
}

fn bench(c: &mut Criterion) {
    let cases = [
        ("aphils", APHILS, "N", 20, Some(APHILS_PATTERN)),
        ("ringbuffer", RINGBUFFER, "NCELLS", 10, None),
        ("leader", LEADER, "N", 3, Some(LEADER_PATTERN)),
    ];
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let mut g = c.benchmark_group("dpa");
    for (name, src, key, n, pattern) in cases {
        let run = |(net, descs): (Network, Vec<PatternDescriptor>)| run_dpa(&net, &descs, &DpaOptions::default()).unwrap();
        g.bench_function(BenchmarkId::new("sequential", name), |b| {
            b.iter_batched(|| setup(src, key, n, pattern), |x| single.install(|| run(x)), BatchSize::SmallInput)
        });
        g.bench_function(BenchmarkId::new("parallel", name), |b| {
            b.iter_batched(|| setup(src, key, n, pattern), run, BatchSize::SmallInput)
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
