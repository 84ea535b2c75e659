use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use qdtele_core::correlation::{correlate_g2, BinSpec};
use qdtele_core::stream::{EventRecord, EventStream};
use qdtele_core::synth::{run_hom, simulate, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_stream(n: usize) -> EventStream {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut t = 0i64;
    let recs = (0..n)
        .map(|_| {
            t += rng.random_range(1..20_000);
            EventRecord::new(rng.random_range(0..2), t)
        })
        .collect();
    EventStream::from_sorted(recs).expect("times increase")
}

fn sim_config(file: &str, duration_ps: i64) -> SimConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(file);
    let mut table: toml::Table = std::fs::read_to_string(path).expect("config readable").parse().expect("valid toml");
    let mut sim: SimConfig = table.remove("sim").expect("[sim] table").try_into().expect("sim config");
    sim.duration_ps = duration_ps;
    sim
}

fn correlate(c: &mut Criterion) {
    let mut g = c.benchmark_group("correlate_g2");
    for n in [100_000usize, 1_000_000] {
        let s = random_stream(n);
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| {
            b.iter(|| correlate_g2(s, 0, 1, BinSpec::new(50_000, 25).unwrap()).unwrap())
        });
    }
    g.finish();
}

fn synthesis(c: &mut Criterion) {
    let mut g = c.benchmark_group("synthesis");
    g.sample_size(10);
    let hbt = sim_config("hbt.toml", 1_000_000_000);
    g.bench_function("hbt_1ms", |b| b.iter(|| simulate(&hbt).unwrap()));
    let hom = sim_config("hom.toml", 1_000_000_000);
    g.bench_function("hom_co_1ms", |b| b.iter(|| run_hom(&hom, true).unwrap()));
    g.finish();
}

criterion_group!(benches, correlate, synthesis);
criterion_main!(benches);
