use std::hint::black_box;

use bsgrowth::markov::MarkovPartition;
use bsgrowth::thermo::{poincare_sums, Thermo, ThermoConfig};
use bsgrowth::tracing::{SymbolicGeodesic, Tracer};
use bsgrowth_bench::{bs_map, fixture, group};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const OCTAGON: &str = "octagon-genus2";
const SCHOTTKY: &str = "schottky-rank2";
const TORUS: &str = "punctured-torus-ideal-square";

fn boundary_map(c: &mut Criterion) {
    let bs = bs_map(OCTAGON);
    let x = bs.branches[0].arc.start() + 0.3 * bs.branches[0].arc.len();
    c.bench_function("bs_step", |b| b.iter(|| bs.step(black_box(x))));
    c.bench_function("f_expand_30", |b| b.iter(|| bs.f_expand(black_box(x), 30)));
}

fn partition(c: &mut Criterion) {
    for name in [OCTAGON, TORUS] {
        let bs = bs_map(name);
        c.bench_function(&format!("partition_{name}"), |b| {
            b.iter(|| MarkovPartition::new(black_box(&bs)).unwrap())
        });
    }
}

fn pressure(c: &mut Criterion) {
    let (bs, p) = fixture(SCHOTTKY);
    let config = ThermoConfig {
        depth: 8,
        ..ThermoConfig::default()
    };
    let th = Thermo::new(&bs, &p, config).unwrap();
    c.bench_function("pressure_bracket_schottky", |b| {
        b.iter(|| th.pressure_direct(black_box(0.8)))
    });
}

fn poincare(c: &mut Criterion) {
    let g = group(OCTAGON);
    c.bench_function("poincare_octagon_5", |b| {
        b.iter(|| poincare_sums(&g, black_box(&[0.5, 1.0, 1.5]), 5, 1e7).unwrap())
    });
}

fn parallel(c: &mut Criterion) {
    let (bs, p) = fixture(OCTAGON);
    let tracer = Tracer::new(&bs, 30);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let geo = SymbolicGeodesic::random(&bs, &p, 30, &mut rng);
    c.bench_function("parallel_check_30", |b| {
        b.iter(|| tracer.parallel_check(black_box(&geo), 30).unwrap())
    });
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(20);
    targets = boundary_map, partition, pressure, poincare, parallel
}
criterion_main!(kernels);
