use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use r3bp_bench::{config, MASS_RATIOS};
use r3bp_core::contactcert::{certify_earth_component, certify_moon_component, SweepOptions};
use r3bp_core::equilibria::first_critical_value;
use r3bp_core::neck::{certify_above_critical, NeckOptions};
use r3bp_core::verifier::{polynomial_identities, verify_all, VerifierOptions};

fn below_critical(c: &mut Criterion) {
    let mut g = c.benchmark_group("below critical");
    g.sample_size(10);
    let opts = SweepOptions {
        n_theta: 400,
        n_rho: 400,
        spot_fibers: 200,
        ..SweepOptions::default()
    };
    for mu in MASS_RATIOS {
        let cfg = config(mu);
        let level = first_critical_value(&cfg).unwrap() - 1e-2;
        g.bench_with_input(BenchmarkId::new("moon", mu), &cfg, |b, cfg| {
            b.iter(|| certify_moon_component(level, cfg, &opts).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("earth", mu), &cfg, |b, cfg| {
            b.iter(|| certify_earth_component(level, cfg, &opts).unwrap())
        });
    }
    g.finish();
}

fn neck(c: &mut Criterion) {
    let mut g = c.benchmark_group("neck");
    g.sample_size(10);
    let cfg = config(0.3);
    let opts = NeckOptions::default();
    g.bench_function("single eps", |b| {
        b.iter(|| certify_above_critical(&cfg, &[1e-3], &opts).unwrap())
    });
    g.finish();
}

fn verifier(c: &mut Criterion) {
    let mut g = c.benchmark_group("verifier");
    g.sample_size(10);
    let cfg = config(0.3);
    g.bench_function("all lemmas", |b| {
        b.iter(|| verify_all(&cfg, &VerifierOptions::default()).unwrap())
    });
    g.bench_function("exact identities", |b| b.iter(polynomial_identities));
    g.finish();
}

criterion_group!(benches, below_critical, neck, verifier);
criterion_main!(benches);
