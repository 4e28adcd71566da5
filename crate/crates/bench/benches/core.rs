use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use smallball::asymptotics::dmz_estimate;
use smallball::inversion::{invert_mu, DEFAULT_TOL};
use smallball::oracle::{cf_inversion_cdf, mc_tilted_cdf, McConfig};
use smallball::series::{eval_i, eval_mu, TruncationPolicy};
use smallball::EigenSpectrum;
use smallball_bench::spectra;
use std::hint::black_box;

fn series(c: &mut Criterion) {
    let policy = TruncationPolicy::default();
    let mut g = c.benchmark_group("series");
    for (name, s) in spectra() {
        for theta in [1.0, 1e4] {
            g.bench_with_input(
                BenchmarkId::new(format!("mu/{name}"), theta),
                &theta,
                |b, &t| b.iter(|| eval_mu(&s, black_box(t), &policy).unwrap()),
            );
            g.bench_with_input(
                BenchmarkId::new(format!("I/{name}"), theta),
                &theta,
                |b, &t| b.iter(|| eval_i(&s, black_box(t), &policy).unwrap()),
            );
        }
    }
    g.finish();
}

fn inversion(c: &mut Criterion) {
    let mut g = c.benchmark_group("inversion");
    for (name, s) in spectra() {
        g.bench_function(format!("invert/{name}"), |b| {
            b.iter(|| invert_mu(&s, black_box(1e-2), DEFAULT_TOL).unwrap())
        });
        g.bench_function(format!("estimate/{name}"), |b| {
            b.iter(|| dmz_estimate(&s, black_box(1e-2), DEFAULT_TOL).unwrap())
        });
    }
    g.finish();
}

fn oracles(c: &mut Criterion) {
    let s = EigenSpectrum::polynomial(2.0).unwrap();
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    g.bench_function("cf/N=1000", |b| {
        b.iter(|| cf_inversion_cdf(&s, black_box(0.5), 1000, 1e-10).unwrap())
    });
    let cfg = McConfig::new(1000, 10_240, 1);
    g.bench_function("mc-tilted/N=1000/10k", |b| {
        b.iter(|| mc_tilted_cdf(&s, black_box(0.5), &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(benches, series, inversion, oracles);
criterion_main!(benches);
