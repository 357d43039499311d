use std::hint::black_box;

use bmreg_core::angular::{weights_from_logits, QuadratureConfig};
use bmreg_core::manifold::{logistic_quantile_closed_form, conditional_quantile};
use bmreg_core::special::{beta_cdf, lambert_w0};
use bmreg_core::{ConditionalLaw, EvModel};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn special(c: &mut Criterion) {
    c.bench_function("lambert_w0", |b| b.iter(|| lambert_w0(black_box(37.5))));
    c.bench_function("beta_cdf", |b| b.iter(|| beta_cdf(black_box(0.3), black_box(2.5), black_box(101.0))));
}

fn conditional_cdfs(c: &mut Criterion) {
    let mut g = c.benchmark_group("conditional_cdf_p1");
    for j in [10usize, 100, 250] {
        let logits: Vec<f64> = (0..j - 3).map(|i| 0.1 * ((i % 7) as f64 - 3.0)).collect();
        let h = weights_from_logits(&logits, j, 2).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(j), &h, |b, h| {
            b.iter(|| h.conditional_cdf_p1(black_box(2.0), black_box(1.5)))
        });
    }
    g.finish();
    let h = weights_from_logits(&[0.2, -0.1, 0.3], 5, 3).unwrap();
    let cfg = QuadratureConfig::default();
    c.bench_function("conditional_cdf_approx_d3", |b| {
        b.iter(|| h.conditional_cdf_approx(black_box(2.0), black_box(&[1.5, 0.7]), &cfg))
    });
}

fn quantiles(c: &mut Criterion) {
    c.bench_function("logistic_closed_form", |b| {
        b.iter(|| logistic_quantile_closed_form(black_box(0.5), black_box(0.9), black_box(3.0)))
    });
    let m = EvModel::logistic(0.5).unwrap();
    c.bench_function("logistic_inversion", |b| {
        b.iter(|| conditional_quantile(|y| m.conditional_cdf(y, 3.0), black_box(0.9), black_box(3.0)))
    });
    let logits: Vec<f64> = (0..97).map(|i| 0.1 * ((i % 5) as f64 - 2.0)).collect();
    let h = weights_from_logits(&logits, 100, 2).unwrap();
    c.bench_function("bernstein_quantile_j100", |b| {
        b.iter(|| h.conditional_quantile(black_box(0.9), black_box(&[3.0])))
    });
}

criterion_group!(benches, special, conditional_cdfs, quantiles);
criterion_main!(benches);
