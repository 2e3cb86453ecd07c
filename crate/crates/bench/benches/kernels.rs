//! Throughput of the hot kernels: top-k selection, one Armijo search, whole
//! CSGD-ASSS runs and the sparse wire codec.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use csgd_core::compression::{compress_with_feedback, top_k, CompressionSpec, ErrorMemory};
use csgd_core::distributed::codec::SparseMessage;
use csgd_core::distributed::run_dcsgd;
use csgd_core::linesearch::{armijo_search, ArmijoConfig};
use csgd_core::objectives::{make_diag_quadratic, make_interpolated_regression};
use csgd_core::optimizers::run_csgd_asss;
use csgd_core::rng::Stream;
use csgd_core::DenseVector;

const BENCH_STREAM: u64 = 0xbe9c;

fn gaussian(d: usize, seed: u64) -> DenseVector {
    DenseVector::new(Stream::new(seed, BENCH_STREAM).normal_vec(d, 1.0)).unwrap()
}

fn bench_top_k(c: &mut Criterion) {
    let mut group = c.benchmark_group("top_k");
    for (d, k) in [(256, 3), (4096, 41), (65536, 655)] {
        let v = gaussian(d, 1);
        let spec = CompressionSpec::new(k, d).unwrap();
        group.bench_with_input(BenchmarkId::new("select", format!("d{d}_k{k}")), &v, |b, v| {
            b.iter(|| top_k(black_box(v), &spec).unwrap())
        });
        let mem = ErrorMemory::from_vector(gaussian(d, 2));
        group.bench_with_input(BenchmarkId::new("feedback", format!("d{d}_k{k}")), &v, |b, v| {
            b.iter(|| compress_with_feedback(&mem, black_box(v), &spec).unwrap())
        });
    }
    group.finish();
}

fn bench_armijo(c: &mut Criterion) {
    let d = 256;
    let curv: Vec<f64> = (0..d).map(|j| 0.5f64.powi((j % 20) as i32)).collect();
    let obj = make_diag_quadratic(&curv).unwrap();
    let x = gaussian(d, 3);
    let g = obj.full_grad(&x).unwrap();
    let fx = obj.full_value(&x).unwrap();
    let cfg = ArmijoConfig::default();
    c.bench_function("armijo_search/diag256_alpha_max_10", |b| {
        b.iter(|| armijo_search(|y: &DenseVector| obj.full_value(y).unwrap(), &x, &g, fx, black_box(10.0), &cfg).unwrap())
    });
}

fn bench_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("runs");
    group.sample_size(10);
    let obj = make_interpolated_regression(2000, 256, 10f64.sqrt(), 7).unwrap();
    let comp = CompressionSpec::from_ratio(0.01, 256).unwrap();
    let cfg = ArmijoConfig::default();
    group.bench_function("csgd_asss_1000_steps_n2000_d256", |b| {
        b.iter(|| run_csgd_asss(&obj, &cfg, &comp, 1000, black_box(1)).unwrap())
    });
    let small = make_interpolated_regression(400, 64, 1.0, 3).unwrap();
    let comp = CompressionSpec::new(4, 64).unwrap();
    group.bench_function("dcsgd_4_workers_200_rounds_d64", |b| {
        b.iter(|| run_dcsgd(&small, 4, &cfg, &comp, 200, black_box(1)).unwrap())
    });
    group.finish();
}

fn bench_codec(c: &mut Criterion) {
    let mut group = c.benchmark_group("codec");
    for k in [3usize, 655] {
        let entries: Vec<(u32, f64)> = (0..k).map(|i| (i as u32 * 97, i as f64 * 0.5 - 1.0)).collect();
        let msg = SparseMessage { sender: 1, iteration: 42, entries };
        let bytes = msg.encode();
        group.bench_with_input(BenchmarkId::new("encode", k), &msg, |b, m| b.iter(|| black_box(m).encode()));
        group.bench_with_input(BenchmarkId::new("decode", k), &bytes, |b, buf| {
            b.iter(|| SparseMessage::decode(black_box(buf)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_top_k, bench_armijo, bench_runs, bench_codec);
criterion_main!(benches);
