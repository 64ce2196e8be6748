use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use csvae_core::data::{make_swiss_roll, Split};
use csvae_core::exec;
use csvae_core::numerics::linalg::{gemm, gemm_seq};
use csvae_core::rng::{domain, StreamRng};

fn bench_gemm(c: &mut Criterion) {
    let mut g = c.benchmark_group("gemm");
    for &n in &[64usize, 256] {
        let mut r = StreamRng::new(0, domain::MISC, 0);
        let a = r.normals(n * n);
        let b = r.normals(n * n);
        let mut out = vec![0.0; n * n];
        g.bench_with_input(BenchmarkId::new("parallel", n), &n, |bch, &n| {
            bch.iter(|| gemm(n, n, n, black_box(&a), false, black_box(&b), false, &mut out, false))
        });
        g.bench_with_input(BenchmarkId::new("sequential", n), &n, |bch, &n| {
            bch.iter(|| gemm_seq(n, n, n, black_box(&a), false, black_box(&b), false, &mut out, false))
        });
    }
    g.finish();
}

fn work(i: usize) -> f64 {
    (0..2000).fold(i as f64, |acc, j| (acc + j as f64).sqrt().sin())
}

fn bench_map(c: &mut Criterion) {
    let mut g = c.benchmark_group("map_indexed");
    let n = 4096;
    g.bench_function("parallel", |b| b.iter(|| exec::map_indexed(black_box(n), work)));
    g.bench_function("sequential", |b| b.iter(|| exec::map_indexed_seq(black_box(n), work)));
    g.finish();
}

fn bench_chunks(c: &mut Criterion) {
    let mut g = c.benchmark_group("for_each_chunk_mut");
    let mut buf = vec![0.0f64; 1 << 18];
    let fill = |ci: usize, s: &mut [f64]| {
        for (j, v) in s.iter_mut().enumerate() {
            *v = ((ci * 4096 + j) as f64).sqrt().ln_1p();
        }
    };
    g.bench_function("parallel", |b| b.iter(|| exec::for_each_chunk_mut(&mut buf, 4096, fill)));
    g.bench_function("sequential", |b| b.iter(|| exec::for_each_chunk_mut_seq(&mut buf, 4096, fill)));
    g.finish();
}

fn bench_generate(c: &mut Criterion) {
    let mut g = c.benchmark_group("swiss_roll_generate");
    g.sample_size(20);
    g.bench_function(if exec::is_parallel() { "parallel" } else { "sequential" }, |b| {
        b.iter(|| {
            let d = make_swiss_roll(black_box(10_000), 0.1, 0).unwrap();
            black_box(d.split.iter().filter(|&&s| s == Split::Train).count())
        })
    });
    g.finish();
}

criterion_group!(benches, bench_gemm, bench_map, bench_chunks, bench_generate);
criterion_main!(benches);
