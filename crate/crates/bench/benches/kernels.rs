use std::hint::black_box;
use std::time::Duration;

use advectflow_core::grid::seeded_coeffs;
use advectflow_core::perf::{simulate_overlapped, ChunkTimes};
use advectflow_core::{
    advect_all, run_pipeline, ExecMode, Extents, Field3D, Generator, PipelineConfig, ShiftBuffer,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn fields(n: usize) -> [Field3D; 3] {
    let e = Extents::new(n, n, n).unwrap();
    [0, 1, 2].map(|s| Field3D::generate(e, Generator::seeded(s, -1.0, 1.0)).unwrap())
}

fn reference(c: &mut Criterion) {
    let mut g = c.benchmark_group("reference");
    for n in [16, 32, 64] {
        let [u, v, w] = fields(n);
        let coeffs = seeded_coeffs(n, 0);
        g.throughput(Throughput::Elements((n * n * n) as u64));
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| advect_all(&u, &v, &w, &coeffs).unwrap())
        });
    }
    g.finish();
}

fn shift_buffer(c: &mut Criterion) {
    let mut g = c.benchmark_group("shift_buffer");
    for (yc, zc) in [(18, 64), (66, 64)] {
        let xc = 16;
        let stream: Vec<f64> = (0..xc * yc * zc).map(|i| i as f64).collect();
        g.throughput(Throughput::Elements(stream.len() as u64));
        g.bench_function(format!("{yc}x{zc}"), |b| {
            b.iter(|| {
                let mut buf = ShiftBuffer::for_chunk(xc, yc, zc).unwrap();
                let mut n = 0u64;
                for &v in &stream {
                    n += u64::from(buf.push(black_box(v)).unwrap().is_some());
                }
                n + u64::from(buf.drain().unwrap().is_some())
            })
        });
    }
    g.finish();
}

fn pipeline(c: &mut Criterion) {
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10).measurement_time(Duration::from_secs(5));
    let n = 32;
    let [u, v, w] = fields(n);
    let coeffs = seeded_coeffs(n, 0);
    g.throughput(Throughput::Elements((n * n * n) as u64));
    for (name, exec, kernels) in [
        ("single_k1", ExecMode::SingleThreaded, 1),
        ("threads_k1", ExecMode::Concurrent { max_workers: None }, 1),
        ("threads_k4", ExecMode::Concurrent { max_workers: None }, 4),
    ] {
        let config = PipelineConfig {
            num_kernels: kernels,
            exec,
            record_cycle_stats: false,
            ..Default::default()
        };
        g.bench_function(name, |b| {
            b.iter(|| run_pipeline(&u, &v, &w, &coeffs, &config).unwrap())
        });
    }
    g.finish();
}

fn scheduler(c: &mut Criterion) {
    let tasks = vec![
        ChunkTimes {
            input: 1.0,
            compute: 2.0,
            output: 1.5,
        };
        1024
    ];
    c.bench_function("overlap_schedule_1024", |b| {
        b.iter(|| simulate_overlapped(black_box(&tasks)).makespan)
    });
}

criterion_group!(benches, reference, shift_buffer, pipeline, scheduler);
criterion_main!(benches);
