use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use noisesync::ensemble::{random_phases, Ensemble};
use noisesync::lyapunov::estimate_lambda_max;
use noisesync::{Channel, NoisePath, Stepper};
use noisesync_bench::*;

fn noise(c: &mut Criterion) {
    let path = NoisePath::new(forcing(1.0, 1e-4)).unwrap();
    let mut g = c.benchmark_group("noise");
    g.throughput(Throughput::Elements(1024));
    g.bench_function("cursor_1024_increments", |b| {
        b.iter(|| {
            let mut cur = path.cursor();
            let mut acc = 0.0;
            for k in 0..1024 {
                acc += cur.increment(Channel::ExtRe, black_box(k));
            }
            acc
        })
    });
    g.bench_function("direct_1024_increments", |b| {
        b.iter(|| (0..1024).map(|k| path.sample_increment(Channel::ExtIm, black_box(k))).sum::<f64>())
    });
    g.finish();
}

fn stepping(c: &mut Criterion) {
    let p = laser();
    let ls = landau_stuart();
    let path = NoisePath::new(forcing(0.5, 1e-4)).unwrap();
    let ls_path = NoisePath::new(forcing(1e-3, 1e-2)).unwrap();
    let mut g = c.benchmark_group("heun");
    g.throughput(Throughput::Elements(1000));
    g.bench_function("laser_1000_steps", |b| {
        b.iter_batched(
            || on_cycle(1.0),
            |mut s| {
                let mut st = Stepper::new(&p, heun(1e-4), Some(&path)).unwrap();
                for _ in 0..1000 {
                    st.step(&mut s).unwrap();
                }
                s
            },
            BatchSize::SmallInput,
        )
    });
    g.bench_function("laser_1000_steps_with_tangent", |b| {
        b.iter_batched(
            || (on_cycle(1.0), [1.0, 0.0, 0.0]),
            |(mut s, mut v)| {
                let mut st = Stepper::new(&p, heun(1e-4), Some(&path)).unwrap();
                for _ in 0..1000 {
                    st.step_tangent(&mut s, &mut v).unwrap();
                }
                (s, v)
            },
            BatchSize::SmallInput,
        )
    });
    g.bench_function("landau_stuart_1000_steps_with_tangent", |b| {
        b.iter_batched(
            || (on_cycle(1.0), [1.0, 0.0, 0.0]),
            |(mut s, mut v)| {
                let mut st = Stepper::new(&ls, heun(1e-2), Some(&ls_path)).unwrap();
                for _ in 0..1000 {
                    st.step_tangent(&mut s, &mut v).unwrap();
                }
                (s, v)
            },
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

fn lyapunov(c: &mut Criterion) {
    let p = laser();
    let spec = forcing(0.5, 1e-4);
    let settings = short_lyapunov();
    let mut g = c.benchmark_group("lyapunov");
    g.sample_size(10);
    g.bench_function("laser_two_time_units", |b| {
        b.iter(|| estimate_lambda_max(&p, &spec, &settings).unwrap().lambda_max)
    });
    g.finish();
}

fn ensemble(c: &mut Criterion) {
    let p = noisesync::LaserParams::new(5.0, 3.0);
    let path = NoisePath::new(forcing(10.0, 1e-4)).unwrap();
    let mut g = c.benchmark_group("ensemble");
    g.throughput(Throughput::Elements(50 * 100));
    g.bench_function("m50_100_steps", |b| {
        b.iter_batched(
            || random_phases(&p, 50, 3),
            |init| {
                let mut e = Ensemble::new(&p, heun(1e-4), &path, None, init).unwrap();
                for _ in 0..100 {
                    e.step().unwrap();
                }
                e.order_parameter()
            },
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, noise, stepping, lyapunov, ensemble);
criterion_main!(benches);
