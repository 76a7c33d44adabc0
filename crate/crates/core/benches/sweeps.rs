use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use noon_core::hilbert::Cavity;
use noon_core::model::{ParamsN2, G_REF};
use noon_core::sweep::{concurrence_map_n2, log_grid, sweep_delta2, Execution};

fn cw() -> ParamsN2 {
    ParamsN2 {
        g2p: G_REF,
        j: 2.0,
        delta1: 1.0,
        delta2: -0.207,
        kappa: 0.1,
        omega_pump_detuning: -0.207,
        rabi: 0.05,
        pump_port: Cavity::Two,
    }
}

fn bench(c: &mut Criterion) {
    let p = cw();
    let grid: Vec<f64> = (0..16).map(|k| -0.4 + 0.05 * k as f64).collect();
    let kappas = log_grid(0.05, 1.0, 4).unwrap();
    let rabis = log_grid(0.02, 0.2, 4).unwrap();
    let mut g = c.benchmark_group("sweeps");
    g.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let tag = format!("{exec:?}");
        g.bench_with_input(BenchmarkId::new("delta2", &tag), &exec, |b, &e| {
            b.iter(|| sweep_delta2(&p, &grid, 3, e).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("map_n2", &tag), &exec, |b, &e| {
            b.iter(|| concurrence_map_n2(&p, &kappas, &rabis, 3, e).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
