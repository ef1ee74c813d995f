use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sensoff_core::fdma::solve_fdma;
use sensoff_core::lp::{self, LinearProgram, Relation, Tolerances};
use sensoff_core::noma::solve_noma;
use sensoff_core::noma_timesharing::solve_timesharing;
use sensoff_core::tdma::solve_tdma;
use sensoff_core::tdma_async::solve_async;
use sensoff_core::{generate_scenario, Scenario, SystemParams};

fn scenario(n: usize, equal: bool) -> Scenario {
    let range = if equal { (5e5, 5e5) } else { (1e5, 1e6) };
    generate_scenario(SystemParams::default(), n, range, 7).unwrap()
}

fn schemes(c: &mut Criterion) {
    for n in [4, 12, 24] {
        let sc = scenario(n, false);
        let eq = scenario(n, true);
        let mut g = c.benchmark_group(format!("n{n}"));
        g.bench_function("tdma", |b| b.iter(|| solve_tdma(black_box(&sc), None).unwrap()));
        g.bench_function("tdma_async", |b| b.iter(|| solve_async(black_box(&sc), None).unwrap()));
        g.bench_function("noma_fixed", |b| b.iter(|| solve_noma(black_box(&sc)).unwrap()));
        g.bench_function("noma_timesharing", |b| b.iter(|| solve_timesharing(black_box(&eq), None).unwrap()));
        g.sample_size(20);
        g.bench_function("fdma", |b| b.iter(|| solve_fdma(black_box(&sc)).unwrap()));
        g.finish();
    }
}

/// Dense packing LP: maximize sum x subject to m random covering rows.
fn packing(m: usize, n: usize) -> LinearProgram {
    let mut lp = LinearProgram::maximize(vec![1.0; n]);
    for i in 0..m {
        let row = (0..n).map(|j| 1.0 + ((i * 31 + j * 17) % 13) as f64 / 4.0).collect();
        lp.add_row(row, Relation::Le, 10.0 + i as f64);
    }
    lp
}

fn simplex(c: &mut Criterion) {
    let tol = Tolerances::default();
    let mut g = c.benchmark_group("simplex");
    for size in [10, 40, 100] {
        let lp = packing(size, size);
        g.bench_with_input(BenchmarkId::from_parameter(size), &lp, |b, lp| {
            b.iter(|| lp::solve(black_box(lp), &tol).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, schemes, simplex);
criterion_main!(benches);
