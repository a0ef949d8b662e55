use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rmb_core::{
    dispersion_roots, integrate, make_params, rhs, solve_kink, stationary_state, Boundary, DerivativeScheme,
    FieldState, Formulation, Grid1D, KinkProblem, StepControl,
};
use std::hint::black_box;

fn soliton_like(grid: &Grid1D) -> FieldState {
    FieldState::from_fn(grid, 0.0, |x| {
        let s = 1.0 / x.cosh();
        [2.0 * s, s * x.tanh(), -1.0 + s * s, 0.1 * s]
    })
}

fn bench_rhs(c: &mut Criterion) {
    let params = make_params(1, 1, 0.6, 1.0, 1.0).unwrap();
    let mut group = c.benchmark_group("rhs");
    for n in [512usize, 2048] {
        let grid = Grid1D::new(100.0, n, Boundary::Periodic).unwrap();
        let state = soliton_like(&grid);
        for scheme in [DerivativeScheme::Spectral, DerivativeScheme::Central4] {
            group.bench_with_input(BenchmarkId::new(format!("{scheme:?}"), n), &state, |b, s| {
                b.iter(|| rhs(black_box(s), &params, &grid, scheme).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_rk4(c: &mut Criterion) {
    let params = make_params(1, 1, 0.6, 1.0, 1.0).unwrap();
    let grid = Grid1D::new(100.0, 1024, Boundary::Periodic).unwrap();
    let state = soliton_like(&grid);
    let ctl = StepControl::new(5e-3, 0.5, 100, DerivativeScheme::Spectral);
    c.bench_function("integrate_100_steps_1024", |b| {
        b.iter(|| integrate(black_box(&state), &params, &grid, &ctl).unwrap())
    });
}

fn bench_dispersion(c: &mut Criterion) {
    let params = make_params(1, -1, 0.5, 1.0, 1.0).unwrap();
    let bg = stationary_state(&params, 0.5, -1.0, Formulation::Rederived).unwrap();
    c.bench_function("dispersion_roots", |b| {
        b.iter(|| dispersion_roots(&params, &bg, black_box(1.3), Formulation::Rederived).unwrap())
    });
}

fn bench_kink(c: &mut Criterion) {
    let problem = KinkProblem {
        n_points: 4001,
        ..KinkProblem::default()
    };
    let mut group = c.benchmark_group("kink");
    group.sample_size(20);
    group.bench_function("solve_4001", |b| b.iter(|| solve_kink(black_box(&problem)).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_rhs, bench_rk4, bench_dispersion, bench_kink);
criterion_main!(benches);
