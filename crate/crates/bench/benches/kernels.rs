use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dispersive_bvp::admissibility::{
    boundary_form, margins, sample_admissible_canonical, BoundaryJet,
};
use dispersive_bvp::discretize::{assemble, fd_weights, solve_linear, Grid};
use dispersive_bvp::model::{ForcingSpec, ProblemSpec};
use dispersive_bvp::polycalc::{lemma_residual, Identity, Polynomial};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bench_fd_weights(c: &mut Criterion) {
    let offsets: Vec<i64> = (0..14).collect();
    c.bench_function("fd_weights one-sided w=14 k=9", |b| {
        b.iter(|| fd_weights(std::hint::black_box(&offsets), 9, 0.005).unwrap())
    });
}

fn spec_for(l: usize, rng: &mut ChaCha8Rng) -> ProblemSpec {
    ProblemSpec {
        l,
        lambda: 1.0,
        length: 1.0,
        bc: sample_admissible_canonical(l, 0.1, 2.0, rng),
        forcing: ForcingSpec::Trig {
            terms: vec![(1.0, 5.0, 0.3), (0.5, 11.0, 1.1)],
        },
    }
}

fn bench_assemble_and_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble+solve n=201");
    group.sample_size(10);
    for l in [2usize, 3, 4] {
        let mut rng = ChaCha8Rng::seed_from_u64(l as u64);
        let spec = spec_for(l, &mut rng);
        let grid = Grid::uniform(201, 1.0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(l), &spec, |b, spec| {
            b.iter(|| {
                let mut sys = assemble(spec, &grid, 4).unwrap();
                solve_linear(&mut sys).unwrap().max_abs()
            })
        });
    }
    group.finish();
}

fn bench_margins_and_form(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let bc = sample_admissible_canonical(6, 0.1, 2.0, &mut rng);
    let jet = BoundaryJet::random(6, 1.0, &mut rng);
    c.bench_function("margins l=6", |b| {
        b.iter(|| margins(6, std::hint::black_box(&bc)).unwrap().admissible)
    });
    c.bench_function("boundary_form l=6", |b| {
        b.iter(|| boundary_form(6, std::hint::black_box(&bc), &jet).unwrap())
    });
}

fn bench_lemma_residual(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u = Polynomial::random(20, &mut rng);
    c.bench_function("lemma_residual alternating-x l=5 deg=20", |b| {
        b.iter(|| {
            lemma_residual(
                std::hint::black_box(&u),
                Identity::AlternatingWeighted { l: 5 },
                std::f64::consts::PI,
            )
            .residual
        })
    });
}

criterion_group!(
    benches,
    bench_fd_weights,
    bench_assemble_and_solve,
    bench_margins_and_form,
    bench_lemma_residual
);
criterion_main!(benches);
