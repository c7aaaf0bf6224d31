use criterion::{black_box, criterion_group, criterion_main, Criterion};
use spinlab::cumulants::{enumerate, Lattice};
use spinlab::dynamics::{DenseEvolver, EvolverConfig, Interaction, LindbladGenerator, Window};
use spinlab::lieb_robinson::commutator_norm_grid;
use spinlab::open_chain::{derive_current, gibbs_stationarity_residual, Jump, LindbladModel};
use spinlab::{Complex64, LocalOperator};

fn hopping_model() -> LindbladModel {
    LindbladModel::new(Complex64::new(1.0, 0.0), 0.2, 0.1, vec![Jump::real(0.5, 0.2, 0.1, 0.1, 0.05)])
}

fn operator_algebra(c: &mut Criterion) {
    let a: LocalOperator = (0..6).map(|x| &LocalOperator::sx(x) * &LocalOperator::sx(x + 1)).sum();
    let b: LocalOperator = (0..6).map(LocalOperator::sz).sum();
    c.bench_function("commutator 6-bond sums", |bench| bench.iter(|| black_box(&a).commutator(black_box(&b))));
    let m = hopping_model();
    c.bench_function("derive_current", |bench| bench.iter(|| derive_current(black_box(&m)).unwrap()));
}

fn partitions(c: &mut Criterion) {
    c.bench_function("enumerate P(8)", |bench| bench.iter(|| enumerate(black_box(8), Lattice::All).unwrap()));
    c.bench_function("enumerate NC(8)", |bench| bench.iter(|| enumerate(black_box(8), Lattice::NonCrossing).unwrap()));
}

fn dynamics(c: &mut Criterion) {
    let mut group = c.benchmark_group("dynamics");
    group.sample_size(10);
    for n in [8usize, 10] {
        let w = Window::open(0, n);
        let gen = LindbladGenerator::hamiltonian_only(w, &Interaction::hopping(Complex64::new(1.0, 0.0), 0.0, 0.0));
        let ev = DenseEvolver::new(&gen, EvolverConfig::new(w)).unwrap();
        let s = LocalOperator::sz(0);
        let xs: Vec<i64> = (0..n as i64).collect();
        group.bench_function(format!("xx light-cone grid n={n}"), |bench| {
            bench.iter(|| commutator_norm_grid(&s, &s, &xs, &[0.25, 0.5], &ev, false).unwrap())
        });
    }
    let m = hopping_model();
    group.bench_function("gibbs stationarity ring 6", |bench| {
        bench.iter(|| gibbs_stationarity_residual(&m, black_box(0.5), 6).unwrap())
    });
    group.finish();
}

criterion_group!(benches, operator_algebra, partitions, dynamics);
criterion_main!(benches);
