use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use nalgebra::DMatrix;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use sro_core::embed::{GaussianEmbedding, SparseEmbedding};
use sro_core::rng::{gaussian_matrix, seeded};

fn banded_csc(n: usize, d: usize, per_col: usize) -> CscMatrix<f64> {
    let mut coo = CooMatrix::new(n, d);
    for j in 0..d {
        for k in 0..per_col {
            coo.push((j * 7919 + k * (n / per_col)) % n, j, 1.0 + k as f64 * 1e-3);
        }
    }
    CscMatrix::from(&coo)
}

fn sparse_apply(c: &mut Criterion) {
    let (n, d, rows) = (100_000, 20, 500);
    let p = SparseEmbedding::new(n, rows, 1).unwrap();
    let mut group = c.benchmark_group("sparse_apply_csc");
    for per_col in [5_000, 10_000, 20_000] {
        let x = banded_csc(n, d, per_col);
        group.throughput(Throughput::Elements(x.nnz() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(x.nnz()), &x, |b, x| b.iter(|| p.apply_csc(x).unwrap()));
    }
    group.finish();
}

fn dense_apply(c: &mut Criterion) {
    let (n, d, rows) = (20_000, 50, 400);
    let x: DMatrix<f64> = gaussian_matrix(n, d, &mut seeded(2));
    let sparse = SparseEmbedding::new(n, rows, 3).unwrap();
    let gauss = GaussianEmbedding::new(n, rows, 4).unwrap();
    let mut group = c.benchmark_group("dense_design_apply");
    group.sample_size(20);
    group.bench_function("sparse", |b| b.iter(|| sparse.apply(&x).unwrap()));
    group.bench_function("gaussian", |b| b.iter(|| gauss.apply(&x).unwrap()));
    group.finish();
}

criterion_group!(benches, sparse_apply, dense_apply);
criterion_main!(benches);
