use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sro_core::embed::{empirical_distortion, recommended_sketch_size, Embedding, EmbeddingKind, GaussianEmbedding, SketchBudget, SparseEmbedding};
use sro_core::rng::{derive_seed, gaussian_matrix, gaussian_vector, seeded};

fn low_rank(n: usize, d: usize, r: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seeded(seed);
    gaussian_matrix(n, r, &mut rng) * gaussian_matrix(r, d, &mut rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sparse_columns_have_exactly_one_nonzero(n in 1usize..400, rows in 1usize..50, seed in any::<u64>()) {
        let p = SparseEmbedding::new(n, rows, seed).unwrap();
        let dense = p.to_dense();
        for j in 0..n {
            let nz = dense.column(j).iter().filter(|v| **v != 0.0).count();
            prop_assert_eq!(nz, 1);
            prop_assert!(dense.column(j).iter().all(|v| *v == 0.0 || v.abs() == 1.0));
        }
    }

    #[test]
    fn apply_is_associative(n in 2usize..80, d in 1usize..12, rows in 1usize..40, sparse in any::<bool>(), seed in any::<u64>()) {
        let kind = if sparse { EmbeddingKind::Sparse } else { EmbeddingKind::Gaussian };
        let p = Embedding::build(kind, n, rows, seed).unwrap();
        let x = gaussian_matrix(n, d, &mut seeded(seed ^ 1));
        let beta = gaussian_vector(d, &mut seeded(seed ^ 2));
        let left = p.apply(&x).unwrap() * &beta;
        let right = p.apply_vec(&(&x * &beta)).unwrap();
        prop_assert!((&left - &right).norm() <= 1e-12 * right.norm().max(1e-300) + 1e-14);
    }

    #[test]
    fn distortion_is_scale_invariant(seed in any::<u64>(), scale in prop_oneof![-1e3..-1e-3, 1e-3..1e3f64]) {
        let x = low_rank(60, 8, 4, seed);
        let p = Embedding::build(EmbeddingKind::Gaussian, 60, 30, seed).unwrap();
        let a = empirical_distortion(&p, &x, 16, 5).unwrap();
        let b = empirical_distortion(&p, &(&x * scale), 16, 5).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-12));
    }

    #[test]
    fn sparse_size_dominates_gaussian_when_rank_is_large(r in 1usize..200, eps in 0.05..0.9f64, delta in 0.01..0.5f64) {
        let budget = SketchBudget::new(eps, delta, r).unwrap();
        let threshold = budget.c_gaussian / budget.c_sparse * delta * (r as f64 + (1.0 / delta).ln()) / r as f64;
        if r as f64 >= threshold {
            let g = recommended_sketch_size(&budget, EmbeddingKind::Gaussian).unwrap();
            let s = recommended_sketch_size(&budget, EmbeddingKind::Sparse).unwrap();
            prop_assert!(s >= g);
        }
    }
}

#[test]
fn gaussian_entries_are_centered() {
    let (n, rows) = (1000, 200);
    for seed in 0..5 {
        let p = GaussianEmbedding::new(n, rows, seed).unwrap();
        let mean = p.matrix().mean();
        assert!(mean.abs() <= 4.0 / ((rows * n) as f64).sqrt(), "seed {seed}: mean {mean}");
    }
}

#[test]
fn gaussian_preserves_norm_on_average() {
    let p = Embedding::Gaussian(GaussianEmbedding::new(500, 100, 11).unwrap());
    let mut rng = seeded(12);
    let total: f64 = (0..100)
        .map(|_| {
            let v = gaussian_vector(500, &mut rng).normalize();
            p.apply_vec(&v).unwrap().norm_squared()
        })
        .sum();
    assert!((total / 100.0 - 1.0).abs() <= 0.1);
}

#[test]
fn sparse_signs_are_balanced() {
    let p = SparseEmbedding::new(100_000, 100, 3).unwrap();
    let plus = p.signs().iter().filter(|s| **s > 0.0).count() as f64 / 100_000.0;
    assert!((plus - 0.5).abs() <= 0.02);
}

#[test]
fn recommended_size_matches_arithmetic() {
    let budget = SketchBudget::new(0.25, 0.1, 50).unwrap().with_constants(1.0, 1.0).unwrap();
    let expected = ((50.0 + 10f64.ln()) / 0.0625).ceil() as usize;
    assert_eq!(expected, 837);
    assert_eq!(recommended_sketch_size(&budget, EmbeddingKind::Gaussian).unwrap(), expected);
    let sparse = (50.0f64 * 50.0 / (0.1 * 0.0625)).ceil() as usize;
    assert_eq!(recommended_sketch_size(&budget, EmbeddingKind::Sparse).unwrap(), sparse);
}

#[test]
fn recommended_gaussian_meets_target_distortion() {
    let (n, d, r) = (2000, 40, 10);
    let budget = SketchBudget::new(0.25, 0.1, r).unwrap();
    let rows = recommended_sketch_size(&budget, EmbeddingKind::Gaussian).unwrap();
    let x = low_rank(n, d, r, 77);
    let good = (0..50u64)
        .filter(|&k| {
            let p = Embedding::build(EmbeddingKind::Gaussian, n, rows, derive_seed(78, &[k])).unwrap();
            empirical_distortion(&p, &x, 64, k).unwrap() <= 0.25
        })
        .count();
    assert!(good >= 45, "{good}/50 within 0.25 at rows={rows}");
}

#[test]
fn inner_products_survive_sketching() {
    let (n, d, r) = (1500, 30, 8);
    let budget = SketchBudget::new(0.25, 0.1, r).unwrap();
    let rows = recommended_sketch_size(&budget, EmbeddingKind::Gaussian).unwrap();
    for seed in 0..5u64 {
        let x = low_rank(n, d, r, 100 + seed);
        let p = Embedding::build(EmbeddingKind::Gaussian, n, rows, seed).unwrap();
        let eps_hat = empirical_distortion(&p, &x, 64, seed).unwrap();
        let px = p.apply(&x).unwrap();
        let mut rng = seeded(derive_seed(seed, &[9]));
        for _ in 0..20 {
            let a = gaussian_vector(d, &mut rng);
            let b = gaussian_vector(d, &mut rng);
            let (u, v) = (&x * &a, &x * &b);
            let (pu, pv) = (&px * &a, &px * &b);
            let gap = (pu.dot(&pv) - u.dot(&v)).abs();
            assert!(gap <= (eps_hat + 0.05) * u.norm() * v.norm(), "seed {seed}: gap {gap}");
        }
    }
}

#[test]
fn identity_sketch_has_zero_distortion() {
    let x = low_rank(50, 6, 3, 4);
    let p = Embedding::Sparse(SparseEmbedding::identity(50).unwrap());
    assert_eq!(empirical_distortion(&p, &x, 32, 1).unwrap(), 0.0);
    let v = DVector::from_fn(50, |i, _| i as f64);
    assert_eq!(p.apply_vec(&v).unwrap(), v);
}
