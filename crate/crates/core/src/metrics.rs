//! Error measures and sparse eigenvalues.

use std::collections::BTreeSet;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;

use crate::error::{check_dims, Error, Result};
use crate::rng::seeded;
use crate::sro::Problem;

/// Magnitude above which a coefficient counts as selected.
pub const SUPPORT_THRESHOLD: f64 = 1e-6;
pub const EXHAUSTIVE_MAX_DIM: usize = 20;
pub const EXHAUSTIVE_MAX_SPARSITY: usize = 6;

/// `‖Xv‖₂`.
pub fn x_seminorm(x: &DMatrix<f64>, v: &DVector<f64>) -> Result<f64> {
    check_dims("seminorm vector", x.ncols(), v.len())?;
    Ok((x * v).norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// `‖X(β̂ − β_ref)‖² / n`.
    pub x_seminorm_sq_per_n: f64,
    pub l2_error: f64,
    pub precision: f64,
    pub recall: f64,
    /// `f(β̂) − f(β_ref)` when a problem is attached.
    pub objective_gap: Option<f64>,
}

impl ErrorReport {
    pub fn with_objective(mut self, problem: &Problem, beta_hat: &DVector<f64>, beta_ref: &DVector<f64>) -> Self {
        self.objective_gap = Some(problem.objective(beta_hat) - problem.objective(beta_ref));
        self
    }
}

pub fn selected_support(beta: &DVector<f64>) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > SUPPORT_THRESHOLD)
        .map(|(j, _)| j)
        .collect()
}

pub fn error_report(beta_hat: &DVector<f64>, beta_ref: &DVector<f64>, x: &DMatrix<f64>, support_ref: &[usize]) -> Result<ErrorReport> {
    check_dims("error report", beta_ref.len(), beta_hat.len())?;
    check_dims("error report design", x.ncols(), beta_hat.len())?;
    let diff = beta_hat - beta_ref;
    let seminorm = (x * &diff).norm();
    let selected: BTreeSet<usize> = selected_support(beta_hat).into_iter().collect();
    let reference: BTreeSet<usize> = support_ref.iter().copied().collect();
    let hits = selected.intersection(&reference).count() as f64;
    let precision = if selected.is_empty() { 1.0 } else { hits / selected.len() as f64 };
    let recall = if reference.is_empty() { 1.0 } else { hits / reference.len() as f64 };
    Ok(ErrorReport {
        x_seminorm_sq_per_n: seminorm * seminorm / x.nrows() as f64,
        l2_error: diff.norm(),
        precision,
        recall,
        objective_gap: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparseEigenMethod {
    Exhaustive,
    /// One-sided: `ρ̂₊ ≤ ρ₊(s)` and `ρ̂₋ ≥ ρ₋(s)`.
    Probe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseEigenReport {
    pub s: usize,
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub method: SparseEigenMethod,
    /// Number of supports examined.
    pub supports: usize,
}

fn support_extremes(gram: &DMatrix<f64>, support: &[usize]) -> (f64, f64) {
    let k = support.len();
    let sub = DMatrix::from_fn(k, k, |i, j| gram[(support[i], support[j])]);
    let eig = sub.symmetric_eigen().eigenvalues;
    (eig.max(), eig.min())
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn check_sparsity(s: usize) -> Result<()> {
    if s == 0 {
        Err(Error::InvalidParameter("sparsity level must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// Exact `ρ±(s)` over every size-`s` support of `XᵀX`.
///
/// Restricted to `d ≤ 20` and `s ≤ 6`; larger cases must use the probe method.
pub fn sparse_eigen_exhaustive(x: &DMatrix<f64>, s: usize) -> Result<SparseEigenReport> {
    check_sparsity(s)?;
    let d = x.ncols();
    let s = s.min(d);
    if d > EXHAUSTIVE_MAX_DIM || s > EXHAUSTIVE_MAX_SPARSITY {
        return Err(Error::GuardExceeded {
            supports: binomial(d, s),
            max_dim: EXHAUSTIVE_MAX_DIM,
            max_sparsity: EXHAUSTIVE_MAX_SPARSITY,
        });
    }
    let gram = x.tr_mul(x);
    let mut rho_plus = f64::NEG_INFINITY;
    let mut rho_minus = f64::INFINITY;
    let mut supports = 0;
    for support in (0..d).combinations(s) {
        let (hi, lo) = support_extremes(&gram, &support);
        rho_plus = rho_plus.max(hi);
        rho_minus = rho_minus.min(lo);
        supports += 1;
    }
    Ok(SparseEigenReport {
        s,
        rho_plus,
        rho_minus: rho_minus.max(0.0),
        method: SparseEigenMethod::Exhaustive,
        supports,
    })
}

/// Bounds on `ρ±(s)` from exact eigenproblems on random size-`s` supports.
pub fn sparse_eigen_probe(x: &DMatrix<f64>, s: usize, n_probes: usize, seed: u64) -> Result<SparseEigenReport> {
    check_sparsity(s)?;
    if n_probes == 0 {
        return Err(Error::InvalidParameter("probe count must be >= 1".into()));
    }
    let d = x.ncols();
    let s = s.min(d);
    let gram = x.tr_mul(x);
    let mut rng = seeded(seed);
    let mut rho_plus = f64::NEG_INFINITY;
    let mut rho_minus = f64::INFINITY;
    for _ in 0..n_probes {
        let mut support = sample(&mut rng, d, s).into_vec();
        support.sort_unstable();
        let (hi, lo) = support_extremes(&gram, &support);
        rho_plus = rho_plus.max(hi);
        rho_minus = rho_minus.min(lo);
    }
    Ok(SparseEigenReport {
        s,
        rho_plus,
        rho_minus: rho_minus.max(0.0),
        method: SparseEigenMethod::Probe,
        supports: n_probes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, gaussian_vector};

    #[test]
    fn seminorm_basics() {
        let x = gaussian_matrix(8, 4, &mut seeded(1));
        assert_eq!(x_seminorm(&x, &DVector::zeros(4)).unwrap(), 0.0);
        let q = x.clone().qr().q();
        let v = gaussian_vector(4, &mut seeded(2));
        assert!((x_seminorm(&q, &v).unwrap() - v.norm()).abs() < 1e-12);
        let direct = (&x * &v).iter().map(|t| t * t).sum::<f64>().sqrt();
        assert!((x_seminorm(&x, &v).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn identity_and_diagonal_eigen() {
        let eye = DMatrix::<f64>::identity(5, 5);
        for s in 1..=5 {
            let r = sparse_eigen_exhaustive(&eye, s).unwrap();
            assert!((r.rho_plus - 1.0).abs() < 1e-12 && (r.rho_minus - 1.0).abs() < 1e-12);
        }
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let r = sparse_eigen_exhaustive(&x, 1).unwrap();
        assert!((r.rho_plus - 4.0).abs() < 1e-12 && (r.rho_minus - 1.0).abs() < 1e-12);
    }

    #[test]
    fn guard_applies() {
        let x = DMatrix::<f64>::zeros(3, 21);
        assert!(matches!(sparse_eigen_exhaustive(&x, 2), Err(Error::GuardExceeded { .. })));
        let x = DMatrix::<f64>::zeros(3, 10);
        assert!(matches!(sparse_eigen_exhaustive(&x, 7), Err(Error::GuardExceeded { .. })));
    }

    #[test]
    fn probe_is_one_sided_and_full_support_exact() {
        let x = gaussian_matrix(12, 8, &mut seeded(4));
        let exact = sparse_eigen_exhaustive(&x, 3).unwrap();
        let probe = sparse_eigen_probe(&x, 3, 20, 5).unwrap();
        assert!(probe.rho_plus <= exact.rho_plus + 1e-12);
        assert!(probe.rho_minus >= exact.rho_minus - 1e-12);
        let full = sparse_eigen_probe(&x, 8, 1, 0).unwrap();
        let eig = x.tr_mul(&x).symmetric_eigen().eigenvalues;
        assert!((full.rho_plus - eig.max()).abs() < 1e-10);
        assert!((full.rho_minus - eig.min()).abs() < 1e-10);
    }

    #[test]
    fn report_examples() {
        let x = gaussian_matrix(6, 3, &mut seeded(8));
        let b = DVector::from_vec(vec![1.0, 0.0, -2.0]);
        let r = error_report(&b, &b, &x, &[0, 2]).unwrap();
        assert_eq!((r.l2_error, r.x_seminorm_sq_per_n, r.precision, r.recall), (0.0, 0.0, 1.0, 1.0));
        let mut moved = b.clone();
        moved[0] += 0.25;
        assert!((error_report(&moved, &b, &x, &[0, 2]).unwrap().l2_error - 0.25).abs() < 1e-15);
    }
}
