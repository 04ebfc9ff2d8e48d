//! Small dense kernels shared by the solver and metrics layers.

use nalgebra::{DMatrix, DVector};

use crate::rng::{gaussian_vector, seeded};

/// Rank-revealing compression of a Gram factor.
///
/// Runs Householder QR with column pivoting on `m` (rows x cols) and stops
/// once every remaining column norm is below `rel_tol` times the largest
/// initial column norm. Returns `F` (k x cols) with `FᵀF = mᵀm` up to the
/// dropped tail, whose contribution to the Gram matrix is bounded by
/// `cols · rel_tol²` relative to `‖m‖²` (the cross terms vanish because the
/// tail is orthogonal to the retained reflections).
///
/// Returns `None` as soon as the numerical rank is known to exceed
/// `max_rank`, so callers can fall back to the uncompressed factor without
/// paying for a full factorization.
pub fn compress_gram_factor(m: &DMatrix<f64>, rel_tol: f64, max_rank: usize) -> Option<DMatrix<f64>> {
    let (rows, cols) = m.shape();
    let mut a = m.as_slice().to_vec();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut norms: Vec<f64> = (0..cols)
        .map(|j| a[j * rows..(j + 1) * rows].iter().map(|x| x * x).sum())
        .collect();
    let mut reference = norms.clone();
    let max0 = norms.iter().cloned().fold(0.0_f64, f64::max).sqrt();
    let threshold = rel_tol * max0;

    let limit = rows.min(cols);
    let mut k = 0;
    while k < limit {
        let (p, best) = norms[k..]
            .iter()
            .enumerate()
            .fold((k, -1.0), |acc, (i, &v)| if v > acc.1 { (k + i, v) } else { acc });
        if max0 == 0.0 || best.max(0.0).sqrt() <= threshold {
            break;
        }
        if k >= max_rank {
            return None;
        }
        if p != k {
            for i in 0..rows {
                a.swap(k * rows + i, p * rows + i);
            }
            perm.swap(k, p);
            norms.swap(k, p);
            reference.swap(k, p);
        }

        let (head, tail) = a.split_at_mut((k + 1) * rows);
        let pivot = &mut head[k * rows + k..(k + 1) * rows];
        let len = pivot.iter().map(|x| x * x).sum::<f64>().sqrt();
        let alpha = if pivot[0] >= 0.0 { -len } else { len };
        pivot[0] -= alpha;
        let vnorm2: f64 = pivot.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in 0..cols - k - 1 {
                let col = &mut tail[j * rows + k..(j + 1) * rows];
                let dot: f64 = pivot.iter().zip(col.iter()).map(|(v, c)| v * c).sum();
                let scale = 2.0 * dot / vnorm2;
                for (c, v) in col.iter_mut().zip(pivot.iter()) {
                    *c -= scale * v;
                }
            }
        }
        pivot[0] = alpha;
        for x in pivot[1..].iter_mut() {
            *x = 0.0;
        }

        for j in k + 1..cols {
            let r = a[j * rows + k];
            norms[j] -= r * r;
            if norms[j] <= 1e-6 * reference[j] {
                norms[j] = a[j * rows + k + 1..(j + 1) * rows].iter().map(|x| x * x).sum();
                reference[j] = norms[j];
            }
        }
        k += 1;
    }

    let mut out = DMatrix::zeros(k, cols);
    for (jj, &orig) in perm.iter().enumerate() {
        for i in 0..k.min(jj + 1) {
            out[(i, orig)] = a[jj * rows + i];
        }
    }
    Some(out)
}

/// Power iteration for the largest eigenvalue of a symmetric PSD operator.
///
/// Stops when the Rayleigh quotient changes by at most `tol` relative to its
/// value, or after `max_iters` products. The start vector is a Gaussian draw
/// from `seed`.
pub fn power_iteration<F>(apply: F, dim: usize, tol: f64, max_iters: usize, seed: u64) -> f64
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if dim == 0 {
        return 0.0;
    }
    let mut v = gaussian_vector(dim, &mut seeded(seed));
    let n = v.norm();
    v /= n;
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        let w = apply(&v);
        let next = v.dot(&w);
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        v = w / wn;
        let done = (next - lambda).abs() <= tol * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    lambda.max(0.0)
}

/// Ordinary least-squares line through `(x, y)`: returns slope, intercept, R².
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::gaussian_matrix;

    #[test]
    fn compression_preserves_gram_of_low_rank_factor() {
        let mut rng = seeded(3);
        let left = gaussian_matrix(40, 4, &mut rng);
        let right = gaussian_matrix(4, 25, &mut rng);
        let m = &left * &right;
        let f = compress_gram_factor(&m, 1e-10, 40).unwrap();
        assert_eq!(f.nrows(), 4);
        let g0 = m.transpose() * &m;
        let g1 = f.transpose() * &f;
        assert!((g0 - g1).amax() < 1e-9 * m.norm_squared());
    }

    #[test]
    fn compression_of_tall_full_rank_factor() {
        let m = gaussian_matrix(30, 6, &mut seeded(5));
        let f = compress_gram_factor(&m, 1e-10, 30).unwrap();
        assert_eq!(f.shape(), (6, 6));
        let diff = m.transpose() * &m - f.transpose() * &f;
        assert!(diff.amax() < 1e-10);
    }

    #[test]
    fn compression_gives_up_beyond_max_rank() {
        let m = gaussian_matrix(10, 20, &mut seeded(9));
        assert!(compress_gram_factor(&m, 1e-10, 4).is_none());
    }

    #[test]
    fn zero_factor_compresses_to_empty() {
        let f = compress_gram_factor(&DMatrix::zeros(5, 3), 1e-10, 5).unwrap();
        assert_eq!(f.shape(), (0, 3));
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|t| 2.0 - 0.5 * t).collect();
        let fit = fit_line(&x, &y).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-15);
        assert!((fit.intercept - 2.0).abs() < 1e-15);
        assert!((fit.r_squared - 1.0).abs() < 1e-15);
    }
}
