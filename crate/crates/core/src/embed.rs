//! Oblivious ℓ²-subspace embeddings.
//!
//! Two families are provided: a dense Gaussian map with entries
//! `N(0, 1)/√ñ`, and a sparse map (CountSketch) with a single `±1` per
//! column. The sparse map is never materialized; applying it scatters the
//! rows of the input into `ñ` buckets, so the work is proportional to the
//! number of stored entries of the input.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CscMatrix;
use rand::Rng;

use crate::error::{check_dims, Error, Result};
use crate::rng::{derive_seed, gaussian_matrix, gaussian_vector, seeded};

pub const DEFAULT_GAUSSIAN_CONSTANT: f64 = 8.0;
pub const DEFAULT_SPARSE_CONSTANT: f64 = 2.0;
pub const DEFAULT_DISTORTION_PROBES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EmbeddingKind {
    Gaussian,
    Sparse,
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingKind::Gaussian => "gaussian",
            EmbeddingKind::Sparse => "sparse",
        })
    }
}

impl FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(EmbeddingKind::Gaussian),
            "sparse" | "countsketch" => Ok(EmbeddingKind::Sparse),
            other => Err(Error::InvalidParameter(format!("unknown embedding kind `{other}`"))),
        }
    }
}

fn check_shape(n: usize, rows: usize) -> Result<()> {
    if n == 0 || rows == 0 {
        return Err(Error::InvalidDimension(format!(
            "embedding needs positive dimensions, got n={n}, rows={rows}"
        )));
    }
    Ok(())
}

/// Dense Gaussian embedding `P = P'/√ñ`, `P'` with i.i.d. standard normal
/// entries drawn column by column from the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEmbedding {
    seed: u64,
    matrix: DMatrix<f64>,
}

impl GaussianEmbedding {
    pub fn new(n: usize, rows: usize, seed: u64) -> Result<Self> {
        check_shape(n, rows)?;
        let mut matrix = gaussian_matrix(rows, n, &mut seeded(seed));
        matrix /= (rows as f64).sqrt();
        Ok(Self { seed, matrix })
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dims("gaussian embedding apply", self.cols(), x.nrows())?;
        Ok(&self.matrix * x)
    }

    pub fn apply_vec(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dims("gaussian embedding apply", self.cols(), v.len())?;
        Ok(&self.matrix * v)
    }
}

/// Sparse embedding: column `i` holds `signs[i]` in row `buckets[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEmbedding {
    rows: usize,
    seed: Option<u64>,
    buckets: Vec<usize>,
    signs: Vec<f64>,
}

impl SparseEmbedding {
    /// Draws `h(i)` uniformly from `0..rows` and `σ(i)` uniformly from `±1`,
    /// interleaved per column.
    pub fn new(n: usize, rows: usize, seed: u64) -> Result<Self> {
        check_shape(n, rows)?;
        let mut rng = seeded(seed);
        let mut buckets = Vec::with_capacity(n);
        let mut signs = Vec::with_capacity(n);
        for _ in 0..n {
            buckets.push(rng.random_range(0..rows));
            signs.push(if rng.random::<bool>() { 1.0 } else { -1.0 });
        }
        Ok(Self {
            rows,
            seed: Some(seed),
            buckets,
            signs,
        })
    }

    /// Builds an embedding from explicit bucket and sign arrays.
    pub fn from_parts(rows: usize, buckets: Vec<usize>, signs: Vec<f64>) -> Result<Self> {
        check_shape(buckets.len(), rows)?;
        check_dims("sparse embedding signs", buckets.len(), signs.len())?;
        if let Some(&b) = buckets.iter().find(|&&b| b >= rows) {
            return Err(Error::InvalidParameter(format!("bucket {b} out of range 0..{rows}")));
        }
        if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::InvalidParameter("signs must be ±1".into()));
        }
        Ok(Self {
            rows,
            seed: None,
            buckets,
            signs,
        })
    }

    /// The `n x n` identity written as a sparse embedding.
    pub fn identity(n: usize) -> Result<Self> {
        Self::from_parts(n, (0..n).collect(), vec![1.0; n])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.buckets.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn buckets(&self) -> &[usize] {
        &self.buckets
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    /// Number of nonzeros in each column of `P` (always 1).
    pub fn column_nonzeros(&self) -> Vec<usize> {
        let mut counts = vec![0; self.cols()];
        for (i, &s) in self.signs.iter().enumerate() {
            if s != 0.0 {
                counts[i] += 1;
            }
        }
        counts
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.signs.iter().map(|s| s * s).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.rows, self.cols());
        for (i, (&b, &s)) in self.buckets.iter().zip(&self.signs).enumerate() {
            p[(b, i)] = s;
        }
        p
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dims("sparse embedding apply", self.cols(), x.nrows())?;
        let n = x.nrows();
        let mut out = DMatrix::zeros(self.rows, x.ncols());
        for (src, dst) in x.as_slice().chunks_exact(n.max(1)).zip(out.as_mut_slice().chunks_exact_mut(self.rows)) {
            for ((&v, &b), &s) in src.iter().zip(&self.buckets).zip(&self.signs) {
                if v != 0.0 {
                    dst[b] += s * v;
                }
            }
        }
        Ok(out)
    }

    /// Applies the embedding to a compressed-column matrix in `O(nnz)`.
    pub fn apply_csc(&self, x: &CscMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dims("sparse embedding apply", self.cols(), x.nrows())?;
        let mut out = DMatrix::zeros(self.rows, x.ncols());
        for (j, col) in x.col_iter().enumerate() {
            let dst = &mut out.as_mut_slice()[j * self.rows..(j + 1) * self.rows];
            for (&i, &v) in col.row_indices().iter().zip(col.values()) {
                dst[self.buckets[i]] += self.signs[i] * v;
            }
        }
        Ok(out)
    }

    pub fn apply_vec(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dims("sparse embedding apply", self.cols(), v.len())?;
        let mut out = DVector::zeros(self.rows);
        for ((&x, &b), &s) in v.iter().zip(&self.buckets).zip(&self.signs) {
            out[b] += s * x;
        }
        Ok(out)
    }
}

/// Either embedding family behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Embedding {
    Gaussian(GaussianEmbedding),
    Sparse(SparseEmbedding),
}

impl Embedding {
    pub fn build(kind: EmbeddingKind, n: usize, rows: usize, seed: u64) -> Result<Self> {
        Ok(match kind {
            EmbeddingKind::Gaussian => Embedding::Gaussian(GaussianEmbedding::new(n, rows, seed)?),
            EmbeddingKind::Sparse => Embedding::Sparse(SparseEmbedding::new(n, rows, seed)?),
        })
    }

    pub fn kind(&self) -> EmbeddingKind {
        match self {
            Embedding::Gaussian(_) => EmbeddingKind::Gaussian,
            Embedding::Sparse(_) => EmbeddingKind::Sparse,
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Embedding::Gaussian(g) => g.rows(),
            Embedding::Sparse(s) => s.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Embedding::Gaussian(g) => g.cols(),
            Embedding::Sparse(s) => s.cols(),
        }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            Embedding::Gaussian(g) => g.apply(x),
            Embedding::Sparse(s) => s.apply(x),
        }
    }

    pub fn apply_vec(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Embedding::Gaussian(g) => g.apply_vec(v),
            Embedding::Sparse(s) => s.apply_vec(v),
        }
    }
}

/// Accuracy/confidence budget for choosing a sketch size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SketchBudget {
    pub epsilon: f64,
    pub delta: f64,
    pub rank: usize,
    pub c_gaussian: f64,
    pub c_sparse: f64,
}

impl SketchBudget {
    pub fn new(epsilon: f64, delta: f64, rank: usize) -> Result<Self> {
        let budget = Self {
            epsilon,
            delta,
            rank,
            c_gaussian: DEFAULT_GAUSSIAN_CONSTANT,
            c_sparse: DEFAULT_SPARSE_CONSTANT,
        };
        budget.validate()?;
        Ok(budget)
    }

    pub fn with_constants(mut self, c_gaussian: f64, c_sparse: f64) -> Result<Self> {
        self.c_gaussian = c_gaussian;
        self.c_sparse = c_sparse;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.epsilon) || !open_unit(self.delta) {
            return Err(Error::InvalidParameter(format!(
                "epsilon and delta must lie in (0, 1), got epsilon={}, delta={}",
                self.epsilon, self.delta
            )));
        }
        if self.rank == 0 {
            return Err(Error::InvalidParameter("rank estimate must be positive".into()));
        }
        if !(self.c_gaussian > 0.0 && self.c_sparse > 0.0) {
            return Err(Error::InvalidParameter("embedding-size constants must be positive".into()));
        }
        Ok(())
    }
}

/// Sketch size for the chosen family:
/// Gaussian `⌈c_g (r + ln(1/δ)) / ε²⌉`, sparse `⌈c_s r² / (δ ε²)⌉`.
pub fn recommended_sketch_size(budget: &SketchBudget, kind: EmbeddingKind) -> Result<usize> {
    budget.validate()?;
    let r = budget.rank as f64;
    let eps2 = budget.epsilon * budget.epsilon;
    let raw = match kind {
        EmbeddingKind::Gaussian => budget.c_gaussian * (r + (1.0 / budget.delta).ln()) / eps2,
        EmbeddingKind::Sparse => budget.c_sparse * r * r / (budget.delta * eps2),
    };
    Ok((raw.ceil() as usize).max(1))
}

/// Largest relative squared-norm distortion `|‖PXv‖²/‖Xv‖² − 1|` over
/// `n_probes` Gaussian coefficient vectors `v`.
///
/// Probes with `Xv = 0` are redrawn; if no probe is usable within
/// `16 · n_probes` draws the distortion is reported as unmeasurable.
pub fn empirical_distortion(embedding: &Embedding, x: &DMatrix<f64>, n_probes: usize, seed: u64) -> Result<f64> {
    let sketched = embedding.apply(x)?;
    probe_distortion(x, &sketched, n_probes, seed, &[])
}

/// Same as [`empirical_distortion`] for an already sketched `PX`, with extra
/// deterministic coefficient probes appended to the random ones.
pub fn probe_distortion(
    x: &DMatrix<f64>,
    sketched: &DMatrix<f64>,
    n_probes: usize,
    seed: u64,
    extra: &[DVector<f64>],
) -> Result<f64> {
    check_dims("distortion probe", x.ncols(), sketched.ncols())?;
    let d = x.ncols();
    let mut worst: Option<f64> = None;
    let mut accepted = 0;
    let mut attempts = 0;
    let max_attempts = 16 * n_probes.max(1);
    let mut rng = seeded(derive_seed(seed, &[0x7072_6f62]));
    while accepted < n_probes && attempts < max_attempts {
        attempts += 1;
        let v = gaussian_vector(d, &mut rng);
        if let Some(ratio) = distortion_ratio(x, sketched, &v) {
            worst = Some(worst.map_or(ratio, |w| w.max(ratio)));
            accepted += 1;
        }
    }
    for v in extra {
        check_dims("distortion probe", d, v.len())?;
        if let Some(ratio) = distortion_ratio(x, sketched, v) {
            worst = Some(worst.map_or(ratio, |w| w.max(ratio)));
        }
    }
    worst.ok_or_else(|| Error::Unmeasurable("every probe satisfied Xv = 0".into()))
}

fn distortion_ratio(x: &DMatrix<f64>, sketched: &DMatrix<f64>, v: &DVector<f64>) -> Option<f64> {
    let plain = (x * v).norm_squared();
    if !(plain > 0.0) || !plain.is_finite() {
        return None;
    }
    let projected = (sketched * v).norm_squared();
    Some((projected / plain - 1.0).abs())
}
