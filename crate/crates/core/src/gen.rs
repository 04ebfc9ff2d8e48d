//! Seeded synthetic designs, signals and responses.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{check_dims, Error, Result};
use crate::reg::Regularizer;
use crate::rng::{derive_seed, gaussian_matrix, gaussian_vector, seeded, SeededRng};
use crate::sro::Problem;

/// Column-norm ceiling enforced in estimation mode.
pub const COLUMN_NORM_LIMIT: f64 = 1.0 + 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    LowRankSvd,
    LowRankRip,
    DenseGaussian,
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DesignKind::LowRankSvd => "low_rank_svd",
            DesignKind::LowRankRip => "low_rank_rip",
            DesignKind::DenseGaussian => "dense_gaussian",
        })
    }
}

impl FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "low_rank_svd" => Ok(DesignKind::LowRankSvd),
            "low_rank_rip" => Ok(DesignKind::LowRankRip),
            "dense_gaussian" => Ok(DesignKind::DenseGaussian),
            other => Err(Error::InvalidParameter(format!("unknown design kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignSpec {
    pub n: usize,
    pub d: usize,
    /// Ignored by the dense Gaussian design.
    pub rank: usize,
    pub kind: DesignKind,
    pub seed: u64,
}

impl DesignSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidDimension(format!("design needs n, d >= 1, got {}x{}", self.n, self.d)));
        }
        match self.kind {
            DesignKind::DenseGaussian => Ok(()),
            DesignKind::LowRankSvd | DesignKind::LowRankRip if self.rank == 0 => {
                Err(Error::InvalidParameter("rank must be >= 1".into()))
            }
            DesignKind::LowRankSvd if self.rank > self.n.min(self.d) => Err(Error::InvalidParameter(format!(
                "rank {} exceeds min(n, d) = {}",
                self.rank,
                self.n.min(self.d)
            ))),
            DesignKind::LowRankRip if self.rank > self.n => {
                Err(Error::InvalidParameter(format!("rank {} exceeds n = {}", self.rank, self.n)))
            }
            _ => Ok(()),
        }
    }
}

/// `rows×cols` matrix with orthonormal columns, Haar distributed.
///
/// QR of a Gaussian matrix with the signs of `R`'s diagonal moved into `Q`.
pub fn stiefel(rows: usize, cols: usize, rng: &mut SeededRng) -> Result<DMatrix<f64>> {
    if cols == 0 || cols > rows {
        return Err(Error::InvalidDimension(format!("Stiefel sample needs 1 <= cols <= rows, got {rows}x{cols}")));
    }
    let g = gaussian_matrix(rows, cols, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Factors of `X̄ = U Σ Vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl SvdFactors {
    pub fn product(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

pub fn low_rank_svd_factors(spec: &DesignSpec) -> Result<SvdFactors> {
    spec.validate()?;
    let mut rng = seeded(spec.seed);
    let u = stiefel(spec.n, spec.rank, &mut rng)?;
    let v = stiefel(spec.d, spec.rank, &mut rng)?;
    let sigma = gaussian_vector(spec.rank, &mut rng).abs();
    Ok(SvdFactors { u, sigma, v })
}

/// Unscaled `X̄ = UΣVᵀ` with Haar `U`, `V` and `Σ_ii = |N(0,1)|`.
pub fn gen_low_rank_svd(spec: &DesignSpec) -> Result<DMatrix<f64>> {
    Ok(low_rank_svd_factors(spec)?.product())
}

/// `X = UUᵀΩ` with Haar `U` (`n×r`) and `Ω_ij ~ N(0, 1/r)`.
pub fn gen_low_rank_rip(spec: &DesignSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let mut rng = seeded(spec.seed);
    let u = stiefel(spec.n, spec.rank, &mut rng)?;
    let omega = gaussian_matrix(spec.n, spec.d, &mut rng) / (spec.rank as f64).sqrt();
    Ok(&u * u.tr_mul(&omega))
}

/// I.i.d. standard normal `X̄`.
pub fn gen_dense_gaussian(spec: &DesignSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    Ok(gaussian_matrix(spec.n, spec.d, &mut seeded(spec.seed)))
}

/// The raw design of the requested kind.
pub fn gen_design(spec: &DesignSpec) -> Result<DMatrix<f64>> {
    match spec.kind {
        DesignKind::LowRankSvd => gen_low_rank_svd(spec),
        DesignKind::LowRankRip => gen_low_rank_rip(spec),
        DesignKind::DenseGaussian => gen_dense_gaussian(spec),
    }
}

/// Scaling applied when moving a raw design to estimation mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignScaling {
    /// Whether `X = X̄/√n` was applied (not for the RIP design, which is unit scale).
    pub sqrt_n: bool,
    /// Divisor applied when the largest column norm exceeded the limit.
    pub rescale: Option<f64>,
}

pub fn max_column_norm(x: &DMatrix<f64>) -> f64 {
    x.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Estimation-mode design: `X̄/√n`, then divided by its largest column norm
/// if that exceeds `1 + 1e-9`.
pub fn estimation_design(spec: &DesignSpec) -> Result<(DMatrix<f64>, DesignScaling)> {
    let mut x = gen_design(spec)?;
    let sqrt_n = spec.kind != DesignKind::LowRankRip;
    if sqrt_n {
        x /= (spec.n as f64).sqrt();
    }
    let top = max_column_norm(&x);
    let rescale = if top > COLUMN_NORM_LIMIT {
        x /= top;
        Some(top)
    } else {
        None
    };
    Ok((x, DesignScaling { sqrt_n, rescale }))
}

/// Default sparsity `⌊3 ln d⌋`, at least 1 and at most `d`.
pub fn default_sparsity(d: usize) -> usize {
    ((3.0 * (d as f64).ln()).floor() as usize).clamp(1, d.max(1))
}

/// `s̄`-sparse signal with uniform support and entries `±1/√s̄`.
///
/// Returns the signal and its sorted support.
pub fn gen_sparse_signal(d: usize, sparsity: usize, seed: u64) -> Result<(DVector<f64>, Vec<usize>)> {
    if sparsity == 0 || sparsity > d {
        return Err(Error::InvalidParameter(format!("sparsity must lie in [1, {d}], got {sparsity}")));
    }
    let mut rng = seeded(seed);
    let mut support = sample(&mut rng, d, sparsity).into_vec();
    support.sort_unstable();
    let mag = 1.0 / (sparsity as f64).sqrt();
    let mut beta = DVector::zeros(d);
    for &j in &support {
        beta[j] = if rng.random::<bool>() { mag } else { -mag };
    }
    Ok((beta, support))
}

/// `y = Xβ̄ + w/√n` with `w ~ N(0, σ² I)`.
pub fn gen_response(x: &DMatrix<f64>, beta: &DVector<f64>, sigma: f64, seed: u64) -> Result<DVector<f64>> {
    check_dims("response signal", x.ncols(), beta.len())?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise level must be finite and >= 0, got {sigma}")));
    }
    let mut y = x * beta;
    if sigma > 0.0 {
        let scale = sigma / (x.nrows() as f64).sqrt();
        let w = gaussian_vector(x.nrows(), &mut seeded(seed));
        y.axpy(scale, &w, 1.0);
    }
    Ok(y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalSpec {
    Zero,
    Gaussian,
    Sparse { sparsity: usize },
}

impl fmt::Display for SignalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalSpec::Zero => f.write_str("zero"),
            SignalSpec::Gaussian => f.write_str("gaussian"),
            SignalSpec::Sparse { sparsity } => write!(f, "sparse:{sparsity}"),
        }
    }
}

impl FromStr for SignalSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "zero" => Ok(SignalSpec::Zero),
            "gaussian" => Ok(SignalSpec::Gaussian),
            _ => {
                let count = s
                    .strip_prefix("sparse:")
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown signal `{s}`")))?;
                let sparsity = count
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad sparsity `{count}`")))?;
                Ok(SignalSpec::Sparse { sparsity })
            }
        }
    }
}

/// Everything needed to regenerate an instance bit for bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceSpec {
    pub design: DesignSpec,
    pub signal: SignalSpec,
    pub noise: f64,
    /// Apply the estimation-mode scaling of the design.
    pub estimation: bool,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        vec![
            ("generator".into(), self.design.kind.to_string()),
            ("n".into(), self.design.n.to_string()),
            ("d".into(), self.design.d.to_string()),
            ("rank".into(), self.design.rank.to_string()),
            ("design_seed".into(), self.design.seed.to_string()),
            ("signal".into(), self.signal.to_string()),
            ("noise".into(), format!("{:?}", self.noise)),
            ("estimation".into(), self.estimation.to_string()),
            ("instance_seed".into(), self.seed.to_string()),
        ]
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        fn get<T: FromStr>(pairs: &BTreeMap<String, String>, key: &str) -> Result<T> {
            let raw = pairs
                .get(key)
                .ok_or_else(|| Error::InvalidParameter(format!("missing provenance key `{key}`")))?;
            raw.trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad value `{raw}` for `{key}`")))
        }
        let kind: String = get(pairs, "generator")?;
        let signal: String = get(pairs, "signal")?;
        Ok(Self {
            design: DesignSpec {
                n: get(pairs, "n")?,
                d: get(pairs, "d")?,
                rank: get(pairs, "rank")?,
                kind: kind.parse()?,
                seed: get(pairs, "design_seed")?,
            },
            signal: signal.parse()?,
            noise: get(pairs, "noise")?,
            estimation: get(pairs, "estimation")?,
            seed: get(pairs, "instance_seed")?,
        })
    }
}

/// Generated problem with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub problem: Problem,
    pub beta_bar: DVector<f64>,
    pub support: Vec<usize>,
    pub noise: f64,
    pub spec: InstanceSpec,
    pub scaling: DesignScaling,
}

impl ProblemInstance {
    pub fn generate(spec: &InstanceSpec, reg: Regularizer) -> Result<Self> {
        let (x, scaling) = if spec.estimation {
            estimation_design(&spec.design)?
        } else {
            (
                gen_design(&spec.design)?,
                DesignScaling {
                    sqrt_n: false,
                    rescale: None,
                },
            )
        };
        let d = spec.design.d;
        let signal_seed = derive_seed(spec.seed, &[2]);
        let (beta_bar, support) = match spec.signal {
            SignalSpec::Zero => (DVector::zeros(d), Vec::new()),
            SignalSpec::Gaussian => {
                let b = gaussian_vector(d, &mut seeded(signal_seed));
                let support = (0..d).filter(|&j| b[j] != 0.0).collect();
                (b, support)
            }
            SignalSpec::Sparse { sparsity } => gen_sparse_signal(d, sparsity, signal_seed)?,
        };
        let y = gen_response(&x, &beta_bar, spec.noise, derive_seed(spec.seed, &[3]))?;
        Ok(Self {
            problem: Problem::new(x, y, reg)?,
            beta_bar,
            support,
            noise: spec.noise,
            spec: *spec,
            scaling,
        })
    }

    /// Regenerates from the stored provenance.
    pub fn regenerate(&self) -> Result<Self> {
        Self::generate(&self.spec, self.problem.reg().clone())
    }
}
