//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! per-experiment default; unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use sro_core::gen::{default_sparsity, DesignKind};
use sro_core::EmbeddingKind;

pub const SCHEMA_VERSION: u32 = 1;

pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value, got `{line}`", lineno + 1))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            bail!("line {}: empty key", lineno + 1);
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            bail!("line {}: duplicate key `{key}`", lineno + 1);
        }
    }
    Ok(out)
}

pub fn read_pairs(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_pairs(&text)
}

pub fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    GlassoDecay,
    RidgeDecay,
    LassoEstimation,
    RateScan,
    DistortionCheck,
    Timing,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::GlassoDecay,
        ExperimentKind::RidgeDecay,
        ExperimentKind::LassoEstimation,
        ExperimentKind::RateScan,
        ExperimentKind::DistortionCheck,
        ExperimentKind::Timing,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::GlassoDecay => "glasso_decay",
            ExperimentKind::RidgeDecay => "ridge_decay",
            ExperimentKind::LassoEstimation => "lasso_estimation",
            ExperimentKind::RateScan => "rate_scan",
            ExperimentKind::DistortionCheck => "distortion_check",
            ExperimentKind::Timing => "timing",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| anyhow!("unknown experiment `{s}`"))
    }
}

/// Problem family an instance is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Glasso,
    Ridge,
    Lasso,
    Sparse,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Glasso => "glasso",
            Family::Ridge => "ridge",
            Family::Lasso => "lasso",
            Family::Sparse => "sparse",
        }
    }
}

impl FromStr for Family {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "glasso" => Ok(Family::Glasso),
            "ridge" => Ok(Family::Ridge),
            "lasso" => Ok(Family::Lasso),
            "sparse" => Ok(Family::Sparse),
            other => bail!("unknown problem family `{other}`"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    Zero,
    Gaussian,
    Sparse,
}

impl SignalKind {
    fn name(&self) -> &'static str {
        match self {
            SignalKind::Zero => "zero",
            SignalKind::Gaussian => "gaussian",
            SignalKind::Sparse => "sparse",
        }
    }
}

impl FromStr for SignalKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "zero" => Ok(SignalKind::Zero),
            "gaussian" => Ok(SignalKind::Gaussian),
            "sparse" => Ok(SignalKind::Sparse),
            other => bail!("unknown signal `{other}`"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyKind {
    None,
    Ridge,
    L1,
    Scad,
    Mcp,
    /// L1 on successive differences.
    Fused,
}

impl PenaltyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PenaltyKind::None => "none",
            PenaltyKind::Ridge => "ridge",
            PenaltyKind::L1 => "l1",
            PenaltyKind::Scad => "scad",
            PenaltyKind::Mcp => "mcp",
            PenaltyKind::Fused => "fused",
        }
    }
}

impl FromStr for PenaltyKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(PenaltyKind::None),
            "ridge" => Ok(PenaltyKind::Ridge),
            "l1" => Ok(PenaltyKind::L1),
            "scad" => Ok(PenaltyKind::Scad),
            "mcp" => Ok(PenaltyKind::Mcp),
            "fused" => Ok(PenaltyKind::Fused),
            other => bail!("unknown penalty `{other}`"),
        }
    }
}

/// Regularization weight: fixed, or derived from `(n, d, s̄, σ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    Fixed(f64),
    /// `scale · √(log d / n)`.
    Auto,
    /// `scale · √(s̄ log d / n)`.
    AutoSparse,
    /// `scale · σ · √(log d / n)`.
    AutoNoise,
}

impl fmt::Display for LambdaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaRule::Fixed(v) => write!(f, "{v:?}"),
            LambdaRule::Auto => f.write_str("auto"),
            LambdaRule::AutoSparse => f.write_str("auto_sparse"),
            LambdaRule::AutoNoise => f.write_str("auto_noise"),
        }
    }
}

impl FromStr for LambdaRule {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(LambdaRule::Auto),
            "auto_sparse" => Ok(LambdaRule::AutoSparse),
            "auto_noise" => Ok(LambdaRule::AutoNoise),
            other => Ok(LambdaRule::Fixed(other.parse().map_err(|_| anyhow!("bad lambda `{other}`"))?)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SketchRule {
    /// Recommended size from `(ρ, δ, rank)`.
    Recommended,
    /// `ñ = γ̄ · rank`.
    GammaRank,
    /// `ñ = γ̄ · d`.
    GammaDim,
}

impl fmt::Display for SketchRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SketchRule::Recommended => "recommended",
            SketchRule::GammaRank => "gamma_rank",
            SketchRule::GammaDim => "gamma_d",
        })
    }
}

impl FromStr for SketchRule {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "recommended" => Ok(SketchRule::Recommended),
            "gamma_rank" => Ok(SketchRule::GammaRank),
            "gamma_d" => Ok(SketchRule::GammaDim),
            other => bail!("unknown sketch rule `{other}`"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    Sro,
    Isro,
    IsroIhs,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Sro => "sro",
            Method::Isro => "isro",
            Method::IsroIhs => "isro_ihs",
        }
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exact" => Ok(Method::Exact),
            "sro" => Ok(Method::Sro),
            "isro" => Ok(Method::Isro),
            "isro_ihs" => Ok(Method::IsroIhs),
            other => bail!("unknown method `{other}`"),
        }
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn join_f64(items: &[f64]) -> String {
    items.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

fn split_list<T: FromStr>(raw: &str, key: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| anyhow!("bad entry `{s}` in `{key}`")))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub family: Family,
    pub generator: DesignKind,
    pub n: usize,
    pub d: usize,
    pub rank: usize,
    pub estimation: bool,
    pub signal: SignalKind,
    /// 0 selects `⌊3 ln d⌋`.
    pub sparsity: usize,
    pub noise: f64,
    pub penalty: PenaltyKind,
    pub lambda: LambdaRule,
    pub lambda_scale: f64,
    pub scad_a: f64,
    pub mcp_b: f64,
    pub embedding: EmbeddingKind,
    pub rho: f64,
    pub delta: f64,
    pub sketch: SketchRule,
    pub gammas: Vec<f64>,
    pub iterations: usize,
    pub trials: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub methods: Vec<Method>,
    pub n_grid: Vec<usize>,
    pub repeats: usize,
    pub probes: usize,
}

impl ExperimentConfig {
    /// Defaults for an experiment; `distortion_check` and `timing` take the
    /// family as a second key.
    pub fn defaults(experiment: ExperimentKind, family: Option<Family>) -> Self {
        let base = Self {
            experiment,
            family: Family::Glasso,
            generator: DesignKind::DenseGaussian,
            n: 4000,
            d: 120,
            rank: 120,
            estimation: true,
            signal: SignalKind::Zero,
            sparsity: 0,
            noise: 1.0,
            penalty: PenaltyKind::Fused,
            lambda: LambdaRule::Auto,
            lambda_scale: 1.0,
            scad_a: sro_core::reg::DEFAULT_SCAD_A,
            mcp_b: sro_core::reg::DEFAULT_MCP_B,
            embedding: EmbeddingKind::Gaussian,
            rho: 0.5,
            delta: 0.1,
            sketch: SketchRule::GammaDim,
            gammas: vec![2.0, 3.0, 4.0, 6.0, 8.0],
            iterations: 10,
            trials: 20,
            seed: 20_240_601,
            max_iters: 10_000,
            rel_tol: 1e-10,
            abs_tol: 1e-8,
            methods: vec![Method::Exact, Method::Sro, Method::Isro, Method::IsroIhs],
            n_grid: vec![500, 1000, 2000, 4000],
            repeats: 3,
            probes: sro_core::embed::DEFAULT_DISTORTION_PROBES,
        };
        let ridge = |c: Self| Self {
            family: Family::Ridge,
            generator: DesignKind::LowRankSvd,
            n: 1000,
            d: 2000,
            rank: 10,
            estimation: false,
            signal: SignalKind::Gaussian,
            penalty: PenaltyKind::Ridge,
            sketch: SketchRule::Recommended,
            gammas: vec![1.0],
            iterations: 8,
            rel_tol: 1e-15,
            abs_tol: 0.0,
            ..c
        };
        match (experiment, family) {
            (ExperimentKind::GlassoDecay, _) => base,
            (ExperimentKind::RidgeDecay, _) => ridge(base),
            (ExperimentKind::LassoEstimation, _) => Self {
                family: Family::Lasso,
                generator: DesignKind::LowRankRip,
                n: 1000,
                d: 5000,
                rank: 10,
                signal: SignalKind::Sparse,
                penalty: PenaltyKind::L1,
                lambda: LambdaRule::AutoSparse,
                lambda_scale: 0.1,
                sketch: SketchRule::GammaRank,
                gammas: vec![16.0],
                ..base
            },
            (ExperimentKind::RateScan, _) => Self {
                family: Family::Sparse,
                d: 40,
                rank: 40,
                signal: SignalKind::Sparse,
                penalty: PenaltyKind::L1,
                lambda: LambdaRule::AutoNoise,
                gammas: vec![10.0],
                methods: vec![Method::Exact, Method::Isro],
                ..base
            },
            (ExperimentKind::DistortionCheck, Some(Family::Ridge)) => Self {
                trials: 50,
                iterations: 1,
                ..ridge(base)
            },
            (ExperimentKind::DistortionCheck, _) => Self {
                trials: 50,
                iterations: 1,
                gammas: vec![8.0],
                ..base
            },
            (ExperimentKind::Timing, _) => Self {
                n: 20_000,
                embedding: EmbeddingKind::Sparse,
                gammas: vec![4.0],
                trials: 1,
                ..base
            },
        }
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let experiment: ExperimentKind = pairs
            .get("experiment")
            .ok_or_else(|| anyhow!("config needs an `experiment` key"))?
            .parse()?;
        let family = pairs.get("problem").map(|s| s.parse()).transpose()?;
        let mut cfg = Self::defaults(experiment, family);
        for (key, value) in pairs {
            cfg.set(key, value).with_context(|| format!("config key `{key}`"))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_pairs(&read_pairs(path)?)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(v: &str) -> Result<T> {
            v.trim().parse().map_err(|_| anyhow!("bad value `{v}`"))
        }
        match key {
            "experiment" => self.experiment = value.parse()?,
            "problem" => self.family = value.parse()?,
            "schema_version" => {
                let v: u32 = num(value)?;
                if v != SCHEMA_VERSION {
                    bail!("schema version {v} is not supported (expected {SCHEMA_VERSION})");
                }
            }
            "generator" => self.generator = value.parse()?,
            "n" => self.n = num(value)?,
            "d" => self.d = num(value)?,
            "rank" => self.rank = num(value)?,
            "estimation" => self.estimation = num(value)?,
            "signal" => self.signal = value.parse()?,
            "sparsity" => self.sparsity = num(value)?,
            "noise" => self.noise = num(value)?,
            "penalty" => self.penalty = value.parse()?,
            "lambda" => self.lambda = value.parse()?,
            "lambda_scale" => self.lambda_scale = num(value)?,
            "scad_a" => self.scad_a = num(value)?,
            "mcp_b" => self.mcp_b = num(value)?,
            "embedding" => self.embedding = value.parse()?,
            "rho" => self.rho = num(value)?,
            "delta" => self.delta = num(value)?,
            "sketch" => self.sketch = value.parse()?,
            "gammas" => self.gammas = split_list(value, key)?,
            "iterations" => self.iterations = num(value)?,
            "trials" => self.trials = num(value)?,
            "seed" => self.seed = num(value)?,
            "max_iters" => self.max_iters = num(value)?,
            "rel_tol" => self.rel_tol = num(value)?,
            "abs_tol" => self.abs_tol = num(value)?,
            "methods" => self.methods = split_list(value, key)?,
            "n_grid" => self.n_grid = split_list(value, key)?,
            "repeats" => self.repeats = num(value)?,
            "probes" => self.probes = num(value)?,
            other => bail!("unknown key `{other}`"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.iterations == 0 || self.repeats == 0 || self.probes == 0 {
            bail!("trials, iterations, repeats and probes must be >= 1");
        }
        if self.n == 0 || self.d == 0 {
            bail!("n and d must be >= 1");
        }
        if self.gammas.is_empty() || self.gammas.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            bail!("gammas must be a nonempty list of positive values");
        }
        if self.methods.is_empty() {
            bail!("methods must be nonempty");
        }
        if self.experiment == ExperimentKind::RateScan && self.n_grid.len() < 4 {
            bail!("rate scan needs at least 4 sample sizes");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            bail!("noise must be finite and >= 0");
        }
        if self.sparsity > self.d {
            bail!("sparsity exceeds d");
        }
        Ok(())
    }

    pub fn effective_sparsity(&self) -> usize {
        if self.sparsity == 0 {
            default_sparsity(self.d)
        } else {
            self.sparsity
        }
    }

    /// λ for sample size `n`.
    pub fn lambda_for(&self, n: usize) -> f64 {
        let base = ((self.d as f64).ln() / n as f64).sqrt();
        match self.lambda {
            LambdaRule::Fixed(v) => v,
            LambdaRule::Auto => self.lambda_scale * base,
            LambdaRule::AutoSparse => self.lambda_scale * (self.effective_sparsity() as f64).sqrt() * base,
            LambdaRule::AutoNoise => self.lambda_scale * self.noise * base,
        }
    }

    /// Every key with its effective value, in a fixed order.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let p = |k: &str, v: String| (k.to_string(), v);
        vec![
            p("schema_version", SCHEMA_VERSION.to_string()),
            p("experiment", self.experiment.to_string()),
            p("problem", self.family.name().into()),
            p("generator", self.generator.to_string()),
            p("n", self.n.to_string()),
            p("d", self.d.to_string()),
            p("rank", self.rank.to_string()),
            p("estimation", self.estimation.to_string()),
            p("signal", self.signal.name().into()),
            p("sparsity", self.sparsity.to_string()),
            p("noise", format!("{:?}", self.noise)),
            p("penalty", self.penalty.name().into()),
            p("lambda", self.lambda.to_string()),
            p("lambda_scale", format!("{:?}", self.lambda_scale)),
            p("scad_a", format!("{:?}", self.scad_a)),
            p("mcp_b", format!("{:?}", self.mcp_b)),
            p("embedding", self.embedding.to_string()),
            p("rho", format!("{:?}", self.rho)),
            p("delta", format!("{:?}", self.delta)),
            p("sketch", self.sketch.to_string()),
            p("gammas", join_f64(&self.gammas)),
            p("iterations", self.iterations.to_string()),
            p("trials", self.trials.to_string()),
            p("seed", self.seed.to_string()),
            p("max_iters", self.max_iters.to_string()),
            p("rel_tol", format!("{:?}", self.rel_tol)),
            p("abs_tol", format!("{:?}", self.abs_tol)),
            p("methods", self.methods.iter().map(|m| m.name()).collect::<Vec<_>>().join(",")),
            p("n_grid", join(&self.n_grid)),
            p("repeats", self.repeats.to_string()),
            p("probes", self.probes.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        format_pairs(&self.to_pairs())
    }
}
