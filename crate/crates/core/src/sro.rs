//! One-shot SRO, Iterative SRO and the resampling (IHS-style) variant.
//!
//! Every method minimizes `½βᵀX̃ᵀX̃β − ⟨y, Xβ⟩ + h(β)` type subproblems where
//! only the quadratic part is sketched.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::embed::{recommended_sketch_size, Embedding, EmbeddingKind, SketchBudget};
use crate::embed::{DEFAULT_GAUSSIAN_CONSTANT, DEFAULT_SPARSE_CONSTANT};
use crate::error::{check_dims, Error, Result};
use crate::linalg::fit_line;
use crate::reg::Regularizer;
use crate::rng::derive_seed;
use crate::solve::{fista, lambda_path, solve, GramOperator, QuadraticForm, SolveResult, SolverConfig};

/// `min ½‖y − Xβ‖² + h(β)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    x: DMatrix<f64>,
    y: DVector<f64>,
    reg: Regularizer,
}

impl Problem {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, reg: Regularizer) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidDimension(format!("design must be nonempty, got {}x{}", x.nrows(), x.ncols())));
        }
        check_dims("response length", x.nrows(), y.len())?;
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("design and response must be finite".into()));
        }
        Ok(Self { x, y, reg })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn reg(&self) -> &Regularizer {
        &self.reg
    }

    pub fn with_reg(&self, reg: Regularizer) -> Self {
        Self {
            x: self.x.clone(),
            y: self.y.clone(),
            reg,
        }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn objective(&self, beta: &DVector<f64>) -> f64 {
        0.5 * (&self.y - &self.x * beta).norm_squared() + self.reg.value(beta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SroConfig {
    /// Target contraction ρ per iteration.
    pub rho: f64,
    pub delta: f64,
    pub kind: EmbeddingKind,
    /// Explicit ñ, bypassing the recommended size.
    pub sketch_rows: Option<usize>,
    /// Rank estimate for the recommended size; `min(n, d)` when absent.
    pub rank: Option<usize>,
    pub c_gaussian: f64,
    pub c_sparse: f64,
    pub iterations: usize,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl Default for SroConfig {
    fn default() -> Self {
        Self {
            rho: 0.5,
            delta: 0.1,
            kind: EmbeddingKind::Gaussian,
            sketch_rows: None,
            rank: None,
            c_gaussian: DEFAULT_GAUSSIAN_CONSTANT,
            c_sparse: DEFAULT_SPARSE_CONSTANT,
            iterations: 8,
            solver: SolverConfig::default(),
            seed: 0,
        }
    }
}

impl SroConfig {
    /// `ε = ρ/(ρ+1)`.
    pub fn epsilon(&self) -> f64 {
        self.rho / (self.rho + 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidParameter(format!("rho must lie in (0,1), got {}", self.rho)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iteration count must be >= 1".into()));
        }
        if self.sketch_rows == Some(0) {
            return Err(Error::InvalidParameter("sketch rows must be >= 1".into()));
        }
        self.solver.validate()
    }

    pub fn budget(&self, problem: &Problem) -> Result<SketchBudget> {
        let rank = self.rank.unwrap_or(problem.n().min(problem.d()));
        SketchBudget::new(self.epsilon(), self.delta, rank)?.with_constants(self.c_gaussian, self.c_sparse)
    }

    pub fn sketch_size(&self, problem: &Problem) -> Result<usize> {
        match self.sketch_rows {
            Some(rows) => Ok(rows),
            None => recommended_sketch_size(&self.budget(problem)?, self.kind),
        }
    }

    /// Seed of the sketch used at iteration `t` (1-based).
    pub fn sketch_seed(&self, t: usize) -> u64 {
        derive_seed(self.seed, &[t as u64])
    }
}

/// How a run's sketch was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SketchSource {
    Seeded { kind: EmbeddingKind, seed: u64 },
    Supplied { kind: EmbeddingKind },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SketchRecord {
    pub source: SketchSource,
    pub rows: usize,
    pub cols: usize,
    /// Time spent drawing `P` and forming `PX` and its Gram representation.
    pub build_ms: f64,
}

impl SketchRecord {
    /// Redraws a seeded sketch; `None` for supplied ones.
    pub fn rebuild(&self) -> Option<Result<Embedding>> {
        match self.source {
            SketchSource::Seeded { kind, seed } => Some(Embedding::build(kind, self.cols, self.rows, seed)),
            SketchSource::Supplied { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub solver_iterations: usize,
    pub subproblem_objective: f64,
    /// Original objective `½‖y − Xβ‖² + h(β)` at the new iterate.
    pub objective: f64,
    pub converged: bool,
    pub residual: f64,
    pub trace: Vec<f64>,
    pub solve_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SroMethod {
    Sro,
    Iterative,
    IterativeIhs,
}

impl SroMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SroMethod::Sro => "sro",
            SroMethod::Iterative => "isro",
            SroMethod::IterativeIhs => "isro_ihs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SroRun {
    pub method: SroMethod,
    /// `β^(0) = 0, β^(1), …, β^(N)`.
    pub iterates: Vec<DVector<f64>>,
    /// One record, or one per iteration for the resampling variant.
    pub sketches: Vec<SketchRecord>,
    pub steps: Vec<StepRecord>,
    pub total_ms: f64,
}

impl SroRun {
    pub fn last(&self) -> &DVector<f64> {
        self.iterates.last().expect("a run always holds beta^(0)")
    }

    pub fn all_converged(&self) -> bool {
        self.steps.iter().all(|s| s.converged)
    }

    pub fn sketch_ms(&self) -> f64 {
        self.sketches.iter().map(|s| s.build_ms).sum()
    }
}

/// Linear term `b_t = X̃ᵀX̃β_prev + Xᵀ(y − Xβ_prev)` of the subproblem around `β_prev`.
pub fn subproblem_linear_term(problem: &Problem, gram: &GramOperator, prev: &DVector<f64>) -> DVector<f64> {
    let residual = problem.y() - problem.x() * prev;
    gram.apply(prev) + problem.x().tr_mul(&residual)
}

/// `½‖X̃(β − β_prev)‖² − ⟨y − Xβ_prev, Xβ⟩ + h(β)` evaluated literally.
pub fn subproblem_objective(problem: &Problem, sketched: &DMatrix<f64>, prev: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let diff = beta - prev;
    let residual = problem.y() - problem.x() * prev;
    0.5 * (sketched * diff).norm_squared() - residual.dot(&(problem.x() * beta)) + problem.reg().value(beta)
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

struct Sketched {
    qf: QuadraticForm,
    record: SketchRecord,
}

fn sketch_problem(problem: &Problem, embedding: &Embedding, source: SketchSource, solver: &SolverConfig) -> Result<Sketched> {
    check_dims("sketch columns", problem.n(), embedding.cols())?;
    let start = Instant::now();
    let sketched = embedding.apply(problem.x())?;
    let gram = GramOperator::from_factor(sketched);
    let qf = QuadraticForm::with_power_settings(gram, DVector::zeros(problem.d()), solver.power_tol, solver.power_max_iters)?;
    Ok(Sketched {
        qf,
        record: SketchRecord {
            source,
            rows: embedding.rows(),
            cols: embedding.cols(),
            build_ms: elapsed_ms(start),
        },
    })
}

fn seeded_sketch(problem: &Problem, config: &SroConfig, t: usize) -> Result<Sketched> {
    let rows = config.sketch_size(problem)?;
    let seed = config.sketch_seed(t);
    let start = Instant::now();
    let embedding = Embedding::build(config.kind, problem.n(), rows, seed)?;
    let draw_ms = elapsed_ms(start);
    let mut s = sketch_problem(problem, &embedding, SketchSource::Seeded { kind: config.kind, seed }, &config.solver)?;
    s.record.build_ms += draw_ms;
    Ok(s)
}

fn step(problem: &Problem, qf: &QuadraticForm, prev: &DVector<f64>, t: usize, solver: &SolverConfig) -> Result<(DVector<f64>, StepRecord)> {
    let start = Instant::now();
    let linear = subproblem_linear_term(problem, qf.gram(), prev);
    let qf_t = qf.with_linear(linear)?;
    let reg = problem.reg();
    let res: SolveResult = if reg.is_convex() {
        fista(&qf_t, reg, solver, prev)?
    } else if t == 1 {
        lambda_path(&qf_t, reg, solver, prev)?
    } else {
        fista(&qf_t, reg, solver, prev)?
    };
    let solve_ms = elapsed_ms(start);
    let record = StepRecord {
        solver_iterations: res.iterations,
        subproblem_objective: res.objective,
        objective: problem.objective(&res.beta),
        converged: res.converged,
        residual: res.residual,
        trace: res.trace,
        solve_ms,
    };
    Ok((res.beta, record))
}

fn iterate_fixed(problem: &Problem, sketched: Sketched, iterations: usize, solver: &SolverConfig, method: SroMethod, start: Instant) -> Result<SroRun> {
    let mut iterates = vec![DVector::zeros(problem.d())];
    let mut steps = Vec::with_capacity(iterations);
    for t in 1..=iterations {
        let (beta, record) = step(problem, &sketched.qf, iterates.last().unwrap(), t, solver)?;
        iterates.push(beta);
        steps.push(record);
    }
    Ok(SroRun {
        method,
        iterates,
        sketches: vec![sketched.record],
        steps,
        total_ms: elapsed_ms(start),
    })
}

/// One-shot SRO: a single sketched solve from `β = 0`.
pub fn sro_solve(problem: &Problem, config: &SroConfig) -> Result<SroRun> {
    config.validate()?;
    let start = Instant::now();
    let sketched = seeded_sketch(problem, config, 1)?;
    iterate_fixed(problem, sketched, 1, &config.solver, SroMethod::Sro, start)
}

/// Iterative SRO with one sketch drawn up front and reused for all `N` steps.
pub fn iterative_sro(problem: &Problem, config: &SroConfig) -> Result<SroRun> {
    config.validate()?;
    let start = Instant::now();
    let sketched = seeded_sketch(problem, config, 1)?;
    iterate_fixed(problem, sketched, config.iterations, &config.solver, SroMethod::Iterative, start)
}

/// Iterative SRO drawing a fresh sketch `P_t` at every step.
pub fn iterative_sro_ihs(problem: &Problem, config: &SroConfig) -> Result<SroRun> {
    config.validate()?;
    let start = Instant::now();
    let mut iterates = vec![DVector::zeros(problem.d())];
    let mut steps = Vec::with_capacity(config.iterations);
    let mut sketches = Vec::with_capacity(config.iterations);
    for t in 1..=config.iterations {
        let sketched = seeded_sketch(problem, config, t)?;
        let (beta, record) = step(problem, &sketched.qf, iterates.last().unwrap(), t, &config.solver)?;
        iterates.push(beta);
        steps.push(record);
        sketches.push(sketched.record);
    }
    Ok(SroRun {
        method: SroMethod::IterativeIhs,
        iterates,
        sketches,
        steps,
        total_ms: elapsed_ms(start),
    })
}

/// Runs `iterations` steps with a caller-supplied sketch (one-shot SRO when 1).
pub fn iterative_sro_with(problem: &Problem, embedding: &Embedding, iterations: usize, solver: &SolverConfig) -> Result<SroRun> {
    if iterations == 0 {
        return Err(Error::InvalidParameter("iteration count must be >= 1".into()));
    }
    solver.validate()?;
    let start = Instant::now();
    let sketched = sketch_problem(problem, embedding, SketchSource::Supplied { kind: embedding.kind() }, solver)?;
    let method = if iterations == 1 { SroMethod::Sro } else { SroMethod::Iterative };
    iterate_fixed(problem, sketched, iterations, solver, method, start)
}

pub fn run(method: SroMethod, problem: &Problem, config: &SroConfig) -> Result<SroRun> {
    match method {
        SroMethod::Sro => sro_solve(problem, config),
        SroMethod::Iterative => iterative_sro(problem, config),
        SroMethod::IterativeIhs => iterative_sro_ihs(problem, config),
    }
}

/// Unsketched solve of the original problem from `β = 0`.
pub fn direct_solve(problem: &Problem, solver: &SolverConfig) -> Result<SolveResult> {
    let gram = GramOperator::from_factor(problem.x().clone());
    let qf = QuadraticForm::with_power_settings(gram, problem.x().tr_mul(problem.y()), solver.power_tol, solver.power_max_iters)?;
    solve(&qf, problem.reg(), solver, &DVector::zeros(problem.d()))
}

/// Solver settings for the reference `β*`: tolerance 1e-12 and ten times the iteration cap.
pub fn reference_config(base: &SolverConfig) -> SolverConfig {
    SolverConfig {
        max_iters: base.max_iters * 10,
        rel_tol: base.rel_tol.min(1e-12),
        abs_tol: base.abs_tol.min(1e-12),
        ..base.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    /// `e_t = ‖X(β^(t) − β*)‖` for `t = 0..=N`.
    pub errors: Vec<f64>,
    /// `e_t / e_{t−1}` for `t = 1..=N`, absent where `e_{t−1} = 0`.
    pub ratios: Vec<Option<f64>>,
    /// Least-squares slope of `ln e_t` against `t` over positive errors.
    pub log_slope: Option<f64>,
    pub already_converged: bool,
}

const CONVERGED_RATIO: f64 = 1e-8;

pub fn contraction_from_errors(errors: Vec<f64>) -> ContractionReport {
    let ratios = errors
        .windows(2)
        .map(|w| if w[0] > 0.0 { Some(w[1] / w[0]) } else { None })
        .collect();
    let (ts, logs): (Vec<f64>, Vec<f64>) = errors
        .iter()
        .enumerate()
        .filter(|(_, e)| **e > 0.0 && e.is_finite())
        .map(|(t, e)| (t as f64, e.ln()))
        .unzip();
    let log_slope = fit_line(&ts, &logs).map(|f| f.slope);
    let e0 = errors.first().copied().unwrap_or(0.0);
    let already_converged = e0 == 0.0 || errors.get(1).is_some_and(|&e1| e1 <= CONVERGED_RATIO * e0);
    ContractionReport {
        errors,
        ratios,
        log_slope,
        already_converged,
    }
}

/// X-seminorm errors of every iterate against a reference solution.
pub fn measure_contraction(run: &SroRun, x: &DMatrix<f64>, reference: &DVector<f64>) -> Result<ContractionReport> {
    check_dims("contraction reference", x.ncols(), reference.len())?;
    let errors = run
        .iterates
        .iter()
        .map(|b| (x * (b - reference)).norm())
        .collect();
    Ok(contraction_from_errors(errors))
}
