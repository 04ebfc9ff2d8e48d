//! Inner solvers for `½βᵀAβ − bᵀβ + h_λ(β)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dims, Error, Result};
use crate::linalg::{compress_gram_factor, power_iteration};
use crate::reg::{Penalty, Regularizer};

const POWER_SEED: u64 = 0x6c69_7073;
const COMPRESSION_TOL: f64 = 1e-10;
/// Step-size margin over the power-iteration estimate, which approaches λ_max from below.
const STEP_MARGIN: f64 = 1.0 + 1e-9;

/// The Gram matrix `A`, either through a factor `M` (`A = MᵀM`) or explicitly.
#[derive(Debug, Clone, PartialEq)]
pub enum GramOperator {
    Factor(DMatrix<f64>),
    Dense(DMatrix<f64>),
}

impl GramOperator {
    /// Picks a representation for `MᵀM`.
    ///
    /// Wide factors are compressed to a `k×d` triangular factor when their
    /// numerical rank `k` is at most half the row count; tall ones are
    /// multiplied out.
    pub fn from_factor(m: DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        if rows >= cols {
            return GramOperator::Dense(m.tr_mul(&m));
        }
        match compress_gram_factor(&m, COMPRESSION_TOL, rows / 2 + 1) {
            Some(r) => GramOperator::Factor(r),
            None => GramOperator::Factor(m),
        }
    }

    /// Keeps `M` exactly as given.
    pub fn raw_factor(m: DMatrix<f64>) -> Self {
        GramOperator::Factor(m)
    }

    pub fn dense(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidDimension(format!("Gram matrix must be square, got {}x{}", a.nrows(), a.ncols())));
        }
        Ok(GramOperator::Dense(a))
    }

    pub fn dim(&self) -> usize {
        match self {
            GramOperator::Factor(m) => m.ncols(),
            GramOperator::Dense(a) => a.ncols(),
        }
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            GramOperator::Factor(m) => m.tr_mul(&(m * v)),
            GramOperator::Dense(a) => a * v,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            GramOperator::Factor(m) => m.tr_mul(m),
            GramOperator::Dense(a) => a.clone(),
        }
    }
}

/// Largest eigenvalue of the Gram operator by power iteration; 0 for a zero operator.
pub fn lipschitz_estimate(op: &GramOperator, tol: f64, max_iters: usize) -> f64 {
    power_iteration(|v| op.apply(v), op.dim(), tol, max_iters, POWER_SEED)
}

/// Quadratic part `½βᵀAβ − bᵀβ` with a cached `L = λ_max(A)`.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    gram: Arc<GramOperator>,
    linear: DVector<f64>,
    lipschitz: f64,
}

impl QuadraticForm {
    pub fn new(gram: GramOperator, linear: DVector<f64>) -> Result<Self> {
        Self::with_power_settings(gram, linear, 1e-8, 500)
    }

    pub fn with_power_settings(gram: GramOperator, linear: DVector<f64>, tol: f64, max_iters: usize) -> Result<Self> {
        check_dims("quadratic form linear term", gram.dim(), linear.len())?;
        if gram.dim() == 0 {
            return Err(Error::InvalidDimension("quadratic form needs d >= 1".into()));
        }
        let lipschitz = lipschitz_estimate(&gram, tol, max_iters);
        Ok(Self {
            gram: Arc::new(gram),
            linear,
            lipschitz,
        })
    }

    pub fn from_factor(m: DMatrix<f64>, linear: DVector<f64>) -> Result<Self> {
        Self::new(GramOperator::from_factor(m), linear)
    }

    pub fn from_dense(a: DMatrix<f64>, linear: DVector<f64>) -> Result<Self> {
        Self::new(GramOperator::dense(a)?, linear)
    }

    /// Same `A` (and cached `L`) with a new linear term.
    pub fn with_linear(&self, linear: DVector<f64>) -> Result<Self> {
        check_dims("quadratic form linear term", self.dim(), linear.len())?;
        Ok(Self {
            gram: Arc::clone(&self.gram),
            linear,
            lipschitz: self.lipschitz,
        })
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn gram(&self) -> &GramOperator {
        &self.gram
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.gram.apply(v)
    }

    pub fn value(&self, beta: &DVector<f64>) -> f64 {
        let a_beta = self.apply(beta);
        0.5 * beta.dot(&a_beta) - self.linear.dot(beta)
    }

    fn value_with(&self, beta: &DVector<f64>, a_beta: &DVector<f64>) -> f64 {
        0.5 * beta.dot(a_beta) - self.linear.dot(beta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Relative tolerance on the prox fixed-point residual.
    pub rel_tol: f64,
    /// Absolute floor of the residual tolerance.
    pub abs_tol: f64,
    pub power_tol: f64,
    pub power_max_iters: usize,
    /// Geometric shrink factor η of the continuation schedule.
    pub shrink: f64,
    /// Upper bound on continuation stages.
    pub max_stages: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            rel_tol: 1e-10,
            abs_tol: 1e-8,
            power_tol: 1e-8,
            power_max_iters: 500,
            shrink: 0.7,
            max_stages: 200,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.power_max_iters == 0 || self.max_stages == 0 {
            return Err(Error::InvalidParameter("iteration caps must be positive".into()));
        }
        if !(self.rel_tol > 0.0) || !(self.abs_tol >= 0.0) || !(self.power_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidParameter(format!("shrink factor must lie in (0,1), got {}", self.shrink)));
        }
        Ok(())
    }

    /// Residual tolerance at an iterate of norm `norm`.
    pub fn tolerance(&self, norm: f64) -> f64 {
        (self.rel_tol * (1.0 + norm)).max(self.abs_tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub beta: DVector<f64>,
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
    /// Prox fixed-point residual at `beta`.
    pub residual: f64,
    /// Objective after every iteration, accumulated from exact per-step changes.
    pub trace: Vec<f64>,
}

/// Objective `½βᵀAβ − bᵀβ + h(β)`.
pub fn objective(qf: &QuadraticForm, reg: &Regularizer, beta: &DVector<f64>) -> f64 {
    qf.value(beta) + reg.value(beta)
}

fn step_lipschitz(qf: &QuadraticForm, reg: &Regularizer) -> Result<f64> {
    let l = qf.lipschitz() * STEP_MARGIN;
    if l > 0.0 {
        return Ok(l);
    }
    let sigma = reg.descriptors().strong_convexity;
    if sigma > 0.0 {
        Ok(sigma)
    } else {
        Err(Error::InvalidParameter(
            "zero quadratic curvature requires a strongly convex regularizer".into(),
        ))
    }
}

fn fixed_point_residual(
    reg: &Regularizer,
    x: &DVector<f64>,
    ax: &DVector<f64>,
    b: &DVector<f64>,
    l: f64,
) -> f64 {
    let mut p = x - (ax - b) / l;
    reg.prox_in_place(&mut p, 1.0 / l);
    (x - p).norm()
}

fn check_finite(v: &DVector<f64>, value: f64, iteration: usize, l: f64) -> Result<()> {
    if value.is_finite() && v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            iteration,
            detail: format!("iterate diverged with step 1/L, L = {l:e}"),
        })
    }
}

/// FISTA with monotone restart and step `1/L`.
///
/// A candidate that would raise the objective is discarded and momentum is
/// reset, so the recorded objective trace never increases.
pub fn fista(qf: &QuadraticForm, reg: &Regularizer, config: &SolverConfig, init: &DVector<f64>) -> Result<SolveResult> {
    config.validate()?;
    check_dims("fista initial point", qf.dim(), init.len())?;
    if init.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("initial point must be finite".into()));
    }
    let l = step_lipschitz(qf, reg)?;
    let step = 1.0 / l;
    let b = qf.linear();

    let mut x = init.clone();
    let mut ax = qf.apply(&x);
    let mut fx = qf.value_with(&x, &ax) + reg.value(&x);
    check_finite(&x, fx, 0, l)?;
    let mut y = x.clone();
    let mut ay = ax.clone();
    let mut t: f64 = 1.0;
    let mut momentum = false;
    let mut trace = Vec::new();

    let mut residual = fixed_point_residual(reg, &x, &ax, b, l);
    if residual <= config.tolerance(x.norm()) {
        return Ok(SolveResult {
            beta: x,
            iterations: 0,
            objective: fx,
            converged: true,
            residual,
            trace,
        });
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iters {
        iterations += 1;
        let mut z = &y - (&ay - b) * step;
        reg.prox_in_place(&mut z, step);
        let az = qf.apply(&z);
        let diff = &z - &x;
        let change = 0.5 * diff.dot(&(&az + &ax)) - b.dot(&diff) + reg.value_change(&x, &z);
        check_finite(&z, change, iterations, l)?;

        let mut stalled = false;
        if change <= 0.0 {
            let fz = fx + change;
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let theta = (t - 1.0) / t_next;
            y = &z + (&z - &x) * theta;
            ay = &az + (&az - &ax) * theta;
            x = z;
            ax = az;
            fx = fz;
            t = t_next;
            momentum = true;
        } else {
            // plain proximal step from x already fails to descend: rounding floor
            stalled = !momentum;
            y.copy_from(&x);
            ay.copy_from(&ax);
            t = 1.0;
            momentum = false;
        }
        trace.push(fx);

        residual = fixed_point_residual(reg, &x, &ax, b, l);
        if residual <= config.tolerance(x.norm()) {
            converged = true;
            break;
        }
        if stalled {
            break;
        }
    }

    let objective = qf.value_with(&x, &ax) + reg.value(&x);
    Ok(SolveResult {
        beta: x,
        iterations,
        objective,
        converged,
        residual,
        trace,
    })
}

/// Continuation schedule `λ_0 = ‖b‖_∞, λ_{k+1} = max(η λ_k, λ_target)`.
pub fn continuation_schedule(lambda0: f64, target: f64, shrink: f64) -> Vec<f64> {
    if !(target < lambda0) {
        return vec![target];
    }
    let stages = ((lambda0 / target).ln() / (1.0 / shrink).ln()).ceil() as usize;
    let mut out = Vec::with_capacity(stages + 1);
    let mut lam = lambda0;
    out.push(lam);
    for _ in 0..stages {
        lam = (lam * shrink).max(target);
        out.push(lam);
        if lam == target {
            break;
        }
    }
    if *out.last().unwrap() != target {
        out.push(target);
    }
    out
}

/// λ-continuation for SCAD/MCP: warm-started FISTA over a decreasing λ schedule
/// ending at the regularizer's own λ.
///
/// The returned iteration count sums all stages; the trace is the final stage's.
pub fn lambda_path(qf: &QuadraticForm, reg: &Regularizer, config: &SolverConfig, init: &DVector<f64>) -> Result<SolveResult> {
    config.validate()?;
    if !matches!(reg.penalty(), Penalty::Scad { .. } | Penalty::Mcp { .. }) {
        return Err(Error::InvalidParameter(format!("continuation needs scad or mcp, got {}", reg.penalty())));
    }
    let target = reg.lambda();
    if !(target > 0.0) {
        return Err(Error::InvalidParameter("continuation needs lambda_target > 0".into()));
    }
    let lambda0 = qf.linear().amax();
    let mut schedule = continuation_schedule(lambda0, target, config.shrink);
    if schedule.len() > config.max_stages {
        let tail = schedule.split_off(schedule.len() - config.max_stages);
        schedule = tail;
    }
    let mut beta = init.clone();
    let mut total = 0;
    let mut last = None;
    for lam in schedule {
        let stage_reg = reg.with_lambda(lam)?;
        let res = fista(qf, &stage_reg, config, &beta)?;
        total += res.iterations;
        beta = res.beta.clone();
        last = Some(res);
    }
    let mut res = last.expect("schedule is never empty");
    res.iterations = total;
    Ok(res)
}

/// FISTA for convex regularizers, continuation for SCAD/MCP.
pub fn solve(qf: &QuadraticForm, reg: &Regularizer, config: &SolverConfig, init: &DVector<f64>) -> Result<SolveResult> {
    if reg.is_convex() {
        fista(qf, reg, config, init)
    } else {
        lambda_path(qf, reg, config, init)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, gaussian_vector, seeded};

    fn tight() -> SolverConfig {
        SolverConfig {
            max_iters: 200_000,
            rel_tol: 1e-13,
            abs_tol: 0.0,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn identity_unconstrained() {
        let qf = QuadraticForm::from_dense(DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 2.0])).unwrap();
        let res = fista(&qf, &Regularizer::none(), &tight(), &DVector::zeros(2)).unwrap();
        assert!(res.converged);
        assert!((res.beta - DVector::from_vec(vec![1.0, 2.0])).amax() < 1e-12);
    }

    #[test]
    fn identity_l1_is_soft_threshold() {
        let v = DVector::from_vec(vec![3.0, -0.2, -1.5, 0.7]);
        let qf = QuadraticForm::from_dense(DMatrix::identity(4, 4), v.clone()).unwrap();
        let reg = Regularizer::l1(0.5).unwrap();
        let res = fista(&qf, &reg, &tight(), &DVector::zeros(4)).unwrap();
        assert!((res.beta - DVector::from_vec(vec![2.5, 0.0, -1.0, 0.2])).amax() < 1e-9);
    }

    #[test]
    fn ridge_matches_linear_solve() {
        for seed in 0..10 {
            let mut rng = seeded(seed);
            let x = gaussian_matrix(20, 10, &mut rng);
            let y = gaussian_vector(20, &mut rng);
            let lam = 0.3;
            let b = x.tr_mul(&y);
            let qf = QuadraticForm::from_factor(x.clone(), b.clone()).unwrap();
            let res = fista(&qf, &Regularizer::ridge(lam).unwrap(), &SolverConfig::default(), &DVector::zeros(10)).unwrap();
            let a = x.tr_mul(&x) + DMatrix::identity(10, 10) * (2.0 * lam);
            let exact = a.lu().solve(&b).unwrap();
            assert!((res.beta - exact).amax() < 1e-6, "seed {seed}");
        }
    }

    #[test]
    fn trace_is_nonincreasing() {
        let mut rng = seeded(3);
        let x = gaussian_matrix(15, 30, &mut rng);
        let y = gaussian_vector(15, &mut rng);
        let qf = QuadraticForm::from_factor(x.clone(), x.tr_mul(&y)).unwrap();
        for reg in [Regularizer::l1(0.2).unwrap(), Regularizer::mcp(0.2, 2.0).unwrap()] {
            let res = fista(&qf, &reg, &SolverConfig::default(), &DVector::zeros(30)).unwrap();
            assert!(res.trace.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn zero_curvature_needs_strong_convexity() {
        let qf = QuadraticForm::from_dense(DMatrix::zeros(2, 2), DVector::from_vec(vec![1.0, -1.0])).unwrap();
        assert!(fista(&qf, &Regularizer::l1(1.0).unwrap(), &SolverConfig::default(), &DVector::zeros(2)).is_err());
        let res = fista(&qf, &Regularizer::ridge(0.5).unwrap(), &tight(), &DVector::zeros(2)).unwrap();
        assert!((res.beta - DVector::from_vec(vec![1.0, -1.0])).amax() < 1e-8);
    }

    #[test]
    fn lipschitz_examples() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        assert!((lipschitz_estimate(&GramOperator::Dense(a), 1e-12, 500) - 3.0).abs() < 1e-9);
        let q = gaussian_matrix(6, 3, &mut seeded(1)).qr().q();
        assert!((lipschitz_estimate(&GramOperator::Factor(q), 1e-12, 500) - 1.0).abs() < 1e-9);
        assert_eq!(lipschitz_estimate(&GramOperator::Dense(DMatrix::zeros(3, 3)), 1e-8, 500), 0.0);
    }

    #[test]
    fn lipschitz_matches_eigen_oracle() {
        let g = gaussian_matrix(30, 30, &mut seeded(9));
        let a = g.tr_mul(&g);
        let top = a.clone().symmetric_eigen().eigenvalues.max();
        let est = lipschitz_estimate(&GramOperator::Dense(a), 1e-8, 500);
        assert!((est - top).abs() <= 1e-5 * top);
    }

    #[test]
    fn schedule_shapes() {
        assert_eq!(continuation_schedule(1.0, 2.0, 0.7), vec![2.0]);
        let s = continuation_schedule(1.0, 0.1, 0.5);
        assert_eq!(s, vec![1.0, 0.5, 0.25, 0.125, 0.1]);
    }

    #[test]
    fn continuation_convexified_matches_direct() {
        for seed in 0..5 {
            let mut rng = seeded(100 + seed);
            let x = gaussian_matrix(10, 5, &mut rng) * 2.0;
            let y = gaussian_vector(10, &mut rng) * 3.0;
            let a = x.tr_mul(&x);
            let min_eig = a.clone().symmetric_eigen().eigenvalues.min();
            let a_param = 1.0 + 2.0 / min_eig.max(1e-3);
            let reg = Regularizer::scad(0.8, a_param.max(3.7)).unwrap();
            assert!(reg.descriptors().zeta_minus < min_eig);
            let qf = QuadraticForm::from_dense(a, x.tr_mul(&y)).unwrap();
            let path = lambda_path(&qf, &reg, &tight(), &DVector::zeros(5)).unwrap();
            let direct = fista(&qf, &reg, &tight(), &DVector::zeros(5)).unwrap();
            assert!((path.beta - direct.beta).amax() < 1e-6, "seed {seed}");
        }
    }

    #[test]
    fn continuation_rejects_convex_family() {
        let qf = QuadraticForm::from_dense(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        assert!(lambda_path(&qf, &Regularizer::l1(1.0).unwrap(), &SolverConfig::default(), &DVector::zeros(2)).is_err());
    }

    #[test]
    fn compressed_factor_preserves_gram() {
        let mut rng = seeded(5);
        let u = gaussian_matrix(40, 3, &mut rng);
        let v = gaussian_matrix(3, 60, &mut rng);
        let m = u * v;
        let op = GramOperator::from_factor(m.clone());
        match &op {
            GramOperator::Factor(r) => assert_eq!(r.nrows(), 3),
            GramOperator::Dense(_) => panic!("expected compression"),
        }
        let full = m.tr_mul(&m);
        assert!((op.to_dense() - &full).amax() < 1e-9 * full.amax());
    }
}
