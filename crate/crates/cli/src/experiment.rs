//! Experiment runners. Each returns its tables; writing is left to the caller.

use std::time::Instant;

use anyhow::{anyhow, bail, Result};
use nalgebra::DVector;
use rayon::prelude::*;
use sro_core::embed::probe_distortion;
use sro_core::gen::{DesignKind, DesignSpec, InstanceSpec, ProblemInstance, SignalSpec};
use sro_core::linalg::fit_line;
use sro_core::reg::{FusedTransform, Regularizer};
use sro_core::rng::derive_seed;
use sro_core::solve::{SolveResult, SolverConfig};
use sro_core::sro::{direct_solve, reference_config, run as run_method, Problem, SroConfig, SroMethod, SroRun};

use crate::config::{ExperimentConfig, ExperimentKind, Method, PenaltyKind, SignalKind, SketchRule};
use crate::output::{mean_std, Cell, ExperimentOutput, OutputFile, PlotSpec, Table};

/// Additive slack, relative to `‖Xβ*‖`, on the one-shot relative-error bound.
pub const ONE_SHOT_SLACK: f64 = 1e-3;
/// Additive slack on the strongly convex squared-error bound.
pub const STRONG_SLACK: f64 = 1e-6;

pub const DECAY_HEADER: [&str; 9] = ["experiment", "trial", "gamma", "iter", "x_err_sq_per_n", "l2_err", "obj", "converged", "ms"];
pub const ESTIMATION_HEADER: [&str; 11] = [
    "experiment",
    "trial",
    "gamma",
    "method",
    "iter",
    "l2_to_betabar",
    "x_err_sq_per_n",
    "l2_err",
    "obj",
    "converged",
    "ms",
];
pub const RATE_HEADER: [&str; 8] = ["experiment", "trial", "n", "method", "lambda", "l2_to_betabar", "converged", "ms"];
pub const DISTORTION_HEADER: [&str; 11] = [
    "experiment",
    "trial",
    "gamma",
    "rows",
    "eps_hat",
    "rel_err",
    "bound",
    "holds",
    "l2_err_sq",
    "strong_bound",
    "strong_holds",
];
pub const TIMING_HEADER: [&str; 10] = ["experiment", "repeat", "method", "gamma", "rows", "x_err_sq_per_n", "l2_err", "converged", "ms", "sketch_ms"];

/// A generated problem in the coordinates it is solved in.
#[derive(Debug, Clone)]
pub struct TrialProblem {
    pub problem: Problem,
    /// Ground truth in the original coordinates.
    pub beta_bar: DVector<f64>,
    pub support: Vec<usize>,
    /// Present when the problem is solved in difference coordinates.
    pub fused: Option<FusedTransform>,
    pub instance: InstanceSpec,
}

impl TrialProblem {
    pub fn to_original(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.fused {
            Some(f) => Ok(f.inverse(v)?),
            None => Ok(v.clone()),
        }
    }

    pub fn n(&self) -> usize {
        self.problem.n()
    }
}

pub fn regularizer(cfg: &ExperimentConfig, n: usize) -> Result<Regularizer> {
    let lambda = cfg.lambda_for(n);
    Ok(match cfg.penalty {
        PenaltyKind::None => Regularizer::none(),
        PenaltyKind::Ridge => Regularizer::ridge(lambda)?,
        PenaltyKind::L1 | PenaltyKind::Fused => Regularizer::l1(lambda)?,
        PenaltyKind::Scad => Regularizer::scad(lambda, cfg.scad_a)?,
        PenaltyKind::Mcp => Regularizer::mcp(lambda, cfg.mcp_b)?,
    })
}

pub fn instance_spec(cfg: &ExperimentConfig, trial: usize, n: usize) -> InstanceSpec {
    let signal = match cfg.signal {
        SignalKind::Zero => SignalSpec::Zero,
        SignalKind::Gaussian => SignalSpec::Gaussian,
        SignalKind::Sparse => SignalSpec::Sparse {
            sparsity: cfg.effective_sparsity(),
        },
    };
    InstanceSpec {
        design: DesignSpec {
            n,
            d: cfg.d,
            rank: cfg.rank.min(n).min(cfg.d),
            kind: cfg.generator,
            seed: derive_seed(cfg.seed, &[trial as u64, n as u64, 1]),
        },
        signal,
        noise: cfg.noise,
        estimation: cfg.estimation,
        seed: derive_seed(cfg.seed, &[trial as u64, n as u64, 2]),
    }
}

pub fn build_problem(cfg: &ExperimentConfig, trial: usize, n: usize) -> Result<TrialProblem> {
    let spec = instance_spec(cfg, trial, n);
    let reg = regularizer(cfg, n)?;
    let inst = ProblemInstance::generate(&spec, reg.clone())?;
    let (problem, fused) = if cfg.penalty == PenaltyKind::Fused {
        let f = FusedTransform::new(cfg.d)?;
        let x = f.transform_design(inst.problem.x())?;
        let p = Problem::new(x, inst.problem.y().clone(), f.regularizer(reg.lambda())?)?;
        (p, Some(f))
    } else {
        (inst.problem, None)
    };
    Ok(TrialProblem {
        problem,
        beta_bar: inst.beta_bar,
        support: inst.support,
        fused,
        instance: spec,
    })
}

pub fn solver_config(cfg: &ExperimentConfig) -> SolverConfig {
    SolverConfig {
        max_iters: cfg.max_iters,
        rel_tol: cfg.rel_tol,
        abs_tol: cfg.abs_tol,
        ..SolverConfig::default()
    }
}

fn rank_hint(cfg: &ExperimentConfig, n: usize) -> usize {
    match cfg.generator {
        DesignKind::DenseGaussian => n.min(cfg.d),
        _ => cfg.rank.min(n).min(cfg.d),
    }
}

fn base_sro_config(cfg: &ExperimentConfig, n: usize) -> SroConfig {
    SroConfig {
        rho: cfg.rho,
        delta: cfg.delta,
        kind: cfg.embedding,
        sketch_rows: None,
        rank: Some(rank_hint(cfg, n)),
        iterations: cfg.iterations,
        solver: solver_config(cfg),
        ..SroConfig::default()
    }
}

/// Sketch configuration for one (trial, γ̄) cell, and the effective γ̄ reported.
pub fn sro_config(cfg: &ExperimentConfig, problem: &Problem, trial: usize, gamma: f64) -> Result<(SroConfig, f64)> {
    let n = problem.n();
    let mut sc = base_sro_config(cfg, n);
    let hint = rank_hint(cfg, n) as f64;
    let (rows, reported) = match cfg.sketch {
        SketchRule::Recommended => {
            let rows = sc.sketch_size(problem)?;
            (rows, rows as f64 / hint)
        }
        SketchRule::GammaRank => ((gamma * hint).ceil() as usize, gamma),
        SketchRule::GammaDim => ((gamma * cfg.d as f64).ceil() as usize, gamma),
    };
    sc.sketch_rows = Some(rows.max(1));
    sc.seed = derive_seed(cfg.seed, &[trial as u64, gamma.to_bits(), 3]);
    Ok((sc, reported))
}

fn reference(problem: &Problem, cfg: &ExperimentConfig) -> Result<SolveResult> {
    Ok(direct_solve(problem, &reference_config(&solver_config(cfg)))?)
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn sq_per_n(problem: &Problem, diff: &DVector<f64>) -> f64 {
    (problem.x() * diff).norm_squared() / problem.n() as f64
}

fn parallel_trials<F>(trials: usize, f: F) -> Vec<Vec<Vec<Cell>>>
where
    F: Fn(usize) -> Vec<Vec<Cell>> + Sync + Send,
{
    (0..trials).into_par_iter().map(f).collect()
}

fn report_failure(cfg: &ExperimentConfig, trial: usize, err: &anyhow::Error) {
    eprintln!("{}: trial {trial} failed: {err:#}", cfg.experiment);
}

fn decay_trial(cfg: &ExperimentConfig, trial: usize) -> Result<Vec<Vec<Cell>>> {
    let tp = build_problem(cfg, trial, cfg.n)?;
    let exact = reference(&tp.problem, cfg)?;
    let star = tp.to_original(&exact.beta)?;
    let mut rows = Vec::new();
    for &gamma in &cfg.gammas {
        let (sc, reported) = sro_config(cfg, &tp.problem, trial, gamma)?;
        let run = run_method(SroMethod::Iterative, &tp.problem, &sc)?;
        let mut ms = run.sketch_ms();
        for (t, beta) in run.iterates.iter().enumerate() {
            let converged = if t == 0 { true } else { run.steps[t - 1].converged };
            if t > 0 {
                ms += run.steps[t - 1].solve_ms;
            }
            let l2 = (tp.to_original(beta)? - &star).norm();
            rows.push(vec![
                cfg.experiment.name().into(),
                trial.into(),
                reported.into(),
                t.into(),
                sq_per_n(&tp.problem, &(beta - &exact.beta)).into(),
                l2.into(),
                tp.problem.objective(beta).into(),
                converged.into(),
                ms.into(),
            ]);
        }
    }
    Ok(rows)
}

fn decay(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let chunks = parallel_trials(cfg.trials, |trial| {
        decay_trial(cfg, trial).unwrap_or_else(|e| {
            report_failure(cfg, trial, &e);
            cfg.gammas
                .iter()
                .map(|g| {
                    vec![
                        cfg.experiment.name().into(),
                        trial.into(),
                        (*g).into(),
                        0usize.into(),
                        f64::NAN.into(),
                        f64::NAN.into(),
                        f64::NAN.into(),
                        false.into(),
                        f64::NAN.into(),
                    ]
                })
                .collect()
        })
    });
    let mut table = Table::new(&DECAY_HEADER);
    chunks.into_iter().flatten().for_each(|r| table.push(r));
    let summary = table.summarize(&["gamma", "iter"], &["x_err_sq_per_n", "l2_err", "obj", "converged", "ms"])?;
    let plot = PlotSpec {
        title: cfg.experiment.name(),
        x_label: "iteration",
        y_label: "mean |X(b_t - b*)|^2 / n",
        x_col: 2,
        y_col: 4,
        series_col: Some(1),
        log_x: false,
        log_y: true,
    };
    Ok(ExperimentOutput {
        files: vec![
            OutputFile {
                name: format!("{}.csv", cfg.experiment),
                table,
            },
            OutputFile {
                name: "summary.csv".into(),
                table: summary,
            },
        ],
        plot_script: plot.script(),
    })
}

fn sro_method(m: Method) -> Option<SroMethod> {
    match m {
        Method::Exact => None,
        Method::Sro => Some(SroMethod::Sro),
        Method::Isro => Some(SroMethod::Iterative),
        Method::IsroIhs => Some(SroMethod::IterativeIhs),
    }
}

fn estimation_trial(cfg: &ExperimentConfig, trial: usize) -> Result<Vec<Vec<Cell>>> {
    let tp = build_problem(cfg, trial, cfg.n)?;
    let start = Instant::now();
    let exact = reference(&tp.problem, cfg)?;
    let exact_ms = ms_since(start);
    let star = tp.to_original(&exact.beta)?;
    let mut rows = Vec::new();
    let row = |gamma: f64, method: &str, iter: usize, beta: &DVector<f64>, converged: bool, ms: f64| -> Result<Vec<Cell>> {
        let orig = tp.to_original(beta)?;
        Ok(vec![
            cfg.experiment.name().into(),
            trial.into(),
            gamma.into(),
            method.into(),
            iter.into(),
            (&orig - &tp.beta_bar).norm().into(),
            sq_per_n(&tp.problem, &(beta - &exact.beta)).into(),
            (&orig - &star).norm().into(),
            tp.problem.objective(beta).into(),
            converged.into(),
            ms.into(),
        ])
    };
    if cfg.methods.contains(&Method::Exact) {
        rows.push(row(0.0, Method::Exact.name(), 0, &exact.beta, exact.converged, exact_ms)?);
    }
    for &gamma in &cfg.gammas {
        let (sc, reported) = sro_config(cfg, &tp.problem, trial, gamma)?;
        for &m in &cfg.methods {
            if let Some(method) = sro_method(m) {
                let run = run_method(method, &tp.problem, &sc)?;
                rows.push(row(reported, m.name(), run.steps.len(), run.last(), run.all_converged(), run.total_ms)?);
            }
        }
    }
    Ok(rows)
}

fn nan_row(header_len: usize, prefix: Vec<Cell>) -> Vec<Cell> {
    let mut row = prefix;
    while row.len() < header_len {
        row.push(f64::NAN.into());
    }
    row
}

fn estimation(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let chunks = parallel_trials(cfg.trials, |trial| {
        estimation_trial(cfg, trial).unwrap_or_else(|e| {
            report_failure(cfg, trial, &e);
            vec![nan_row(
                ESTIMATION_HEADER.len(),
                vec![cfg.experiment.name().into(), trial.into(), f64::NAN.into(), "failed".into(), 0usize.into()],
            )]
        })
    });
    let mut table = Table::new(&ESTIMATION_HEADER);
    chunks.into_iter().flatten().for_each(|r| table.push(r));
    let summary = table.summarize(
        &["gamma", "method"],
        &["l2_to_betabar", "x_err_sq_per_n", "l2_err", "converged", "ms"],
    )?;
    let plot = PlotSpec {
        title: cfg.experiment.name(),
        x_label: "gamma",
        y_label: "mean |b - b_bar|_2",
        x_col: 1,
        y_col: 4,
        series_col: Some(2),
        log_x: false,
        log_y: true,
    };
    Ok(ExperimentOutput {
        files: vec![
            OutputFile {
                name: format!("{}.csv", cfg.experiment),
                table,
            },
            OutputFile {
                name: "summary.csv".into(),
                table: summary,
            },
        ],
        plot_script: plot.script(),
    })
}

fn rate_cell(cfg: &ExperimentConfig, trial: usize, n: usize) -> Result<Vec<Vec<Cell>>> {
    let tp = build_problem(cfg, trial, n)?;
    let lambda = tp.problem.reg().lambda();
    let gamma = cfg.gammas[0];
    let mut rows = Vec::new();
    for &m in &cfg.methods {
        let start = Instant::now();
        let (beta, converged) = match sro_method(m) {
            None => {
                let r = direct_solve(&tp.problem, &solver_config(cfg))?;
                (r.beta, r.converged)
            }
            Some(method) => {
                let (sc, _) = sro_config(cfg, &tp.problem, trial, gamma)?;
                let run = run_method(method, &tp.problem, &sc)?;
                let ok = run.all_converged();
                (run.last().clone(), ok)
            }
        };
        let ms = ms_since(start);
        let orig = tp.to_original(&beta)?;
        rows.push(vec![
            cfg.experiment.name().into(),
            trial.into(),
            n.into(),
            m.name().into(),
            lambda.into(),
            (&orig - &tp.beta_bar).norm().into(),
            converged.into(),
            ms.into(),
        ]);
    }
    Ok(rows)
}

/// Least-squares fit of `ln(mean error)` against `ln n` for each method.
pub fn rate_fit(table: &Table, methods: &[Method], n_grid: &[usize]) -> Result<Table> {
    let n_col = table.column("n")?;
    let m_col = table.column("method")?;
    let mut fit = Table::new(&["method", "slope", "intercept", "r_squared", "points"]);
    for m in methods {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &n in n_grid {
            let vals = table.values("l2_to_betabar", |r| {
                r[n_col] == Cell::Int(n as u64) && r[m_col] == Cell::Text(m.name().into())
            })?;
            let (mean, _) = mean_std(&vals);
            if mean.is_finite() && mean > 0.0 {
                xs.push((n as f64).ln());
                ys.push(mean.ln());
            }
        }
        match fit_line(&xs, &ys) {
            Some(line) => fit.push(vec![
                m.name().into(),
                line.slope.into(),
                line.intercept.into(),
                line.r_squared.into(),
                xs.len().into(),
            ]),
            None => {
                eprintln!("rate_scan: degenerate fit for {} ({} finite points)", m.name(), xs.len());
                fit.push(vec![
                    m.name().into(),
                    f64::NAN.into(),
                    f64::NAN.into(),
                    f64::NAN.into(),
                    xs.len().into(),
                ]);
            }
        }
    }
    Ok(fit)
}

fn rate_scan(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let cells: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    let chunks: Vec<Vec<Vec<Cell>>> = cells
        .par_iter()
        .map(|&(n, trial)| {
            rate_cell(cfg, trial, n).unwrap_or_else(|e| {
                report_failure(cfg, trial, &e);
                cfg.methods
                    .iter()
                    .map(|m| {
                        vec![
                            cfg.experiment.name().into(),
                            trial.into(),
                            n.into(),
                            m.name().into(),
                            f64::NAN.into(),
                            f64::NAN.into(),
                            false.into(),
                            f64::NAN.into(),
                        ]
                    })
                    .collect()
            })
        })
        .collect();
    let mut table = Table::new(&RATE_HEADER);
    chunks.into_iter().flatten().for_each(|r| table.push(r));
    let summary = table.summarize(&["n", "method"], &["l2_to_betabar", "converged", "ms"])?;
    let fit = rate_fit(&table, &cfg.methods, &cfg.n_grid)?;
    let plot = PlotSpec {
        title: "rate_scan",
        x_label: "n",
        y_label: "mean |b - b_bar|_2",
        x_col: 1,
        y_col: 4,
        series_col: Some(2),
        log_x: true,
        log_y: true,
    };
    Ok(ExperimentOutput {
        files: vec![
            OutputFile {
                name: "rate_scan.csv".into(),
                table,
            },
            OutputFile {
                name: "summary.csv".into(),
                table: summary,
            },
            OutputFile {
                name: "rate_fit.csv".into(),
                table: fit,
            },
        ],
        plot_script: plot.script(),
    })
}

/// Bound check for one one-shot solve against the exact solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneShotCheck {
    pub eps_hat: f64,
    /// `‖X(β̃ − β*)‖ / ‖Xβ*‖`.
    pub rel_err: f64,
    /// `ε̂/(1−ε̂)`.
    pub bound: f64,
    pub holds: bool,
    pub l2_err_sq: f64,
    /// `ε̂²/(4σ(1−ε̂))·‖Xβ*‖²` when the regularizer is strongly convex.
    pub strong_bound: Option<f64>,
    pub strong_holds: Option<bool>,
}

/// Measures distortion on random probes plus `Δ = β̃ − β*`, `β*` and the
/// normalized pair `Δ/‖XΔ‖ ± β*/‖Xβ*‖`, then evaluates both bounds.
pub fn one_shot_check(problem: &Problem, run: &SroRun, star: &DVector<f64>, probes: usize, seed: u64) -> Result<OneShotCheck> {
    let embedding = run.sketches[0]
        .rebuild()
        .ok_or_else(|| anyhow!("one-shot check needs a seeded sketch"))??;
    let sketched = embedding.apply(problem.x())?;
    let x = problem.x();
    let delta = run.last() - star;
    let xd = (x * &delta).norm();
    let xs = (x * star).norm();
    let mut extra = vec![delta.clone(), star.clone()];
    if xd > 0.0 && xs > 0.0 {
        let a = &delta / xd;
        let b = star / xs;
        extra.push(&a + &b);
        extra.push(&a - &b);
    }
    let eps_hat = probe_distortion(x, &sketched, probes, seed, &extra)?;
    let bound = if eps_hat < 1.0 { eps_hat / (1.0 - eps_hat) } else { f64::INFINITY };
    let rel_err = if xs > 0.0 { xd / xs } else if xd == 0.0 { 0.0 } else { f64::INFINITY };
    let holds = xd <= bound * xs + ONE_SHOT_SLACK * xs;
    let l2_err_sq = delta.norm_squared();
    let sigma = problem.reg().descriptors().strong_convexity;
    let (strong_bound, strong_holds) = if sigma > 0.0 {
        let sb = if eps_hat < 1.0 {
            eps_hat * eps_hat / (4.0 * sigma * (1.0 - eps_hat)) * xs * xs
        } else {
            f64::INFINITY
        };
        (Some(sb), Some(l2_err_sq <= sb + STRONG_SLACK))
    } else {
        (None, None)
    };
    Ok(OneShotCheck {
        eps_hat,
        rel_err,
        bound,
        holds,
        l2_err_sq,
        strong_bound,
        strong_holds,
    })
}

fn distortion_trial(cfg: &ExperimentConfig, trial: usize) -> Result<Vec<Vec<Cell>>> {
    let tp = build_problem(cfg, trial, cfg.n)?;
    let exact = reference(&tp.problem, cfg)?;
    let mut rows = Vec::new();
    for &gamma in &cfg.gammas {
        let (mut sc, reported) = sro_config(cfg, &tp.problem, trial, gamma)?;
        sc.solver = reference_config(&sc.solver);
        let run = run_method(SroMethod::Sro, &tp.problem, &sc)?;
        let check = one_shot_check(&tp.problem, &run, &exact.beta, cfg.probes, derive_seed(sc.seed, &[4]))?;
        rows.push(vec![
            cfg.experiment.name().into(),
            trial.into(),
            reported.into(),
            sc.sketch_rows.unwrap_or(0).into(),
            check.eps_hat.into(),
            check.rel_err.into(),
            check.bound.into(),
            check.holds.into(),
            check.l2_err_sq.into(),
            check.strong_bound.unwrap_or(f64::NAN).into(),
            match check.strong_holds {
                Some(b) => b.into(),
                None => "".into(),
            },
        ]);
    }
    Ok(rows)
}

fn distortion_check(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let chunks = parallel_trials(cfg.trials, |trial| {
        distortion_trial(cfg, trial).unwrap_or_else(|e| {
            report_failure(cfg, trial, &e);
            vec![nan_row(
                DISTORTION_HEADER.len(),
                vec![cfg.experiment.name().into(), trial.into()],
            )]
        })
    });
    let mut table = Table::new(&DISTORTION_HEADER);
    chunks.into_iter().flatten().for_each(|r| table.push(r));
    let summary = table.summarize(&["gamma"], &["eps_hat", "rel_err", "bound", "holds", "strong_holds"])?;
    let plot = PlotSpec {
        title: "distortion_check",
        x_label: "gamma",
        y_label: "mean measured distortion",
        x_col: 1,
        y_col: 3,
        series_col: None,
        log_x: false,
        log_y: false,
    };
    Ok(ExperimentOutput {
        files: vec![
            OutputFile {
                name: "distortion_check.csv".into(),
                table,
            },
            OutputFile {
                name: "summary.csv".into(),
                table: summary,
            },
        ],
        plot_script: plot.script(),
    })
}

fn timing(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let tp = build_problem(cfg, 0, cfg.n)?;
    let gamma = cfg.gammas[0];
    let (sc, reported) = sro_config(cfg, &tp.problem, 0, gamma)?;
    let rows_count = sc.sketch_rows.unwrap_or(0);
    if cfg.n < 10 * rows_count {
        bail!("timing needs n >= 10 * sketch rows ({} < 10 * {rows_count})", cfg.n);
    }
    let exact = reference(&tp.problem, cfg)?;
    let star = tp.to_original(&exact.beta)?;
    let mut table = Table::new(&TIMING_HEADER);
    for repeat in 0..cfg.repeats {
        for &m in &cfg.methods {
            let start = Instant::now();
            let (beta, converged, sketch_ms) = match sro_method(m) {
                None => {
                    let r = direct_solve(&tp.problem, &solver_config(cfg))?;
                    (r.beta, r.converged, 0.0)
                }
                Some(method) => {
                    let run = run_method(method, &tp.problem, &sc)?;
                    let ok = run.all_converged();
                    let sk = run.sketch_ms();
                    (run.last().clone(), ok, sk)
                }
            };
            let ms = ms_since(start);
            table.push(vec![
                "timing".into(),
                repeat.into(),
                m.name().into(),
                reported.into(),
                if m == Method::Exact { 0usize.into() } else { rows_count.into() },
                sq_per_n(&tp.problem, &(&beta - &exact.beta)).into(),
                (tp.to_original(&beta)? - &star).norm().into(),
                converged.into(),
                ms.into(),
                sketch_ms.into(),
            ]);
        }
    }
    let summary = table.summarize(&["method"], &["ms", "sketch_ms", "x_err_sq_per_n", "l2_err"])?;
    let mut minmed = Table::new(&["method", "min_ms", "median_ms", "x_err_sq_per_n"]);
    for &m in &cfg.methods {
        let keep = |r: &[Cell]| r[2] == Cell::Text(m.name().into());
        let mut ms = table.values("ms", keep)?;
        ms.sort_by(|a, b| a.total_cmp(b));
        let errs = table.values("x_err_sq_per_n", keep)?;
        let median = if ms.len() % 2 == 1 {
            ms[ms.len() / 2]
        } else {
            0.5 * (ms[ms.len() / 2 - 1] + ms[ms.len() / 2])
        };
        minmed.push(vec![m.name().into(), ms[0].into(), median.into(), errs[0].into()]);
    }
    let plot = PlotSpec {
        title: "timing",
        x_label: "method",
        y_label: "mean wall-clock ms",
        x_col: 0,
        y_col: 3,
        series_col: None,
        log_x: false,
        log_y: true,
    };
    Ok(ExperimentOutput {
        files: vec![
            OutputFile {
                name: "timing.csv".into(),
                table,
            },
            OutputFile {
                name: "summary.csv".into(),
                table: summary,
            },
            OutputFile {
                name: "timing_minmax.csv".into(),
                table: minmed,
            },
        ],
        plot_script: plot.script(),
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    if matches!(cfg.penalty, PenaltyKind::Scad | PenaltyKind::Mcp) && !(cfg.lambda_for(cfg.n) > 0.0) {
        bail!("nonconvex penalties need lambda > 0");
    }
    match cfg.experiment {
        ExperimentKind::GlassoDecay | ExperimentKind::RidgeDecay => decay(cfg),
        ExperimentKind::LassoEstimation => estimation(cfg),
        ExperimentKind::RateScan => rate_scan(cfg),
        ExperimentKind::DistortionCheck => distortion_check(cfg),
        ExperimentKind::Timing => timing(cfg),
    }
}
