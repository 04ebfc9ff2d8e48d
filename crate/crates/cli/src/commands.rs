//! Subcommand implementations shared by the binary and the tests.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use sro_core::sro::{direct_solve, reference_config, run as run_method, SroMethod};

use crate::bundle::{generate_bundle, read_bundle, write_vector};
use crate::config::{format_pairs, read_pairs, ExperimentConfig, ExperimentKind};
use crate::experiment::{build_problem, run_experiment, solver_config, sro_config, TrialProblem};
use crate::output::{Cell, ExperimentOutput, Table};

/// Reads a config, forcing the experiment kind when the subcommand implies one.
pub fn load_config(path: &Path, seed: Option<u64>, forced: Option<ExperimentKind>) -> Result<ExperimentConfig> {
    let mut pairs = read_pairs(path)?;
    if let Some(kind) = forced {
        match pairs.get("experiment") {
            Some(existing) if existing.trim() != kind.name() => {
                bail!("config names experiment `{existing}` but the subcommand runs `{kind}`")
            }
            _ => {
                pairs.insert("experiment".into(), kind.name().into());
            }
        }
    }
    if let Some(seed) = seed {
        pairs.insert("seed".into(), seed.to_string());
    }
    ExperimentConfig::from_pairs(&pairs)
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))
}

/// Writes `metadata.txt` first so an unwritable directory fails before any solve.
pub fn experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutput> {
    prepare_out(out)?;
    fs::write(out.join("metadata.txt"), cfg.to_text()).with_context(|| format!("writing metadata in {}", out.display()))?;
    let output = run_experiment(cfg)?;
    output.write(out)?;
    Ok(output)
}

pub fn gen(cfg: &ExperimentConfig, out: &Path, trial: usize) -> Result<TrialProblem> {
    generate_bundle(out, cfg, trial)
}

fn load_problem(cfg: &ExperimentConfig, instance: Option<&Path>, trial: usize) -> Result<(ExperimentConfig, TrialProblem)> {
    match instance {
        Some(dir) => {
            let b = read_bundle(dir)?;
            Ok((b.config, b.problem))
        }
        None => Ok((cfg.clone(), build_problem(cfg, trial, cfg.n)?)),
    }
}

/// Unsketched solve; writes `beta.csv` and `report.txt`.
pub fn solve(cfg: &ExperimentConfig, out: &Path, instance: Option<&Path>, trial: usize) -> Result<Vec<(String, String)>> {
    prepare_out(out)?;
    let (cfg, tp) = load_problem(cfg, instance, trial)?;
    let start = Instant::now();
    let res = direct_solve(&tp.problem, &solver_config(&cfg))?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let beta = tp.to_original(&res.beta)?;
    write_vector(&out.join("beta.csv"), &beta)?;
    let report = vec![
        ("method".to_string(), "exact".to_string()),
        ("objective".into(), format!("{:e}", tp.problem.objective(&res.beta))),
        ("iterations".into(), res.iterations.to_string()),
        ("converged".into(), res.converged.to_string()),
        ("residual".into(), format!("{:e}", res.residual)),
        ("l2_to_betabar".into(), format!("{:e}", (&beta - &tp.beta_bar).norm())),
        ("ms".into(), format!("{ms:e}")),
    ];
    fs::write(out.join("report.txt"), format_pairs(&report))?;
    Ok(report)
}

/// Sketched solve; writes `beta.csv`, `trace.csv` and `report.txt`.
pub fn sketch_solve(cfg: &ExperimentConfig, out: &Path, instance: Option<&Path>, trial: usize, method: SroMethod) -> Result<Vec<(String, String)>> {
    prepare_out(out)?;
    let (cfg, tp) = load_problem(cfg, instance, trial)?;
    let exact = direct_solve(&tp.problem, &reference_config(&solver_config(&cfg)))?;
    let (sc, gamma) = sro_config(&cfg, &tp.problem, trial, cfg.gammas[0])?;
    let run = run_method(method, &tp.problem, &sc)?;
    let mut trace = Table::new(&["iter", "obj", "x_err_sq_per_n", "solver_iterations", "converged", "ms"]);
    for (t, beta) in run.iterates.iter().enumerate() {
        let diff = beta - &exact.beta;
        let step = t.checked_sub(1).map(|k| &run.steps[k]);
        trace.push(vec![
            t.into(),
            tp.problem.objective(beta).into(),
            ((tp.problem.x() * diff).norm_squared() / tp.n() as f64).into(),
            step.map_or(0, |s| s.solver_iterations).into(),
            step.is_none_or(|s| s.converged).into(),
            Cell::Float(step.map_or(0.0, |s| s.solve_ms)),
        ]);
    }
    trace.write_csv(&out.join("trace.csv"))?;
    let beta = tp.to_original(run.last())?;
    write_vector(&out.join("beta.csv"), &beta)?;
    let report = vec![
        ("method".to_string(), method.name().to_string()),
        ("gamma".into(), format!("{gamma:e}")),
        ("rows".into(), sc.sketch_rows.unwrap_or(0).to_string()),
        ("objective".into(), format!("{:e}", tp.problem.objective(run.last()))),
        ("converged".into(), run.all_converged().to_string()),
        ("l2_to_betabar".into(), format!("{:e}", (&beta - &tp.beta_bar).norm())),
        ("l2_to_exact".into(), format!("{:e}", (&beta - tp.to_original(&exact.beta)?).norm())),
        ("ms".into(), format!("{:e}", run.total_ms)),
    ];
    fs::write(out.join("report.txt"), format_pairs(&report))?;
    Ok(report)
}
