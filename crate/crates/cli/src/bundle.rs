//! Instance bundles: dense CSV matrices plus a key=value description.
//!
//! A bundle directory holds `X.csv`, `y.csv`, `beta_bar.csv` and
//! `instance.txt`. The design is stored in original coordinates.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use sro_core::reg::FusedTransform;
use sro_core::sro::Problem;

use crate::config::{format_pairs, read_pairs, ExperimentConfig, PenaltyKind};
use crate::experiment::{build_problem, regularizer, TrialProblem};

const INSTANCE_PREFIX: &str = "instance.";

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => bail!("{}: ragged row {}", path.display(), rows + 1),
            _ => {}
        }
        for field in rec.iter() {
            data.push(field.trim().parse::<f64>().with_context(|| format!("{}: bad number `{field}`", path.display()))?);
        }
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, cols.unwrap_or(0), &data))
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    let text: String = v.iter().map(|x| format!("{x:e}\n")).collect();
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        bail!("{}: expected one column, found {}", path.display(), m.ncols());
    }
    Ok(m.column(0).into_owned())
}

/// Design in original coordinates: `X = (X D⁻¹) D` for the difference operator `D`.
fn original_design(tp: &TrialProblem) -> DMatrix<f64> {
    let xu = tp.problem.x();
    if tp.fused.is_none() {
        return xu.clone();
    }
    let (n, d) = xu.shape();
    let mut x = DMatrix::zeros(n, d);
    for j in 0..d {
        let mut col = if j + 1 < d { -xu.column(j) } else { xu.column(j).into_owned() };
        if j >= 1 {
            col += xu.column(j - 1);
        }
        x.set_column(j, &col);
    }
    x
}

pub fn write_bundle(dir: &Path, cfg: &ExperimentConfig, trial: usize, tp: &TrialProblem) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_matrix(&dir.join("X.csv"), &original_design(tp))?;
    write_vector(&dir.join("y.csv"), tp.problem.y())?;
    write_vector(&dir.join("beta_bar.csv"), &tp.beta_bar)?;
    let mut pairs = cfg.to_pairs();
    pairs.push(("trial".into(), trial.to_string()));
    pairs.extend(tp.instance.to_pairs().into_iter().map(|(k, v)| (format!("{INSTANCE_PREFIX}{k}"), v)));
    pairs.push(("lambda_value".into(), format!("{:?}", tp.problem.reg().lambda())));
    fs::write(dir.join("instance.txt"), format_pairs(&pairs)).with_context(|| format!("writing {}", dir.display()))
}

/// Bundle contents as a solvable problem.
pub struct Bundle {
    pub config: ExperimentConfig,
    pub trial: usize,
    pub problem: TrialProblem,
}

pub fn read_bundle(dir: &Path) -> Result<Bundle> {
    let mut pairs = read_pairs(&dir.join("instance.txt"))?;
    let trial: usize = pairs.remove("trial").context("bundle lacks `trial`")?.parse()?;
    pairs.remove("lambda_value");
    let instance_keys: Vec<String> = pairs.keys().filter(|k| k.starts_with(INSTANCE_PREFIX)).cloned().collect();
    let mut instance_pairs = std::collections::BTreeMap::new();
    for key in instance_keys {
        let value = pairs.remove(&key).unwrap_or_default();
        instance_pairs.insert(key[INSTANCE_PREFIX.len()..].to_string(), value);
    }
    let instance = sro_core::gen::InstanceSpec::from_pairs(&instance_pairs)?;
    let config = ExperimentConfig::from_pairs(&pairs)?;
    let x = read_matrix(&dir.join("X.csv"))?;
    let y = read_vector(&dir.join("y.csv"))?;
    let beta_bar = read_vector(&dir.join("beta_bar.csv"))?;
    let reg = regularizer(&config, x.nrows())?;
    let (problem, fused) = if config.penalty == PenaltyKind::Fused {
        let f = FusedTransform::new(x.ncols())?;
        (Problem::new(f.transform_design(&x)?, y, f.regularizer(reg.lambda())?)?, Some(f))
    } else {
        (Problem::new(x, y, reg)?, None)
    };
    let support = beta_bar.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, _)| j).collect();
    Ok(Bundle {
        config,
        trial,
        problem: TrialProblem {
            problem,
            beta_bar,
            support,
            fused,
            instance,
        },
    })
}

/// Generates the trial problem and writes it as a bundle.
pub fn generate_bundle(dir: &Path, cfg: &ExperimentConfig, trial: usize) -> Result<TrialProblem> {
    let tp = build_problem(cfg, trial, cfg.n)?;
    write_bundle(dir, cfg, trial, &tp)?;
    Ok(tp)
}
