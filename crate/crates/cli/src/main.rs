use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use sro_cli::commands;
use sro_cli::ExperimentKind;
use sro_core::sro::SroMethod;

#[derive(Parser)]
#[command(name = "sro", version, about = "Sketched regularized least squares experiments")]
struct Cli {
    /// Worker threads for parallel trials (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key = value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Overrides the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Instance bundle written by `gen`; generated from the config otherwise.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    trial: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Sro,
    Isro,
    IsroIhs,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance bundle.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Solve the unsketched problem.
    Solve(SolveArgs),
    /// Solve with one-shot or iterative sketching.
    SketchSolve {
        #[command(flatten)]
        args: SolveArgs,
        #[arg(long, value_enum, default_value = "isro")]
        method: MethodArg,
    },
    /// Run the experiment named in the config.
    Experiment(Common),
    /// Run a sample-size scan.
    RateScan(Common),
    /// Run the wall-clock comparison.
    Timing(Common),
}

fn print_report(report: &[(String, String)]) {
    for (k, v) in report {
        println!("{k} = {v}");
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let experiment = |c: &Common, forced: Option<ExperimentKind>| -> Result<()> {
        let cfg = commands::load_config(&c.config, c.seed, forced)?;
        let output = commands::experiment(&cfg, &c.out)?;
        for f in &output.files {
            println!("wrote {} ({} rows)", c.out.join(&f.name).display(), f.table.rows.len());
        }
        Ok(())
    };
    match cli.command {
        Command::Gen { common, trial } => {
            let cfg = commands::load_config(&common.config, common.seed, None)?;
            let tp = commands::gen(&cfg, &common.out, trial)?;
            println!("wrote bundle {} ({}x{})", common.out.display(), tp.problem.n(), tp.problem.d());
        }
        Command::Solve(a) => {
            let cfg = commands::load_config(&a.common.config, a.common.seed, None)?;
            print_report(&commands::solve(&cfg, &a.common.out, a.instance.as_deref(), a.trial)?);
        }
        Command::SketchSolve { args, method } => {
            let cfg = commands::load_config(&args.common.config, args.common.seed, None)?;
            let method = match method {
                MethodArg::Sro => SroMethod::Sro,
                MethodArg::Isro => SroMethod::Iterative,
                MethodArg::IsroIhs => SroMethod::IterativeIhs,
            };
            print_report(&commands::sketch_solve(&cfg, &args.common.out, args.instance.as_deref(), args.trial, method)?);
        }
        Command::Experiment(c) => experiment(&c, None)?,
        Command::RateScan(c) => experiment(&c, Some(ExperimentKind::RateScan))?,
        Command::Timing(c) => experiment(&c, Some(ExperimentKind::Timing))?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
