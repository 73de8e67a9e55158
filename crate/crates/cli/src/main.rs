use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mgturbo_cli::config::{self, Flags};
use mgturbo_cli::{compare, pca, run, trace, CliError};

#[derive(Parser)]
#[command(name = "mgturbo", version, about = "Trust-region Bayesian optimization benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method over a list of seeds.
    Run(RunArgs),
    /// Median and IQR of the running best per evaluation, per method directory.
    Compare(CompareArgs),
    /// Shared 2-D PCA projection of all evaluated points.
    Pca(PcaArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    acquisition: Option<String>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long = "init")]
    init_size: Option<usize>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `kind[:key=value,...]`, e.g. `synthetic:dim=14,response=saturating,noise=0.05`.
    #[arg(long)]
    problem: Option<String>,
    /// `key=value` with dotted keys, e.g. `trust.tau_fail=4`.
    #[arg(long = "override")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct CompareArgs {
    /// One directory per method, each holding that method's seed traces.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
    /// Drop rows from the initial design.
    #[arg(long)]
    optimize_only: bool,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PcaArgs {
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
    /// Directory receiving `projection.csv` and `explained_variance.csv`.
    #[arg(long, default_value = "pca")]
    out: PathBuf,
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let flags = Flags {
        method: args.method,
        acquisition: args.acquisition,
        budget: args.budget,
        init_size: args.init_size,
        seeds: args.seeds,
        out: args.out,
        problem: args.problem,
        overrides: args.overrides,
    };
    let loaded = config::load(args.config.as_deref(), &flags)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let cfg = loaded.config;
    eprintln!(
        "running {} on {} seed(s), budget {} -> {}",
        cfg.label(),
        cfg.seeds.len(),
        cfg.budget,
        cfg.out.display()
    );
    let summary = run::cmd_run(&cfg)?;
    for r in &summary.runs {
        eprintln!(
            "seed {}: best {:.6} after {} evaluations ({:.1}s)",
            r.seed,
            r.best_y.unwrap_or(f64::NAN),
            r.evaluations,
            r.wall_time_s
        );
    }
    if let Some(m) = summary.median_best_y {
        println!("{}: median best {m:.6}", summary.label);
    }
    Ok(())
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let groups = trace::load_groups(&args.dirs)?;
    let rows = compare::convergence(&groups, args.optimize_only)?;
    compare::write_table(&rows, output(args.out.as_ref())?)?;
    Ok(())
}

fn cmd_pca(args: PcaArgs) -> Result<()> {
    let groups = trace::load_groups(&args.dirs)?;
    let (fit, points) = pca::project_groups(&groups)?;
    std::fs::create_dir_all(&args.out)?;
    pca::write_projection(&points, File::create(args.out.join("projection.csv"))?)?;
    pca::write_explained(&fit, File::create(args.out.join("explained_variance.csv"))?)?;
    println!(
        "pc1 {:.4}, pc2 {:.4} of variance over {} points",
        fit.explained_ratio[0],
        fit.explained_ratio[1],
        points.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Pca(a) => cmd_pca(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(1, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
