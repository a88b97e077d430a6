//! Benchmark CLI: deterministic experiment runs, kappa sweeps, acceptance
//! check suites, derivative verification, and trace reports.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use tensor_descent::harness::experiment::{
    run_and_persist, run_sweep, Algorithm, ExperimentConfig,
};
use tensor_descent::harness::slope::slope_fit_records;
use tensor_descent::harness::suites;
use tensor_descent::trace::RunTrace;

#[derive(Parser)]
#[command(
    name = "tensor-descent",
    version,
    about = "High-order composite optimization: solvers, rate checks, and oracle-call accounting"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment; writes <name>.trace.csv and <name>.summary.json.
    Run(RunArgs),
    /// Expand `{kappa}` in the problem key over a list and run each value.
    Sweep(SweepArgs),
    /// Run an acceptance check suite and print one line per criterion.
    CheckSuite {
        /// derivatives | remainder | rates | lambda | potential | restarts |
        /// splitting | multicomposite | inexact | determinism | all
        suite: String,
    },
    /// Finite-difference verification of every built-in oracle.
    CheckDerivatives,
    /// Summarize a stored trace CSV and fit a log-log tail slope.
    Report {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = "gap")]
        field: String,
        #[arg(long, default_value_t = 0.5)]
        tail: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem key, e.g. power4-n10, quad-n10, logistic-n5-m20,
    /// split-p2-k100-n8, mcquad-n6.
    #[arg(long)]
    problem: Option<String>,
    /// catd | catd-restarts | combination | multicomposite
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Regularization coefficient override (defaults to the declared L_p).
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    h_qf: Option<f64>,
    #[arg(long)]
    h_pg: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    r0: Option<f64>,
    /// Force the plain envelope outer loop in combination runs.
    #[arg(long)]
    convex_mode: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    name: Option<String>,
    /// Output directory (also settable via TENSOR_DESCENT_OUT).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated kappa values substituted for `{kappa}`.
    #[arg(long, value_delimiter = ',')]
    kappa: Vec<u64>,
}

fn merge(args: RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_toml_file(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = args.problem {
        cfg.problem = v;
    }
    if let Some(v) = args.algo {
        cfg.algo = v.parse::<Algorithm>().map_err(anyhow::Error::msg)?;
    }
    if let Some(v) = args.p {
        cfg.p = v;
    }
    if let Some(v) = args.q {
        cfg.q = v;
    }
    if let Some(v) = args.iters {
        cfg.iters = v;
    }
    if let Some(v) = args.restarts {
        cfg.restarts = v;
    }
    cfg.h = args.h.or(cfg.h);
    cfg.h_qf = args.h_qf.or(cfg.h_qf);
    cfg.h_pg = args.h_pg.or(cfg.h_pg);
    if let Some(v) = args.eps {
        cfg.eps = v;
    }
    cfg.r0 = args.r0.or(cfg.r0);
    if args.convex_mode {
        cfg.convex_mode = true;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    cfg.name = args.name.or(cfg.name);
    cfg.out_dir = args.out_dir.or(cfg.out_dir);
    Ok(cfg)
}

fn print_summary(trace: &RunTrace) {
    let s = &trace.summary;
    let gap = s
        .final_gap
        .map(|g| format!("{g:.3e}"))
        .unwrap_or_else(|| "n/a".into());
    println!(
        "{}: {} iters, final value {:.6e}, gap {}, |grad| {:.3e}, n_f {}, n_g {} ({:.2}s)",
        s.name, s.iterations, s.final_value, gap, s.final_grad_norm, s.n_f, s.n_g, s.wall_time_s
    );
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    match Cli::parse().cmd {
        Cmd::Run(args) => {
            let cfg = merge(args)?;
            let (trace, csv_path, json_path) = run_and_persist(&cfg)?;
            print_summary(&trace);
            println!("trace:   {}", csv_path.display());
            println!("summary: {}", json_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Sweep(args) => {
            let mut cfg = merge(args.run)?;
            if !args.kappa.is_empty() {
                cfg.kappa_list = args.kappa;
            }
            let results = run_sweep(&cfg)?;
            for (trace, csv_path, _) in &results {
                print_summary(trace);
                println!("trace:   {}", csv_path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::CheckSuite { suite } => {
            let results = suites::check_suite(&suite)?;
            let mut ok = true;
            for r in &results {
                println!("{r}");
                ok &= r.passed;
            }
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Cmd::CheckDerivatives => {
            let result = suites::criterion_derivatives();
            println!("{result}");
            Ok(if result.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Cmd::Report { trace, field, tail } => {
            let text = std::fs::read_to_string(&trace)
                .with_context(|| format!("reading {}", trace.display()))?;
            let records = RunTrace::parse_csv_records(&text)?;
            if records.is_empty() {
                bail!("trace {} has no records", trace.display());
            }
            let last = records.last().unwrap();
            println!(
                "{}: {} records, final value {:.6e}, n_f {}, n_g {}",
                trace.display(),
                records.len(),
                last.value,
                last.n_f,
                last.n_g
            );
            match slope_fit_records(&records, &field, tail) {
                Ok((slope, r2)) => {
                    println!("log-log {field} slope over tail {tail}: {slope:.3} (r^2 {r2:.3})")
                }
                Err(e) => println!("slope fit unavailable: {e}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
