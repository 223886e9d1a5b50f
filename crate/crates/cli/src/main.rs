//! `adaptix` command-line front end.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaptix::confidence::{
    confidence_report, default_r, tail_bound_exponential, tail_bound_r1, tail_bound_r2, theorem_tau_bound,
    theorem_tau_regime, PlugIn, TailBoundParams,
};
use adaptix::estimator::{adaptive_estimate, evaluate};
use adaptix::harness::{coverage_from, run_experiment, ExperimentConfig, ExperimentReport};
use adaptix::io::{fmt_f64, read_dataset_file, write_coefficients, write_curve, write_grid};
use adaptix::targets::{make_w_target, make_z_target, Constraint};
use adaptix::{Error, Problem};
use clap::{Parser, Subcommand, ValueEnum};

const EXIT_INPUT: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;

#[derive(Parser)]
#[command(name = "adaptix", version, about = "Adaptive trigonometric projection estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate f from a dataset CSV.
    Estimate {
        #[arg(long)]
        problem: Option<Problem>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// ACI exponent; defaults per problem.
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        c_free: f64,
        /// Number of evaluation intervals on [0, 1].
        #[arg(long, default_value_t = 512)]
        grid: usize,
    },
    /// Run a Monte Carlo experiment.
    Simulate(RunArgs),
    /// Run an experiment and fit the risk rate.
    Rate(RunArgs),
    /// Run an experiment and report ACI coverage.
    Coverage(RunArgs),
    /// Tabulate a tail bound over a grid of u.
    Bounds(BoundsArgs),
    /// Build a W or Z target and write its JSON document.
    MakeTarget(TargetArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `delta`.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Theorem {
    R1,
    R2,
    R3,
    D,
    S,
    Tau,
}

#[derive(clap::Args)]
struct BoundsArgs {
    #[arg(long, value_enum)]
    theorem: Theorem,
    /// Comma-separated values of u.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    u: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 3.0)]
    mu4: f64,
    #[arg(long, default_value_t = 3)]
    k: u32,
    #[arg(long, default_value_t = 15.0)]
    mu_2k: f64,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long = "big-q", default_value_t = std::f64::consts::SQRT_2)]
    big_q: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 20)]
    n0: usize,
    #[arg(long, default_value_t = 0.01)]
    b_n: f64,
    #[arg(long, default_value_t = 1.0)]
    c_free: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Class {
    W,
    Z,
}

#[derive(clap::Args)]
struct TargetArgs {
    #[arg(long, value_enum)]
    class: Class,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 256)]
    j: usize,
    #[arg(long, value_enum, default_value = "none")]
    constraint: ConstraintArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstraintArg {
    None,
    Nonnegative,
    Even,
    EvenNonnegative,
}

impl From<ConstraintArg> for Constraint {
    fn from(c: ConstraintArg) -> Self {
        match c {
            ConstraintArg::None => Constraint::None,
            ConstraintArg::Nonnegative => Constraint::Nonnegative,
            ConstraintArg::Even => Constraint::Even,
            ConstraintArg::EvenNonnegative => Constraint::EvenNonnegative,
        }
    }
}

enum Failure {
    Input(String),
    Degenerate(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_)
            | Error::Range { .. }
            | Error::Parameter(_)
            | Error::ProblemMismatch { .. }
            | Error::BelowThreshold { .. }
            | Error::Config(_)
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::Infeasible(_) => Failure::Input(e.to_string()),
            other => Failure::Internal(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    fs::write(path, bytes).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::Internal(e.to_string()))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CmdResult {
    match out {
        Some(p) => write_file(p, bytes),
        None => {
            io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn cmd_estimate(
    problem: Option<Problem>,
    input: &Path,
    out: &Path,
    delta: f64,
    r: Option<f64>,
    c_free: f64,
    grid: usize,
) -> CmdResult {
    let d = read_dataset_file(input, problem)?;
    let est = adaptive_estimate(&d)?;
    if grid == 0 {
        return Err(Failure::Input("--grid must be positive".into()));
    }
    let r = r.unwrap_or_else(|| default_r(d.problem, None));
    let report = confidence_report(&est, delta, r, c_free, PlugIn::default())?;
    fs::create_dir_all(out)?;

    let mut estimate = serde_json::to_value(&est).map_err(|e| Failure::Internal(e.to_string()))?;
    estimate["min_on_grid"] = serde_json::json!(est.min_on_grid(grid));
    write_file(&out.join("estimate.json"), to_json(&estimate)?.as_bytes())?;
    let mut buf = Vec::new();
    write_coefficients(&mut buf, &est.coeffs)?;
    write_file(&out.join("coefficients.csv"), &buf)?;
    let xs: Vec<f64> = (0..=grid).map(|m| m as f64 / grid as f64).collect();
    let mut buf = Vec::new();
    write_grid(&mut buf, &xs, &evaluate(&est, &xs)?)?;
    write_file(&out.join("grid.csv"), &buf)?;
    let mut buf = Vec::new();
    let tau = &est.selection.as_ref().expect("fresh estimate").tau;
    write_curve(&mut buf, tau, None)?;
    write_file(&out.join("tau_curve.csv"), &buf)?;
    write_file(&out.join("confidence.json"), to_json(&report)?.as_bytes())?;

    if report.degenerate {
        return Err(Failure::Degenerate(format!(
            "gamma_hat is degenerate (M = {}, raw ratio {}); ACI bounds are unbounded",
            report.m,
            report.gamma_raw.map_or("undefined".into(), |g| g.to_string())
        )));
    }
    Ok(())
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    if let Some(delta) = args.delta {
        cfg.delta = delta;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &RunArgs) -> Result<ExperimentReport, Failure> {
    let cfg = load_config(args)?;
    let report = run_experiment(&cfg)?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
    }
    let written = report.write_outputs(args.out.as_deref())?;
    if written.is_empty() {
        io::stdout().write_all(report.to_json()?.as_bytes())?;
        println!();
    }
    Ok(report)
}

fn cmd_rate(args: &RunArgs) -> CmdResult {
    let report = run(args)?;
    let rate = serde_json::json!({
        "n": report.records.iter().map(|r| r.n).collect::<Vec<_>>(),
        "mean_risk": report.records.iter().map(|r| r.mean_risk).collect::<Vec<_>>(),
        "slope": report.rate_slope,
    });
    if let Some(dir) = &args.out {
        write_file(&dir.join("rate.json"), to_json(&rate)?.as_bytes())?;
    }
    match report.rate_slope {
        Some(s) => eprintln!("fitted slope {s}"),
        None => eprintln!("rate slope needs at least 3 sample sizes with positive risk"),
    }
    Ok(())
}

fn cmd_coverage(args: &RunArgs) -> CmdResult {
    let report = run(args)?;
    let cov = coverage_from(&report);
    if let Some(dir) = &args.out {
        write_file(&dir.join("coverage.json"), to_json(&cov)?.as_bytes())?;
    }
    for c in &cov {
        eprintln!(
            "n = {}: simple {:.4}, refined {:.4}, {} degenerate",
            c.n, c.simple, c.refined, c.degenerate
        );
    }
    Ok(())
}

fn cmd_bounds(a: &BoundsArgs) -> CmdResult {
    let params = |problem| TailBoundParams {
        problem,
        q: a.q,
        big_q: a.big_q,
        gamma: a.gamma,
        n0: a.n0,
        b_n: a.b_n,
        c_free: a.c_free,
    };
    let mut rows = String::from("u,bound\n");
    let mut skipped = Vec::new();
    for &u in &a.u {
        let value = match a.theorem {
            Theorem::R1 => tail_bound_r1(u, a.mu4),
            Theorem::R2 => tail_bound_r2(u, a.k, a.mu_2k),
            Theorem::R3 => tail_bound_exponential(u, &params(Problem::R)),
            Theorem::D => tail_bound_exponential(u, &params(Problem::D)),
            Theorem::S => tail_bound_exponential(u, &params(Problem::S)),
            Theorem::Tau => {
                if !theorem_tau_regime(u, a.c_free, a.b_n) {
                    eprintln!("note: u = {u} lies above C/B(n); the bound is outside its stated range");
                }
                Ok(theorem_tau_bound(u, |x| x, a.c_free))
            }
        };
        match value {
            Ok(b) => rows.push_str(&format!("{},{}\n", fmt_f64(u), fmt_f64(b))),
            Err(Error::BelowThreshold { u, threshold }) => {
                eprintln!("skipped u = {u}: below the threshold {threshold}");
                skipped.push(u);
            }
            Err(e) => return Err(e.into()),
        }
    }
    emit(a.out.as_deref(), rows.as_bytes())?;
    if skipped.is_empty() {
        Ok(())
    } else {
        Err(Failure::Input(format!(
            "{} u value(s) below the threshold",
            skipped.len()
        )))
    }
}

fn cmd_make_target(a: &TargetArgs) -> CmdResult {
    let t = match a.class {
        Class::W => make_w_target(a.c, a.alpha, a.beta, a.j, a.constraint.into())?,
        Class::Z => make_z_target(a.alpha, a.beta, a.j, a.constraint.into())?,
    };
    emit(a.out.as_deref(), to_json(&t)?.as_bytes())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate {
            problem,
            input,
            out,
            delta,
            r,
            c_free,
            grid,
        } => cmd_estimate(*problem, input, out, *delta, *r, *c_free, *grid),
        Command::Simulate(args) => run(args).map(|_| ()),
        Command::Rate(args) => cmd_rate(args),
        Command::Coverage(args) => cmd_coverage(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::MakeTarget(args) => cmd_make_target(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Degenerate(msg)) => {
            eprintln!("warning: {msg}");
            ExitCode::from(EXIT_DEGENERATE)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
