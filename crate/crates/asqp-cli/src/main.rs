//! Command-line front end for the active-set QP solver.
//!
//! Four subcommands: `solve` runs one problem file, `gen` writes random
//! instances as problem files, `bench` times the direction schemes over a
//! generated family and emits CSV records, and `profile` turns those records
//! into performance-profile curves.
//!
//! Exit codes: 0 on success, 1 for usage and input-parsing errors, 2 when
//! the solver finishes without an optimum or a run fails midway.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};

use asqp::bench::{
    dolan_more, generate, read_records_file, run_suite_with, write_profile, write_profile_file,
    write_records, write_records_file, ErrorNormMode, GeneratorSpec, ProfileTable, SuiteOptions,
};
use asqp::model::io::{read_problem_file, write_problem_file};
use asqp::solver::StepAction;
use asqp::{solve, Scheme, SolveOutcome, SolveStatus, SolverConfig};

#[derive(Parser)]
#[command(name = "asqp", version, about = "Dense active-set solver for convex quadratic programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and print the solution.
    Solve(SolveArgs),
    /// Time the direction schemes on random instances, emitting CSV records.
    Bench(BenchArgs),
    /// Turn benchmark records into performance-profile curves.
    Profile(ProfileArgs),
    /// Write random problem instances as JSON files.
    Gen(GenArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Problem file (JSON).
    file: PathBuf,
    /// Direction scheme: kkt, projection, sphere, or auto.
    #[arg(long, default_value_t = Scheme::Auto)]
    scheme: Scheme,
    /// Feasibility tolerance.
    #[arg(long, value_name = "TOL")]
    tol: Option<f64>,
    /// Iteration cap (defaults to a multiple of the problem size).
    #[arg(long, value_name = "N")]
    max_iter: Option<usize>,
    /// Print the outcome as JSON.
    #[arg(long)]
    json: bool,
    /// Include the per-iteration trace.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Instance family, e.g. "n=10:20,ne=2,ni=n/2,count=30,seed=7".
    #[arg(long)]
    spec: String,
    /// Schemes to time, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "kkt,projection,sphere")]
    schemes: Vec<Scheme>,
    /// Records CSV path (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Solution error norms: check against an oracle, or skip for pure timing.
    #[arg(long, value_enum, default_value = "auto")]
    error_norm: ErrorNormArg,
    /// Worker threads (overrides ASQP_THREADS).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ErrorNormArg {
    Auto,
    Off,
}

#[derive(Args)]
struct ProfileArgs {
    /// Records CSV produced by `asqp bench`.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Profile CSV path (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Instance family, e.g. "n=8,ne=1,ni=4,count=10,seed=1".
    #[arg(long)]
    spec: String,
    /// Directory for the generated problem files.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

/// Failed command with its intended exit code: usage errors leave 1,
/// mid-run failures leave 2.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn usage(err: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(err.into())
}

fn runtime(err: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(err.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Bench(args) => cmd_bench(&args),
        Command::Profile(args) => cmd_profile(&args),
        Command::Gen(args) => cmd_gen(&args),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<ExitCode, Failure> {
    let problem = read_problem_file(&args.file)
        .map_err(|err| usage(anyhow!("{}: {err}", args.file.display())))?;
    let mut config = SolverConfig::with_scheme(args.scheme);
    if let Some(tol) = args.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(usage(anyhow!("--tol must be positive and finite, got {tol}")));
        }
        config.feas_tol = tol;
    }
    if let Some(cap) = args.max_iter {
        config.max_iterations = Some(cap);
    }

    let outcome = solve(&problem, &config);
    if args.json {
        let value = outcome_json(&outcome, args.trace);
        println!("{}", serde_json::to_string_pretty(&value).map_err(runtime)?);
    } else {
        print_outcome(&outcome, args.trace);
    }
    Ok(match outcome.status {
        SolveStatus::Optimal => ExitCode::SUCCESS,
        _ => ExitCode::from(2),
    })
}

fn cmd_bench(args: &BenchArgs) -> Result<ExitCode, Failure> {
    let spec = GeneratorSpec::parse(&args.spec).map_err(usage)?;
    if args.schemes.is_empty() {
        return Err(usage(anyhow!("--schemes needs at least one scheme")));
    }
    for (i, scheme) in args.schemes.iter().enumerate() {
        if args.schemes[..i].contains(scheme) {
            return Err(usage(anyhow!("scheme `{scheme}` listed twice")));
        }
    }
    let solvers: Vec<SolverConfig> =
        args.schemes.iter().map(|&s| SolverConfig::with_scheme(s)).collect();
    let options = SuiteOptions {
        error_norms: match args.error_norm {
            ErrorNormArg::Auto => ErrorNormMode::Auto,
            ErrorNormArg::Off => ErrorNormMode::Off,
        },
        threads: args.threads,
    };

    let records = run_suite_with(&spec, &solvers, &options).map_err(runtime)?;
    match &args.out {
        Some(path) => write_records_file(path, &records).map_err(runtime)?,
        None => write_records(std::io::stdout().lock(), &records).map_err(runtime)?,
    }
    let failed = records.iter().filter(|r| r.status != SolveStatus::Optimal).count();
    eprintln!(
        "{} records over {} instances, {} non-optimal",
        records.len(),
        records.len() / solvers.len(),
        failed
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_profile(args: &ProfileArgs) -> Result<ExitCode, Failure> {
    let records = read_records_file(&args.input)
        .map_err(|err| usage(anyhow!("{}: {err}", args.input.display())))?;
    let table = ProfileTable::from_records(&records).map_err(usage)?;
    let unsolved = table.unsolved_problems();
    if unsolved > 0 {
        eprintln!("warning: {unsolved} problem(s) solved by no scheme; curves cannot reach 1");
    }
    let grid = table.suggested_tau_grid();
    let curves = dolan_more(&table, &grid).map_err(runtime)?;
    match &args.out {
        Some(path) => write_profile_file(path, &curves).map_err(runtime)?,
        None => write_profile(std::io::stdout().lock(), &curves).map_err(runtime)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen(args: &GenArgs) -> Result<ExitCode, Failure> {
    let spec = GeneratorSpec::parse(&args.spec).map_err(usage)?;
    let stream = generate(&spec).map_err(usage)?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|err| runtime(anyhow!("create {}: {err}", args.out_dir.display())))?;
    for (index, problem) in stream.enumerate() {
        let path = args.out_dir.join(format!("p{index:04}.json"));
        write_problem_file(&path, &problem)
            .map_err(|err| runtime(anyhow!("write {}: {err}", path.display())))?;
        println!("{}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn vec_text(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

fn action_text(action: &StepAction) -> String {
    match action {
        StepAction::FullStep => "full step".into(),
        StepAction::AddedConstraint(row) => format!("added row {row}"),
        StepAction::RemovedConstraint(row) => format!("removed row {row}"),
        StepAction::Terminated => "terminated".into(),
    }
}

fn print_outcome(outcome: &SolveOutcome, with_trace: bool) {
    println!("status      {}", outcome.status);
    println!("objective   {}", outcome.objective);
    println!("iterations  {}", outcome.iterations);
    println!("x           {}", vec_text(outcome.x.as_slice()));
    if !outcome.multipliers.equality.is_empty() {
        println!("eq lambda   {}", vec_text(outcome.multipliers.equality.as_slice()));
    }
    if !outcome.multipliers.inequality.is_empty() {
        let parts: Vec<String> = outcome
            .multipliers
            .inequality
            .iter()
            .map(|(row, value)| format!("{row}: {value}"))
            .collect();
        println!("ineq lambda {}", parts.join(", "));
    }
    if let Some(message) = &outcome.message {
        println!("note        {message}");
    }
    if with_trace {
        for entry in &outcome.trace {
            println!(
                "iter {:>3}  alpha {:.6}  |p| {:.6e}  objective {:.12e}  {}",
                entry.iteration,
                entry.alpha,
                entry.direction_norm,
                entry.objective,
                action_text(&entry.action)
            );
        }
    }
}

fn outcome_json(outcome: &SolveOutcome, with_trace: bool) -> serde_json::Value {
    let mut value = serde_json::json!({
        "status": outcome.status,
        "objective": outcome.objective,
        "iterations": outcome.iterations,
        "x": outcome.x.iter().copied().collect::<Vec<f64>>(),
        "initial_active": outcome.initial_active,
        "multipliers": {
            "equality": outcome.multipliers.equality.iter().copied().collect::<Vec<f64>>(),
            "inequality": outcome
                .multipliers
                .inequality
                .iter()
                .map(|&(row, value)| serde_json::json!({ "row": row, "value": value }))
                .collect::<Vec<_>>(),
        },
        "message": outcome.message,
    });
    if with_trace {
        value["trace"] = outcome
            .trace
            .iter()
            .map(|entry| {
                serde_json::json!({
                    "iteration": entry.iteration,
                    "alpha": entry.alpha,
                    "direction_norm": entry.direction_norm,
                    "objective": entry.objective,
                    "action": action_text(&entry.action),
                    "x": entry.x.iter().copied().collect::<Vec<f64>>(),
                })
            })
            .collect::<Vec<_>>()
            .into();
    }
    value
}
