//! Timed benchmark runs and their CSV records.
//!
//! [`run_suite`] draws the instances of a [`GeneratorSpec`], obtains a
//! ground-truth solution per instance where tractable, and times every
//! (problem, solver) cell. Records come back in deterministic
//! (problem, solver) order; apart from the wall times, two runs of the same
//! spec produce identical records.
//!
//! Cells can run on several worker threads; set the `ASQP_THREADS`
//! environment variable or [`SuiteOptions::threads`]. The timing loop wraps
//! only the solve call, so the schedule does not leak into wall times beyond
//! ordinary machine noise.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bench::generator::{GeneratorSpec, ProblemStream};
use crate::bench::oracle::{oracle_enumerate, oracle_reference, MAX_ENUMERATION_ROWS};
use crate::error::Error;
use crate::model::QpProblem;
use crate::solver::{solve, SolveStatus, SolverConfig};

/// Largest dimension at which the suite still runs the enumeration oracle;
/// above it the reference fallback keeps large suites affordable.
pub const MAX_ENUMERATION_DIM: usize = 64;

/// One timed (problem, solver) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem_id: String,
    pub n: usize,
    #[serde(rename = "n_e")]
    pub n_eq: usize,
    #[serde(rename = "n_i")]
    pub n_ineq: usize,
    /// Scheme name of the solver configuration.
    pub solver: String,
    pub status: SolveStatus,
    pub iterations: usize,
    pub wall_time_s: f64,
    /// `||x_solver - x_oracle||_2`; absent when no oracle was available or
    /// the solve failed.
    #[serde(default)]
    pub error_norm: Option<f64>,
}

/// Whether to compute ground-truth error norms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ErrorNormMode {
    /// Enumeration when `n_i <= 12` and `n <= 64`, reference fallback
    /// otherwise.
    #[default]
    Auto,
    /// Skip oracles entirely (pure timing runs).
    Off,
}

#[derive(Clone, Debug, Default)]
pub struct SuiteOptions {
    pub error_norms: ErrorNormMode,
    /// Worker threads; `None` consults `ASQP_THREADS`, defaulting to 1.
    pub threads: Option<usize>,
}

/// Runs every solver over the instances of `spec` with default options.
pub fn run_suite(
    spec: &GeneratorSpec,
    solvers: &[SolverConfig],
) -> Result<Vec<RunRecord>, Error> {
    run_suite_with(spec, solvers, &SuiteOptions::default())
}

pub fn run_suite_with(
    spec: &GeneratorSpec,
    solvers: &[SolverConfig],
    options: &SuiteOptions,
) -> Result<Vec<RunRecord>, Error> {
    if solvers.is_empty() {
        return Err(Error::InvalidInput("no solver configurations supplied".into()));
    }
    spec.validate()?;

    let (problems, oracles) = assemble_instances(spec, options)?;

    let cells: Vec<(usize, usize)> = (0..problems.len())
        .flat_map(|p| (0..solvers.len()).map(move |s| (p, s)))
        .collect();
    let mut results: Vec<Option<RunRecord>> = vec![None; cells.len()];

    let threads = options
        .threads
        .or_else(|| {
            std::env::var("ASQP_THREADS").ok().and_then(|v| v.parse::<usize>().ok())
        })
        .unwrap_or(1)
        .max(1);

    if threads == 1 {
        for (idx, &(p, s)) in cells.iter().enumerate() {
            results[idx] = Some(run_cell(p, &problems[p], &solvers[s], oracles[p].as_ref()));
        }
    } else {
        let next = AtomicUsize::new(0);
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::scope(|scope| {
            for _ in 0..threads.min(cells.len()) {
                let tx = tx.clone();
                let next = &next;
                let cells = &cells;
                let problems = &problems;
                let oracles = &oracles;
                let solvers = &solvers;
                scope.spawn(move || loop {
                    let idx = next.fetch_add(1, Ordering::Relaxed);
                    if idx >= cells.len() {
                        break;
                    }
                    let (p, s) = cells[idx];
                    let record =
                        run_cell(p, &problems[p], &solvers[s], oracles[p].as_ref());
                    if tx.send((idx, record)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            for (idx, record) in rx {
                results[idx] = Some(record);
            }
        });
    }

    Ok(results.into_iter().map(|r| r.expect("all cells ran")).collect())
}

/// Instances and their oracle solutions, index-aligned.
type AssembledInstances = (Vec<QpProblem>, Vec<Option<DVector<f64>>>);

// Draws instances until `count` of them have a usable oracle (or oracles are
// off). An inconclusive enumeration signals a degenerate construction; the
// instance is dropped and the stream simply continues, which keeps the
// retained set deterministic.
fn assemble_instances(
    spec: &GeneratorSpec,
    options: &SuiteOptions,
) -> Result<AssembledInstances, Error> {
    let mut stream = ProblemStream::unbounded(spec)?;
    let mut problems = Vec::with_capacity(spec.count);
    let mut oracles = Vec::with_capacity(spec.count);
    let max_attempts = 20 * spec.count + 100;
    let mut attempts = 0;

    while problems.len() < spec.count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Numerical(format!(
                "gave up assembling instances after {max_attempts} attempts; \
                 the enumeration oracle kept failing"
            )));
        }
        let problem = stream.next().expect("unbounded stream");
        let oracle = match options.error_norms {
            ErrorNormMode::Off => None,
            ErrorNormMode::Auto => {
                if problem.num_ineq() <= MAX_ENUMERATION_ROWS
                    && problem.n() <= MAX_ENUMERATION_DIM
                {
                    match oracle_enumerate(&problem) {
                        Ok(x) => Some(x),
                        Err(Error::OracleInconclusive) => continue,
                        Err(e) => return Err(e),
                    }
                } else {
                    oracle_reference(&problem).ok()
                }
            }
        };
        problems.push(problem);
        oracles.push(oracle);
    }
    Ok((problems, oracles))
}

fn run_cell(
    index: usize,
    problem: &QpProblem,
    config: &SolverConfig,
    oracle: Option<&DVector<f64>>,
) -> RunRecord {
    let start = Instant::now();
    let outcome = solve(problem, config);
    let wall_time_s = start.elapsed().as_secs_f64();

    let error_norm = match (oracle, outcome.status) {
        (Some(x_star), SolveStatus::Optimal) => Some((&outcome.x - x_star).norm()),
        _ => None,
    };

    RunRecord {
        problem_id: format!("p{index:04}"),
        n: problem.n(),
        n_eq: problem.num_eq(),
        n_ineq: problem.num_ineq(),
        solver: config.scheme.name().to_string(),
        status: outcome.status,
        iterations: outcome.iterations,
        wall_time_s,
        error_norm,
    }
}

/// Writes records as CSV with the column header
/// `problem_id,n,n_e,n_i,solver,status,iterations,wall_time_s,error_norm`.
pub fn write_records<W: Write>(writer: W, records: &[RunRecord]) -> Result<(), Error> {
    let mut out = csv::Writer::from_writer(writer);
    for record in records {
        out.serialize(record)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_records_file(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<(), Error> {
    let file = std::fs::File::create(path)?;
    write_records(file, records)
}

/// Reads records written by [`write_records`]. Values round-trip exactly.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<RunRecord>, Error> {
    let mut input = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for record in input.deserialize::<RunRecord>() {
        out.push(record?);
    }
    Ok(out)
}

pub fn read_records_str(text: &str) -> Result<Vec<RunRecord>, Error> {
    read_records(text.as_bytes())
}

pub fn read_records_file(path: impl AsRef<Path>) -> Result<Vec<RunRecord>, Error> {
    let file = std::fs::File::open(path)?;
    read_records(file)
}
