//! Performance profiles over suite records.
//!
//! For problem `p` and solver `s` with wall time `t[p][s]`, the performance
//! ratio is `r[p][s] = t[p][s] / min_s t[p][s]`; failed cells get an
//! infinite ratio. The profile curve of a solver is
//! `rho_s(tau) = |{p : r[p][s] <= tau}| / |P|`, nondecreasing in `tau` with
//! `rho_s(1)` the fraction of problems the solver wins (or ties).

use std::io::Write;
use std::path::Path;

use crate::bench::suite::RunRecord;
use crate::error::Error;
use crate::solver::SolveStatus;

// Wall times are clamped below by this before forming ratios, so a clock
// quantization to zero cannot produce 0/0.
const MIN_TIME: f64 = 1e-12;

/// Wall-time matrix extracted from suite records, problems by solvers.
#[derive(Clone, Debug)]
pub struct ProfileTable {
    solvers: Vec<String>,
    problems: Vec<String>,
    /// `times[p][s]`; infinity marks a failed or missing cell.
    times: Vec<Vec<f64>>,
}

impl ProfileTable {
    /// Groups records by problem and solver, both in first-appearance order.
    /// Non-optimal cells count as failures; duplicate cells are rejected.
    pub fn from_records(records: &[RunRecord]) -> Result<Self, Error> {
        if records.is_empty() {
            return Err(Error::InvalidInput("no records to profile".into()));
        }
        let mut solvers: Vec<String> = Vec::new();
        let mut problems: Vec<String> = Vec::new();
        for record in records {
            if !solvers.contains(&record.solver) {
                solvers.push(record.solver.clone());
            }
            if !problems.contains(&record.problem_id) {
                problems.push(record.problem_id.clone());
            }
        }
        let mut times = vec![vec![f64::INFINITY; solvers.len()]; problems.len()];
        let mut seen = vec![vec![false; solvers.len()]; problems.len()];
        for record in records {
            let p = problems.iter().position(|x| *x == record.problem_id).unwrap();
            let s = solvers.iter().position(|x| *x == record.solver).unwrap();
            if seen[p][s] {
                return Err(Error::InvalidInput(format!(
                    "duplicate record for problem `{}`, solver `{}`",
                    record.problem_id, record.solver
                )));
            }
            seen[p][s] = true;
            if record.status == SolveStatus::Optimal {
                times[p][s] = record.wall_time_s.max(MIN_TIME);
            }
        }
        Ok(Self { solvers, problems, times })
    }

    pub fn solvers(&self) -> &[String] {
        &self.solvers
    }

    pub fn problems(&self) -> &[String] {
        &self.problems
    }

    /// Performance ratios `r[p][s]`; infinity for failures and for every
    /// solver on problems nobody solved.
    pub fn ratios(&self) -> Vec<Vec<f64>> {
        self.times
            .iter()
            .map(|row| {
                let best = row.iter().copied().fold(f64::INFINITY, f64::min);
                row.iter()
                    .map(|&t| {
                        if t.is_finite() && best.is_finite() {
                            t / best
                        } else {
                            f64::INFINITY
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Problems on which every solver failed. These drag all curves below 1
    /// and usually deserve a warning.
    pub fn unsolved_problems(&self) -> usize {
        self.times
            .iter()
            .filter(|row| row.iter().all(|t| !t.is_finite()))
            .count()
    }

    /// Geometric grid from 1 to a bit past the largest finite ratio
    /// (at least 4), suitable as a default `tau` axis.
    pub fn suggested_tau_grid(&self) -> Vec<f64> {
        let max_ratio = self
            .ratios()
            .iter()
            .flatten()
            .copied()
            .filter(|r| r.is_finite())
            .fold(1.0_f64, f64::max);
        let top = (max_ratio * 1.05).max(4.0);
        let points = 64;
        (0..points)
            .map(|i| (top.ln() * i as f64 / (points - 1) as f64).exp())
            .collect()
    }
}

/// One solver's profile curve: `(tau, rho)` points over the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileCurve {
    pub solver: String,
    pub points: Vec<(f64, f64)>,
}

/// Profile curves over `tau_grid`, which must start at 1 and increase
/// strictly.
pub fn dolan_more(table: &ProfileTable, tau_grid: &[f64]) -> Result<Vec<ProfileCurve>, Error> {
    if tau_grid.is_empty() {
        return Err(Error::InvalidInput("empty tau grid".into()));
    }
    if (tau_grid[0] - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "tau grid must start at 1, got {}",
            tau_grid[0]
        )));
    }
    if tau_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("tau grid must increase strictly".into()));
    }

    let ratios = table.ratios();
    let total = table.problems().len() as f64;
    let curves = table
        .solvers()
        .iter()
        .enumerate()
        .map(|(s, name)| {
            let points = tau_grid
                .iter()
                .map(|&tau| {
                    let hits = ratios.iter().filter(|row| row[s] <= tau).count();
                    (tau, hits as f64 / total)
                })
                .collect();
            ProfileCurve { solver: name.clone(), points }
        })
        .collect();
    Ok(curves)
}

/// Writes curves as CSV with columns `solver,tau,rho`.
pub fn write_profile<W: Write>(writer: W, curves: &[ProfileCurve]) -> Result<(), Error> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["solver", "tau", "rho"])?;
    for curve in curves {
        for &(tau, rho) in &curve.points {
            out.write_record([
                curve.solver.as_str(),
                &tau.to_string(),
                &rho.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_profile_file(
    path: impl AsRef<Path>,
    curves: &[ProfileCurve],
) -> Result<(), Error> {
    let file = std::fs::File::create(path)?;
    write_profile(file, curves)
}
