//! Active-set iteration over the direction schemes.
//!
//! Each iteration solves the equality subproblem at the current working set.
//! A vanishing direction triggers the multiplier test: nonnegative inequality
//! multipliers certify optimality, otherwise the most negative one leaves the
//! working set. A nonzero direction moves the iterate by the largest
//! feasible fraction of the step and adds the blocking row, if any.
//!
//! The working matrix keeps full row rank throughout: candidate rows that
//! would make it rank deficient are skipped in favor of the next tied row,
//! and the removed-row guard plus a zero-step counter stop the known cycling
//! patterns instead of looping forever.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::directions::{
    direction_kkt, direction_projection, direction_sphere, multipliers_at_stationary,
    whiten_problem, WhitenedProblem,
};
use crate::error::Error;
use crate::linalg::{svd_null_basis, NullBasis};
use crate::model::{
    initial_working_set, stack_active, stack_selected, starting_point, validate, QpProblem,
    Residual, Violation, WorkingSet,
};

/// Direction scheme selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Full KKT solve in the original variable.
    Kkt,
    /// Null-space projection in the whitened variable.
    Projection,
    /// Reduced sphere step in the whitened variable.
    Sphere,
    /// Per-iteration choice between sphere and projection by null-space
    /// dimension; see [`choose_scheme`].
    Auto,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Kkt => "kkt",
            Scheme::Projection => "projection",
            Scheme::Sphere => "sphere",
            Scheme::Auto => "auto",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kkt" => Ok(Scheme::Kkt),
            "projection" => Ok(Scheme::Projection),
            "sphere" => Ok(Scheme::Sphere),
            "auto" => Ok(Scheme::Auto),
            other => Err(Error::InvalidInput(format!(
                "unknown scheme `{other}` (expected kkt, projection, sphere, or auto)"
            ))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Solver tolerances and limits.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub scheme: Scheme,
    /// Absolute feasibility tolerance for constraints and starting points.
    pub feas_tol: f64,
    /// Direction is treated as zero when `||P|| <= direction_tol * max(1, ||r0||)`.
    pub direction_tol: f64,
    /// Multipliers above `-multiplier_tol` count as nonnegative.
    pub multiplier_tol: f64,
    /// Relative SVD rank threshold, scaled by the larger matrix dimension.
    pub rank_tol: f64,
    /// Iteration cap; `None` selects `10 * (n + n_i)`.
    pub max_iterations: Option<usize>,
    /// `Auto` picks the sphere scheme when the null-space dimension is at
    /// most this value.
    pub auto_threshold: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Auto,
            feas_tol: 1e-8,
            direction_tol: 1e-9,
            multiplier_tol: 1e-8,
            rank_tol: 1e-12,
            max_iterations: None,
            auto_threshold: 2,
        }
    }
}

impl SolverConfig {
    pub fn with_scheme(scheme: Scheme) -> Self {
        Self { scheme, ..Self::default() }
    }

    fn rank_tol_for(&self, rows: usize, cols: usize) -> f64 {
        self.rank_tol * rows.max(cols).max(1) as f64
    }

    fn iteration_cap(&self, problem: &QpProblem) -> usize {
        self.max_iterations
            .unwrap_or_else(|| 10 * (problem.n() + problem.num_ineq()).max(1))
    }
}

/// Concrete scheme the `Auto` policy uses at a working set with
/// `working_rows` stacked rows in dimension `n`: the sphere step when the
/// null space has dimension at most `config.auto_threshold`, otherwise the
/// projection.
pub fn choose_scheme(n: usize, working_rows: usize, config: &SolverConfig) -> Scheme {
    if n.saturating_sub(working_rows) <= config.auto_threshold {
        Scheme::Sphere
    } else {
        Scheme::Projection
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    IterationLimit,
    InfeasibleStart,
    Error,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::IterationLimit => "iteration_limit",
            SolveStatus::InfeasibleStart => "infeasible_start",
            SolveStatus::Error => "error",
        };
        f.write_str(s)
    }
}

/// What an iteration did to the working set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepAction {
    /// Unit step, no blocking constraint.
    FullStep,
    /// Stepped to the blocking row and added it.
    AddedConstraint(usize),
    /// Zero direction, dropped the row with the most negative multiplier.
    RemovedConstraint(usize),
    /// Zero direction and nonnegative multipliers; iteration stopped.
    Terminated,
}

/// Snapshot of one iteration.
#[derive(Clone, Debug)]
pub struct IterationTrace {
    pub iteration: usize,
    /// Iterate after the step.
    pub x: DVector<f64>,
    /// Direction norm in the space the scheme works in.
    pub direction_norm: f64,
    /// Step fraction in `[0, 1]`; zero for removals and termination.
    pub alpha: f64,
    pub action: StepAction,
    /// Objective value at `x`.
    pub objective: f64,
}

/// Multipliers at the reported solution, split by constraint kind. The
/// inequality entries pair each active row index with its multiplier.
#[derive(Clone, Debug, Default)]
pub struct Multipliers {
    pub equality: DVector<f64>,
    pub inequality: Vec<(usize, f64)>,
}

impl Multipliers {
    fn empty() -> Self {
        Self { equality: DVector::zeros(0), inequality: Vec::new() }
    }
}

/// Result of [`solve`]. Always returned; failures are encoded in `status`
/// and explained in `message`.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Final iterate (the starting point when no iteration ran).
    pub x: DVector<f64>,
    pub objective: f64,
    /// Populated only for `Optimal`.
    pub multipliers: Multipliers,
    /// Inequality rows active at the starting point, in working-set order.
    pub initial_active: Vec<usize>,
    pub trace: Vec<IterationTrace>,
    /// Number of direction computations, `trace.len()`.
    pub iterations: usize,
    pub message: Option<String>,
}

/// Runs the active-set iteration on `problem` under `config`.
pub fn solve(problem: &QpProblem, config: &SolverConfig) -> SolveOutcome {
    // Structural defects are reported through the outcome rather than a
    // panic; starting-point defects map to their own status.
    let violations = validate(problem, config.feas_tol);
    let structural: Vec<&Violation> = violations
        .iter()
        .filter(|v| !matches!(v, Violation::InfeasibleStart { .. }))
        .collect();
    if let Some(first) = structural.first() {
        return failure_outcome(problem, SolveStatus::Error, format!("invalid problem: {first}"));
    }
    if let Some(first) = violations.first() {
        return failure_outcome(problem, SolveStatus::InfeasibleStart, first.to_string());
    }

    match solve_inner(problem, config) {
        Ok(outcome) => outcome,
        Err(err) => {
            let status = match &err {
                Error::InfeasibleStart(_) => SolveStatus::InfeasibleStart,
                _ => SolveStatus::Error,
            };
            failure_outcome(problem, status, err.to_string())
        }
    }
}

fn failure_outcome(problem: &QpProblem, status: SolveStatus, message: String) -> SolveOutcome {
    let x = problem.x0.clone().unwrap_or_else(|| DVector::zeros(problem.n()));
    let objective = problem.objective(&x);
    SolveOutcome {
        status,
        x,
        objective,
        multipliers: Multipliers::empty(),
        initial_active: Vec::new(),
        trace: Vec::new(),
        iterations: 0,
        message: Some(message),
    }
}

// Per-iteration direction result, independent of the producing scheme.
struct DirectionStep {
    /// Direction in the original space.
    p: DVector<f64>,
    /// Norm used by the termination test (whitened norm for the whitened
    /// schemes).
    p_norm: f64,
    /// Residual norm in the matching space.
    r_norm: f64,
    /// Stacked multipliers when the scheme provides them with the direction.
    lambda: Option<DVector<f64>>,
    /// Working-matrix factors for the whitened schemes.
    basis: Option<NullBasis>,
}

fn solve_inner(problem: &QpProblem, config: &SolverConfig) -> Result<SolveOutcome, Error> {
    let n = problem.n();
    let m = problem.num_eq();
    let cap = config.iteration_cap(problem);

    let mut x = starting_point(problem, config.feas_tol)?;
    let mut ws = initial_working_set(problem, &x, config.feas_tol)?;
    let initial_active = ws.active_rows().to_vec();

    let white = match config.scheme {
        Scheme::Kkt => None,
        _ => Some(whiten_problem(problem)?),
    };

    let mut trace: Vec<IterationTrace> = Vec::new();
    let mut last_removed: Option<usize> = None;
    let mut zero_steps = 0usize;
    let zero_step_limit = 2 * (n + problem.num_ineq());

    for iteration in 0..cap {
        let just_removed = last_removed.take();
        let rows = ws.stacked_rows();
        let scheme = match config.scheme {
            Scheme::Auto => choose_scheme(n, rows, config),
            s => s,
        };

        let step = compute_direction(problem, white.as_ref(), &ws, &x, scheme, config)?;

        if step.p_norm <= config.direction_tol * step.r_norm.max(1.0) {
            // Stationary on the working set: multiplier test.
            let lambda = match (&step.lambda, &step.basis, &white) {
                (Some(l), _, _) => l.clone(),
                (None, Some(basis), Some(w)) => {
                    multipliers_at_stationary(basis, &w.residual_at(&x))?
                }
                (None, None, _) => DVector::zeros(0),
                (None, Some(_), None) => unreachable!("basis implies whitened scheme"),
            };

            let worst = ws
                .active_rows()
                .iter()
                .enumerate()
                .map(|(i, &row)| (lambda[m + i], row))
                .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

            match worst {
                Some((value, row)) if value < -config.multiplier_tol => {
                    ws.remove(row)?;
                    last_removed = Some(row);
                    zero_steps += 1;
                    trace.push(IterationTrace {
                        iteration,
                        x: x.clone(),
                        direction_norm: step.p_norm,
                        alpha: 0.0,
                        action: StepAction::RemovedConstraint(row),
                        objective: problem.objective(&x),
                    });
                }
                _ => {
                    let multipliers = Multipliers {
                        equality: lambda.rows(0, m.min(lambda.len())).into_owned(),
                        inequality: ws
                            .active_rows()
                            .iter()
                            .enumerate()
                            .map(|(i, &row)| (row, lambda[m + i]))
                            .collect(),
                    };
                    trace.push(IterationTrace {
                        iteration,
                        x: x.clone(),
                        direction_norm: step.p_norm,
                        alpha: 0.0,
                        action: StepAction::Terminated,
                        objective: problem.objective(&x),
                    });
                    let iterations = trace.len();
                    return Ok(SolveOutcome {
                        status: SolveStatus::Optimal,
                        objective: problem.objective(&x),
                        x,
                        multipliers,
                        initial_active,
                        trace,
                        iterations,
                        message: None,
                    });
                }
            }
        } else {
            let (alpha, candidates) = step_candidates(problem, &ws, &x, &step.p, config.feas_tol);
            if alpha > 0.0 {
                x += &step.p * alpha;
                zero_steps = 0;
            } else {
                zero_steps += 1;
            }

            let mut action = StepAction::FullStep;
            if !candidates.is_empty() && ws.stacked_rows() < n {
                for cand in &candidates {
                    let mut trial = ws.active_rows().to_vec();
                    trial.push(cand.row);
                    let (stacked, _) = stack_selected(problem, &trial);
                    let basis =
                        svd_null_basis(&stacked, config.rank_tol_for(stacked.nrows(), n))?;
                    if basis.rank() < stacked.nrows() {
                        continue; // dependent row; try the next tied candidate
                    }
                    if alpha == 0.0 && just_removed == Some(cand.row) {
                        return Err(Error::Numerical(format!(
                            "cycling detected: row {} was removed and immediately re-added \
                             with a zero step",
                            cand.row
                        )));
                    }
                    ws.insert(cand.row)?;
                    action = StepAction::AddedConstraint(cand.row);
                    break;
                }
            }

            trace.push(IterationTrace {
                iteration,
                x: x.clone(),
                direction_norm: step.p_norm,
                alpha,
                action,
                objective: problem.objective(&x),
            });

            if zero_steps > zero_step_limit {
                return Err(Error::Numerical(format!(
                    "cycling detected: {zero_steps} consecutive zero-length steps"
                )));
            }
        }
    }

    let objective = problem.objective(&x);
    let iterations = trace.len();
    Ok(SolveOutcome {
        status: SolveStatus::IterationLimit,
        x,
        objective,
        multipliers: Multipliers::empty(),
        initial_active,
        trace,
        iterations,
        message: Some(format!("stopped after {cap} iterations")),
    })
}

fn compute_direction(
    problem: &QpProblem,
    white: Option<&WhitenedProblem>,
    ws: &WorkingSet,
    x: &DVector<f64>,
    scheme: Scheme,
    config: &SolverConfig,
) -> Result<DirectionStep, Error> {
    let n = problem.n();
    match scheme {
        Scheme::Kkt => {
            let (a0, _) = stack_active(problem, ws);
            let r0 = Residual::from_iterate(problem, x);
            let r_norm = r0.norm();
            let (p, lambda) = direction_kkt(&problem.hess, &a0, &r0)?;
            Ok(DirectionStep { p_norm: p.norm(), r_norm, p, lambda: Some(lambda), basis: None })
        }
        Scheme::Projection | Scheme::Sphere => {
            let w = white.expect("whitened data prepared for whitened schemes");
            let r0 = w.residual_at(x);
            let r_norm = r0.norm();
            let rows = ws.stacked_rows();
            if rows == 0 {
                // Empty working matrix: the subproblem is unconstrained and
                // the whitened step is the full negated residual.
                let p_w = -r0.vec();
                let p_norm = p_w.norm();
                let p = w.unwhiten(&p_w)?;
                return Ok(DirectionStep { p, p_norm, r_norm, lambda: None, basis: None });
            }
            let a0w = w.stack_active(ws);
            let basis = svd_null_basis(&a0w, config.rank_tol_for(rows, n))?;
            if basis.rank() < rows {
                return Err(Error::RankDeficientWorkingSet(format!(
                    "working matrix has rank {} over {rows} rows",
                    basis.rank()
                )));
            }
            let p_w = match scheme {
                Scheme::Projection => direction_projection(&basis, &r0),
                Scheme::Sphere => {
                    if basis.nullity() == 0 {
                        DVector::zeros(n)
                    } else {
                        direction_sphere(&basis, &r0)?.0
                    }
                }
                _ => unreachable!(),
            };
            let p_norm = p_w.norm();
            let p = w.unwhiten(&p_w)?;
            Ok(DirectionStep { p, p_norm, r_norm, lambda: None, basis: Some(basis) })
        }
        Scheme::Auto => unreachable!("Auto resolves to a concrete scheme per iteration"),
    }
}

#[derive(Clone, Copy, Debug)]
struct StepCandidate {
    row: usize,
    ratio: f64,
}

/// Largest feasible fraction of the step `p` from `x`, capped at 1, together
/// with the inequality rows that become active there (sorted by ratio, then
/// row index). Rows with `G_i p` below the directional threshold never
/// block.
fn step_candidates(
    problem: &QpProblem,
    ws: &WorkingSet,
    x: &DVector<f64>,
    p: &DVector<f64>,
    feas_tol: f64,
) -> (f64, Vec<StepCandidate>) {
    let p_norm = p.norm();
    let mut ratios: Vec<StepCandidate> = Vec::new();
    let mut alpha = 1.0_f64;
    for i in 0..problem.num_ineq() {
        if ws.contains(i) {
            continue;
        }
        let row = problem.a_ineq.row(i);
        let gp = row.transpose().dot(p);
        let threshold = 1e-12 * row.norm().max(1.0) * p_norm.max(1.0);
        if gp <= threshold {
            continue;
        }
        let slack = problem.b_ineq[i] - row.transpose().dot(x);
        let ratio = (slack / gp).max(0.0);
        alpha = alpha.min(ratio);
        ratios.push(StepCandidate { row: i, ratio });
    }
    // Rows whose boundary sits within feas_tol of the arrival point tie with
    // the blocking row.
    let mut candidates: Vec<StepCandidate> = ratios
        .into_iter()
        .filter(|c| {
            let gp = problem.a_ineq.row(c.row).transpose().dot(p);
            (c.ratio - alpha) * gp <= feas_tol
        })
        .collect();
    candidates.sort_by(|a, b| a.ratio.partial_cmp(&b.ratio).unwrap().then(a.row.cmp(&b.row)));
    (alpha, candidates)
}

/// Step length along `p` from `x` and the blocking inequality row, if any.
/// `alpha = 1` with no blocking row means the full step stays feasible.
pub fn step_length(
    problem: &QpProblem,
    ws: &WorkingSet,
    x: &DVector<f64>,
    p: &DVector<f64>,
    feas_tol: f64,
) -> (f64, Option<usize>) {
    let (alpha, candidates) = step_candidates(problem, ws, x, p, feas_tol);
    (alpha, candidates.first().map(|c| c.row))
}
