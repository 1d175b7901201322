//! Ground-truth solutions for benchmark instances.
//!
//! The enumeration oracle is independent of the solver: it tries every
//! subset of inequality rows as a candidate active set, solves the equality
//! KKT system for the subset, and accepts the first candidate that is
//! primal feasible with nonnegative inequality multipliers. For a convex
//! program that certificate is global, so the answer does not depend on the
//! enumeration order.
//!
//! Beyond [`MAX_ENUMERATION_ROWS`] inequality rows the subset count is
//! unreasonable and [`oracle_solve`] falls back to a tightened baseline
//! solve, flagged as [`OracleKind::Reference`].

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::model::{stack_selected, QpProblem};
use crate::solver::{solve, Scheme, SolveStatus, SolverConfig};

/// Largest inequality count the enumeration oracle accepts (4096 subsets).
pub const MAX_ENUMERATION_ROWS: usize = 12;

const FEAS_TOL: f64 = 1e-7;
const MULT_TOL: f64 = 1e-8;

/// How a ground-truth solution was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleKind {
    /// Exhaustive active-set enumeration.
    Enumeration,
    /// Tightened baseline solve; trustworthy but not independent.
    Reference,
}

#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub x: DVector<f64>,
    pub kind: OracleKind,
}

/// Ground truth for `problem`: enumeration when the inequality count allows
/// it, otherwise the reference fallback.
pub fn oracle_solve(problem: &QpProblem) -> Result<OracleSolution, Error> {
    if problem.num_ineq() <= MAX_ENUMERATION_ROWS {
        oracle_enumerate(problem).map(|x| OracleSolution { x, kind: OracleKind::Enumeration })
    } else {
        oracle_reference(problem).map(|x| OracleSolution { x, kind: OracleKind::Reference })
    }
}

/// Exhaustive oracle over all `2^n_i` candidate active sets, in ascending
/// bitmask order.
pub fn oracle_enumerate(problem: &QpProblem) -> Result<DVector<f64>, Error> {
    let n = problem.n();
    let m = problem.num_eq();
    let r = problem.num_ineq();
    if r > MAX_ENUMERATION_ROWS {
        return Err(Error::InvalidInput(format!(
            "{r} inequality rows exceed the enumeration limit {MAX_ENUMERATION_ROWS}"
        )));
    }

    let amax_or_zero =
        |v: &DVector<f64>| if v.is_empty() { 0.0 } else { v.amax() };
    let h_scale = 1.0 + amax_or_zero(&problem.b_ineq).max(amax_or_zero(&problem.b_eq));

    for mask in 0u32..(1u32 << r) {
        let subset: Vec<usize> = (0..r).filter(|&i| mask & (1 << i) != 0).collect();
        if m + subset.len() > n {
            continue;
        }
        let (active_mat, active_rhs) = stack_selected(problem, &subset);
        let s = active_mat.nrows();

        let size = n + s;
        let mut kkt = DMatrix::zeros(size, size);
        kkt.view_mut((0, 0), (n, n)).copy_from(&problem.hess);
        if s > 0 {
            kkt.view_mut((0, n), (n, s)).copy_from(&active_mat.transpose());
            kkt.view_mut((n, 0), (s, n)).copy_from(&active_mat);
        }
        let mut rhs = DVector::zeros(size);
        rhs.rows_mut(0, n).copy_from(&(-&problem.lin));
        if s > 0 {
            rhs.rows_mut(n, s).copy_from(&active_rhs);
        }

        let Some(solution) = kkt.lu().solve(&rhs) else {
            continue; // dependent candidate rows
        };
        if !solution.iter().all(|v| v.is_finite()) {
            continue;
        }
        let x = solution.rows(0, n).into_owned();
        let lambda = solution.rows(n, s).into_owned();

        // Inequality multipliers (after the m equality ones) must be
        // nonnegative.
        let lambda_scale = 1.0 + amax_or_zero(&lambda);
        if (m..s).any(|i| lambda[i] < -MULT_TOL * lambda_scale) {
            continue;
        }

        // Primal feasibility of every constraint row.
        let x_scale = 1.0 + x.amax();
        if problem.num_eq() > 0
            && (&problem.a_eq * &x - &problem.b_eq).amax() > FEAS_TOL * h_scale * x_scale
        {
            continue;
        }
        let ineq_resid = &problem.a_ineq * &x - &problem.b_ineq;
        if ineq_resid.iter().any(|&v| v > FEAS_TOL * h_scale * x_scale) {
            continue;
        }

        return Ok(x);
    }
    Err(Error::OracleInconclusive)
}

/// Fallback oracle: the baseline scheme with tightened tolerances and a
/// raised iteration cap. Non-optimal statuses map to
/// [`Error::OracleInconclusive`].
pub fn oracle_reference(problem: &QpProblem) -> Result<DVector<f64>, Error> {
    let config = SolverConfig {
        scheme: Scheme::Kkt,
        direction_tol: 1e-11,
        multiplier_tol: 1e-10,
        max_iterations: Some(20 * (problem.n() + problem.num_ineq()).max(1)),
        ..SolverConfig::default()
    };
    let outcome = solve(problem, &config);
    if outcome.status == SolveStatus::Optimal {
        Ok(outcome.x)
    } else {
        Err(Error::OracleInconclusive)
    }
}
