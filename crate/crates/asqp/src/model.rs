//! Problem data, working sets, and feasibility checks.
//!
//! A [`QpProblem`] is the dense convex program
//!
//! ```text
//! minimize    0.5 * x' Q x + q' x
//! subject to  A x  = b        (n_e rows, always active)
//!             G x <= h        (n_i rows, active set managed by the solver)
//! ```
//!
//! The working set tracks which inequality rows are currently treated as
//! equalities; the equality block is implicitly part of every working set.

pub mod io;

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::linalg::{self, default_rank_tol, svd_null_basis};

/// Relative symmetry tolerance for the Hessian check in [`validate`].
const SYMMETRY_TOL: f64 = 1e-10;

/// Dense convex quadratic program with equality and inequality constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem {
    /// Hessian `Q`, `n x n`, symmetric positive definite.
    pub hess: DMatrix<f64>,
    /// Linear term `q`.
    pub lin: DVector<f64>,
    /// Equality matrix `A`, `n_e x n`.
    pub a_eq: DMatrix<f64>,
    /// Equality right-hand side `b`.
    pub b_eq: DVector<f64>,
    /// Inequality matrix `G`, `n_i x n`.
    pub a_ineq: DMatrix<f64>,
    /// Inequality right-hand side `h`.
    pub b_ineq: DVector<f64>,
    /// Optional feasible starting point.
    pub x0: Option<DVector<f64>>,
}

impl QpProblem {
    /// Builds a problem after checking that all dimensions agree.
    pub fn new(
        hess: DMatrix<f64>,
        lin: DVector<f64>,
        a_eq: DMatrix<f64>,
        b_eq: DVector<f64>,
        a_ineq: DMatrix<f64>,
        b_ineq: DVector<f64>,
        x0: Option<DVector<f64>>,
    ) -> Result<Self, Error> {
        let n = lin.len();
        if hess.shape() != (n, n) {
            return Err(Error::InvalidInput(format!(
                "Q is {}x{}, expected {n}x{n}",
                hess.nrows(),
                hess.ncols()
            )));
        }
        if a_eq.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "A has {} columns, expected {n}",
                a_eq.ncols()
            )));
        }
        if b_eq.len() != a_eq.nrows() {
            return Err(Error::InvalidInput(format!(
                "b has length {}, expected {}",
                b_eq.len(),
                a_eq.nrows()
            )));
        }
        if a_ineq.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "G has {} columns, expected {n}",
                a_ineq.ncols()
            )));
        }
        if b_ineq.len() != a_ineq.nrows() {
            return Err(Error::InvalidInput(format!(
                "h has length {}, expected {}",
                b_ineq.len(),
                a_ineq.nrows()
            )));
        }
        if let Some(x) = &x0 {
            if x.len() != n {
                return Err(Error::InvalidInput(format!(
                    "x0 has length {}, expected {n}",
                    x.len()
                )));
            }
        }
        Ok(Self { hess, lin, a_eq, b_eq, a_ineq, b_ineq, x0 })
    }

    /// Variable count `n`.
    pub fn n(&self) -> usize {
        self.lin.len()
    }

    /// Number of equality rows `n_e`.
    pub fn num_eq(&self) -> usize {
        self.a_eq.nrows()
    }

    /// Number of inequality rows `n_i`.
    pub fn num_ineq(&self) -> usize {
        self.a_ineq.nrows()
    }

    /// Objective value `0.5 x'Qx + q'x`.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hess * x)) + self.lin.dot(x)
    }
}

/// Which variable space a residual vector lives in. The projection and
/// sphere schemes operate on the whitened variable, the KKT baseline on the
/// original one; tagging prevents mixing the two.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Original,
    Whitened,
}

/// Gradient of the objective at the current iterate, tagged with its space.
#[derive(Clone, Debug)]
pub struct Residual {
    vec: DVector<f64>,
    space: Space,
}

impl Residual {
    pub fn original(vec: DVector<f64>) -> Self {
        Self { vec, space: Space::Original }
    }

    pub fn whitened(vec: DVector<f64>) -> Self {
        Self { vec, space: Space::Whitened }
    }

    /// `Q x + q` at the iterate, in the original space.
    pub fn from_iterate(problem: &QpProblem, x: &DVector<f64>) -> Self {
        Self::original(&problem.hess * x + &problem.lin)
    }

    pub fn vec(&self) -> &DVector<f64> {
        &self.vec
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }
}

/// Ordered set of active inequality rows. Equality rows are always part of
/// the working matrix and are not listed here. Insertion enforces that the
/// stacked matrix never exceeds `n` rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkingSet {
    active: Vec<usize>,
    num_eq: usize,
    num_ineq: usize,
    dim: usize,
}

impl WorkingSet {
    /// Empty working set (only the equality rows are active).
    pub fn new(problem: &QpProblem) -> Self {
        Self {
            active: Vec::new(),
            num_eq: problem.num_eq(),
            num_ineq: problem.num_ineq(),
            dim: problem.n(),
        }
    }

    /// Active inequality rows in insertion order.
    pub fn active_rows(&self) -> &[usize] {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// Rows of the stacked working matrix, equalities included.
    pub fn stacked_rows(&self) -> usize {
        self.num_eq + self.active.len()
    }

    pub fn contains(&self, row: usize) -> bool {
        self.active.contains(&row)
    }

    pub fn insert(&mut self, row: usize) -> Result<(), Error> {
        if row >= self.num_ineq {
            return Err(Error::InvalidInput(format!(
                "inequality row {row} out of range (n_i = {})",
                self.num_ineq
            )));
        }
        if self.contains(row) {
            return Err(Error::InvalidInput(format!("row {row} is already active")));
        }
        if self.stacked_rows() + 1 > self.dim {
            return Err(Error::InvalidInput(format!(
                "adding row {row} would give the working matrix {} rows in dimension {}",
                self.stacked_rows() + 1,
                self.dim
            )));
        }
        self.active.push(row);
        Ok(())
    }

    pub fn remove(&mut self, row: usize) -> Result<(), Error> {
        match self.active.iter().position(|&r| r == row) {
            Some(pos) => {
                self.active.remove(pos);
                Ok(())
            }
            None => Err(Error::InvalidInput(format!("row {row} is not active"))),
        }
    }
}

/// A single defect reported by [`validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Dimension { field: &'static str, detail: String },
    NonFinite { field: &'static str },
    SymmetryViolation { row: usize, col: usize, delta: f64 },
    InfeasibleStart { equality: bool, row: usize, residual: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Dimension { field, detail } => {
                write!(f, "field `{field}`: {detail}")
            }
            Violation::NonFinite { field } => {
                write!(f, "field `{field}` contains non-finite entries")
            }
            Violation::SymmetryViolation { row, col, delta } => {
                write!(f, "Q[{row}][{col}] and Q[{col}][{row}] differ by {delta:.3e}")
            }
            Violation::InfeasibleStart { equality: true, row, residual } => {
                write!(f, "x0 violates equality row {row} by {residual:.3e}")
            }
            Violation::InfeasibleStart { equality: false, row, residual } => {
                write!(f, "x0 violates inequality row {row} by {residual:.3e}")
            }
        }
    }
}

/// Checks dimensions, finiteness, Hessian symmetry, and feasibility of `x0`
/// at `feas_tol`. Positive definiteness is not checked here; the Cholesky
/// factorization reports it when the solver first needs the factor.
///
/// Dimension and finiteness defects suppress the dependent checks, so the
/// returned list never mixes a shape error with values computed from the
/// misshapen data.
pub fn validate(problem: &QpProblem, feas_tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = problem.n();

    if problem.hess.shape() != (n, n) {
        out.push(Violation::Dimension {
            field: "Q",
            detail: format!(
                "is {}x{}, expected {n}x{n}",
                problem.hess.nrows(),
                problem.hess.ncols()
            ),
        });
    }
    if problem.b_eq.len() != problem.a_eq.nrows() {
        out.push(Violation::Dimension {
            field: "b",
            detail: format!(
                "has length {}, expected {}",
                problem.b_eq.len(),
                problem.a_eq.nrows()
            ),
        });
    }
    if problem.a_eq.nrows() > 0 && problem.a_eq.ncols() != n {
        out.push(Violation::Dimension {
            field: "A",
            detail: format!("has {} columns, expected {n}", problem.a_eq.ncols()),
        });
    }
    if problem.b_ineq.len() != problem.a_ineq.nrows() {
        out.push(Violation::Dimension {
            field: "h",
            detail: format!(
                "has length {}, expected {}",
                problem.b_ineq.len(),
                problem.a_ineq.nrows()
            ),
        });
    }
    if problem.a_ineq.nrows() > 0 && problem.a_ineq.ncols() != n {
        out.push(Violation::Dimension {
            field: "G",
            detail: format!("has {} columns, expected {n}", problem.a_ineq.ncols()),
        });
    }
    if let Some(x0) = &problem.x0 {
        if x0.len() != n {
            out.push(Violation::Dimension {
                field: "x0",
                detail: format!("has length {}, expected {n}", x0.len()),
            });
        }
    }

    for (field, ok) in [
        ("Q", linalg::all_finite(&problem.hess)),
        ("q", linalg::all_finite_vec(&problem.lin)),
        ("A", linalg::all_finite(&problem.a_eq)),
        ("b", linalg::all_finite_vec(&problem.b_eq)),
        ("G", linalg::all_finite(&problem.a_ineq)),
        ("h", linalg::all_finite_vec(&problem.b_ineq)),
    ] {
        if !ok {
            out.push(Violation::NonFinite { field });
        }
    }
    if let Some(x0) = &problem.x0 {
        if !linalg::all_finite_vec(x0) {
            out.push(Violation::NonFinite { field: "x0" });
        }
    }

    if !out.is_empty() {
        return out;
    }

    for i in 0..n {
        for j in i + 1..n {
            let delta = (problem.hess[(i, j)] - problem.hess[(j, i)]).abs();
            let scale = 1.0 + problem.hess[(i, j)].abs().max(problem.hess[(j, i)].abs());
            if delta > SYMMETRY_TOL * scale {
                out.push(Violation::SymmetryViolation { row: i, col: j, delta });
            }
        }
    }

    if let Some(x0) = &problem.x0 {
        let eq_resid = &problem.a_eq * x0 - &problem.b_eq;
        for i in 0..eq_resid.len() {
            if eq_resid[i].abs() > feas_tol {
                out.push(Violation::InfeasibleStart {
                    equality: true,
                    row: i,
                    residual: eq_resid[i].abs(),
                });
            }
        }
        let ineq_resid = &problem.a_ineq * x0 - &problem.b_ineq;
        for i in 0..ineq_resid.len() {
            if ineq_resid[i] > feas_tol {
                out.push(Violation::InfeasibleStart {
                    equality: false,
                    row: i,
                    residual: ineq_resid[i],
                });
            }
        }
    }

    out
}

/// `(||A x - b||_inf, max_i max(0, G_i x - h_i))`; zero components when the
/// corresponding block is empty.
pub fn feasibility_margin(problem: &QpProblem, x: &DVector<f64>) -> (f64, f64) {
    let eq = if problem.num_eq() == 0 {
        0.0
    } else {
        (&problem.a_eq * x - &problem.b_eq).amax()
    };
    let ineq = if problem.num_ineq() == 0 {
        0.0
    } else {
        let resid = &problem.a_ineq * x - &problem.b_ineq;
        resid.iter().fold(0.0_f64, |acc, &v| acc.max(v))
    };
    (eq, ineq)
}

/// Resolves the iterate the solver starts from: `x0` when supplied (checked
/// for feasibility at `feas_tol`), otherwise the origin when there are no
/// equalities and `h >= 0` admits it.
pub fn starting_point(problem: &QpProblem, feas_tol: f64) -> Result<DVector<f64>, Error> {
    match &problem.x0 {
        Some(x0) => {
            if x0.len() != problem.n() {
                return Err(Error::InvalidInput(format!(
                    "x0 has length {}, expected {}",
                    x0.len(),
                    problem.n()
                )));
            }
            let (eq, ineq) = feasibility_margin(problem, x0);
            if eq > feas_tol {
                return Err(Error::InfeasibleStart(format!(
                    "x0 violates the equality constraints by {eq:.3e} (tolerance {feas_tol:.1e})"
                )));
            }
            if ineq > feas_tol {
                return Err(Error::InfeasibleStart(format!(
                    "x0 violates the inequality constraints by {ineq:.3e} (tolerance {feas_tol:.1e})"
                )));
            }
            Ok(x0.clone())
        }
        None => {
            let origin = DVector::zeros(problem.n());
            if problem.num_eq() == 0 {
                let (_, ineq) = feasibility_margin(problem, &origin);
                if ineq <= feas_tol {
                    return Ok(origin);
                }
            }
            Err(Error::InfeasibleStart(
                "no x0 supplied and the origin is not feasible; add an x0 field to the problem"
                    .into(),
            ))
        }
    }
}

/// Stacks the equality block on top of the selected inequality rows, with the
/// matching right-hand side.
pub(crate) fn stack_selected(
    problem: &QpProblem,
    rows: &[usize],
) -> (DMatrix<f64>, DVector<f64>) {
    let n = problem.n();
    let m = problem.num_eq();
    let total = m + rows.len();
    let mut mat = DMatrix::zeros(total, n);
    let mut rhs = DVector::zeros(total);
    if m > 0 {
        mat.rows_mut(0, m).copy_from(&problem.a_eq);
        rhs.rows_mut(0, m).copy_from(&problem.b_eq);
    }
    for (i, &row) in rows.iter().enumerate() {
        mat.row_mut(m + i).copy_from(&problem.a_ineq.row(row));
        rhs[m + i] = problem.b_ineq[row];
    }
    (mat, rhs)
}

/// Working matrix `[A; G(active)]` and its right-hand side `[b; h(active)]`,
/// equality rows first, then the active inequality rows in working-set order.
pub fn stack_active(problem: &QpProblem, ws: &WorkingSet) -> (DMatrix<f64>, DVector<f64>) {
    stack_selected(problem, ws.active_rows())
}

/// Builds the working set at `x0`: every inequality row active within
/// `feas_tol`, truncated by ascending activity residual (ties by row index)
/// so that the stacked matrix keeps full row rank and at most `n` rows.
///
/// The rank decisions use the default SVD threshold.
pub fn initial_working_set(
    problem: &QpProblem,
    x0: &DVector<f64>,
    feas_tol: f64,
) -> Result<WorkingSet, Error> {
    let n = problem.n();
    let m = problem.num_eq();
    let (eq, ineq) = feasibility_margin(problem, x0);
    if eq > feas_tol || ineq > feas_tol {
        return Err(Error::InfeasibleStart(format!(
            "starting point violates constraints (equality {eq:.3e}, inequality {ineq:.3e})"
        )));
    }
    if m > n {
        return Err(Error::RankDeficientWorkingSet(format!(
            "{m} equality rows exceed the dimension {n}"
        )));
    }
    if m > 0 {
        let basis = svd_null_basis(&problem.a_eq, default_rank_tol(m, n))?;
        if basis.rank() < m {
            return Err(Error::RankDeficientWorkingSet(format!(
                "equality matrix has rank {} over {m} rows",
                basis.rank()
            )));
        }
    }

    let mut candidates: Vec<(f64, usize)> = Vec::new();
    for i in 0..problem.num_ineq() {
        let resid = (problem.a_ineq.row(i).transpose().dot(x0) - problem.b_ineq[i]).abs();
        if resid <= feas_tol {
            candidates.push((resid, i));
        }
    }
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    let mut ws = WorkingSet::new(problem);
    let mut kept: Vec<usize> = Vec::new();
    for (_, row) in candidates {
        if m + kept.len() >= n {
            break;
        }
        let mut trial = kept.clone();
        trial.push(row);
        let (stacked, _) = stack_selected(problem, &trial);
        let basis = svd_null_basis(&stacked, default_rank_tol(stacked.nrows(), n))?;
        if basis.rank() == stacked.nrows() {
            kept = trial;
        }
    }
    for row in kept {
        ws.insert(row)?;
    }
    Ok(ws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn worked_example() -> QpProblem {
        // minimize 0.5 (x1^2 + x2^2) - x1  subject to  x1 <= 1, x2 <= 2.
        // The unconstrained minimum (1, 0) sits exactly on row 0.
        QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![-1.0, 0.0]),
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            DVector::from_vec(vec![1.0, 2.0]),
            None,
        )
        .unwrap()
    }

    #[test]
    fn objective_and_counts() {
        let p = worked_example();
        assert_eq!(p.n(), 2);
        assert_eq!(p.num_eq(), 0);
        assert_eq!(p.num_ineq(), 2);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert_abs_diff_eq!(p.objective(&x), -0.5, epsilon = 1e-15);
    }

    #[test]
    fn validate_accepts_clean_problem() {
        let p = worked_example();
        assert!(validate(&p, 1e-8).is_empty());
    }

    #[test]
    fn validate_flags_asymmetry_once_per_pair() {
        let mut p = worked_example();
        p.hess[(0, 1)] = 1.0; // hess[(1, 0)] stays 0
        let violations = validate(&p, 1e-8);
        assert_eq!(violations.len(), 1);
        match &violations[0] {
            Violation::SymmetryViolation { row, col, delta } => {
                assert_eq!((*row, *col), (0, 1));
                assert_abs_diff_eq!(*delta, 1.0, epsilon = 1e-15);
            }
            other => panic!("unexpected violation {other:?}"),
        }
    }

    #[test]
    fn validate_flags_infeasible_start_with_row() {
        let mut p = worked_example();
        p.x0 = Some(DVector::from_vec(vec![1.5, 0.0]));
        let violations = validate(&p, 1e-8);
        assert_eq!(violations.len(), 1);
        match &violations[0] {
            Violation::InfeasibleStart { equality, row, residual } => {
                assert!(!equality);
                assert_eq!(*row, 0);
                assert_abs_diff_eq!(*residual, 0.5, epsilon = 1e-12);
            }
            other => panic!("unexpected violation {other:?}"),
        }
    }

    #[test]
    fn validate_flags_non_finite_fields() {
        let mut p = worked_example();
        p.lin[0] = f64::NAN;
        let violations = validate(&p, 1e-8);
        assert_eq!(violations.len(), 1);
        assert!(matches!(violations[0], Violation::NonFinite { field: "q" }));
    }

    #[test]
    fn validate_dimension_defects_suppress_value_checks() {
        let mut p = worked_example();
        p.b_ineq = DVector::from_vec(vec![1.0]);
        p.x0 = Some(DVector::from_vec(vec![100.0, 100.0]));
        let violations = validate(&p, 1e-8);
        assert_eq!(violations.len(), 1);
        assert!(matches!(violations[0], Violation::Dimension { field: "h", .. }));
    }

    #[test]
    fn feasibility_margin_components() {
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(vec![1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::from_vec(vec![0.25]),
            None,
        )
        .unwrap();
        let x = DVector::from_vec(vec![0.5, 0.25]);
        let (eq, ineq) = feasibility_margin(&p, &x);
        assert_abs_diff_eq!(eq, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(ineq, 0.25, epsilon = 1e-15);

        // Satisfied inequalities clamp to zero.
        let x2 = DVector::from_vec(vec![0.0, 1.0]);
        let (eq2, ineq2) = feasibility_margin(&p, &x2);
        assert_abs_diff_eq!(eq2, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ineq2, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn starting_point_prefers_x0_and_checks_it() {
        let mut p = worked_example();
        p.x0 = Some(DVector::from_vec(vec![0.5, 0.5]));
        let x = starting_point(&p, 1e-8).unwrap();
        assert_eq!(x, DVector::from_vec(vec![0.5, 0.5]));

        p.x0 = Some(DVector::from_vec(vec![2.0, 0.0]));
        assert!(matches!(
            starting_point(&p, 1e-8),
            Err(Error::InfeasibleStart(_))
        ));
    }

    #[test]
    fn starting_point_uses_origin_without_equalities() {
        let p = worked_example(); // h = (1, 2) >= 0
        let x = starting_point(&p, 1e-8).unwrap();
        assert_eq!(x, DVector::zeros(2));

        // Negative h makes the origin infeasible.
        let mut p2 = worked_example();
        p2.b_ineq[0] = -1.0;
        assert!(matches!(
            starting_point(&p2, 1e-8),
            Err(Error::InfeasibleStart(_))
        ));
    }

    #[test]
    fn starting_point_demands_x0_with_equalities() {
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(vec![1.0]),
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
            None,
        )
        .unwrap();
        match starting_point(&p, 1e-8) {
            Err(Error::InfeasibleStart(msg)) => assert!(msg.contains("x0")),
            other => panic!("expected InfeasibleStart, got {other:?}"),
        }
    }

    #[test]
    fn working_set_enforces_capacity_and_uniqueness() {
        let p = worked_example(); // n = 2, m = 0
        let mut ws = WorkingSet::new(&p);
        ws.insert(1).unwrap();
        assert!(ws.contains(1));
        assert!(ws.insert(1).is_err());
        ws.insert(0).unwrap();
        assert_eq!(ws.active_rows(), &[1, 0]);
        // Capacity n = 2 reached; nothing else fits.
        assert!(ws.insert(0).is_err());
        ws.remove(1).unwrap();
        assert_eq!(ws.active_rows(), &[0]);
        assert!(ws.remove(1).is_err());
    }

    #[test]
    fn stack_active_orders_equalities_first() {
        let p = QpProblem::new(
            DMatrix::identity(3, 3),
            DVector::zeros(3),
            DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]),
            DVector::from_vec(vec![3.0]),
            DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            DVector::from_vec(vec![1.0, 1.0]),
            None,
        )
        .unwrap();
        let mut ws = WorkingSet::new(&p);
        ws.insert(1).unwrap();
        let (mat, rhs) = stack_active(&p, &ws);
        assert_eq!(mat.nrows(), 2);
        assert_eq!(mat.row(0), p.a_eq.row(0));
        assert_eq!(mat.row(1), p.a_ineq.row(1));
        assert_eq!(rhs, DVector::from_vec(vec![3.0, 1.0]));
    }

    #[test]
    fn initial_working_set_picks_tight_rows() {
        let mut p = worked_example();
        p.x0 = Some(DVector::from_vec(vec![1.0, 0.0]));
        let ws = initial_working_set(&p, p.x0.as_ref().unwrap(), 1e-8).unwrap();
        assert_eq!(ws.active_rows(), &[0]);
    }

    #[test]
    fn initial_working_set_drops_dependent_rows() {
        // Three copies of the same active row in R^2: only one survives the
        // rank filter, chosen by the index tie-break.
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.0, 0.0]),
            None,
        )
        .unwrap();
        let x0 = DVector::zeros(2);
        let ws = initial_working_set(&p, &x0, 1e-8).unwrap();
        assert_eq!(ws.active_rows(), &[0]);
        let (stacked, _) = stack_active(&p, &ws);
        let basis = svd_null_basis(&stacked, default_rank_tol(1, 2)).unwrap();
        assert_eq!(basis.rank(), stacked.nrows());
    }

    #[test]
    fn initial_working_set_respects_dimension_cap() {
        // Two independent active rows plus one equality in R^2: the equality
        // takes one slot, so only one inequality fits.
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(vec![0.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            DVector::from_vec(vec![0.0, 0.0]),
            None,
        )
        .unwrap();
        let x0 = DVector::zeros(2);
        let ws = initial_working_set(&p, &x0, 1e-8).unwrap();
        assert_eq!(ws.active_rows(), &[0]);
    }

    #[test]
    fn initial_working_set_rejects_infeasible_point() {
        let p = worked_example();
        let x0 = DVector::from_vec(vec![5.0, 0.0]);
        assert!(matches!(
            initial_working_set(&p, &x0, 1e-8),
            Err(Error::InfeasibleStart(_))
        ));
    }

    #[test]
    fn residual_tags_space() {
        let p = worked_example();
        let x = DVector::from_vec(vec![2.0, 0.0]);
        let r = Residual::from_iterate(&p, &x);
        assert_eq!(r.space(), Space::Original);
        assert_eq!(r.vec(), &DVector::from_vec(vec![1.0, 0.0]));
        let w = Residual::whitened(DVector::zeros(2));
        assert_eq!(w.space(), Space::Whitened);
    }
}
