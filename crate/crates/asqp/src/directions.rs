//! Search-direction computations for the active-set iteration.
//!
//! Three interchangeable schemes produce the step `P` for the equality
//! subproblem at the current working set:
//!
//! * [`direction_kkt`]: solve the full stacked KKT system in the original
//!   variable. Baseline; one dense factorization of size `n + s` per call.
//! * [`direction_projection`]: project the negated residual onto the null
//!   space of the working matrix, `P = -V V' r0`. Exact for an identity
//!   Hessian, so it runs in the whitened variable.
//! * [`direction_sphere`]: restrict to the null space, where the subproblem
//!   solutions form a sphere through the origin centered at `-C` with
//!   `C = r0_reduced / 2`; the stationary point is `Z = -2C`. Cheapest when
//!   the null space has dimension one or two.
//!
//! Whitening substitutes `x_tilde = L' x` with `Q = L L'`, which turns the
//! Hessian into the identity while preserving multipliers and step-length
//! ratios. Residuals carry a [`Space`] tag and each scheme asserts the tag it
//! expects, so a residual never crosses spaces silently.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::linalg::{
    all_finite_vec, pinv_solve, spd_factor, tri_solve, tri_solve_matrix, NullBasis, SpdFactor,
};
use crate::model::{QpProblem, Residual, Space, WorkingSet};

/// Problem data mapped into the whitened variable `x_tilde = L' x`.
#[derive(Clone, Debug)]
pub struct WhitenedProblem {
    factor: SpdFactor,
    /// `L^{-1} q`.
    lin: DVector<f64>,
    /// `A L^{-T}`, equality rows.
    a_eq: DMatrix<f64>,
    /// `G L^{-T}`, inequality rows.
    a_ineq: DMatrix<f64>,
}

impl WhitenedProblem {
    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    pub fn lin(&self) -> &DVector<f64> {
        &self.lin
    }

    pub fn a_eq(&self) -> &DMatrix<f64> {
        &self.a_eq
    }

    pub fn a_ineq(&self) -> &DMatrix<f64> {
        &self.a_ineq
    }

    /// `L' x`: original point into the whitened space.
    pub fn whiten_point(&self, x: &DVector<f64>) -> DVector<f64> {
        self.factor.lower().tr_mul(x)
    }

    /// `L^{-T} v`: whitened point or direction back to the original space.
    pub fn unwhiten(&self, v: &DVector<f64>) -> Result<DVector<f64>, Error> {
        tri_solve(&self.factor, v, true)
    }

    /// Whitened residual at an original-space iterate: `L' x + L^{-1} q`.
    pub fn residual_at(&self, x: &DVector<f64>) -> Residual {
        Residual::whitened(self.whiten_point(x) + &self.lin)
    }

    /// Whitened working matrix `[A L^{-T}; (G L^{-T})(active)]`, rows ordered
    /// like [`crate::model::stack_active`].
    pub fn stack_active(&self, ws: &WorkingSet) -> DMatrix<f64> {
        let m = self.a_eq.nrows();
        let n = self.a_eq.ncols().max(self.a_ineq.ncols());
        let rows = ws.active_rows();
        let mut out = DMatrix::zeros(m + rows.len(), n);
        if m > 0 {
            out.rows_mut(0, m).copy_from(&self.a_eq);
        }
        for (i, &row) in rows.iter().enumerate() {
            out.row_mut(m + i).copy_from(&self.a_ineq.row(row));
        }
        out
    }
}

/// Factors the Hessian and maps the problem data into the whitened variable.
pub fn whiten_problem(problem: &QpProblem) -> Result<WhitenedProblem, Error> {
    let factor = spd_factor(&problem.hess)?;
    let lin = tri_solve(&factor, &problem.lin, false)?;
    let a_eq = whiten_rows(&factor, &problem.a_eq)?;
    let a_ineq = whiten_rows(&factor, &problem.a_ineq)?;
    Ok(WhitenedProblem { factor, lin, a_eq, a_ineq })
}

// Rows of `mat * L^{-T}` are forward solves against the rows of `mat`.
fn whiten_rows(factor: &SpdFactor, mat: &DMatrix<f64>) -> Result<DMatrix<f64>, Error> {
    if mat.nrows() == 0 {
        return Ok(mat.clone());
    }
    Ok(tri_solve_matrix(factor, &mat.transpose(), false)?.transpose())
}

/// Baseline direction: solves the stacked system
///
/// ```text
/// [ Q   A0' ] [ P      ]   [ -r0 ]
/// [ A0  0   ] [ lambda ] = [  0  ]
/// ```
///
/// in the original space and returns `(P, lambda)`. When `P` vanishes,
/// `lambda` is exactly the stationarity multiplier vector.
pub fn direction_kkt(
    hess: &DMatrix<f64>,
    a0: &DMatrix<f64>,
    r0: &Residual,
) -> Result<(DVector<f64>, DVector<f64>), Error> {
    assert_eq!(
        r0.space(),
        Space::Original,
        "direction_kkt expects a residual in the original space"
    );
    let n = hess.nrows();
    if hess.ncols() != n || r0.vec().len() != n || a0.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "inconsistent shapes: Q {}x{}, A0 {}x{}, r0 {}",
            hess.nrows(),
            hess.ncols(),
            a0.nrows(),
            a0.ncols(),
            r0.vec().len()
        )));
    }
    let s = a0.nrows();
    let size = n + s;
    let mut kkt = DMatrix::zeros(size, size);
    kkt.view_mut((0, 0), (n, n)).copy_from(hess);
    if s > 0 {
        kkt.view_mut((0, n), (n, s)).copy_from(&a0.transpose());
        kkt.view_mut((n, 0), (s, n)).copy_from(a0);
    }
    let mut rhs = DVector::zeros(size);
    rhs.rows_mut(0, n).copy_from(&(-r0.vec()));

    let kkt_norm = kkt.norm();
    let solution = kkt
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::RankDeficientWorkingSet("singular KKT system".into()))?;
    if !all_finite_vec(&solution) {
        return Err(Error::RankDeficientWorkingSet(
            "KKT solve produced non-finite values".into(),
        ));
    }
    // A singular-to-rounding system can slip past LU's exact-zero pivot test;
    // a backward-error check catches it.
    let p = solution.rows(0, n).into_owned();
    let lambda = solution.rows(n, s).into_owned();
    let residual_top = (hess * &p + a0.tr_mul(&lambda) + r0.vec()).norm();
    let residual_bottom = if s > 0 { (a0 * &p).norm() } else { 0.0 };
    let scale = 1.0 + kkt_norm * solution.norm() + r0.norm();
    if residual_top + residual_bottom > 1e-8 * scale {
        return Err(Error::RankDeficientWorkingSet(format!(
            "KKT solve residual {:.3e} exceeds 1e-8 * {scale:.3e}",
            residual_top + residual_bottom
        )));
    }
    Ok((p, lambda))
}

/// Null-space projection direction `P = -V V' r0` in the whitened space.
/// A full-rank square working matrix gives `P = 0`.
pub fn direction_projection(basis: &NullBasis, r0: &Residual) -> DVector<f64> {
    assert_eq!(
        r0.space(),
        Space::Whitened,
        "direction_projection expects a whitened residual"
    );
    -basis.project_null(r0.vec())
}

/// Solution of the reduced subproblem on the sphere `||Z + C|| = ||C||`.
#[derive(Clone, Debug)]
pub struct SphereSolution {
    /// Half the reduced residual; the sphere is centered at `-c`.
    pub c: DVector<f64>,
    /// Stationary point of the reduced subproblem, `z = -2c`.
    pub z: DVector<f64>,
    /// Polar angle of `z` relative to the center, reported only for a
    /// two-dimensional null space: `z = -c + ||c|| (cos theta, sin theta)'`.
    pub theta: Option<f64>,
}

impl SphereSolution {
    /// Sphere radius `||c||`.
    pub fn radius(&self) -> f64 {
        self.c.norm()
    }

    /// `| ||z + c|| - ||c|| |`; zero when `z` lies on the sphere.
    pub fn membership_gap(&self) -> f64 {
        ((&self.z + &self.c).norm() - self.c.norm()).abs()
    }

    /// Rebuilds `z` from the reported angle.
    pub fn z_from_theta(&self) -> Option<DVector<f64>> {
        let theta = self.theta?;
        let radius = self.c.norm();
        Some(DVector::from_vec(vec![
            -self.c[0] + radius * theta.cos(),
            -self.c[1] + radius * theta.sin(),
        ]))
    }
}

/// Reduced-sphere direction in the whitened space. Writing the direction as
/// `P = V Z`, the subproblem objective is minimized on the sphere at the
/// antipode of the origin, `Z = -2C` with `C = (V' r0) / 2`; the returned
/// direction equals the projection direction but costs only the reduced
/// coordinates once the basis is available.
pub fn direction_sphere(
    basis: &NullBasis,
    r0: &Residual,
) -> Result<(DVector<f64>, SphereSolution), Error> {
    assert_eq!(
        r0.space(),
        Space::Whitened,
        "direction_sphere expects a whitened residual"
    );
    let v = basis.null_basis();
    let free = v.ncols();
    if free == 0 {
        return Err(Error::EmptyNullSpace);
    }
    let reduced = v.tr_mul(r0.vec());
    let c = &reduced * 0.5;
    let z = -reduced;
    let theta = (free == 2).then(|| f64::atan2(-c[1], -c[0]));
    let p = v * &z;
    Ok((p, SphereSolution { c, z, theta }))
}

/// Multipliers of the stationarity condition `A0' lambda = -r0` at a point
/// where the direction vanishes, via the pseudoinverse of the working matrix.
/// Equality multipliers are unchanged by whitening, so these are valid in
/// both spaces.
pub fn multipliers_at_stationary(
    basis: &NullBasis,
    r0: &Residual,
) -> Result<DVector<f64>, Error> {
    assert_eq!(
        r0.space(),
        Space::Whitened,
        "multipliers_at_stationary expects a whitened residual"
    );
    pinv_solve(basis, &(-r0.vec()))
}
