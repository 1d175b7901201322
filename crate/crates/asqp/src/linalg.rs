//! Dense decomposition kernels: a rank-revealing SVD that exposes explicit
//! range and null-space bases, pseudoinverse solves against the working
//! matrix, and Cholesky factorization with triangular solves.
//!
//! The SVD itself is delegated to `nalgebra`; everything layered on top (rank
//! decision, completion of the null basis, pseudoinverse, triangular kernels)
//! lives here.

use nalgebra::{DMatrix, DMatrixView, DVector};

use crate::error::Error;

/// Default relative rank threshold for a `rows x cols` matrix:
/// `max(rows, cols) * 1e-12`, applied against the largest singular value.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    1e-12 * rows.max(cols).max(1) as f64
}

pub(crate) fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub(crate) fn all_finite_vec(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// SVD-derived factors of an `s x n` working matrix `A0`, split at the rank
/// decision: `A0 = U_k * diag(sigma) * Vk^T` plus an orthonormal basis of the
/// null space of `A0`.
#[derive(Clone, Debug)]
pub struct NullBasis {
    rank: usize,
    /// Retained singular values, strictly positive and nonincreasing.
    singular_values: DVector<f64>,
    /// Largest singular value before truncation; zero for a zero matrix.
    sigma_max: f64,
    /// Left singular vectors as returned by the factorization, `s x min(s, n)`.
    /// For working matrices (`s <= n`) this is the full square `U`.
    left_vectors: DMatrix<f64>,
    /// First `rank` right singular vectors, `n x k`; spans the row space.
    range_basis: DMatrix<f64>,
    /// Orthonormal basis of the null space, `n x (n - k)`.
    null_basis: DMatrix<f64>,
}

impl NullBasis {
    /// Number of singular values above the rank threshold.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Dimension of the null space, `n - rank`.
    pub fn nullity(&self) -> usize {
        self.null_basis.ncols()
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// Left singular vectors; square `s x s` whenever `A0` has at most as many
    /// rows as columns. Only the first `rank` columns pair with retained
    /// singular values.
    pub fn left_vectors(&self) -> &DMatrix<f64> {
        &self.left_vectors
    }

    /// The `s x k` block of left singular vectors used by [`pinv_solve`].
    pub fn left_vectors_compact(&self) -> DMatrixView<'_, f64> {
        self.left_vectors.columns(0, self.rank)
    }

    /// Orthonormal basis of the row space of `A0`, `n x k`.
    pub fn range_basis(&self) -> &DMatrix<f64> {
        &self.range_basis
    }

    /// Orthonormal basis of the null space of `A0`, `n x (n - k)`.
    pub fn null_basis(&self) -> &DMatrix<f64> {
        &self.null_basis
    }

    /// Orthogonal projection of `v` onto the null space of `A0`.
    pub fn project_null(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.null_basis.ncols() == 0 {
            return DVector::zeros(self.null_basis.nrows());
        }
        &self.null_basis * self.null_basis.tr_mul(v)
    }
}

/// Computes the SVD of `a0` and splits it at the rank decision
/// `sigma_i > rank_tol * sigma_max`. The null basis combines the right
/// singular vectors below the threshold with an orthonormal completion, so it
/// always has exactly `n - rank` columns.
pub fn svd_null_basis(a0: &DMatrix<f64>, rank_tol: f64) -> Result<NullBasis, Error> {
    let (rows, cols) = a0.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidInput(format!(
            "svd_null_basis needs a nonempty matrix, got {rows}x{cols}"
        )));
    }
    if !rank_tol.is_finite() || rank_tol <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "rank tolerance must be positive and finite, got {rank_tol}"
        )));
    }
    if !all_finite(a0) {
        return Err(Error::InvalidMatrix(
            "working matrix has non-finite entries".into(),
        ));
    }

    let svd = a0
        .clone()
        .try_svd(true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let left_vectors = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let sigma = svd.singular_values;

    let sigma_max = sigma.iter().copied().fold(0.0_f64, f64::max);
    let threshold = rank_tol * sigma_max;
    let rank = sigma.iter().filter(|&&s| s > threshold).count();

    let t = sigma.len();
    let v = v_t.transpose(); // n x t, orthonormal columns
    let range_basis = v.columns(0, rank).into_owned();

    let completion = if t < cols {
        orthonormal_complement(&v)
    } else {
        DMatrix::zeros(cols, 0)
    };
    let mut null_basis = DMatrix::zeros(cols, (t - rank) + completion.ncols());
    for (idx, i) in (rank..t).enumerate() {
        null_basis.set_column(idx, &v.column(i));
    }
    for i in 0..completion.ncols() {
        null_basis.set_column((t - rank) + i, &completion.column(i));
    }

    Ok(NullBasis {
        rank,
        singular_values: DVector::from_iterator(rank, sigma.iter().take(rank).copied()),
        sigma_max,
        left_vectors,
        range_basis,
        null_basis,
    })
}

/// Orthonormal complement of the column span of `basis` (`n x t`, orthonormal
/// columns, `t <= n`), computed from the Householder QR of `basis`: reflectors
/// applied to the trailing `n - t` columns of the identity.
fn orthonormal_complement(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, t) = basis.shape();
    debug_assert!(t <= n);
    if t == n {
        return DMatrix::zeros(n, 0);
    }

    // Reflector j is stored with an implicit unit head: tail in column j below
    // the diagonal, scale in taus[j].
    let mut work = basis.clone();
    let mut taus = vec![0.0_f64; t];
    for j in 0..t {
        let mut norm2 = 0.0;
        for i in j..n {
            norm2 += work[(i, j)] * work[(i, j)];
        }
        let norm = norm2.sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = work[(j, j)];
        let s = if alpha >= 0.0 { norm } else { -norm };
        let v0 = alpha + s;
        for i in j + 1..n {
            work[(i, j)] /= v0;
        }
        taus[j] = v0 / s;
        work[(j, j)] = -s;
        for c in j + 1..t {
            let mut d = work[(j, c)];
            for i in j + 1..n {
                d += work[(i, j)] * work[(i, c)];
            }
            d *= taus[j];
            work[(j, c)] -= d;
            for i in j + 1..n {
                work[(i, c)] -= d * work[(i, j)];
            }
        }
    }

    // Assemble every complement column at once: the trailing identity
    // columns with the reflectors applied in reverse.
    let mut out = DMatrix::zeros(n, n - t);
    for idx in 0..n - t {
        out[(t + idx, idx)] = 1.0;
    }
    let mut v = DVector::zeros(n);
    for j in (0..t).rev() {
        if taus[j] == 0.0 {
            continue;
        }
        v.fill(0.0);
        v[j] = 1.0;
        for i in j + 1..n {
            v[i] = work[(i, j)];
        }
        let d = out.tr_mul(&v);
        out.gemm(-taus[j], &v, &d.transpose(), 1.0);
    }
    out
}

/// Minimum-norm least-squares solution of `A0^T * lambda = rhs` through the
/// factors in `basis`: `lambda = U_k * Sigma^{-1} * Vk^T * rhs`.
pub fn pinv_solve(basis: &NullBasis, rhs: &DVector<f64>) -> Result<DVector<f64>, Error> {
    if basis.rank == 0 {
        return Err(Error::NoActiveRows);
    }
    let n = basis.range_basis.nrows();
    if rhs.len() != n {
        return Err(Error::InvalidInput(format!(
            "rhs length {} does not match the {} columns of the working matrix",
            rhs.len(),
            n
        )));
    }
    let mut coeffs = basis.range_basis.tr_mul(rhs);
    for i in 0..basis.rank {
        coeffs[i] /= basis.singular_values[i];
    }
    Ok(basis.left_vectors.columns(0, basis.rank) * coeffs)
}

/// Lower-triangular Cholesky factor `L` with `Q = L * L^T`.
#[derive(Clone, Debug)]
pub struct SpdFactor {
    l: DMatrix<f64>,
}

impl SpdFactor {
    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `Q^{-1} * rhs` via a forward then a transposed solve.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>, Error> {
        tri_solve(self, &tri_solve(self, rhs, false)?, true)
    }
}

/// Cholesky factorization of a symmetric positive definite matrix. Only the
/// lower triangle of `q` is read.
pub fn spd_factor(q: &DMatrix<f64>) -> Result<SpdFactor, Error> {
    let n = q.nrows();
    if q.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "Cholesky needs a square matrix, got {}x{}",
            n,
            q.ncols()
        )));
    }
    if !all_finite(q) {
        return Err(Error::InvalidMatrix(
            "matrix has non-finite entries".into(),
        ));
    }
    // Left-looking over the column-major storage: column j starts as the
    // lower triangle of q, gets the earlier columns' contributions removed
    // with contiguous axpys, then is scaled by the pivot root.
    let mut l = q.lower_triangle();
    let data = l.as_mut_slice();
    for j in 0..n {
        let (head, tail) = data.split_at_mut(j * n);
        let col_j = &mut tail[..n];
        for k in 0..j {
            let col_k = &head[k * n..(k + 1) * n];
            let scale = col_k[j];
            if scale != 0.0 {
                for (x, &y) in col_j[j..].iter_mut().zip(&col_k[j..]) {
                    *x -= scale * y;
                }
            }
        }
        let d = col_j[j];
        if d <= 0.0 {
            return Err(Error::NotPositiveDefinite { pivot: d, index: j });
        }
        let root = d.sqrt();
        col_j[j] = root;
        let inv = 1.0 / root;
        for x in &mut col_j[j + 1..] {
            *x *= inv;
        }
    }
    Ok(SpdFactor { l })
}

/// Solves `L * y = rhs` (forward) or `L^T * y = rhs` (`transposed`) by
/// substitution.
pub fn tri_solve(
    factor: &SpdFactor,
    rhs: &DVector<f64>,
    transposed: bool,
) -> Result<DVector<f64>, Error> {
    let n = factor.l.nrows();
    if rhs.len() != n {
        return Err(Error::InvalidInput(format!(
            "rhs length {} does not match factor dimension {n}",
            rhs.len()
        )));
    }
    let l = &factor.l;
    let mut y = rhs.clone();
    if !transposed {
        for i in 0..n {
            let mut v = y[i];
            for k in 0..i {
                v -= l[(i, k)] * y[k];
            }
            y[i] = v / l[(i, i)];
        }
    } else {
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in i + 1..n {
                v -= l[(k, i)] * y[k];
            }
            y[i] = v / l[(i, i)];
        }
    }
    Ok(y)
}

/// Column-wise [`tri_solve`] for matrix right-hand sides.
pub fn tri_solve_matrix(
    factor: &SpdFactor,
    rhs: &DMatrix<f64>,
    transposed: bool,
) -> Result<DMatrix<f64>, Error> {
    let n = factor.l.nrows();
    if rhs.nrows() != n {
        return Err(Error::InvalidInput(format!(
            "rhs has {} rows, factor dimension is {n}",
            rhs.nrows()
        )));
    }
    let mut out = DMatrix::zeros(n, rhs.ncols());
    for c in 0..rhs.ncols() {
        let col = tri_solve(factor, &rhs.column(c).into_owned(), transposed)?;
        out.set_column(c, &col);
    }
    Ok(out)
}
