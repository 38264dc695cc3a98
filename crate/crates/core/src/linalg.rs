//! Dense and sparse linear-algebra substrate.
//!
//! Dense matrices are `nalgebra` matrices; sparse matrices wrap a compressed-row
//! `sprs` matrix. The restarted GMRES solver works on any linear map given as a
//! closure, so the implicit time integrator can stay matrix-free.

use nalgebra::DMatrix;
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};

/// Dense real matrix (64-bit).
pub type DenseMatrix = DMatrix<f64>;

/// Compressed-row sparse matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    inner: CsMat<f64>,
}

impl SparseMatrix {
    /// Assembles from `(row, col, value)` triplets. Duplicate positions are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut tri = TriMat::with_capacity((rows, cols), triplets.len());
        for &(r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::DimensionMismatch(format!(
                    "triplet ({r}, {c}) outside a {rows}x{cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("sparse assembly"));
            }
            tri.add_triplet(r, c, v);
        }
        Ok(Self { inner: tri.to_csr() })
    }

    pub fn identity(n: usize) -> Self {
        Self { inner: CsMat::eye(n) }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { inner: CsMat::zero((rows, cols)) }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let indptr: Vec<usize> = (0..=n).collect();
        let indices: Vec<usize> = (0..n).collect();
        Self { inner: CsMat::new((n, n), indptr, indices, values.to_vec()) }
    }

    /// Converts a dense matrix, keeping only entries that are not exactly zero.
    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut tri = TriMat::new((m.nrows(), m.ncols()));
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    tri.add_triplet(i, j, v);
                }
            }
        }
        Self { inner: tri.to_csr() }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows(), self.cols());
        for (v, (i, j)) in self.inner.iter() {
            out[(i, j)] += *v;
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.inner.rows()
    }

    pub fn cols(&self) -> usize {
        self.inner.cols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    /// Number of structurally stored entries.
    pub fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner.get(row, col).copied().unwrap_or(0.0)
    }

    /// Iterates over stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.inner.iter().map(|(v, (i, j))| (i, j, *v))
    }

    pub fn transpose(&self) -> Self {
        Self { inner: self.inner.transpose_view().to_csr() }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { inner: self.inner.map(|v| v * s) }
    }

    /// Row scaling `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Result<Self> {
        if d.len() != self.rows() {
            return Err(Error::DimensionMismatch(format!(
                "row scaling of length {} for {} rows",
                d.len(),
                self.rows()
            )));
        }
        let mut inner = self.inner.clone();
        for (i, mut row) in inner.outer_iterator_mut().enumerate() {
            for (_, v) in row.iter_mut() {
                *v *= d[i];
            }
        }
        Ok(Self { inner })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "sum of {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Self { inner: &self.inner + &other.inner })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols() != other.rows() {
            return Err(Error::DimensionMismatch(format!(
                "product of {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Self { inner: &self.inner * &other.inner })
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows()];
        self.matvec_into(x, &mut y);
        y
    }

    /// `y = self * x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols(), "matvec operand length");
        assert_eq!(y.len(), self.rows(), "matvec result length");
        for (yi, row) in y.iter_mut().zip(self.inner.outer_iterator()) {
            *yi = row.iter().map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `y += alpha * self * x`.
    pub fn matvec_acc(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols(), "matvec operand length");
        assert_eq!(y.len(), self.rows(), "matvec result length");
        for (yi, row) in y.iter_mut().zip(self.inner.outer_iterator()) {
            let s: f64 = row.iter().map(|(j, v)| v * x[j]).sum();
            *yi += alpha * s;
        }
    }

    /// Largest stored magnitude (0 for an empty pattern).
    pub fn max_abs(&self) -> f64 {
        self.inner.data().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Diagonal entries (zero where not stored).
    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows().min(self.cols())).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(i, j, v)| i == j || v == 0.0)
    }

    /// Stacks blocks given row by row; `None` entries are zero blocks.
    pub fn block(blocks: &[Vec<Option<&SparseMatrix>>]) -> Result<Self> {
        let n_block_rows = blocks.len();
        let n_block_cols = blocks.first().map_or(0, Vec::len);
        let mut row_sizes = vec![None; n_block_rows];
        let mut col_sizes = vec![None; n_block_cols];
        for (bi, brow) in blocks.iter().enumerate() {
            if brow.len() != n_block_cols {
                return Err(Error::DimensionMismatch("ragged block layout".into()));
            }
            for (bj, b) in brow.iter().enumerate() {
                if let Some(b) = b {
                    for (slot, size) in [(&mut row_sizes[bi], b.rows()), (&mut col_sizes[bj], b.cols())] {
                        match slot {
                            Some(s) if *s != size => {
                                return Err(Error::DimensionMismatch(format!(
                                    "block ({bi}, {bj}) has inconsistent size"
                                )))
                            }
                            _ => *slot = Some(size),
                        }
                    }
                }
            }
        }
        let row_sizes: Vec<usize> = row_sizes.into_iter().map(|s| s.unwrap_or(0)).collect();
        let col_sizes: Vec<usize> = col_sizes.into_iter().map(|s| s.unwrap_or(0)).collect();
        let offsets = |sizes: &[usize]| -> Vec<usize> {
            sizes
                .iter()
                .scan(0, |acc, s| {
                    let o = *acc;
                    *acc += s;
                    Some(o)
                })
                .collect()
        };
        let (row_off, col_off) = (offsets(&row_sizes), offsets(&col_sizes));
        let mut triplets = Vec::new();
        for (bi, brow) in blocks.iter().enumerate() {
            for (bj, b) in brow.iter().enumerate() {
                if let Some(b) = b {
                    triplets.extend(b.triplets().map(|(i, j, v)| (i + row_off[bi], j + col_off[bj], v)));
                }
            }
        }
        Self::from_triplets(row_sizes.iter().sum(), col_sizes.iter().sum(), &triplets)
    }
}

/// Kronecker product `a ⊗ b`; entry `(i*b.rows + k, j*b.cols + l) = a[i,j] * b[k,l]`.
pub fn kron(a: &SparseMatrix, b: &SparseMatrix) -> Result<SparseMatrix> {
    let rows = a.rows().checked_mul(b.rows());
    let cols = a.cols().checked_mul(b.cols());
    let nnz = a.nnz().checked_mul(b.nnz());
    match (rows, cols, nnz) {
        (Some(_), Some(_), Some(_)) => Ok(SparseMatrix {
            inner: sprs::kronecker_product(a.inner.view(), b.inner.view()),
        }),
        _ => Err(Error::IndexOverflow { rows: a.rows().saturating_mul(b.rows()), cols: a.cols().saturating_mul(b.cols()) }),
    }
}

/// Kronecker product of a chain of factors, leftmost factor varying slowest.
pub fn kron_chain(factors: &[&SparseMatrix]) -> Result<SparseMatrix> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("empty Kronecker chain".into()))?;
    rest.iter().try_fold((*first).clone(), |acc, f| kron(&acc, f))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Relative residual `‖A x − b‖₂ / ‖b‖₂`, recomputed from the returned iterate.
    pub final_residual: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresOptions {
    /// Relative residual tolerance.
    pub tol: f64,
    pub restart: usize,
    pub max_iters: usize,
}

impl GmresOptions {
    /// Restart 50, at most `10 n` Arnoldi steps.
    pub fn new(tol: f64, n: usize) -> Self {
        Self { tol, restart: 50, max_iters: 10 * n.max(1) }
    }
}

/// Restarted GMRES with modified Gram-Schmidt (two passes) and Givens rotations.
///
/// `apply(x, y)` must write `A x` into `y`. Convergence is always decided on the
/// recomputed residual, never on the Arnoldi estimate alone.
pub fn gmres<F>(mut apply: F, rhs: &[f64], x0: Option<&[f64]>, opts: &GmresOptions) -> Result<(Vec<f64>, SolveStats)>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("GMRES tolerance must be positive, got {}", opts.tol)));
    }
    if opts.restart == 0 {
        return Err(Error::InvalidArgument("GMRES restart length must be positive".into()));
    }
    let n = rhs.len();
    let mut x = match x0 {
        Some(x0) if x0.len() != n => {
            return Err(Error::DimensionMismatch(format!("initial guess of length {} for {n} unknowns", x0.len())))
        }
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    let bnorm = norm2(rhs);
    if !bnorm.is_finite() {
        return Err(Error::NonFinite("GMRES right-hand side"));
    }
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], SolveStats { iterations: 0, final_residual: 0.0, converged: true }));
    }
    let target = opts.tol * bnorm;
    let m = opts.restart;
    let mut iterations = 0;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut hess = vec![vec![0.0; m]; m + 1];
    let (mut cs, mut sn, mut g) = (vec![0.0; m], vec![0.0; m], vec![0.0; m + 1]);

    loop {
        apply(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri = bi - *ri;
        }
        let beta = norm2(&r);
        if !beta.is_finite() {
            return Err(Error::NonFinite("GMRES residual"));
        }
        let stats = SolveStats { iterations, final_residual: beta / bnorm, converged: beta <= target };
        if stats.converged {
            return Ok((x, stats));
        }
        if iterations >= opts.max_iters {
            return Err(Error::NotConverged(stats));
        }

        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut k = 0;
        while k < m && iterations < opts.max_iters {
            apply(&basis[k], &mut w);
            iterations += 1;
            for col in hess.iter_mut() {
                col[k] = 0.0;
            }
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let h = dot(&w, v);
                    hess[i][k] += h;
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= h * vi);
                }
            }
            let hnext = norm2(&w);
            if !hnext.is_finite() || hess.iter().take(k + 1).any(|row| !row[k].is_finite()) {
                return Err(Error::NonFinite("GMRES Arnoldi recurrence"));
            }
            hess[k + 1][k] = hnext;
            for i in 0..k {
                let (a, b) = (hess[i][k], hess[i + 1][k]);
                hess[i][k] = cs[i] * a + sn[i] * b;
                hess[i + 1][k] = -sn[i] * a + cs[i] * b;
            }
            let (a, b) = (hess[k][k], hess[k + 1][k]);
            let rho = a.hypot(b);
            if rho == 0.0 {
                // A annihilates the Krylov direction; nothing more to gain in this cycle.
                break;
            }
            cs[k] = a / rho;
            sn[k] = b / rho;
            hess[k][k] = rho;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k += 1;
            let breakdown = hnext <= f64::EPSILON * rho;
            if g[k].abs() <= target || breakdown {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }
        // Back substitution on the triangularized Hessenberg system.
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| hess[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            x.iter_mut().zip(v).for_each(|(xi, vi)| *xi += yi * vi);
        }
        if k == 0 {
            apply(&x, &mut r);
            let res = norm2(&r.iter().zip(rhs).map(|(a, b)| b - a).collect::<Vec<_>>());
            return Err(Error::NotConverged(SolveStats {
                iterations,
                final_residual: res / bnorm,
                converged: false,
            }));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn random_dense(rng: &mut StdRng, r: usize, c: usize) -> DenseMatrix {
        DenseMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let k = kron(&SparseMatrix::identity(2), &SparseMatrix::identity(3)).unwrap();
        assert_eq!(k.to_dense(), DenseMatrix::identity(6, 6));
    }

    #[test]
    fn kron_block_structure() {
        let a = SparseMatrix::from_dense(&DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let k = kron(&a, &SparseMatrix::identity(2)).unwrap().to_dense();
        for (bi, bj, s) in [(0, 0, 1.0), (0, 1, 2.0), (1, 0, 3.0), (1, 1, 4.0)] {
            let blk = k.view((2 * bi, 2 * bj), (2, 2));
            assert_eq!(blk, DenseMatrix::identity(2, 2) * s);
        }
    }

    #[test]
    fn kron_mixed_product_identity() {
        let mut rng = StdRng::seed_from_u64(7);
        let [a, b, c, d] = std::array::from_fn(|_| random_dense(&mut rng, 3, 3));
        let sp = SparseMatrix::from_dense;
        let lhs = kron(&sp(&a), &sp(&b)).unwrap().matmul(&kron(&sp(&c), &sp(&d)).unwrap()).unwrap();
        let rhs = kron(&sp(&(&a * &c)), &sp(&(&b * &d))).unwrap();
        let diff = (lhs.to_dense() - rhs.to_dense()).abs().max();
        assert!(diff <= 1e-13 * rhs.max_abs().max(1.0), "deviation {diff}");
    }

    #[test]
    fn triplets_sum_duplicates_and_reject_out_of_range() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.5), (1, 0, -1.0)]).unwrap();
        assert_eq!(m.get(0, 1), 3.5);
        assert_eq!(m.nnz(), 2);
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, &[(0, 0, f64::NAN)]).is_err());
    }

    #[test]
    fn sparse_matvec_matches_dense() {
        let mut rng = StdRng::seed_from_u64(11);
        for n in [1, 5, 17, 50] {
            let mut a = random_dense(&mut rng, n, n);
            a.iter_mut().for_each(|v| {
                if v.abs() < 0.6 {
                    *v = 0.0
                }
            });
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dense = &a * nalgebra::DVector::from_column_slice(&x);
            let sparse = SparseMatrix::from_dense(&a).matvec(&x);
            for (s, d) in sparse.iter().zip(dense.iter()) {
                assert_abs_diff_eq!(s, d, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn block_assembly_places_blocks() {
        let i2 = SparseMatrix::identity(2);
        let d = SparseMatrix::diagonal(&[3.0, 4.0, 5.0]);
        let b = SparseMatrix::block(&[vec![Some(&i2), None], vec![None, Some(&d)]]).unwrap();
        assert_eq!(b.shape(), (5, 5));
        assert_eq!(b.diag(), vec![1.0, 1.0, 3.0, 4.0, 5.0]);
        assert!(b.is_diagonal());
    }

    #[test]
    fn gmres_identity_takes_one_iteration() {
        let rhs = vec![1.0, -2.0, 3.0];
        let (x, stats) = gmres(|x, y| y.copy_from_slice(x), &rhs, None, &GmresOptions::new(1e-12, 3)).unwrap();
        assert_eq!(x, rhs);
        assert_eq!(stats.iterations, 1);
        assert!(stats.converged);
    }

    #[test]
    fn gmres_diagonal_system() {
        let d = [1.0, 2.0, 4.0];
        let apply = |x: &[f64], y: &mut [f64]| y.iter_mut().zip(x).zip(&d).for_each(|((yi, xi), di)| *yi = di * xi);
        let (x, stats) = gmres(apply, &[1.0, 2.0, 4.0], None, &GmresOptions::new(1e-12, 3)).unwrap();
        assert!(stats.converged);
        for xi in x {
            assert_abs_diff_eq!(xi, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gmres_reported_residual_matches_recomputed() {
        let mut rng = StdRng::seed_from_u64(3);
        let n = 40;
        let a = DenseMatrix::identity(n, n) * 4.0 + random_dense(&mut rng, n, n);
        let sa = SparseMatrix::from_dense(&a);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let opts = GmresOptions { tol: 1e-10, restart: 7, max_iters: 10 * n };
        let (x, stats) = gmres(|x, y| sa.matvec_into(x, y), &b, None, &opts).unwrap();
        let ax = sa.matvec(&x);
        let r: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
        let rel = norm2(&r) / norm2(&b);
        assert!(stats.converged && rel <= 1e-10);
        assert_abs_diff_eq!(stats.final_residual, rel, epsilon = 1e-14);
    }

    #[test]
    fn gmres_reports_non_convergence() {
        // A rotation by 90 degrees stalls restarted GMRES(1).
        let apply = |x: &[f64], y: &mut [f64]| {
            y[0] = -x[1];
            y[1] = x[0];
        };
        let opts = GmresOptions { tol: 1e-12, restart: 1, max_iters: 20 };
        match gmres(apply, &[1.0, 0.0], None, &opts) {
            Err(Error::NotConverged(stats)) => assert!(!stats.converged),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn gmres_zero_rhs_and_bad_tolerance() {
        let (x, stats) = gmres(|x, y| y.copy_from_slice(x), &[0.0; 4], None, &GmresOptions::new(1e-8, 4)).unwrap();
        assert_eq!(x, vec![0.0; 4]);
        assert_eq!(stats.iterations, 0);
        assert!(gmres(|x, y| y.copy_from_slice(x), &[1.0], None, &GmresOptions::new(0.0, 1)).is_err());
    }
}
