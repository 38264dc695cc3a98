//! Per-element mimetic building blocks derived from an SBP operator.
//!
//! Histopolation coefficients are indexed by sub-interval `1..=N` and stored at
//! positions `0..N`. Everything here lives on the reference element; physical
//! element lengths enter only during 2D assembly.

use crate::linalg::DenseMatrix;
use crate::sbp_operators::{OperatorId, SbpOperator1D};

/// Histopolation Vandermonde matrix, `(N+1) x N`: nodal values of the
/// histopolation functions, `V[k, i-1] = -Σ_{j<i} D[k, j]`.
pub fn vandermonde(op: &SbpOperator1D) -> DenseMatrix {
    let n = op.n_intervals();
    let mut v = DenseMatrix::zeros(n + 1, n);
    for k in 0..=n {
        let mut acc = 0.0;
        for i in 0..n {
            acc -= op.d[(k, i)];
            v[(k, i)] = acc;
        }
    }
    v
}

/// Forward-difference matrix `N x (N+1)` mapping Lagrange to histopolation coefficients.
pub fn full_difference(n: usize) -> DenseMatrix {
    let mut delta = DenseMatrix::zeros(n, n + 1);
    for i in 0..n {
        delta[(i, i)] = -1.0;
        delta[(i, i + 1)] = 1.0;
    }
    delta
}

/// Splits the difference matrix for storage without the duplicated right node.
///
/// Returns `(Δ̂, Δ̃)`, both `N x N`: `Δ̂ = (δ_{i+1,j} − δ_{i,j})` and
/// `Δ̃ = (δ_{i,N−1} δ_{j,0})`, the latter reaching into the right neighbour.
pub fn split_difference(n: usize) -> (DenseMatrix, DenseMatrix) {
    let hat = DenseMatrix::from_fn(n, n, |i, j| (j == i + 1) as u8 as f64 - (i == j) as u8 as f64);
    let mut tilde = DenseMatrix::zeros(n, n);
    tilde[(n - 1, 0)] = 1.0;
    (hat, tilde)
}

/// Splits `D` into `(D̂, D̃)`, both `(N+1) x N`: `D̂` holds columns `0..N` of `D`,
/// `D̃` holds column `N` of `D` in its first column.
pub fn split_derivative(op: &SbpOperator1D) -> (DenseMatrix, DenseMatrix) {
    let n = op.n_intervals();
    let hat = op.d.columns(0, n).into_owned();
    let mut tilde = DenseMatrix::zeros(n + 1, n);
    tilde.set_column(0, &op.d.column(n));
    (hat, tilde)
}

/// Intertwined weights `ω̃`: `ω̃₀ = ω₀ + ω_N`, `ω̃_i = ω_i` otherwise.
pub fn intertwined_mass(op: &SbpOperator1D) -> Vec<f64> {
    let n = op.n_intervals();
    let mut w = op.weights[..n].to_vec();
    w[0] += op.weights[n];
    w
}

#[derive(Clone, Debug, PartialEq)]
pub struct MimeticElementOps {
    pub parent: Option<OperatorId>,
    /// Sub-intervals per element.
    pub n: usize,
    pub vandermonde: DenseMatrix,
    pub delta: DenseMatrix,
    pub delta_hat: DenseMatrix,
    pub delta_tilde: DenseMatrix,
    pub d_hat: DenseMatrix,
    pub d_tilde: DenseMatrix,
    /// Node weights `ω` (length N+1).
    pub weights: Vec<f64>,
    /// Intertwined weights `ω̃` (length N).
    pub intertwined: Vec<f64>,
}

impl MimeticElementOps {
    pub fn new(op: &SbpOperator1D) -> Self {
        let n = op.n_intervals();
        let (delta_hat, delta_tilde) = split_difference(n);
        let (d_hat, d_tilde) = split_derivative(op);
        Self {
            parent: op.id,
            n,
            vandermonde: vandermonde(op),
            delta: full_difference(n),
            delta_hat,
            delta_tilde,
            d_hat,
            d_tilde,
            weights: op.weights.clone(),
            intertwined: intertwined_mass(op),
        }
    }

    /// Histopolation mass matrix `Vᵀ M V` on the reference element.
    pub fn histopolation_mass(&self) -> DenseMatrix {
        let m = DenseMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.weights));
        self.vandermonde.transpose() * m * &self.vandermonde
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbp_operators::{sbp_24, sbp_36, OperatorId};

    #[test]
    fn vandermonde_first_entry() {
        let op = sbp_24(16).unwrap();
        let v = vandermonde(&op);
        assert_eq!(v.shape(), (16, 15));
        assert!((v[(0, 0)] - 24.0 / 17.0 / op.h).abs() < 1e-12);
    }

    #[test]
    fn last_column_equals_last_derivative_column() {
        let op = sbp_36(14).unwrap();
        let v = vandermonde(&op);
        let n = op.n_intervals();
        // Row sums of D vanish, so the last cumulative sum equals D[:, N].
        for k in 0..=n {
            assert!((v[(k, n - 1)] - op.d[(k, n)]).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_equals_vandermonde_times_difference() {
        for id in OperatorId::ALL {
            for n_nodes in [id.min_nodes(), id.min_nodes() + 1, 16, 33] {
                let op = id.build(n_nodes).unwrap();
                let dev = (vandermonde(&op) * full_difference(op.n_intervals()) - &op.d).abs().max();
                assert!(dev <= 1e-13 * op.d.abs().max().max(1.0), "{id} {n_nodes}: {dev:e}");
            }
        }
    }

    #[test]
    fn split_difference_n3() {
        let (hat, tilde) = split_difference(3);
        assert_eq!(hat, DenseMatrix::from_row_slice(3, 3, &[-1., 1., 0., 0., -1., 1., 0., 0., -1.]));
        assert_eq!(tilde, DenseMatrix::from_row_slice(3, 3, &[0., 0., 0., 0., 0., 0., 1., 0., 0.]));
    }

    #[test]
    fn periodic_single_element_differences_of_constant_vanish() {
        let (hat, tilde) = split_difference(6);
        let c = nalgebra::DVector::from_element(6, 2.5);
        assert_eq!((hat + tilde) * c, nalgebra::DVector::zeros(6));
    }

    #[test]
    fn two_element_periodic_differences_of_linear_samples() {
        // Two elements of length 1 with N = 4: global stored nodes x = 0, .25, ..., 1.75.
        let n = 4;
        let (hat, tilde) = split_difference(n);
        let x: Vec<f64> = (0..2 * n).map(|g| g as f64 * 0.25).collect();
        for e in 0..2 {
            let own = nalgebra::DVector::from_column_slice(&x[e * n..(e + 1) * n]);
            let right = nalgebra::DVector::from_column_slice(&x[((e + 1) % 2) * n..((e + 1) % 2 + 1) * n]);
            let diff = &hat * own + &tilde * right;
            for i in 0..n {
                let expected = if e == 1 && i == n - 1 { 0.25 - 2.0 } else { 0.25 };
                assert!((diff[i] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn split_derivative_reassembles() {
        let op = sbp_24(12).unwrap();
        let (hat, tilde) = split_derivative(&op);
        let n = op.n_intervals();
        assert_eq!(hat.columns(0, n), op.d.columns(0, n));
        assert_eq!(tilde.column(0), op.d.column(n));
        assert!(tilde.iter().filter(|v| **v != 0.0).count() <= n + 1);
        assert!(tilde.columns(1, n - 1).iter().all(|v| *v == 0.0));
        let c = nalgebra::DVector::from_element(n, 1.0);
        assert!((&hat * &c + &tilde * &c).amax() < 1e-12);
    }

    #[test]
    fn intertwined_weights() {
        let op = sbp_24(12).unwrap();
        let w = intertwined_mass(&op);
        assert_eq!(w.len(), 11);
        assert!((w[0] - 17.0 / 24.0 * op.h).abs() < 1e-15);
        for id in OperatorId::ALL {
            let op = id.build(20).unwrap();
            let w = intertwined_mass(&op);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(w.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn weighted_rows_of_vandermonde_sum_to_one() {
        let op = sbp_36(17).unwrap();
        let v = vandermonde(&op);
        for k in 0..op.n_nodes {
            assert!((op.h * v.row(k).sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn histopolation_mass_is_spd() {
        for id in OperatorId::ALL {
            let ops = MimeticElementOps::new(&id.build(14).unwrap());
            let m = ops.histopolation_mass();
            assert!((&m - m.transpose()).abs().max() <= 1e-14 * m.abs().max());
            let eig = m.symmetric_eigenvalues();
            assert!(eig.min() > 0.0);
        }
    }
}
