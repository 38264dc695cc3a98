//! Periodic Cartesian multi-element mesh and degree-of-freedom indexing.
//!
//! Elements are numbered lexicographically with x fastest, `k = k_y * m_x + k_x`.
//! Every discrete field stores `N x N` coefficients per element, x fastest. In a
//! Lagrange direction the local indices are the nodes `0..N` (node `N` belongs
//! to the next element); in a histopolation direction they are the
//! sub-intervals `1..=N` shifted down by one.

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::sbp_operators::SbpOperator1D;

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicMesh2D {
    pub mx: usize,
    pub my: usize,
    /// Lower-left corner of the domain.
    pub origin: (f64, f64),
    pub lx: f64,
    pub ly: f64,
    /// Sub-intervals per element per direction.
    pub n: usize,
}

pub fn build_mesh(mx: usize, my: usize, x_range: (f64, f64), y_range: (f64, f64), n: usize) -> Result<PeriodicMesh2D> {
    if mx == 0 || my == 0 {
        return Err(Error::InvalidArgument(format!("element counts must be positive, got {mx}x{my}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("elements need at least one sub-interval".into()));
    }
    let (lx, ly) = (x_range.1 - x_range.0, y_range.1 - y_range.0);
    if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
        return Err(Error::InvalidArgument(format!("domain lengths must be positive, got {lx} x {ly}")));
    }
    Ok(PeriodicMesh2D { mx, my, origin: (x_range.0, y_range.0), lx, ly, n })
}

impl PeriodicMesh2D {
    pub fn n_elements(&self) -> usize {
        self.mx * self.my
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.mx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.my as f64
    }

    pub fn element_index(&self, kx: usize, ky: usize) -> usize {
        ky * self.mx + kx
    }

    pub fn element_coords(&self, k: usize) -> (usize, usize) {
        (k % self.mx, k / self.mx)
    }

    pub fn right(&self, k: usize) -> usize {
        let (kx, ky) = self.element_coords(k);
        self.element_index((kx + 1) % self.mx, ky)
    }

    pub fn left(&self, k: usize) -> usize {
        let (kx, ky) = self.element_coords(k);
        self.element_index((kx + self.mx - 1) % self.mx, ky)
    }

    pub fn up(&self, k: usize) -> usize {
        let (kx, ky) = self.element_coords(k);
        self.element_index(kx, (ky + 1) % self.my)
    }

    pub fn down(&self, k: usize) -> usize {
        let (kx, ky) = self.element_coords(k);
        self.element_index(kx, (ky + self.my - 1) % self.my)
    }

    /// Neighbour permutation matrices: `P_r[i, j] = 1` iff `j` is the right
    /// neighbour of `i`, `P_u` likewise for the upper neighbour.
    pub fn neighbor_matrices(&self) -> (SparseMatrix, SparseMatrix) {
        let m = self.n_elements();
        let perm = |f: &dyn Fn(usize) -> usize| {
            let t: Vec<_> = (0..m).map(|i| (i, f(i), 1.0)).collect();
            SparseMatrix::from_triplets(m, m, &t).expect("permutation indices are in range")
        };
        (perm(&|k| self.right(k)), perm(&|k| self.up(k)))
    }

    /// Physical x-coordinates of the `N+1` nodes of element column `kx`.
    pub fn x_nodes(&self, kx: usize) -> Vec<f64> {
        let x0 = self.origin.0 + kx as f64 * self.dx();
        (0..=self.n).map(|i| x0 + self.dx() * i as f64 / self.n as f64).collect()
    }

    pub fn y_nodes(&self, ky: usize) -> Vec<f64> {
        let y0 = self.origin.1 + ky as f64 * self.dy();
        (0..=self.n).map(|j| y0 + self.dy() * j as f64 / self.n as f64).collect()
    }

    /// Per element, all `(N+1)²` node positions, x fastest.
    pub fn node_coordinates(&self, op: &SbpOperator1D) -> Result<Vec<Vec<(f64, f64)>>> {
        if op.n_intervals() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "operator has {} sub-intervals, mesh expects {}",
                op.n_intervals(),
                self.n
            )));
        }
        Ok((0..self.n_elements())
            .map(|k| {
                let (kx, ky) = self.element_coords(k);
                let (xs, ys) = (self.x_nodes(kx), self.y_nodes(ky));
                ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect()
            })
            .collect())
    }

    pub fn layout(&self, space: Space) -> DofLayout {
        DofLayout { space, n: self.n, n_elements: self.n_elements() }
    }
}

/// Discrete spaces of the 2D complex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    /// Histopolation ⊗ histopolation (divergence values).
    W0,
    /// x-component of the electric field: Lagrange in x, histopolation in y.
    W1x,
    /// y-component: histopolation in x, Lagrange in y.
    W1y,
    /// Lagrange ⊗ Lagrange (magnetic field).
    W2,
}

impl Space {
    /// Whether the (x, y) directions carry Lagrange (nodal) coefficients.
    pub fn lagrange_dirs(self) -> (bool, bool) {
        match self {
            Space::W0 => (false, false),
            Space::W1x => (true, false),
            Space::W1y => (false, true),
            Space::W2 => (true, true),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofLayout {
    pub space: Space,
    pub n: usize,
    pub n_elements: usize,
}

impl DofLayout {
    pub fn block_size(&self) -> usize {
        self.n * self.n
    }

    pub fn len(&self) -> usize {
        self.n_elements * self.block_size()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Global index of stored local indices `(ix, iy)` in `0..N` of element `k`.
    pub fn index(&self, k: usize, ix: usize, iy: usize) -> usize {
        debug_assert!(k < self.n_elements && ix < self.n && iy < self.n);
        k * self.block_size() + iy * self.n + ix
    }

    pub fn locate(&self, global: usize) -> (usize, usize, usize) {
        let (k, local) = (global / self.block_size(), global % self.block_size());
        (k, local % self.n, local / self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbp_operators::sbp_24;

    #[test]
    fn single_element_wraps_to_itself() {
        let m = build_mesh(1, 1, (0.0, 1.0), (0.0, 1.0), 4).unwrap();
        assert_eq!((m.right(0), m.left(0), m.up(0), m.down(0)), (0, 0, 0, 0));
        let (pr, pu) = m.neighbor_matrices();
        assert_eq!(pr.to_dense()[(0, 0)], 1.0);
        assert_eq!(pu.to_dense()[(0, 0)], 1.0);
    }

    #[test]
    fn two_elements_swap() {
        let m = build_mesh(2, 1, (0.0, 1.0), (0.0, 1.0), 4).unwrap();
        assert_eq!((m.right(0), m.right(1)), (1, 0));
        let (pr, _) = m.neighbor_matrices();
        assert_eq!(pr.to_dense(), crate::linalg::DenseMatrix::from_row_slice(2, 2, &[0., 1., 1., 0.]));
    }

    #[test]
    fn upper_neighbour_wraps() {
        let m = build_mesh(3, 3, (0.0, 1.0), (0.0, 1.0), 4).unwrap();
        // Element 7 = (1, 2); one step up wraps to (1, 0).
        assert_eq!(m.up(7), 1);
        for k in 0..9 {
            assert_eq!(m.left(m.right(k)), k);
            assert_eq!(m.down(m.up(k)), k);
        }
    }

    #[test]
    fn neighbor_matrices_are_commuting_permutations() {
        let m = build_mesh(4, 3, (0.0, 1.0), (0.0, 1.0), 2).unwrap();
        let (pr, pu) = m.neighbor_matrices();
        let eye = crate::linalg::DenseMatrix::identity(12, 12);
        assert_eq!(pr.matmul(&pr.transpose()).unwrap().to_dense(), eye);
        assert_eq!(pu.matmul(&pu.transpose()).unwrap().to_dense(), eye);
        assert_eq!(pr.matmul(&pu).unwrap().to_dense(), pu.matmul(&pr).unwrap().to_dense());
    }

    #[test]
    fn node_coordinates() {
        let op = sbp_24(8).unwrap();
        let m = build_mesh(1, 1, (-1.0, 1.0), (-1.0, 1.0), 7).unwrap();
        let nodes = m.node_coordinates(&op).unwrap();
        assert_eq!(nodes[0][0], (-1.0, -1.0));
        assert_eq!(*nodes[0].last().unwrap(), (1.0, 1.0));

        let m2 = build_mesh(2, 1, (-1.0, 1.0), (-1.0, 1.0), 7).unwrap();
        let nodes = m2.node_coordinates(&op).unwrap();
        assert_eq!(nodes[1][0].0, 0.0);
        let xs = m2.x_nodes(1);
        for w in xs.windows(2) {
            assert!((w[1] - w[0] - m2.dx() / 7.0).abs() < 1e-15);
        }
        assert!(m2.node_coordinates(&sbp_24(9).unwrap()).is_err());
    }

    #[test]
    fn invalid_meshes() {
        assert!(build_mesh(0, 1, (0.0, 1.0), (0.0, 1.0), 4).is_err());
        assert!(build_mesh(1, 1, (1.0, 1.0), (0.0, 1.0), 4).is_err());
    }

    #[test]
    fn dof_indexing_is_bijective() {
        let m = build_mesh(3, 2, (0.0, 1.0), (0.0, 1.0), 5).unwrap();
        let layout = m.layout(Space::W1x);
        let mut seen = vec![false; layout.len()];
        for k in 0..m.n_elements() {
            for iy in 0..5 {
                for ix in 0..5 {
                    let g = layout.index(k, ix, iy);
                    assert!(!seen[g]);
                    seen[g] = true;
                    assert_eq!(layout.locate(g), (k, ix, iy));
                }
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }
}
