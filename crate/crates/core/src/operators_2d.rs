//! Global 2D operators assembled by Kronecker products, the discrete vector
//! calculus they induce, the Poisson structure of the Maxwell system, and the
//! single-element 3D complex.
//!
//! Kronecker factors are ordered (element) ⊗ (y) ⊗ (x), so the rightmost
//! factor runs fastest, matching the x-fastest storage of the fields.

use crate::error::{Error, Result};
use crate::linalg::{kron_chain, DenseMatrix, SparseMatrix};
use crate::mesh::PeriodicMesh2D;
use crate::mimetic::MimeticElementOps;

fn sp(m: &DenseMatrix) -> SparseMatrix {
    SparseMatrix::from_dense(m)
}

fn check_sizes(mesh: &PeriodicMesh2D, elem: &MimeticElementOps) -> Result<()> {
    if mesh.n != elem.n {
        return Err(Error::DimensionMismatch(format!(
            "mesh has {} sub-intervals per element, element operators have {}",
            mesh.n, elem.n
        )));
    }
    Ok(())
}

/// Diagonal mass matrices `ΔxΔy (I_m ⊗ A ⊗ B)`.
#[derive(Clone, Debug)]
pub struct MassMatrices {
    /// `M̂ ⊗ M̂`, on Lagrange ⊗ Lagrange storage.
    pub hat: SparseMatrix,
    /// `M ⊗ M̂`: nodal in y, stored Lagrange in x.
    pub x: SparseMatrix,
    /// `M̂ ⊗ M`: stored Lagrange in y, nodal in x.
    pub y: SparseMatrix,
    /// `M ⊗ M`.
    pub full: SparseMatrix,
}

pub fn assemble_mass(mesh: &PeriodicMesh2D, elem: &MimeticElementOps) -> Result<MassMatrices> {
    check_sizes(mesh, elem)?;
    let im = SparseMatrix::identity(mesh.n_elements());
    let m = SparseMatrix::diagonal(&elem.weights);
    let mhat = SparseMatrix::diagonal(&elem.intertwined);
    let area = mesh.dx() * mesh.dy();
    let build = |a: &SparseMatrix, b: &SparseMatrix| kron_chain(&[&im, a, b]).map(|k| k.scale(area));
    Ok(MassMatrices { hat: build(&mhat, &mhat)?, x: build(&m, &mhat)?, y: build(&mhat, &m)?, full: build(&m, &m)? })
}

/// Difference, derivative and nodal-evaluation operators.
#[derive(Clone, Debug)]
pub struct DifferenceOperators {
    pub delta_x: SparseMatrix,
    pub delta_y: SparseMatrix,
    pub deriv_x: SparseMatrix,
    pub deriv_y: SparseMatrix,
    /// `(Δx)⁻¹ (I_m ⊗ I_N ⊗ V)`.
    pub vander_x: SparseMatrix,
    /// `(Δy)⁻¹ (I_m ⊗ V ⊗ I_N)`.
    pub vander_y: SparseMatrix,
}

pub fn assemble_diff(mesh: &PeriodicMesh2D, elem: &MimeticElementOps) -> Result<DifferenceOperators> {
    check_sizes(mesh, elem)?;
    let im = SparseMatrix::identity(mesh.n_elements());
    let i_n = SparseMatrix::identity(elem.n);
    let (pr, pu) = mesh.neighbor_matrices();
    let (dhat, dtilde) = (sp(&elem.delta_hat), sp(&elem.delta_tilde));
    let (der_hat, der_tilde) = (sp(&elem.d_hat), sp(&elem.d_tilde));
    let v = sp(&elem.vandermonde);

    let delta_x = kron_chain(&[&im, &i_n, &dhat])?.add(&kron_chain(&[&pr, &i_n, &dtilde])?)?;
    let delta_y = kron_chain(&[&im, &dhat, &i_n])?.add(&kron_chain(&[&pu, &dtilde, &i_n])?)?;
    let deriv_x = kron_chain(&[&im, &i_n, &der_hat])?
        .add(&kron_chain(&[&pr, &i_n, &der_tilde])?)?
        .scale(1.0 / mesh.dx());
    let deriv_y = kron_chain(&[&im, &der_hat, &i_n])?
        .add(&kron_chain(&[&pu, &der_tilde, &i_n])?)?
        .scale(1.0 / mesh.dy());
    let vander_x = kron_chain(&[&im, &i_n, &v])?.scale(1.0 / mesh.dx());
    let vander_y = kron_chain(&[&im, &v, &i_n])?.scale(1.0 / mesh.dy());
    Ok(DifferenceOperators { delta_x, delta_y, deriv_x, deriv_y, vander_x, vander_y })
}

/// Coefficient-level 2D grad, both curls and div, all built from `Δx`, `Δy`.
#[derive(Clone, Debug)]
pub struct VectorCalculus2D {
    pub delta_x: SparseMatrix,
    pub delta_y: SparseMatrix,
}

pub fn discrete_vector_calculus(ops: &DifferenceOperators) -> VectorCalculus2D {
    VectorCalculus2D { delta_x: ops.delta_x.clone(), delta_y: ops.delta_y.clone() }
}

impl VectorCalculus2D {
    pub fn grad(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (self.delta_x.matvec(u), self.delta_y.matvec(u))
    }

    /// Scalar-to-vector curl `(∂y u, −∂x u)`.
    pub fn curl_scalar(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut cy = self.delta_x.matvec(u);
        cy.iter_mut().for_each(|v| *v = -*v);
        (self.delta_y.matvec(u), cy)
    }

    /// Vector-to-scalar curl `∂x w^y − ∂y w^x`.
    pub fn curl_vector(&self, wx: &[f64], wy: &[f64]) -> Vec<f64> {
        let mut out = self.delta_x.matvec(wy);
        self.delta_y.matvec_acc(-1.0, wx, &mut out);
        out
    }

    pub fn div(&self, vx: &[f64], vy: &[f64]) -> Vec<f64> {
        let mut out = self.delta_x.matvec(vx);
        self.delta_y.matvec_acc(1.0, vy, &mut out);
        out
    }

    pub fn grad_matrix(&self) -> Result<SparseMatrix> {
        SparseMatrix::block(&[vec![Some(&self.delta_x)], vec![Some(&self.delta_y)]])
    }

    pub fn curl_scalar_matrix(&self) -> Result<SparseMatrix> {
        let neg = self.delta_x.scale(-1.0);
        SparseMatrix::block(&[vec![Some(&self.delta_y)], vec![Some(&neg)]])
    }

    pub fn curl_vector_matrix(&self) -> Result<SparseMatrix> {
        let neg = self.delta_y.scale(-1.0);
        SparseMatrix::block(&[vec![Some(&neg), Some(&self.delta_x)]])
    }

    pub fn div_matrix(&self) -> Result<SparseMatrix> {
        SparseMatrix::block(&[vec![Some(&self.delta_x), Some(&self.delta_y)]])
    }
}

/// Everything the Maxwell semi-discretization needs, assembled once.
#[derive(Clone, Debug)]
pub struct GlobalOperators2D {
    pub mass: MassMatrices,
    pub diff: DifferenceOperators,
    /// `V_yᵀ M_x V_y`, the energy block of `Ē^x`.
    pub k_x: SparseMatrix,
    /// `V_xᵀ M_y V_x`, the energy block of `Ē^y`.
    pub k_y: SparseMatrix,
    pub inv_mass_hat: Vec<f64>,
    /// `M̂⁻¹ Δ_yᵀ K_x`.
    pub faraday_x: SparseMatrix,
    /// `M̂⁻¹ Δ_xᵀ K_y`.
    pub faraday_y: SparseMatrix,
    /// `(ΔxΔy)⁻¹ (I_m ⊗ V ⊗ V)`: nodal values of histopolation ⊗ histopolation fields.
    pub eval_w0: SparseMatrix,
}

impl GlobalOperators2D {
    pub fn assemble(mesh: &PeriodicMesh2D, elem: &MimeticElementOps) -> Result<Self> {
        let mass = assemble_mass(mesh, elem)?;
        let diff = assemble_diff(mesh, elem)?;
        let k_x = diff.vander_y.transpose().matmul(&mass.x)?.matmul(&diff.vander_y)?;
        let k_y = diff.vander_x.transpose().matmul(&mass.y)?.matmul(&diff.vander_x)?;
        let inv_mass_hat: Vec<f64> = mass.hat.diag().iter().map(|w| 1.0 / w).collect();
        let faraday_x = diff.delta_y.transpose().matmul(&k_x)?.scale_rows(&inv_mass_hat)?;
        let faraday_y = diff.delta_x.transpose().matmul(&k_y)?.scale_rows(&inv_mass_hat)?;
        let v = sp(&elem.vandermonde);
        let eval_w0 = kron_chain(&[&SparseMatrix::identity(mesh.n_elements()), &v, &v])?
            .scale(1.0 / (mesh.dx() * mesh.dy()));
        Ok(Self { mass, diff, k_x, k_y, inv_mass_hat, faraday_x, faraday_y, eval_w0 })
    }

    /// Length of one scalar field.
    pub fn field_len(&self) -> usize {
        self.inv_mass_hat.len()
    }

    pub fn vector_calculus(&self) -> VectorCalculus2D {
        discrete_vector_calculus(&self.diff)
    }
}

/// Poisson matrix `J` and Hamiltonian-gradient matrix `K` with `dU/dt = J K U`.
pub fn poisson_matrix(ops: &GlobalOperators2D) -> Result<(SparseMatrix, SparseMatrix)> {
    let inv = SparseMatrix::diagonal(&ops.inv_mass_hat);
    let dx = &ops.diff.delta_x;
    let dy = &ops.diff.delta_y;
    let j13 = dy.matmul(&inv)?;
    let j23 = dx.matmul(&inv)?.scale(-1.0);
    let j31 = inv.matmul(&dy.transpose())?.scale(-1.0);
    let j32 = inv.matmul(&dx.transpose())?;
    let j = SparseMatrix::block(&[
        vec![None, None, Some(&j13)],
        vec![None, None, Some(&j23)],
        vec![Some(&j31), Some(&j32), None],
    ])?;
    let k = SparseMatrix::block(&[
        vec![Some(&ops.k_x), None, None],
        vec![None, Some(&ops.k_y), None],
        vec![None, None, Some(&ops.mass.hat)],
    ])?;
    Ok((j, k))
}

/// Basis in one direction of a 3D tensor-product space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    Lagrange,
    Histopolation,
}

/// Single-element 3D complex on `(N+1)`-node Lagrange and `N`-interval
/// histopolation directions. Storage order is (z) ⊗ (y) ⊗ (x).
#[derive(Clone, Debug)]
pub struct DeRham3D {
    pub n: usize,
    /// `(N+1)³ → 3` components.
    pub grad: SparseMatrix,
    pub curl: SparseMatrix,
    /// Three components `→ N³`.
    pub div: SparseMatrix,
    vandermonde: SparseMatrix,
}

pub fn assemble_3d_complex(elem: &MimeticElementOps) -> Result<DeRham3D> {
    let n = elem.n;
    let il = SparseMatrix::identity(n + 1);
    let ih = SparseMatrix::identity(n);
    let d = sp(&elem.delta);
    let k3 = |z: &SparseMatrix, y: &SparseMatrix, x: &SparseMatrix| kron_chain(&[z, y, x]);

    let gx = k3(&il, &il, &d)?;
    let gy = k3(&il, &d, &il)?;
    let gz = k3(&d, &il, &il)?;
    let grad = SparseMatrix::block(&[vec![Some(&gx)], vec![Some(&gy)], vec![Some(&gz)]])?;

    // Inputs: u^x ∈ (H,L,L), u^y ∈ (L,H,L), u^z ∈ (L,L,H) in (x,y,z) order.
    let dy_uz = k3(&ih, &d, &il)?;
    let dz_uy = k3(&d, &ih, &il)?.scale(-1.0);
    let dz_ux = k3(&d, &il, &ih)?;
    let dx_uz = k3(&ih, &il, &d)?.scale(-1.0);
    let dx_uy = k3(&il, &ih, &d)?;
    let dy_ux = k3(&il, &d, &ih)?.scale(-1.0);
    let curl = SparseMatrix::block(&[
        vec![None, Some(&dz_uy), Some(&dy_uz)],
        vec![Some(&dz_ux), None, Some(&dx_uz)],
        vec![Some(&dy_ux), Some(&dx_uy), None],
    ])?;

    let dx_wx = k3(&ih, &ih, &d)?;
    let dy_wy = k3(&ih, &d, &ih)?;
    let dz_wz = k3(&d, &ih, &ih)?;
    let div = SparseMatrix::block(&[vec![Some(&dx_wx), Some(&dy_wy), Some(&dz_wz)]])?;

    Ok(DeRham3D { n, grad, curl, div, vandermonde: sp(&elem.vandermonde) })
}

impl DeRham3D {
    /// Maps coefficients of a field with the given (x, y, z) bases to nodal values
    /// on the `(N+1)³` reference grid.
    pub fn nodal_evaluator(&self, bases: [Basis; 3]) -> Result<SparseMatrix> {
        let il = SparseMatrix::identity(self.n + 1);
        let pick = |b: Basis| if b == Basis::Lagrange { &il } else { &self.vandermonde };
        kron_chain(&[pick(bases[2]), pick(bases[1]), pick(bases[0])])
    }

    /// Nodal values of the three gradient components.
    pub fn nodal_grad(&self, u: &[f64]) -> Result<[Vec<f64>; 3]> {
        let (l, h) = (Basis::Lagrange, Basis::Histopolation);
        let g = self.grad.matvec(u);
        let c = g.len() / 3;
        Ok([
            self.nodal_evaluator([h, l, l])?.matvec(&g[..c]),
            self.nodal_evaluator([l, h, l])?.matvec(&g[c..2 * c]),
            self.nodal_evaluator([l, l, h])?.matvec(&g[2 * c..]),
        ])
    }
}
