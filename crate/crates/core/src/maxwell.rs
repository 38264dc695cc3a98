//! Semi-discrete transverse-electric Maxwell system on a periodic mesh.
//!
//! The state is one flat vector `[Ē^x; Ē^y; B^z]`, each block `m N²` long in the
//! layouts of [`crate::mesh::Space`]: `Ē^x` in `W1x`, `Ē^y` in `W1y`, `B^z` in `W2`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use crate::error::{Error, Result};
use crate::linalg::{dot, max_abs, SparseMatrix};
use crate::mesh::{PeriodicMesh2D, Space};
use crate::mimetic::MimeticElementOps;
use crate::operators_2d::{poisson_matrix, GlobalOperators2D};
use crate::sbp_operators::SbpOperator1D;

#[derive(Clone, Debug, PartialEq)]
pub struct MaxwellState {
    /// `[Ē^x; Ē^y; B^z]`.
    pub u: Vec<f64>,
    pub t: f64,
}

impl MaxwellState {
    pub fn zeros(field_len: usize) -> Self {
        Self { u: vec![0.0; 3 * field_len], t: 0.0 }
    }

    pub fn field_len(&self) -> usize {
        self.u.len() / 3
    }

    pub fn ex(&self) -> &[f64] {
        &self.u[..self.field_len()]
    }

    pub fn ey(&self) -> &[f64] {
        let n = self.field_len();
        &self.u[n..2 * n]
    }

    pub fn bz(&self) -> &[f64] {
        let n = self.field_len();
        &self.u[2 * n..]
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().all(|v| v.is_finite())
    }
}

/// Standing-wave solution on `[−1, 1]²` with unit light speed:
///
/// ```text
/// B^z = cos(πx+π) cos(πy+π) cos(√2πt)
/// E^x = −(1/√2) cos(πx+π) sin(πy+π) sin(√2πt)
/// E^y =  (1/√2) sin(πx+π) cos(πy+π) sin(√2πt)
/// ```
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestCase {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl Default for TestCase {
    fn default() -> Self {
        Self { x_range: (-1.0, 1.0), y_range: (-1.0, 1.0) }
    }
}

const OMEGA: f64 = SQRT_2 * PI;

impl TestCase {
    pub fn bz(&self, x: f64, y: f64, t: f64) -> f64 {
        (PI * x + PI).cos() * (PI * y + PI).cos() * (OMEGA * t).cos()
    }

    pub fn ex(&self, x: f64, y: f64, t: f64) -> f64 {
        -FRAC_1_SQRT_2 * (PI * x + PI).cos() * (PI * y + PI).sin() * (OMEGA * t).sin()
    }

    pub fn ey(&self, x: f64, y: f64, t: f64) -> f64 {
        FRAC_1_SQRT_2 * (PI * x + PI).sin() * (PI * y + PI).cos() * (OMEGA * t).sin()
    }

    /// `∫_{y0}^{y1} E^x(x, y, t) dy` in closed form.
    pub fn ex_line_integral(&self, x: f64, y0: f64, y1: f64, t: f64) -> f64 {
        let anti = |y: f64| -(PI * y + PI).cos() / PI;
        -FRAC_1_SQRT_2 * (PI * x + PI).cos() * (anti(y1) - anti(y0)) * (OMEGA * t).sin()
    }

    /// `∫_{x0}^{x1} E^y(x, y, t) dx` in closed form.
    pub fn ey_line_integral(&self, x0: f64, x1: f64, y: f64, t: f64) -> f64 {
        let anti = |x: f64| -(PI * x + PI).cos() / PI;
        FRAC_1_SQRT_2 * (anti(x1) - anti(x0)) * (PI * y + PI).cos() * (OMEGA * t).sin()
    }
}

/// Gauss-Legendre nodes and weights on `[−1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// `∫_a^b f` by a single 10-point Gauss-Legendre rule.
pub fn gauss_integral(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    use std::sync::OnceLock;
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (nodes, weights) = RULE.get_or_init(|| gauss_legendre(10));
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    half * nodes.iter().zip(weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>()
}

/// Reduces arbitrary fields onto the discrete spaces: nodal samples for `B^z`,
/// sub-interval line integrals (10-point Gauss) for `Ē^x` and `Ē^y`.
pub fn reduce_fields(
    mesh: &PeriodicMesh2D,
    ex: impl Fn(f64, f64) -> f64,
    ey: impl Fn(f64, f64) -> f64,
    bz: impl Fn(f64, f64) -> f64,
) -> Vec<f64> {
    let layout = mesh.layout(Space::W2);
    let len = layout.len();
    let mut u = vec![0.0; 3 * len];
    for k in 0..mesh.n_elements() {
        let (kx, ky) = mesh.element_coords(k);
        let (xs, ys) = (mesh.x_nodes(kx), mesh.y_nodes(ky));
        for iy in 0..mesh.n {
            for ix in 0..mesh.n {
                let g = layout.index(k, ix, iy);
                u[g] = gauss_integral(|y| ex(xs[ix], y), ys[iy], ys[iy + 1]);
                u[len + g] = gauss_integral(|x| ey(x, ys[iy]), xs[ix], xs[ix + 1]);
                u[2 * len + g] = bz(xs[ix], ys[iy]);
            }
        }
    }
    u
}

pub fn initial_state(mesh: &PeriodicMesh2D, test_case: &TestCase) -> MaxwellState {
    exact_reduction(test_case, 0.0, mesh)
}

/// Exact solution at time `t` projected onto the discrete spaces, with the
/// electric line integrals evaluated in closed form.
pub fn exact_reduction(test_case: &TestCase, t: f64, mesh: &PeriodicMesh2D) -> MaxwellState {
    let layout = mesh.layout(Space::W2);
    let len = layout.len();
    let mut u = vec![0.0; 3 * len];
    for k in 0..mesh.n_elements() {
        let (kx, ky) = mesh.element_coords(k);
        let (xs, ys) = (mesh.x_nodes(kx), mesh.y_nodes(ky));
        for iy in 0..mesh.n {
            for ix in 0..mesh.n {
                let g = layout.index(k, ix, iy);
                u[g] = test_case.ex_line_integral(xs[ix], ys[iy], ys[iy + 1], t);
                u[len + g] = test_case.ey_line_integral(xs[ix], xs[ix + 1], ys[iy], t);
                u[2 * len + g] = test_case.bz(xs[ix], ys[iy], t);
            }
        }
    }
    MaxwellState { u, t }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Divergence {
    /// `Δx Ē^x + Δy Ē^y`, histopolation in both directions.
    pub coefficients: Vec<f64>,
    /// Values at the `(N+1)²` nodes of every element.
    pub nodal: Vec<f64>,
    pub max_abs_nodal: f64,
    pub max_abs_coeff: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    /// `√(e_xᵀ K_x e_x)`.
    pub e_x: f64,
    /// `√(e_yᵀ K_y e_y)`.
    pub e_y: f64,
    pub b: f64,
}

impl ErrorNorms {
    /// Combined electric error `√(e_x² + e_y²)`.
    pub fn e_total(&self) -> f64 {
        self.e_x.hypot(self.e_y)
    }
}

/// Mesh, element operators and assembled global operators of one discretization.
#[derive(Clone, Debug)]
pub struct MaxwellSystem {
    pub mesh: PeriodicMesh2D,
    pub op: SbpOperator1D,
    pub elem: MimeticElementOps,
    pub ops: GlobalOperators2D,
}

impl MaxwellSystem {
    /// Builds the operators on `mesh` from an operator on the unit reference element.
    pub fn new(mesh: PeriodicMesh2D, op: &SbpOperator1D) -> Result<Self> {
        if op.n_intervals() != mesh.n {
            return Err(Error::DimensionMismatch(format!(
                "operator has {} sub-intervals, mesh expects {}",
                op.n_intervals(),
                mesh.n
            )));
        }
        let op = op.clone();
        let elem = MimeticElementOps::new(&op);
        let ops = GlobalOperators2D::assemble(&mesh, &elem)?;
        Ok(Self { mesh, op, elem, ops })
    }

    pub fn field_len(&self) -> usize {
        self.ops.field_len()
    }

    pub fn state_len(&self) -> usize {
        3 * self.field_len()
    }

    /// Weak-form time derivative `du = J K u`, written into `du`.
    pub fn rhs_weak(&self, u: &[f64], du: &mut [f64]) {
        let n = self.field_len();
        let (ex, rest) = u.split_at(n);
        let (ey, bz) = rest.split_at(n);
        let (dex, rest) = du.split_at_mut(n);
        let (dey, dbz) = rest.split_at_mut(n);
        self.ops.diff.delta_y.matvec_into(bz, dex);
        self.ops.diff.delta_x.matvec_into(bz, dey);
        dey.iter_mut().for_each(|v| *v = -*v);
        self.ops.faraday_y.matvec_into(ey, dbz);
        self.ops.faraday_x.matvec_acc(-1.0, ex, dbz);
    }

    pub fn rhs_weak_vec(&self, u: &[f64]) -> Vec<f64> {
        let mut du = vec![0.0; u.len()];
        self.rhs_weak(u, &mut du);
        du
    }

    /// `dB^z/dt` from the nodal strong form: element-local SBP derivatives of
    /// the nodal electric field, with a weighted average and a jump penalty at
    /// the left and lower element boundaries.
    pub fn rhs_strong_faraday(&self, u: &[f64]) -> Vec<f64> {
        let n = self.field_len();
        let big_n = self.mesh.n;
        let np = big_n + 1;
        let ey_nod = self.ops.diff.vander_x.matvec(&u[n..2 * n]);
        let ex_nod = self.ops.diff.vander_y.matvec(&u[..n]);
        let d = &self.op.d;
        let w = &self.op.weights;
        let w_edge = w[0] + w[big_n];
        let (dx, dy) = (self.mesh.dx(), self.mesh.dy());
        let layout = self.mesh.layout(Space::W2);
        let block = big_n * np;
        // Ey nodal: element * N(N+1) + l (N+1) + i.  Ex nodal: element * (N+1)N + j N + k.
        let ey_at = |e: usize, l: usize, i: usize| ey_nod[e * block + l * np + i];
        let ex_at = |e: usize, j: usize, k: usize| ex_nod[e * block + j * big_n + k];
        let dey = |e: usize, l: usize, row: usize| (0..np).map(|i| d[(row, i)] * ey_at(e, l, i)).sum::<f64>();
        let dex = |e: usize, k: usize, row: usize| (0..np).map(|j| d[(row, j)] * ex_at(e, j, k)).sum::<f64>();

        let mut dbz = vec![0.0; n];
        for e in 0..self.mesh.n_elements() {
            let (left, down) = (self.mesh.left(e), self.mesh.down(e));
            for l in 0..big_n {
                for k in 0..big_n {
                    let x_part = if k > 0 {
                        -dey(e, l, k) / dx
                    } else {
                        let jump = ey_at(left, l, big_n) - ey_at(e, l, 0);
                        (jump - w[0] * dey(e, l, 0) - w[big_n] * dey(left, l, big_n)) / (dx * w_edge)
                    };
                    let y_part = if l > 0 {
                        dex(e, k, l) / dy
                    } else {
                        let jump = ex_at(down, big_n, k) - ex_at(e, 0, k);
                        (w[0] * dex(e, k, 0) + w[big_n] * dex(down, k, big_n) - jump) / (dy * w_edge)
                    };
                    dbz[layout.index(e, k, l)] = x_part + y_part;
                }
            }
        }
        dbz
    }

    pub fn hamiltonian(&self, u: &[f64]) -> f64 {
        let n = self.field_len();
        let (ex, ey, bz) = (&u[..n], &u[n..2 * n], &u[2 * n..]);
        let quad = |m: &SparseMatrix, v: &[f64]| dot(v, &m.matvec(v));
        0.5 * (quad(&self.ops.k_x, ex) + quad(&self.ops.k_y, ey) + quad(&self.ops.mass.hat, bz))
    }

    /// Gradient of the Hamiltonian, `K u`.
    pub fn hamiltonian_gradient(&self, u: &[f64]) -> Vec<f64> {
        let n = self.field_len();
        let mut g = vec![0.0; 3 * n];
        self.ops.k_x.matvec_into(&u[..n], &mut g[..n]);
        self.ops.k_y.matvec_into(&u[n..2 * n], &mut g[n..2 * n]);
        self.ops.mass.hat.matvec_into(&u[2 * n..], &mut g[2 * n..]);
        g
    }

    pub fn poisson_matrix(&self) -> Result<(SparseMatrix, SparseMatrix)> {
        poisson_matrix(&self.ops)
    }

    pub fn divergence(&self, u: &[f64]) -> Divergence {
        let n = self.field_len();
        let mut coefficients = self.ops.diff.delta_x.matvec(&u[..n]);
        self.ops.diff.delta_y.matvec_acc(1.0, &u[n..2 * n], &mut coefficients);
        let nodal = self.ops.eval_w0.matvec(&coefficients);
        Divergence { max_abs_nodal: max_abs(&nodal), max_abs_coeff: max_abs(&coefficients), coefficients, nodal }
    }

    /// Errors against the exact solution at `state.t`, measured in the global
    /// mass matrices. The electric components are evaluated at the grid nodes
    /// through the Vandermonde operators and compared with point values of the
    /// exact field; `B^z` is compared with its nodal samples.
    pub fn l2_errors(&self, state: &MaxwellState, test_case: &TestCase) -> ErrorNorms {
        let n = self.field_len();
        let t = state.t;
        let big_n = self.mesh.n;
        let np = big_n + 1;
        let ex_nod = self.ops.diff.vander_y.matvec(&state.u[..n]);
        let ey_nod = self.ops.diff.vander_x.matvec(&state.u[n..2 * n]);
        let (mx, my) = (self.ops.mass.x.diag(), self.ops.mass.y.diag());
        let (mut sx, mut sy) = (0.0, 0.0);
        for e in 0..self.mesh.n_elements() {
            let (kx, ky) = self.mesh.element_coords(e);
            let (xs, ys) = (self.mesh.x_nodes(kx), self.mesh.y_nodes(ky));
            for a in 0..np {
                for b in 0..big_n {
                    // Ex: y node a, x node b.  Ey: y node b, x node a.
                    let gx = e * np * big_n + a * big_n + b;
                    let dx = ex_nod[gx] - test_case.ex(xs[b], ys[a], t);
                    sx += mx[gx] * dx * dx;
                    let gy = e * big_n * np + b * np + a;
                    let dy = ey_nod[gy] - test_case.ey(xs[a], ys[b], t);
                    sy += my[gy] * dy * dy;
                }
            }
        }
        let exact = exact_reduction(test_case, t, &self.mesh);
        let b = self.coefficient_errors(&state.u, &exact.u).b;
        ErrorNorms { e_x: sx.sqrt(), e_y: sy.sqrt(), b }
    }

    /// Coefficient-level distance between two states: `K_x`, `K_y` and `M̂²ᴰ` norms.
    pub fn coefficient_errors(&self, u: &[f64], reference: &[f64]) -> ErrorNorms {
        let n = self.field_len();
        let e: Vec<f64> = u.iter().zip(reference).map(|(a, b)| a - b).collect();
        let norm = |m: &SparseMatrix, v: &[f64]| dot(v, &m.matvec(v)).max(0.0).sqrt();
        ErrorNorms {
            e_x: norm(&self.ops.k_x, &e[..n]),
            e_y: norm(&self.ops.k_y, &e[n..2 * n]),
            b: norm(&self.ops.mass.hat, &e[2 * n..]),
        }
    }
}
