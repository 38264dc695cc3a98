//! Diagonal-norm summation-by-parts first-derivative operators on the
//! reference interval [0, 1] with equidistant nodes.
//!
//! Coefficients are read from exact-rational data files (see `data/`). Every
//! operator handed out by [`OperatorId::build`] has passed [`verify_sbp`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::DVector;
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

const SBP_24_DATA: &str = include_str!("../data/sbp_24.txt");
const SBP_36_DATA: &str = include_str!("../data/sbp_36.txt");

/// Registered operator families, named by (boundary order, interior order).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OperatorId {
    Sbp24,
    Sbp36,
}

impl OperatorId {
    pub const ALL: [OperatorId; 2] = [OperatorId::Sbp24, OperatorId::Sbp36];

    pub fn name(self) -> &'static str {
        match self {
            OperatorId::Sbp24 => "sbp24",
            OperatorId::Sbp36 => "sbp36",
        }
    }

    pub fn coefficients(self) -> &'static SbpCoefficients {
        static SBP_24: OnceLock<SbpCoefficients> = OnceLock::new();
        static SBP_36: OnceLock<SbpCoefficients> = OnceLock::new();
        let (cell, text) = match self {
            OperatorId::Sbp24 => (&SBP_24, SBP_24_DATA),
            OperatorId::Sbp36 => (&SBP_36, SBP_36_DATA),
        };
        cell.get_or_init(|| SbpCoefficients::parse(text).expect("bundled coefficient file is well formed"))
    }

    pub fn boundary_order(self) -> usize {
        self.coefficients().boundary_order
    }

    pub fn min_nodes(self) -> usize {
        self.coefficients().min_nodes()
    }

    /// Builds and verifies the operator on `n_nodes` equidistant nodes.
    pub fn build(self, n_nodes: usize) -> Result<SbpOperator1D> {
        let mut op = self.coefficients().build_verified(n_nodes)?;
        op.id = Some(self);
        Ok(op)
    }
}

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sbp24" | "sbp_24" | "sbp-24" => Ok(OperatorId::Sbp24),
            "sbp36" | "sbp_36" | "sbp-36" => Ok(OperatorId::Sbp36),
            other => Err(Error::InvalidArgument(format!("unknown operator `{other}` (expected sbp24 or sbp36)"))),
        }
    }
}

/// Boundary-order 2, interior-order 4 operator.
pub fn sbp_24(n_nodes: usize) -> Result<SbpOperator1D> {
    OperatorId::Sbp24.build(n_nodes)
}

/// Boundary-order 3, interior-order 6 operator.
pub fn sbp_36(n_nodes: usize) -> Result<SbpOperator1D> {
    OperatorId::Sbp36.build(n_nodes)
}

/// Grid-independent coefficients of an operator family.
///
/// Boundary block and stencil are stored multiplied by `h`, weights divided by `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct SbpCoefficients {
    pub boundary_order: usize,
    pub interior_order: usize,
    pub block_rows: usize,
    pub block_cols: usize,
    /// Row-major `block_rows x block_cols`.
    pub block: Vec<f64>,
    /// Offsets `-half_width..=half_width`.
    pub stencil: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SbpCoefficients {
    /// Parses the `key value` header followed by one rational per line.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::CoefficientData(msg);
        let mut header = std::collections::HashMap::new();
        let mut values = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let first = parts.next().unwrap_or_default();
            match parts.next() {
                Some(value) if values.is_empty() => {
                    let v: usize = value
                        .parse()
                        .map_err(|_| bad(format!("line {}: bad header value `{value}`", lineno + 1)))?;
                    header.insert(first.to_string(), v);
                }
                Some(_) => return Err(bad(format!("line {}: header after data", lineno + 1))),
                None => {
                    let r = Ratio::<i64>::from_str(first)
                        .map_err(|_| bad(format!("line {}: `{first}` is not a rational", lineno + 1)))?;
                    values.push(*r.numer() as f64 / *r.denom() as f64);
                }
            }
        }
        let key = |k: &str| header.get(k).copied().ok_or_else(|| bad(format!("missing header `{k}`")));
        let (rows, cols, half) = (key("block_rows")?, key("block_cols")?, key("stencil_half_width")?);
        let expected = rows * cols + 2 * half + 1 + rows;
        if values.len() != expected {
            return Err(bad(format!("expected {expected} coefficients, found {}", values.len())));
        }
        if rows == 0 || cols < rows || half > rows {
            return Err(bad(format!("inconsistent block layout {rows}x{cols} with stencil half width {half}")));
        }
        let stencil_start = rows * cols;
        let weights_start = stencil_start + 2 * half + 1;
        Ok(Self {
            boundary_order: key("boundary_order")?,
            interior_order: key("interior_order")?,
            block_rows: rows,
            block_cols: cols,
            block: values[..stencil_start].to_vec(),
            stencil: values[stencil_start..weights_start].to_vec(),
            weights: values[weights_start..].to_vec(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::CoefficientData(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn half_width(&self) -> usize {
        self.stencil.len() / 2
    }

    /// Smallest node count for which the two boundary blocks do not overlap.
    pub fn min_nodes(&self) -> usize {
        (2 * self.block_rows).max(self.block_cols)
    }

    /// Builds the operator without running the verification gate.
    pub fn build_unchecked(&self, n_nodes: usize) -> Result<SbpOperator1D> {
        if n_nodes < self.min_nodes() {
            return Err(Error::InvalidArgument(format!(
                "{n_nodes} nodes is below the minimum of {} for this operator",
                self.min_nodes()
            )));
        }
        let last = n_nodes - 1;
        let h = 1.0 / last as f64;
        let mut d = DenseMatrix::zeros(n_nodes, n_nodes);
        for i in 0..self.block_rows {
            for j in 0..self.block_cols {
                let c = self.block[i * self.block_cols + j] / h;
                d[(i, j)] = c;
                d[(last - i, last - j)] = -c;
            }
        }
        let half = self.half_width();
        for i in self.block_rows..n_nodes - self.block_rows {
            for (k, c) in self.stencil.iter().enumerate() {
                d[(i, i + k - half)] = c / h;
            }
        }
        let mut weights = vec![h; n_nodes];
        for (i, w) in self.weights.iter().enumerate() {
            weights[i] = w * h;
            weights[last - i] = w * h;
        }
        Ok(SbpOperator1D {
            id: None,
            n_nodes,
            h,
            d,
            weights,
            boundary_order: self.boundary_order,
            interior_order: self.interior_order,
            boundary_rows: self.block_rows,
        })
    }

    /// Builds the operator and rejects it unless every structural check passes.
    pub fn build_verified(&self, n_nodes: usize) -> Result<SbpOperator1D> {
        let op = self.build_unchecked(n_nodes)?;
        let report = verify_sbp(&op);
        if !report.passed() {
            return Err(Error::Verification(report.failures().join("; ")));
        }
        Ok(op)
    }
}

/// A first-derivative SBP operator on [0, 1] with `n_nodes` equidistant nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SbpOperator1D {
    pub id: Option<OperatorId>,
    pub n_nodes: usize,
    /// Reference grid spacing `1 / (n_nodes - 1)`.
    pub h: f64,
    /// Nodal derivative matrix.
    pub d: DenseMatrix,
    /// Diagonal of the norm matrix.
    pub weights: Vec<f64>,
    pub boundary_order: usize,
    pub interior_order: usize,
    /// Number of rows at each end that use boundary closures.
    pub boundary_rows: usize,
}

impl SbpOperator1D {
    /// Number of sub-intervals `N`.
    pub fn n_intervals(&self) -> usize {
        self.n_nodes - 1
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|i| i as f64 * self.h).collect()
    }

    pub fn norm_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_diagonal(&DVector::from_column_slice(&self.weights))
    }

    /// `diag(-1, 0, ..., 0, 1)`.
    pub fn boundary_matrix(&self) -> DenseMatrix {
        let mut b = DenseMatrix::zeros(self.n_nodes, self.n_nodes);
        b[(0, 0)] = -1.0;
        b[(self.n_nodes - 1, self.n_nodes - 1)] = 1.0;
        b
    }

    /// Derivative matrix and weights for an element of physical length `length`.
    pub fn scaled_to(&self, length: f64) -> (DenseMatrix, Vec<f64>) {
        (&self.d / length, self.weights.iter().map(|w| w * length).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Outcome of the structural checks on an SBP operator.
#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    /// `max |M D + Dᵀ M − B|`.
    pub sbp_identity: f64,
    /// `max |D 1|`.
    pub row_sum: f64,
    /// `h · max |D x^k − k x^(k−1)|` over boundary rows, `k ≤ boundary_order`.
    pub boundary_exactness: f64,
    /// Same over interior rows, `k ≤ interior_order`.
    pub interior_exactness: f64,
    pub min_weight: f64,
    /// Number of singular values of D below `1e-10 · σ_max`.
    pub rank_deficiency: usize,
}

pub const SBP_IDENTITY_TOL: f64 = 1e-13;
pub const ROW_SUM_TOL: f64 = 1e-13;
pub const EXACTNESS_TOL: f64 = 1e-12;
pub const RANK_REL_TOL: f64 = 1e-10;

impl VerificationReport {
    pub fn checks(&self) -> Vec<Check> {
        let le = |name, value: f64, threshold| Check { name, value, threshold, passed: value <= threshold };
        vec![
            le("sbp identity", self.sbp_identity, SBP_IDENTITY_TOL),
            le("row sums", self.row_sum, ROW_SUM_TOL),
            le("boundary exactness", self.boundary_exactness, EXACTNESS_TOL),
            le("interior exactness", self.interior_exactness, EXACTNESS_TOL),
            Check { name: "positive weights", value: self.min_weight, threshold: 0.0, passed: self.min_weight > 0.0 },
            Check {
                name: "rank deficiency",
                value: self.rank_deficiency as f64,
                threshold: 1.0,
                passed: self.rank_deficiency == 1,
            },
        ]
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks()
            .into_iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} = {:e} (threshold {:e})", c.name, c.value, c.threshold))
            .collect()
    }
}

pub fn verify_sbp(op: &SbpOperator1D) -> VerificationReport {
    let n = op.n_nodes;
    let m = op.norm_matrix();
    let q = &m * &op.d;
    let sbp_identity = (&q + q.transpose() - op.boundary_matrix()).abs().max();

    let row_sum = (0..n).map(|i| op.d.row(i).sum().abs()).fold(0.0, f64::max);

    let x = op.nodes();
    let monomial_error = |row: usize, k: usize| -> f64 {
        let approx: f64 = (0..n).map(|j| op.d[(row, j)] * x[j].powi(k as i32)).sum();
        let exact = if k == 0 { 0.0 } else { k as f64 * x[row].powi(k as i32 - 1) };
        op.h * (approx - exact).abs()
    };
    let is_boundary = |i: usize| i < op.boundary_rows || i >= n - op.boundary_rows;
    let worst = |rows: &mut dyn Iterator<Item = usize>, order: usize| {
        rows.flat_map(|i| (0..=order).map(move |k| (i, k)))
            .map(|(i, k)| monomial_error(i, k))
            .fold(0.0, f64::max)
    };
    let boundary_exactness = worst(&mut (0..n).filter(|&i| is_boundary(i)), op.boundary_order);
    let interior_exactness = worst(&mut (0..n).filter(|&i| !is_boundary(i)), op.interior_order);

    let min_weight = op.weights.iter().copied().fold(f64::INFINITY, f64::min);

    let sv = op.d.clone().singular_values();
    let smax = sv.max();
    let rank_deficiency = sv.iter().filter(|&&s| s < RANK_REL_TOL * smax).count();

    VerificationReport { sbp_identity, row_sum, boundary_exactness, interior_exactness, min_weight, rank_deficiency }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sbp_24_printed_entries() {
        let op = sbp_24(16).unwrap();
        let h = op.h;
        assert!((op.d[(0, 0)] + 24.0 / 17.0 / h).abs() < 1e-12);
        assert!((op.d[(0, 1)] - 59.0 / 34.0 / h).abs() < 1e-12);
        assert!((op.d[(3, 4)] - 32.0 / 49.0 / h).abs() < 1e-12);
        // Mirrored lower-right block.
        assert!((op.d[(15, 15)] - 24.0 / 17.0 / h).abs() < 1e-12);
        assert!((op.d[(15, 14)] + 59.0 / 34.0 / h).abs() < 1e-12);
        // Interior stencil.
        assert!((op.d[(7, 5)] - 1.0 / 12.0 / h).abs() < 1e-12);
        assert!((op.d[(7, 8)] - 2.0 / 3.0 / h).abs() < 1e-12);
        assert!((op.weights[0] - 17.0 / 48.0 * h).abs() < 1e-15);
        assert!((op.weights[12] - 49.0 / 48.0 * h).abs() < 1e-15);
        assert!((op.weights[7] - h).abs() < 1e-15);
    }

    #[test]
    fn constants_are_annihilated() {
        for id in OperatorId::ALL {
            let op = id.build(id.min_nodes() + 3).unwrap();
            let ones = DVector::from_element(op.n_nodes, 1.0);
            assert!((&op.d * ones).amax() < 1e-13);
        }
    }

    #[test]
    fn registered_operators_verify() {
        for (id, sizes) in [(OperatorId::Sbp24, [8, 9, 12, 16, 32]), (OperatorId::Sbp36, [12, 13, 14, 20, 40])] {
            for n in sizes {
                let op = id.build(n).unwrap();
                let r = verify_sbp(&op);
                assert!(r.passed(), "{id} n={n}: {:?}", r.failures());
                assert!(r.sbp_identity <= 1e-13);
            }
        }
    }

    #[test]
    fn sbp_24_16_has_tiny_deviations() {
        let r = verify_sbp(&sbp_24(16).unwrap());
        for c in r.checks().iter().filter(|c| c.name != "positive weights" && c.name != "rank deficiency") {
            assert!(c.value < 1e-13, "{}: {:e}", c.name, c.value);
        }
    }

    #[test]
    fn sixth_order_interior_reproduces_cubic_derivative() {
        let op = sbp_36(24).unwrap();
        let x = op.nodes();
        for i in op.boundary_rows..op.n_nodes - op.boundary_rows {
            let d: f64 = (0..op.n_nodes).map(|j| op.d[(i, j)] * x[j].powi(3)).sum();
            assert!((d - 3.0 * x[i] * x[i]).abs() * op.h < 1e-12);
        }
    }

    #[test]
    fn too_few_nodes_rejected() {
        assert!(sbp_24(7).is_err());
        assert!(sbp_36(11).is_err());
        assert!(sbp_24(8).is_ok());
        assert!(sbp_36(12).is_ok());
    }

    #[test]
    fn zero_weight_fails_positivity() {
        let mut op = sbp_24(12).unwrap();
        op.weights[3] = 0.0;
        let r = verify_sbp(&op);
        assert!(!r.passed());
        assert!(r.failures().iter().any(|f| f.starts_with("positive weights")));
    }

    #[test]
    fn perturbation_shows_up_weighted() {
        let eps = 1e-6;
        let mut op = sbp_24(16).unwrap();
        op.d[(5, 6)] += eps;
        let r = verify_sbp(&op);
        let expected = op.weights[5] * eps;
        assert!((r.sbp_identity - expected).abs() < 1e-3 * expected, "{} vs {}", r.sbp_identity, expected);
        assert!(!r.passed());
    }

    #[test]
    fn identity_is_scale_invariant() {
        let op = sbp_36(15).unwrap();
        for length in [0.25, 2.0, 7.5] {
            let (d, w) = op.scaled_to(length);
            let m = DenseMatrix::from_diagonal(&DVector::from_vec(w));
            let q = &m * &d;
            assert!((&q + q.transpose() - op.boundary_matrix()).abs().max() < 1e-13);
        }
    }

    #[test]
    fn parse_rejects_malformed_files() {
        assert!(SbpCoefficients::parse("block_rows 1\nblock_cols 1\nstencil_half_width 0\n1/2\n").is_err());
        assert!(SbpCoefficients::parse("boundary_order 1\ninterior_order 2\nblock_rows 1\nblock_cols 2\nstencil_half_width 1\n-1\n1\n-1/2\n0\nfoo\n1/2\n").is_err());
        let ok = "boundary_order 1\ninterior_order 2\nblock_rows 1\nblock_cols 2\nstencil_half_width 1\n-1\n1\n-1/2\n0\n1/2\n1/2\n";
        let c = SbpCoefficients::parse(ok).unwrap();
        let op = c.build_verified(5).unwrap();
        assert_eq!(op.boundary_order, 1);
    }

    #[test]
    fn names_round_trip() {
        for id in OperatorId::ALL {
            assert_eq!(id.name().parse::<OperatorId>().unwrap(), id);
        }
        assert!("sbp48".parse::<OperatorId>().is_err());
    }
}
