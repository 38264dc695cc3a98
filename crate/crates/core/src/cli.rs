//! Command-line front end: configuration, the `simulate`, `convergence` and
//! `verify` drivers, and CSV output.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{rngs::StdRng, Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::{dot, max_abs, DenseMatrix};
use crate::maxwell::{exact_reduction, initial_state, ErrorNorms, MaxwellSystem, TestCase};
use crate::mesh::build_mesh;
use crate::mimetic::{full_difference, vandermonde, MimeticElementOps};
use crate::operators_2d::assemble_3d_complex;
use crate::sbp_operators::{verify_sbp, Check, OperatorId, SbpCoefficients, SbpOperator1D};
use crate::time_integration::{integrate, IntegrationResult, IntegratorConfig, Scheme, StepSize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { code: EXIT_NUMERICAL, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) | Error::CoefficientData(_) | Error::DimensionMismatch(_) => EXIT_CONFIG,
            _ => EXIT_NUMERICAL,
        };
        Self { code, message: e.to_string() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementMode {
    /// Vary elements per direction at fixed points per element.
    Elements,
    /// Vary points per element on a fixed mesh.
    Points,
}

fn default_operator() -> String {
    "sbp24".into()
}
fn one() -> usize {
    1
}
fn minus_one() -> f64 {
    -1.0
}
fn plus_one() -> f64 {
    1.0
}
fn default_scheme() -> Scheme {
    Scheme::Ssprk3
}
fn default_tol() -> f64 {
    1e-12
}

/// Flat run configuration; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_operator")]
    pub operator: String,
    /// Coefficient file overriding `operator`.
    #[serde(default)]
    pub operator_file: Option<PathBuf>,
    #[serde(default = "one")]
    pub elements_x: usize,
    #[serde(default = "one")]
    pub elements_y: usize,
    pub points_per_element: usize,
    #[serde(default = "minus_one")]
    pub x_min: f64,
    #[serde(default = "plus_one")]
    pub x_max: f64,
    #[serde(default = "minus_one")]
    pub y_min: f64,
    #[serde(default = "plus_one")]
    pub y_max: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub cfl: Option<f64>,
    pub end_time: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub manifest: bool,
    #[serde(default)]
    pub mode: Option<RefinementMode>,
    #[serde(default)]
    pub levels: Option<Vec<usize>>,
    /// Compare the exact reduction with itself instead of running the solver.
    #[serde(default)]
    pub self_test: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::config(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn integrator(&self) -> CliResult<IntegratorConfig> {
        let step = match (self.dt, self.cfl) {
            (Some(dt), None) => StepSize::Fixed(dt),
            (None, Some(c)) => StepSize::Cfl(c),
            (Some(_), Some(_)) => return Err(CliError::config("config: `dt` and `cfl` are mutually exclusive")),
            (None, None) => return Err(CliError::config("config: one of `dt` or `cfl` is required")),
        };
        let cfg = IntegratorConfig { scheme: self.scheme, step, end_time: self.end_time, tol: self.tol, stride: self.stride };
        cfg.validate().map_err(|e| CliError::config(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.integrator()?;
        if self.elements_x == 0 || self.elements_y == 0 {
            return Err(CliError::config("config: `elements_x` and `elements_y` must be positive"));
        }
        if !(self.x_max > self.x_min && self.y_max > self.y_min) {
            return Err(CliError::config("config: domain bounds must satisfy x_min < x_max and y_min < y_max"));
        }
        if self.operator_file.is_none() {
            self.operator.parse::<OperatorId>().map_err(|e| CliError::config(format!("config: `operator`: {e}")))?;
        }
        Ok(())
    }

    pub fn operator_label(&self) -> String {
        match &self.operator_file {
            Some(p) => p.display().to_string(),
            None => self.operator.clone(),
        }
    }

    /// Builds the verified operator on `n_nodes` nodes.
    pub fn build_operator(&self, n_nodes: usize) -> CliResult<SbpOperator1D> {
        match &self.operator_file {
            Some(p) => Ok(SbpCoefficients::from_file(p)?.build_verified(n_nodes)?),
            None => {
                let id: OperatorId =
                    self.operator.parse().map_err(|e| CliError::config(format!("config: `operator`: {e}")))?;
                Ok(id.build(n_nodes)?)
            }
        }
    }

    pub fn system(&self, mx: usize, my: usize, n_nodes: usize) -> CliResult<MaxwellSystem> {
        let op = self.build_operator(n_nodes)?;
        let mesh = build_mesh(mx, my, (self.x_min, self.x_max), (self.y_min, self.y_max), op.n_intervals())?;
        Ok(MaxwellSystem::new(mesh, &op)?)
    }
}

/// Refinement study derived from a [`RunConfig`] with `mode` and `levels`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStudy {
    pub mode: RefinementMode,
    pub levels: Vec<usize>,
    pub base: RunConfig,
}

impl ConvergenceStudy {
    pub fn from_config(base: RunConfig) -> CliResult<Self> {
        base.validate()?;
        let mode = base.mode.unwrap_or(RefinementMode::Elements);
        let levels = base.levels.clone().ok_or_else(|| CliError::config("config: `levels` is required"))?;
        if levels.len() < 2 {
            return Err(CliError::config("config: `levels` needs at least two entries"));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) || levels[0] == 0 {
            return Err(CliError::config("config: `levels` must be positive and strictly increasing"));
        }
        Ok(Self { mode, levels, base })
    }

    /// `(elements per direction, points per element)` of a level.
    pub fn level_shape(&self, level: usize) -> (usize, usize) {
        match self.mode {
            RefinementMode::Elements => (level, self.base.points_per_element),
            RefinementMode::Points => (self.base.elements_x, level),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub elements_per_dim: usize,
    pub points_per_element: usize,
    pub err_e: f64,
    pub eoc_e: Option<f64>,
    pub err_b: f64,
    pub eoc_b: Option<f64>,
}

/// `log(e_coarse / e_fine) / log(r)`, undefined for vanishing or non-finite errors.
pub fn eoc(e_coarse: f64, e_fine: f64, ratio: f64) -> Option<f64> {
    let v = (e_coarse / e_fine).ln() / ratio.ln();
    (e_coarse > 0.0 && e_fine > 0.0 && v.is_finite()).then_some(v)
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

pub fn diagnostics_csv(result: &IntegrationResult) -> String {
    let mut out = String::from("step,t,energy,energy_drift,div_max_nodal,div_max_coeff\n");
    for r in &result.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.step,
            fmt_num(r.t),
            fmt_num(r.energy),
            fmt_num(r.energy_drift),
            fmt_num(r.div_max_nodal),
            fmt_num(r.div_max_coeff)
        );
    }
    out
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("level,elements_per_dim,points_per_element,err_E,eoc_E,err_B,eoc_B\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.level,
            r.elements_per_dim,
            r.points_per_element,
            fmt_num(r.err_e),
            fmt_opt(r.eoc_e),
            fmt_num(r.err_b),
            fmt_opt(r.eoc_b)
        );
    }
    out
}

#[derive(Clone, Debug, Serialize)]
struct Manifest {
    command: &'static str,
    operator: String,
    scheme: String,
    elements_interpretation: &'static str,
    electric_error: &'static str,
    config: RunConfig,
}

fn write_manifest(output: &Path, command: &'static str, cfg: &RunConfig) -> CliResult<()> {
    let m = Manifest {
        command,
        operator: cfg.operator_label(),
        scheme: cfg.scheme.to_string(),
        elements_interpretation: "per direction (m x m mesh)",
        electric_error: "per component: Vandermonde-evaluated nodal E against exact point values, weighted by Mx",
        config: cfg.clone(),
    };
    let text = toml::to_string(&m).map_err(|e| CliError::config(format!("manifest: {e}")))?;
    let mut path = output.as_os_str().to_owned();
    path.push(".manifest.toml");
    std::fs::write(&path, text).map_err(|e| CliError::config(format!("cannot write manifest: {e}")))
}

fn write_output(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::config(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub struct SimulationOutcome {
    pub result: IntegrationResult,
    pub errors: ErrorNorms,
    pub csv: String,
}

pub fn cmd_simulate(cfg: &RunConfig) -> CliResult<SimulationOutcome> {
    cfg.validate()?;
    let integrator = cfg.integrator()?;
    let system = cfg.system(cfg.elements_x, cfg.elements_y, cfg.points_per_element)?;
    let tc = TestCase::default();
    let result = integrate(&integrator, &system, initial_state(&system.mesh, &tc))?;
    let errors = system.l2_errors(&result.state, &tc);
    let csv = diagnostics_csv(&result);
    Ok(SimulationOutcome { result, errors, csv })
}

fn run_level(study: &ConvergenceStudy, level: usize) -> CliResult<(usize, usize, ErrorNorms)> {
    let (m, np) = study.level_shape(level);
    let system = study.base.system(m, m, np)?;
    let tc = TestCase::default();
    if study.base.self_test {
        let st = exact_reduction(&tc, study.base.end_time, &system.mesh);
        return Ok((m, np, system.coefficient_errors(&st.u, &st.u)));
    }
    let integrator = study.base.integrator()?;
    let res = integrate(&integrator, &system, initial_state(&system.mesh, &tc))?;
    Ok((m, np, system.l2_errors(&res.state, &tc)))
}

/// Runs all levels (concurrently) and assembles the table in level order.
pub fn cmd_convergence(study: &ConvergenceStudy) -> CliResult<Vec<ConvergenceRow>> {
    let results: Vec<CliResult<(usize, usize, ErrorNorms)>> =
        study.levels.par_iter().map(|&level| run_level(study, level)).collect();
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        let (m, np, e) = r?;
        let row = match rows.last() {
            None => ConvergenceRow {
                level: i,
                elements_per_dim: m,
                points_per_element: np,
                err_e: e.e_x,
                eoc_e: None,
                err_b: e.b,
                eoc_b: None,
            },
            Some(prev) => {
                let ratio = match study.mode {
                    RefinementMode::Elements => m as f64 / prev.elements_per_dim as f64,
                    RefinementMode::Points => np as f64 / prev.points_per_element as f64,
                };
                ConvergenceRow {
                    level: i,
                    elements_per_dim: m,
                    points_per_element: np,
                    err_e: e.e_x,
                    eoc_e: eoc(prev.err_e, e.e_x, ratio),
                    err_b: e.b,
                    eoc_b: eoc(prev.err_b, e.b, ratio),
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Operator source and mesh for `verify`.
#[derive(Clone, Debug)]
pub struct VerifyRequest {
    pub operator: Option<OperatorId>,
    pub operator_file: Option<PathBuf>,
    pub elements: usize,
    pub points: usize,
    pub seed: u64,
    pub samples: usize,
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub label: String,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = format!("verify {}\n", self.label);
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{tag}  {:<28} {:.3e} (threshold {:.1e})", c.name, c.value, c.threshold);
        }
        let _ = writeln!(out, "{}", if self.passed() { "all checks passed" } else { "verification FAILED" });
        out
    }
}

fn le(name: &'static str, value: f64, threshold: f64) -> Check {
    Check { name, value, threshold, passed: value <= threshold }
}

fn rel_dev(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).abs().max() / b.abs().max().max(1.0)
}

pub fn cmd_verify(req: &VerifyRequest) -> CliResult<VerifyReport> {
    // The operator is deliberately built without verification so that a
    // corrupted file shows up as failing checks rather than a load error.
    let (label, op) = match (&req.operator_file, req.operator) {
        (Some(p), _) => (p.display().to_string(), SbpCoefficients::from_file(p)?.build_unchecked(req.points)?),
        (None, Some(id)) => (id.to_string(), id.coefficients().build_unchecked(req.points)?),
        (None, None) => return Err(CliError::config("verify: no operator given")),
    };
    let mut checks = verify_sbp(&op).checks();

    checks.push(le("D = V Delta", rel_dev(&(vandermonde(&op) * full_difference(op.n_intervals())), &op.d), 1e-13));

    let mesh = build_mesh(req.elements, req.elements, (-1.0, 1.0), (-1.0, 1.0), op.n_intervals())?;
    let system = MaxwellSystem::new(mesh, &op)?;
    let d = &system.ops.diff;
    checks.push(le("2D Dx = Vx Deltax", rel_dev(&d.vander_x.matmul(&d.delta_x)?.to_dense(), &d.deriv_x.to_dense()), 1e-13));
    checks.push(le("2D Dy = Vy Deltay", rel_dev(&d.vander_y.matmul(&d.delta_y)?.to_dense(), &d.deriv_y.to_dense()), 1e-13));
    let comm = d.delta_x.matmul(&d.delta_y)?.sub(&d.delta_y.matmul(&d.delta_x)?)?;
    checks.push(le("Delta commutation", comm.max_abs(), 0.0));
    let vc = system.ops.vector_calculus();
    checks.push(le("2D curl o grad", vc.curl_vector_matrix()?.matmul(&vc.grad_matrix()?)?.max_abs(), 1e-14));
    checks.push(le("2D div o curl", vc.div_matrix()?.matmul(&vc.curl_scalar_matrix()?)?.max_abs(), 1e-14));

    let c3 = assemble_3d_complex(&MimeticElementOps::new(&op))?;
    checks.push(le("3D curl o grad", c3.curl.matmul(&c3.grad)?.max_abs(), 1e-14));
    checks.push(le("3D div o curl", c3.div.matmul(&c3.curl)?.max_abs(), 1e-14));

    let (j, k) = system.poisson_matrix()?;
    checks.push(le("J antisymmetry", j.add(&j.transpose())?.max_abs(), 1e-13));

    let n = system.field_len();
    let mut rng = StdRng::seed_from_u64(req.seed);
    let (mut energy, mut strong) = (0.0f64, 0.0f64);
    for _ in 0..req.samples {
        let u: Vec<f64> = (0..3 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = k.matvec(&u);
        energy = energy.max(dot(&g, &j.matvec(&g)).abs() / dot(&g, &g).max(f64::MIN_POSITIVE));
        let weak = system.rhs_weak_vec(&u);
        let s = system.rhs_strong_faraday(&u);
        let dev = s.iter().zip(&weak[2 * n..]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        strong = strong.max(dev / max_abs(&weak[2 * n..]).max(f64::MIN_POSITIVE));
    }
    checks.push(le("energy mechanism", energy, 1e-13));
    checks.push(le("weak/strong equivalence", strong, 1e-12));
    Ok(VerifyReport { label, checks })
}

#[derive(Parser, Debug)]
#[command(name = "sbp-fdec", version, about = "Mimetic SBP operators and a divergence-free 2D Maxwell solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate the standing-wave test case and write diagnostics CSV.
    Simulate {
        #[arg(short, long)]
        config: PathBuf,
        /// Overrides `output` from the config; stdout if neither is given.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a refinement study and write the error/EOC table.
    Convergence {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check the structural identities of an operator on a small mesh.
    Verify {
        #[arg(long, default_value = "sbp24")]
        operator: String,
        /// Coefficient file in the bundled data format; overrides `--operator`.
        #[arg(long)]
        operator_file: Option<PathBuf>,
        /// Elements per direction.
        #[arg(long, default_value_t = 2)]
        elements: usize,
        /// Points per element and direction.
        #[arg(long, default_value_t = 12)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { config, output } => {
            let cfg = RunConfig::load(&config)?;
            let output = output.or_else(|| cfg.output.clone());
            let out = cmd_simulate(&cfg)?;
            write_output(output.as_deref(), &out.csv)?;
            if let Some(p) = &output {
                if cfg.manifest {
                    write_manifest(p, "simulate", &cfg)?;
                }
            }
            let last = out.result.records.last().expect("at least the initial record");
            eprintln!(
                "steps {} dt {:.6e} t {:.6e} energy {:.16e} drift {:.3e} div_nodal {:.3e} err_E {:.6e} err_B {:.6e} gmres_iters {}",
                out.result.steps,
                out.result.dt,
                out.result.state.t,
                last.energy,
                last.energy_drift,
                last.div_max_nodal,
                out.errors.e_x,
                out.errors.b,
                out.result.linear_iterations
            );
            Ok(())
        }
        Command::Convergence { config, output } => {
            let cfg = RunConfig::load(&config)?;
            let output = output.or_else(|| cfg.output.clone());
            let study = ConvergenceStudy::from_config(cfg)?;
            let rows = cmd_convergence(&study)?;
            write_output(output.as_deref(), &convergence_csv(&rows))?;
            if let Some(p) = &output {
                if study.base.manifest {
                    write_manifest(p, "convergence", &study.base)?;
                }
            }
            Ok(())
        }
        Command::Verify { operator, operator_file, elements, points, seed, samples } => {
            let id = match operator_file {
                Some(_) => None,
                None => Some(operator.parse::<OperatorId>()?),
            };
            let req = VerifyRequest { operator: id, operator_file, elements, points, seed, samples };
            let report = cmd_verify(&req)?;
            print!("{}", report.render());
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::numerical("one or more verification checks failed"))
            }
        }
    }
}

/// Parses arguments, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_toml() -> String {
        "operator = \"sbp24\"\nelements_x = 2\nelements_y = 2\npoints_per_element = 12\ncfl = 1.0\nend_time = 0.05\nscheme = \"ssprk3\"\n"
            .into()
    }

    #[test]
    fn parses_flat_config_with_defaults() {
        let cfg = RunConfig::from_toml(&base_toml()).unwrap();
        assert_eq!((cfg.x_min, cfg.x_max, cfg.stride, cfg.tol), (-1.0, 1.0, 1, 1e-12));
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_key_is_config_error() {
        let err = RunConfig::from_toml(&(base_toml() + "cfl_number = 2\n")).unwrap_err();
        assert_eq!(err.code, EXIT_CONFIG);
        assert!(err.message.contains("cfl_number"), "{}", err.message);
    }

    #[test]
    fn step_options_are_exclusive() {
        let cfg = RunConfig::from_toml(&(base_toml() + "dt = 1e-3\n")).unwrap();
        assert_eq!(cfg.validate().unwrap_err().code, EXIT_CONFIG);
        let cfg = RunConfig::from_toml(&base_toml().replace("cfl = 1.0\n", "")).unwrap();
        assert_eq!(cfg.validate().unwrap_err().code, EXIT_CONFIG);
        let cfg = RunConfig::from_toml(&base_toml().replace("cfl = 1.0", "cfl = 0.0")).unwrap();
        assert_eq!(cfg.validate().unwrap_err().code, EXIT_CONFIG);
    }

    #[test]
    fn unknown_operator_is_config_error() {
        let cfg = RunConfig::from_toml(&base_toml().replace("sbp24", "sbp48")).unwrap();
        assert_eq!(cfg.validate().unwrap_err().code, EXIT_CONFIG);
    }

    #[test]
    fn eoc_of_doubling() {
        assert!((eoc(1.487802e-1, 1.457635e-2, 2.0).unwrap() - 3.35).abs() < 0.01);
        assert_eq!(eoc(0.0, 0.0, 2.0), None);
        assert_eq!(eoc(1.0, 0.0, 2.0), None);
    }

    #[test]
    fn simulate_zero_time_single_row() {
        let cfg = RunConfig::from_toml(&base_toml().replace("end_time = 0.05", "end_time = 0.0")).unwrap();
        let out = cmd_simulate(&cfg).unwrap();
        let lines: Vec<&str> = out.csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "step,t,energy,energy_drift,div_max_nodal,div_max_coeff");
        assert_eq!(lines[1].split(',').nth(3).unwrap(), fmt_num(0.0));
    }

    #[test]
    fn simulate_is_deterministic() {
        let cfg = RunConfig::from_toml(&base_toml()).unwrap();
        let a = cmd_simulate(&cfg).unwrap().csv;
        let b = cmd_simulate(&cfg).unwrap().csv;
        assert_eq!(a, b);
        // At least 15 significant digits per numeric field.
        for field in a.lines().nth(1).unwrap().split(',').skip(1) {
            let mantissa = field.split('e').next().unwrap().replace(['-', '.'], "");
            assert!(mantissa.len() >= 15, "{field}");
        }
    }

    #[test]
    fn self_test_convergence_has_empty_eoc() {
        let toml = base_toml() + "levels = [1, 2]\nself_test = true\n";
        let study = ConvergenceStudy::from_config(RunConfig::from_toml(&toml).unwrap()).unwrap();
        let rows = cmd_convergence(&study).unwrap();
        assert!(rows.iter().all(|r| r.err_e == 0.0 && r.err_b == 0.0));
        let csv = convergence_csv(&rows);
        let second: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
        assert_eq!((second[4], second[6]), ("", ""));
    }

    #[test]
    fn levels_must_increase() {
        let toml = base_toml() + "levels = [2, 1]\n";
        assert_eq!(ConvergenceStudy::from_config(RunConfig::from_toml(&toml).unwrap()).unwrap_err().code, EXIT_CONFIG);
        let toml = base_toml() + "levels = [2]\n";
        assert!(ConvergenceStudy::from_config(RunConfig::from_toml(&toml).unwrap()).is_err());
    }

    #[test]
    fn verify_registered_operators() {
        for id in OperatorId::ALL {
            let req = VerifyRequest { operator: Some(id), operator_file: None, elements: 2, points: 12, seed: 1, samples: 3 };
            let report = cmd_verify(&req).unwrap();
            assert!(report.passed(), "{}", report.render());
        }
    }
}
