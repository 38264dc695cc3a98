//! Explicit SSPRK3 and implicit Crank-Nicolson stepping, CFL time steps and
//! the outer integration loop with diagnostics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gmres, GmresOptions, SolveStats};
use crate::maxwell::{MaxwellState, MaxwellSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Ssprk3,
    CrankNicolson,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ssprk3 => "ssprk3",
            Scheme::CrankNicolson => "crank_nicolson",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ssprk3" => Ok(Scheme::Ssprk3),
            "crank_nicolson" | "cn" => Ok(Scheme::CrankNicolson),
            _ => Err(Error::InvalidArgument(format!("unknown scheme `{s}` (expected ssprk3 or crank_nicolson)"))),
        }
    }
}

/// Either a fixed step or a CFL number relative to the smallest mass weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    Cfl(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub step: StepSize,
    pub end_time: f64,
    /// Relative GMRES tolerance for the implicit scheme.
    pub tol: f64,
    /// Steps between diagnostic samples.
    pub stride: usize,
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        match self.step {
            StepSize::Fixed(dt) if !(dt > 0.0 && dt.is_finite()) => {
                return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")))
            }
            StepSize::Cfl(c) if !(c > 0.0 && c.is_finite()) => {
                return Err(Error::InvalidArgument(format!("cfl must be positive, got {c}")))
            }
            _ => {}
        }
        if !(self.end_time >= 0.0 && self.end_time.is_finite()) {
            return Err(Error::InvalidArgument(format!("end_time must be non-negative, got {}", self.end_time)));
        }
        if self.scheme == Scheme::CrankNicolson && !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if self.stride == 0 {
            return Err(Error::InvalidArgument("stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn timestep(&self, system: &MaxwellSystem) -> f64 {
        match self.step {
            StepSize::Fixed(dt) => dt,
            StepSize::Cfl(c) => cfl_timestep(system, c),
        }
    }
}

/// `Δt = CFL · min diag(M̂²ᴰ)`.
pub fn cfl_timestep(system: &MaxwellSystem, cfl: f64) -> f64 {
    let w_min = system.ops.mass.hat.diag().into_iter().fold(f64::INFINITY, f64::min);
    cfl * w_min
}

/// One Shu-Osher SSPRK3 step of `u' = f(u)`.
pub fn ssprk3_step<F>(mut rhs: F, u: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = u.len();
    let mut k = vec![0.0; n];
    rhs(u, &mut k);
    let u1: Vec<f64> = u.iter().zip(&k).map(|(a, b)| a + dt * b).collect();
    rhs(&u1, &mut k);
    let u2: Vec<f64> = u.iter().zip(&u1).zip(&k).map(|((a, b), c)| 0.75 * a + 0.25 * (b + dt * c)).collect();
    rhs(&u2, &mut k);
    let out: Vec<f64> = u
        .iter()
        .zip(&u2)
        .zip(&k)
        .map(|((a, b), c)| a / 3.0 + 2.0 / 3.0 * (b + dt * c))
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("SSPRK3 stage"));
    }
    Ok(out)
}

/// Solves `(I − Δt/2 A) u⁺ = (I + Δt/2 A) u` with `A u = J K u`, matrix-free.
/// `guess` seeds GMRES (the previous step's solution is a good choice).
pub fn crank_nicolson_step(
    system: &MaxwellSystem,
    u: &[f64],
    dt: f64,
    tol: f64,
    guess: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveStats)> {
    let half = 0.5 * dt;
    let mut au = system.rhs_weak_vec(u);
    let rhs: Vec<f64> = u.iter().zip(&au).map(|(a, b)| a + half * b).collect();
    let apply = |x: &[f64], y: &mut [f64]| {
        system.rhs_weak(x, &mut au);
        for ((yi, xi), ai) in y.iter_mut().zip(x).zip(&au) {
            *yi = xi - half * ai;
        }
    };
    gmres(apply, &rhs, Some(guess.unwrap_or(u)), &GmresOptions::new(tol, u.len()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticRecord {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub energy_drift: f64,
    pub div_max_nodal: f64,
    pub div_max_coeff: f64,
}

#[derive(Clone, Debug)]
pub struct IntegrationResult {
    pub records: Vec<DiagnosticRecord>,
    pub state: MaxwellState,
    pub steps: usize,
    pub dt: f64,
    /// GMRES iterations summed over all implicit steps.
    pub linear_iterations: usize,
}

fn record(system: &MaxwellSystem, state: &MaxwellState, step: usize, h0: f64) -> DiagnosticRecord {
    let energy = system.hamiltonian(&state.u);
    let div = system.divergence(&state.u);
    DiagnosticRecord {
        step,
        t: state.t,
        energy,
        energy_drift: energy - h0,
        div_max_nodal: div.max_abs_nodal,
        div_max_coeff: div.max_abs_coeff,
    }
}

/// Advances `initial` to `config.end_time`, sampling diagnostics every
/// `stride` steps and at the final time. The last step is shortened to land on
/// the end time exactly.
pub fn integrate(config: &IntegratorConfig, system: &MaxwellSystem, initial: MaxwellState) -> Result<IntegrationResult> {
    config.validate()?;
    let dt = config.timestep(system);
    let t_end = config.end_time;
    let mut state = initial;
    let h0 = system.hamiltonian(&state.u);
    let mut records = vec![record(system, &state, 0, h0)];
    let mut step = 0;
    let mut linear_iterations = 0;
    let mut prev_increment: Option<Vec<f64>> = None;
    let t0 = state.t;
    loop {
        // Step count decides termination so accumulated rounding in t cannot add a sliver step.
        let remaining = t_end - state.t;
        if remaining <= 1e-12 * t_end.max(1.0) {
            break;
        }
        let h = if remaining < dt * (1.0 + 1e-10) { remaining } else { dt };
        let next = match config.scheme {
            Scheme::Ssprk3 => ssprk3_step(|x, y| system.rhs_weak(x, y), &state.u, h)?,
            Scheme::CrankNicolson => {
                // Extrapolate the previous increment as the initial guess.
                let guess: Option<Vec<f64>> =
                    prev_increment.as_ref().map(|d| state.u.iter().zip(d).map(|(a, b)| a + b).collect());
                let (next, stats) = crank_nicolson_step(system, &state.u, h, config.tol, guess.as_deref())?;
                linear_iterations += stats.iterations;
                prev_increment = Some(next.iter().zip(&state.u).map(|(a, b)| a - b).collect());
                next
            }
        };
        step += 1;
        state.u = next;
        state.t = if h < dt { t_end } else { t0 + step as f64 * dt };
        if state.t > t_end {
            state.t = t_end;
        }
        let last = t_end - state.t <= 1e-12 * t_end.max(1.0);
        if step % config.stride == 0 || last {
            records.push(record(system, &state, step, h0));
        }
    }
    Ok(IntegrationResult { records, state, steps: step, dt, linear_iterations })
}
