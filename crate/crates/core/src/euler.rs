//! Incompressible Euler reference on the torus and the Leray projection.
//!
//! The velocity is advanced pseudo-spectrally, `du/dt = -P[(u·∇)u]`, with
//! the 2/3 rule applied to the nonlinearity and classical RK4 in time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grids::TorusGrid;
use crate::spectral::Spectral;

/// `P v = v - ∇ Δ⁻¹ (∇·v)`.
pub fn leray_project(spectral: &Spectral, v: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let potential = spectral.inverse_laplacian_unchecked(&spectral.divergence(v));
    let grad = spectral.gradient(&potential);
    v.iter()
        .zip(&grad)
        .map(|(c, g)| c.iter().zip(g).map(|(a, b)| a - b).collect())
        .collect()
}

/// Named initial velocity fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialVelocity {
    Zero,
    Uniform { value: Vec<f64> },
    /// `(sin 2πx cos 2πy, -cos 2πx sin 2πy)`.
    TaylorGreen,
    /// `(sin 2πy, 0)`.
    Shear,
    /// Stream function with random modes `|k_i| ≤ max_mode`, scaled to unit peak speed.
    RandomBandlimited { seed: u64, max_mode: usize },
}

impl InitialVelocity {
    /// Samples the field on `grid` (component-major).
    pub fn sample(&self, grid: TorusGrid) -> Result<Vec<Vec<f64>>> {
        let d = grid.dim();
        let n = grid.len();
        let tp = 2.0 * PI;
        match self {
            InitialVelocity::Zero => Ok(vec![vec![0.0; n]; d]),
            InitialVelocity::Uniform { value } => {
                if value.len() != d {
                    return Err(Error::InvalidParameter(format!(
                        "uniform velocity needs {d} components, got {}",
                        value.len()
                    )));
                }
                Ok(value.iter().map(|&c| vec![c; n]).collect())
            }
            _ if d != 2 => Err(Error::Unsupported(format!(
                "{self:?} needs d = 2; in d = 1 only constant velocities are divergence-free"
            ))),
            InitialVelocity::TaylorGreen => Ok(vec![
                grid.sample(|x| (tp * x[0]).sin() * (tp * x[1]).cos()),
                grid.sample(|x| -(tp * x[0]).cos() * (tp * x[1]).sin()),
            ]),
            InitialVelocity::Shear => Ok(vec![grid.sample(|x| (tp * x[1]).sin()), vec![0.0; n]]),
            InitialVelocity::RandomBandlimited { seed, max_mode } => {
                let m = *max_mode as i64;
                if m < 1 || 3 * m as usize > grid.n() {
                    return Err(Error::InvalidParameter(format!(
                        "max_mode = {max_mode} must be in 1..=n/3"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut ux = vec![0.0; n];
                let mut uy = vec![0.0; n];
                for kx in 0..=m {
                    for ky in -m..=m {
                        if kx == 0 && ky <= 0 {
                            continue;
                        }
                        let k2 = (kx * kx + ky * ky) as f64;
                        let a: f64 = rng.gen_range(-1.0..1.0) / k2;
                        let b: f64 = rng.gen_range(-1.0..1.0) / k2;
                        // ψ = a cos θ + b sin θ, θ = 2π k·x; u = (∂_y ψ, -∂_x ψ)
                        for j in 0..n {
                            let x = grid.coords(j);
                            let th = tp * (kx as f64 * x[0] + ky as f64 * x[1]);
                            let dpsi = tp * (-a * th.sin() + b * th.cos());
                            ux[j] += ky as f64 * dpsi;
                            uy[j] -= kx as f64 * dpsi;
                        }
                    }
                }
                let peak = (0..n)
                    .map(|j| ux[j].hypot(uy[j]))
                    .fold(0.0, f64::max);
                if peak > 0.0 {
                    ux.iter_mut().chain(uy.iter_mut()).for_each(|v| *v /= peak);
                }
                Ok(vec![ux, uy])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EulerState {
    pub grid: TorusGrid,
    pub u: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl EulerState {
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.grid.l2_norm_vec(&self.u).powi(2)
    }

    pub fn max_speed(&self) -> f64 {
        max_speed(&self.u)
    }
}

fn max_speed(u: &[Vec<f64>]) -> f64 {
    (0..u[0].len())
        .map(|j| u.iter().map(|c| c[j] * c[j]).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

#[derive(Debug)]
pub struct EulerSolver {
    spectral: Spectral,
    pub cfl: f64,
}

impl EulerSolver {
    pub fn new(grid: TorusGrid) -> Self {
        Self {
            spectral: Spectral::new(grid),
            cfl: 0.5,
        }
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// Dealiased, divergence-free initial state with its pressure.
    pub fn initial_state(&self, u0: &[Vec<f64>]) -> EulerState {
        let u: Vec<Vec<f64>> = u0.iter().map(|c| self.spectral.dealias(c)).collect();
        let u = leray_project(&self.spectral, &u);
        let p = self.pressure(&u);
        EulerState {
            grid: self.spectral.grid(),
            u,
            p,
            t: 0.0,
        }
    }

    /// Dealiased `(u·∇)u`.
    fn advection(&self, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let sp = &self.spectral;
        let n = u[0].len();
        let grads: Vec<Vec<Vec<f64>>> = u.iter().map(|c| sp.gradient(c)).collect();
        (0..u.len())
            .map(|i| {
                let raw: Vec<f64> = (0..n)
                    .map(|k| (0..u.len()).map(|j| u[j][k] * grads[i][j][k]).sum())
                    .collect();
                sp.dealias(&raw)
            })
            .collect()
    }

    fn rhs(&self, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
        leray_project(&self.spectral, &self.advection(u))
            .into_iter()
            .map(|c| c.into_iter().map(|v| -v).collect())
            .collect()
    }

    /// `p = Δ⁻¹(-∇·((u·∇)u))`.
    pub fn pressure(&self, u: &[Vec<f64>]) -> Vec<f64> {
        let div = self.spectral.divergence(&self.advection(u));
        let neg: Vec<f64> = div.into_iter().map(|v| -v).collect();
        self.spectral.inverse_laplacian_unchecked(&neg)
    }

    pub fn cfl_limit(&self, state: &EulerState) -> f64 {
        let speed = state.max_speed();
        if speed == 0.0 {
            f64::INFINITY
        } else {
            self.cfl * state.grid.h() / speed
        }
    }

    pub fn step(&self, state: &EulerState, dt: f64) -> Result<EulerState> {
        let limit = self.cfl_limit(state);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, limit });
        }
        let axpy = |u: &[Vec<f64>], k: &[Vec<f64>], s: f64| -> Vec<Vec<f64>> {
            u.iter()
                .zip(k)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + s * y).collect())
                .collect()
        };
        let u = &state.u;
        let k1 = self.rhs(u);
        let k2 = self.rhs(&axpy(u, &k1, 0.5 * dt));
        let k3 = self.rhs(&axpy(u, &k2, 0.5 * dt));
        let k4 = self.rhs(&axpy(u, &k3, dt));
        let new_u: Vec<Vec<f64>> = (0..u.len())
            .map(|c| {
                (0..u[c].len())
                    .map(|j| {
                        u[c][j] + dt / 6.0 * (k1[c][j] + 2.0 * k2[c][j] + 2.0 * k3[c][j] + k4[c][j])
                    })
                    .collect()
            })
            .collect();
        let p = self.pressure(&new_u);
        Ok(EulerState {
            grid: state.grid,
            u: new_u,
            p,
            t: state.t + dt,
        })
    }

    /// Advances to `t_target` with steps of at most `dt`.
    pub fn advance_to(&self, state: &EulerState, dt: f64, t_target: f64) -> Result<EulerState> {
        let mut s = state.clone();
        while t_target - s.t > 1e-12 * t_target.abs().max(1.0) {
            let h = dt.min(t_target - s.t);
            s = self.step(&s, h)?;
        }
        s.t = t_target;
        Ok(s)
    }
}

/// Trajectory of the Euler solution from `u0` sampled at `times` (ascending).
pub fn solve_euler(
    grid: TorusGrid,
    u0: &InitialVelocity,
    dt: f64,
    times: &[f64],
) -> Result<Vec<EulerState>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    let solver = EulerSolver::new(grid);
    let mut state = solver.initial_state(&u0.sample(grid)?);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t < state.t - 1e-12 {
            return Err(Error::InvalidParameter("sample times must be ascending".into()));
        }
        state = solver.advance_to(&state, dt, t)?;
        out.push(state.clone());
    }
    Ok(out)
}
