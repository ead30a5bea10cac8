//! Strang-split semi-Lagrangian integration of
//! `∂_t f + ξ·∇_x f + ∇φ·∇_ξ f = Q(f)` coupled to the field solve.
//!
//! One step is `x(dt/2) → field → ξ(dt) → collide(dt) → x(dt/2)`. Transport
//! substeps are rigid shifts of 1D lines by periodic (in `x`) or
//! zero-outside (in `ξ`) cubic splines; in 2D the shifts are applied one
//! axis after the other, which is exact for constant-coefficient transport.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::collision::{collide, CollisionConfig};
use crate::diagnostics::{evaluate, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::euler::{leray_project, EulerSolver, EulerState, InitialVelocity};
use crate::grids::{check_velocity_box, moments, PhaseField, TorusGrid, VelocityGrid};
use crate::monge_ampere::{FieldMode, FieldSolveReport, FieldSolver, Potential};
use crate::par;
use crate::spline::{shift_periodic, shift_zero_outside};

/// `value = coeff · ε^power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub coeff: f64,
    pub power: f64,
}

impl Schedule {
    pub const LINEAR: Schedule = Schedule { coeff: 1.0, power: 1.0 };

    pub fn fixed(value: f64) -> Self {
        Schedule { coeff: value, power: 0.0 }
    }

    pub fn at(&self, eps: f64) -> f64 {
        self.coeff * eps.powf(self.power)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DensityProfile {
    /// `cos 2πx₁`.
    #[default]
    CosX,
    /// `cos 2πx₁ cos 2πx₂` (d = 2).
    CosXy,
}

impl DensityProfile {
    fn eval(&self, x: [f64; 2], d: usize) -> Result<f64> {
        match self {
            DensityProfile::CosX => Ok((2.0 * PI * x[0]).cos()),
            DensityProfile::CosXy if d == 2 => Ok((2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos()),
            DensityProfile::CosXy => Err(Error::Unsupported("cos_xy profile needs d = 2".into())),
        }
    }
}

/// `f₀ = ρ₀(x) M(1, u₀(x), θ)(ξ)` with `ρ₀ ∝ 1 + δ·profile`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellPreparedIC {
    pub u0: InitialVelocity,
    pub delta: Schedule,
    pub theta: Schedule,
    pub profile: DensityProfile,
}

impl Default for WellPreparedIC {
    fn default() -> Self {
        Self {
            u0: InitialVelocity::Zero,
            delta: Schedule::LINEAR,
            theta: Schedule::LINEAR,
            profile: DensityProfile::CosX,
        }
    }
}

/// Leray-projected `u₀` (or the raw field in d = 1, where it is constant).
pub fn initial_velocity(ic: &WellPreparedIC, x: TorusGrid) -> Result<Vec<Vec<f64>>> {
    let u = ic.u0.sample(x)?;
    if x.dim() == 1 {
        return Ok(u);
    }
    Ok(leray_project(&crate::spectral::Spectral::new(x), &u))
}

pub fn make_initial_condition(
    ic: &WellPreparedIC,
    x: TorusGrid,
    v: VelocityGrid,
    eps: f64,
) -> Result<PhaseField> {
    if x.dim() != v.dim() {
        return Err(Error::GridMismatch("spatial and velocity dimensions differ".into()));
    }
    let d = x.dim();
    let delta = ic.delta.at(eps);
    let theta = ic.theta.at(eps);
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter(format!("theta must be > 0, got {theta}")));
    }
    let u = initial_velocity(ic, x)?;
    let u_max = u.iter().flatten().fold(0.0f64, |m, c| m.max(c.abs()));
    check_velocity_box(&v, u_max, theta)?;

    let raw = (0..x.len())
        .map(|j| ic.profile.eval(x.coords(j), d).map(|p| 1.0 + delta * p))
        .collect::<Result<Vec<f64>>>()?;
    if let Some((node, &value)) = raw.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
        return Err(Error::NonPositiveDensity { node, value });
    }
    let mean = x.mean(&raw);
    let rho: Vec<f64> = raw.iter().map(|r| r / mean).collect();
    let norm = (2.0 * PI * theta).powf(-(d as f64) / 2.0);
    PhaseField::from_fn(x, v, move |j, k| {
        let xi = v.node(k);
        let r2: f64 = (0..d).map(|a| (xi[a] - u[a][j]).powi(2)).sum();
        rho[j] * norm * (-r2 / (2.0 * theta)).exp()
    })
}

/// Strides of the phase-space array, axes ordered `(x..., ξ...)`.
fn phase_dims(f: &PhaseField) -> Vec<usize> {
    let d = f.x.dim();
    let mut dims = vec![f.x.n(); d];
    dims.extend(std::iter::repeat(f.v.n()).take(d));
    dims
}

/// Replaces every line along `axis` by `op(base_offset, line, out)`.
fn transform_lines<F>(values: &mut [f64], dims: &[usize], axis: usize, op: F)
where
    F: Fn(usize, &[f64], &mut [f64]) + Sync + Send,
{
    let len = dims[axis];
    let stride: usize = dims[axis + 1..].iter().product();
    let n_lines = values.len() / len;
    let src: &[f64] = values;
    let lines: Vec<Vec<f64>> = par::map_range(n_lines, |l| {
        let (outer, inner) = (l / stride, l % stride);
        let base = outer * len * stride + inner;
        let line: Vec<f64> = (0..len).map(|i| src[base + i * stride]).collect();
        let mut out = vec![0.0; len];
        op(base, &line, &mut out);
        out
    });
    for (l, line) in lines.iter().enumerate() {
        let (outer, inner) = (l / stride, l % stride);
        let base = outer * len * stride + inner;
        for (i, val) in line.iter().enumerate() {
            values[base + i * stride] = *val;
        }
    }
}

/// `f(x, ξ) ← f(x - ξ dt, ξ)`; returns the field and the clipped mass.
pub fn advect_x(f: &PhaseField, dt: f64) -> (PhaseField, f64) {
    let mut out = f.clone();
    if dt == 0.0 {
        return (out, 0.0);
    }
    let dims = phase_dims(f);
    let nv_total = f.v.len();
    let (vg, hx) = (f.v, f.x.h());
    for axis in 0..f.x.dim() {
        transform_lines(&mut out.values, &dims, axis, |base, line, o| {
            let k = base % nv_total;
            shift_periodic(line, vg.node(k)[axis] * dt / hx, o);
        });
    }
    let clipped = out.clip_negative();
    (out, clipped)
}

/// `f(x, ξ) ← f(x, ξ - a(x) dt)` with zero inflow from outside the box.
pub fn advect_v(f: &PhaseField, a: &[Vec<f64>], dt: f64) -> Result<(PhaseField, f64)> {
    let d = f.x.dim();
    if a.len() != d || a.iter().any(|c| c.len() != f.x.len()) {
        return Err(Error::GridMismatch("acceleration does not match the torus grid".into()));
    }
    let width = f.v.n() as f64 * f.v.h();
    if let Some(worst) = a.iter().flatten().map(|c| (c * dt).abs()).find(|s| *s > width) {
        return Err(Error::DisplacementTooLarge { displacement: worst, width });
    }
    let mut out = f.clone();
    if dt == 0.0 {
        return Ok((out, 0.0));
    }
    let dims = phase_dims(f);
    let nv_total = f.v.len();
    let hv = f.v.h();
    for axis in 0..d {
        transform_lines(&mut out.values, &dims, d + axis, |base, line, o| {
            let j = base / nv_total;
            shift_zero_outside(line, a[axis][j] * dt / hv, o);
        });
    }
    let clipped = out.clip_negative();
    Ok((out, clipped))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams {
    pub dim: usize,
    pub n_x: usize,
    pub n_v: usize,
    pub v_max: f64,
    pub eps: f64,
    pub dt: f64,
    pub t_end: f64,
    pub field_mode: FieldMode,
    pub collision: CollisionConfig,
    pub ic: WellPreparedIC,
    /// Snapshot every this many steps (0: first and last state only).
    pub snapshot_every: usize,
    pub cfl: f64,
    pub euler_reference: bool,
    pub field_tol: Option<f64>,
}

impl SimulationParams {
    pub fn grids(&self) -> Result<(TorusGrid, VelocityGrid)> {
        Ok((
            TorusGrid::new(self.dim, self.n_x)?,
            VelocityGrid::new(self.dim, self.n_v, self.v_max)?,
        ))
    }

    pub fn validate(&self) -> Result<()> {
        self.grids()?;
        self.collision.validate()?;
        let positive = [("eps", self.eps), ("dt", self.dt), ("cfl", self.cfl)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidParameter(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        Ok(())
    }
}

/// Result of one Strang step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub f: PhaseField,
    /// Field used for the velocity substep.
    pub potential: Potential,
    pub report: FieldSolveReport,
    pub clipped: f64,
}

/// Time integrator bound to one parameter set.
#[derive(Debug)]
pub struct Stepper {
    pub params: SimulationParams,
    solver: FieldSolver,
}

impl Stepper {
    pub fn new(params: SimulationParams) -> Result<Self> {
        params.validate()?;
        let (x, _) = params.grids()?;
        Ok(Self {
            params,
            solver: FieldSolver::new(x),
        })
    }

    pub fn solver(&self) -> &FieldSolver {
        &self.solver
    }

    pub fn initial_condition(&self) -> Result<PhaseField> {
        let (x, v) = self.params.grids()?;
        make_initial_condition(&self.params.ic, x, v, self.params.eps)
    }

    /// Field of the density of `f`, after restoring unit mean (outflow and
    /// clipping shift the mean slightly and only the mean-free part of
    /// `ρ - 1` can be produced by a periodic potential).
    pub fn solve_field(&self, f: &PhaseField) -> Result<(Potential, FieldSolveReport)> {
        let rho = moments(f).rho;
        let shift = f.x.mean(&rho) - 1.0;
        let target: Vec<f64> = rho.iter().map(|r| r - shift).collect();
        self.solver
            .solve(&target, self.params.eps, self.params.field_mode, self.params.field_tol)
    }

    /// Largest stable step `cfl · min(h_x / v_max, h_v / a_max)`.
    pub fn cfl_limit(&self, potential: &Potential) -> Result<f64> {
        let (x, v) = self.params.grids()?;
        let a_max = potential.gradient.iter().flatten().fold(0.0f64, |m, c| m.max(c.abs()));
        let mut limit = x.h() / v.v_max();
        if a_max > 0.0 {
            limit = limit.min(v.h() / a_max);
        }
        Ok(self.params.cfl * limit)
    }

    pub fn step(&self, f: &PhaseField, dt: f64) -> Result<StepOutput> {
        let (f1, c1) = advect_x(f, 0.5 * dt);
        let (potential, report) = self.solve_field(&f1)?;
        let (f2, c2) = advect_v(&f1, &potential.gradient, dt)?;
        let (f3, c3) = collide(&f2, &self.params.collision, dt)?;
        let (mut f4, c4) = advect_x(&f3, 0.5 * dt);
        f4.time = f.time + dt;
        Ok(StepOutput {
            f: f4,
            potential,
            report,
            clipped: c1 + c2 + c3 + c4,
        })
    }

    /// One step followed by the diagnostics of the new state, evaluated with
    /// the field re-solved at the end of the step.
    pub fn strang_step(
        &self,
        f: &PhaseField,
        dt: f64,
        reference: Option<&EulerState>,
    ) -> Result<(PhaseField, Potential, DiagnosticsRecord)> {
        let out = self.step(f, dt)?;
        let (end_phi, _) = self.solve_field(&out.f)?;
        let record = evaluate(
            self.solver.spectral(),
            &out.f,
            &end_phi,
            Some(&out.report),
            reference,
            out.clipped,
        )?;
        Ok((out.f, out.potential, record))
    }
}

/// Receives the output stream of [`run`].
pub trait Observer {
    fn on_record(&mut self, _record: &DiagnosticsRecord) -> Result<()> {
        Ok(())
    }

    fn on_snapshot(
        &mut self,
        _step: usize,
        _f: &PhaseField,
        _potential: &Potential,
        _reference: Option<&EulerState>,
    ) -> Result<()> {
        Ok(())
    }
}

/// Observer that keeps nothing.
pub struct Discard;

impl Observer for Discard {}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub steps: usize,
    pub final_state: Option<PhaseField>,
}

/// A run that stopped early, with everything produced before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Trajectory,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run aborted after {} steps: {}", self.partial.steps, self.error)
    }
}

impl std::error::Error for RunFailure {}

/// Integrates from `t = 0` to `t_end`, emitting a record per step.
pub fn run(params: &SimulationParams, observer: &mut dyn Observer) -> std::result::Result<Trajectory, RunFailure> {
    let mut traj = Trajectory {
        records: Vec::new(),
        steps: 0,
        final_state: None,
    };
    match run_inner(params, observer, &mut traj) {
        Ok(()) => Ok(traj),
        Err(error) => Err(RunFailure { error, partial: traj }),
    }
}

fn run_inner(params: &SimulationParams, observer: &mut dyn Observer, traj: &mut Trajectory) -> Result<()> {
    let stepper = Stepper::new(params.clone())?;
    let (x, _) = params.grids()?;
    let mut f = stepper.initial_condition()?;

    let euler = EulerSolver::new(x);
    let mut reference = if params.euler_reference {
        Some(euler.initial_state(&initial_velocity(&params.ic, x)?))
    } else {
        None
    };

    let (phi0, report0) = stepper.solve_field(&f)?;
    let limit = stepper.cfl_limit(&phi0)?;
    if params.dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt: params.dt, limit });
    }
    let rec0 = evaluate(stepper.solver.spectral(), &f, &phi0, Some(&report0), reference.as_ref(), 0.0)?;
    observer.on_record(&rec0)?;
    traj.records.push(rec0);
    observer.on_snapshot(0, &f, &phi0, reference.as_ref())?;

    let n_steps = if params.t_end == 0.0 {
        0
    } else {
        (params.t_end / params.dt - 1e-9).ceil().max(1.0) as usize
    };
    for step in 1..=n_steps {
        let t_next = if step == n_steps {
            params.t_end
        } else {
            step as f64 * params.dt
        };
        let dt = t_next - f.time;
        if let Some(r) = reference.as_mut() {
            let dt_e = dt.min(euler.cfl_limit(r));
            *r = euler.advance_to(r, dt_e, t_next)?;
        }
        let out = stepper.step(&f, dt)?;
        f = out.f;
        f.time = t_next;
        let (phi, _) = stepper.solve_field(&f)?;
        let rec = evaluate(
            stepper.solver.spectral(),
            &f,
            &phi,
            Some(&out.report),
            reference.as_ref(),
            out.clipped,
        )?;
        observer.on_record(&rec)?;
        traj.records.push(rec);
        traj.steps = step;
        if step == n_steps || (params.snapshot_every > 0 && step % params.snapshot_every == 0) {
            observer.on_snapshot(step, &f, &phi, reference.as_ref())?;
        }
    }
    traj.final_state = Some(f);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::maxwellian;

    fn params_1d() -> SimulationParams {
        SimulationParams {
            dim: 1,
            n_x: 32,
            n_v: 64,
            v_max: 6.0,
            eps: 0.5,
            dt: 0.002,
            t_end: 0.01,
            field_mode: FieldMode::Poisson,
            collision: CollisionConfig::None,
            ic: WellPreparedIC {
                u0: InitialVelocity::Zero,
                delta: Schedule::fixed(0.1),
                theta: Schedule::fixed(1.0),
                profile: DensityProfile::CosX,
            },
            snapshot_every: 0,
            cfl: 1.0,
            euler_reference: false,
            field_tol: None,
        }
    }

    #[test]
    fn initial_condition_examples() {
        let x = TorusGrid::new(1, 64).unwrap();
        let v = VelocityGrid::new(1, 64, 7.0).unwrap();
        let ic = WellPreparedIC {
            u0: InitialVelocity::Zero,
            delta: Schedule::fixed(0.0),
            theta: Schedule::fixed(1.0),
            profile: DensityProfile::CosX,
        };
        let f = make_initial_condition(&ic, x, v, 0.1).unwrap();
        let m = moments(&f);
        assert!(m.rho.iter().all(|r| (r - 1.0).abs() < 1e-8));
        assert!(m.current[0].iter().all(|j| j.abs() < 1e-15));

        let ic = WellPreparedIC { delta: Schedule::LINEAR, ..ic };
        let f = make_initial_condition(&ic, x, v, 0.1).unwrap();
        let m = moments(&f);
        let mass: f64 = m.rho.iter().sum::<f64>() / 64.0;
        assert!((mass - 1.0).abs() < 1e-8);
        let dev = m.rho.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
        assert!((dev - 0.1).abs() < 1e-8);
    }

    #[test]
    fn density_profile_is_normalized_exactly() {
        let x = TorusGrid::new(1, 64).unwrap();
        let raw: Vec<f64> = (0..64).map(|j| 1.0 + 0.1 * DensityProfile::CosX.eval(x.coords(j), 1).unwrap()).collect();
        assert!((x.mean(&raw) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn taylor_green_initial_modulated_energy() {
        let x = TorusGrid::new(2, 16).unwrap();
        let v = VelocityGrid::new(2, 48, 1.7).unwrap();
        let theta = 0.01;
        let ic = WellPreparedIC {
            u0: InitialVelocity::TaylorGreen,
            delta: Schedule::fixed(0.0),
            theta: Schedule::fixed(theta),
            profile: DensityProfile::CosX,
        };
        let f = make_initial_condition(&ic, x, v, 0.1).unwrap();
        let u = initial_velocity(&ic, x).unwrap();
        let h = crate::diagnostics::modulated_energy(&f, &Potential::zero(x, 0.1), &u);
        assert!((h - theta).abs() < 1e-8, "{h}");
    }

    #[test]
    fn velocity_box_rule_is_enforced() {
        let x = TorusGrid::new(1, 16).unwrap();
        let v = VelocityGrid::new(1, 64, 3.0).unwrap();
        let ic = WellPreparedIC { theta: Schedule::fixed(1.0), ..WellPreparedIC::default() };
        assert!(make_initial_condition(&ic, x, v, 0.1).is_err());
    }

    #[test]
    fn trivial_advections() {
        let p = params_1d();
        let (x, v) = p.grids().unwrap();
        let m = maxwellian(&v, 1.0, [0.0, 0.0], 1.0).unwrap();
        let f = PhaseField::from_fn(x, v, move |_, k| m[k]).unwrap();
        let (g, _) = advect_x(&f, 0.013);
        let diff = f.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-14);
        let (g, c) = advect_v(&f, &[vec![0.0; x.len()]], 0.1).unwrap();
        assert_eq!(g.values, f.values);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn oversized_displacement_is_rejected() {
        let p = params_1d();
        let (x, v) = p.grids().unwrap();
        let f = PhaseField::zeros(x, v).unwrap();
        assert!(matches!(
            advect_v(&f, &[vec![1000.0; x.len()]], 0.1),
            Err(Error::DisplacementTooLarge { .. })
        ));
    }

    #[test]
    fn two_dimensional_shift_matches_exact_translation() {
        let x = TorusGrid::new(2, 16).unwrap();
        let v = VelocityGrid::new(2, 4, 1.0).unwrap();
        let f = PhaseField::from_fn(x, v, |j, _| {
            let c = x.coords(j);
            (2.0 * PI * c[0]).sin() * (2.0 * PI * c[1]).cos()
        })
        .unwrap();
        let dt = 0.05;
        let (g, _) = advect_x(&PhaseField { values: f.values.iter().map(|a| a + 2.0).collect(), ..f.clone() }, dt);
        let nv = v.len();
        let mut worst = 0.0f64;
        for j in 0..x.len() {
            for k in 0..nv {
                let c = x.coords(j);
                let xi = v.node(k);
                let want = 2.0 + (2.0 * PI * (c[0] - xi[0] * dt)).sin() * (2.0 * PI * (c[1] - xi[1] * dt)).cos();
                worst = worst.max((g.values[j * nv + k] - want).abs());
            }
        }
        assert!(worst < 2e-4, "{worst}");
    }

    #[test]
    fn step_conserves_mass() {
        let p = params_1d();
        let s = Stepper::new(p).unwrap();
        let f = s.initial_condition().unwrap();
        let out = s.step(&f, 0.002).unwrap();
        let rel = (out.f.mass() - f.mass()).abs() / f.mass();
        assert!(rel < 1e-8, "{rel}");
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let mut p = params_1d();
        p.ic.delta = Schedule::fixed(0.0);
        p.collision = CollisionConfig::Bgk { tau: 0.1 };
        p.field_mode = FieldMode::MongeAmpere;
        let s = Stepper::new(p).unwrap();
        let f = s.initial_condition().unwrap();
        let (g, _, _) = s.strang_step(&f, 0.002, None).unwrap();
        let diff = f.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn zero_end_time_yields_initial_record() {
        let mut p = params_1d();
        p.t_end = 0.0;
        let traj = run(&p, &mut Discard).unwrap();
        assert_eq!(traj.records.len(), 1);
        assert_eq!(traj.records[0].t, 0.0);
    }

    #[test]
    fn cfl_violation_aborts_with_partial_output() {
        let mut p = params_1d();
        p.dt = 0.5;
        let err = run(&p, &mut Discard).unwrap_err();
        assert!(matches!(err.error, Error::CflViolation { .. }));
        assert!(err.partial.records.is_empty());
    }

    #[test]
    fn run_is_deterministic() {
        let p = params_1d();
        let a = run(&p, &mut Discard).unwrap();
        let b = run(&p, &mut Discard).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.records.len(), 6);
        assert!((a.records.last().unwrap().t - 0.01).abs() < 1e-15);
    }

    /// Energy bookkeeping catches a flipped force: the same splitting with
    /// `-∇φ` drifts by orders of magnitude more.
    #[test]
    fn flipped_force_breaks_energy_conservation() {
        use crate::diagnostics::total_energy;
        let mut p = params_1d();
        p.t_end = 0.2;
        p.dt = 0.002;
        let s = Stepper::new(p.clone()).unwrap();
        let drift = |sign: f64| {
            let mut f = s.initial_condition().unwrap();
            let e0 = total_energy(&f, &s.solve_field(&f).unwrap().0).2;
            let mut worst = 0.0f64;
            for _ in 0..100 {
                let (f1, _) = advect_x(&f, 0.5 * p.dt);
                let (phi, _) = s.solve_field(&f1).unwrap();
                let a: Vec<Vec<f64>> = phi.gradient.iter().map(|c| c.iter().map(|g| sign * g).collect()).collect();
                let (f2, _) = advect_v(&f1, &a, p.dt).unwrap();
                f = advect_x(&f2, 0.5 * p.dt).0;
                let e = total_energy(&f, &s.solve_field(&f).unwrap().0).2;
                worst = worst.max(((e - e0) / e0).abs());
            }
            worst
        };
        let (good, bad) = (drift(1.0), drift(-1.0));
        assert!(good < 1e-6, "{good}");
        assert!(bad > 100.0 * good, "{good} {bad}");
    }
}
