//! Self-checks behind `quasikin check <suite>`: conservation, field-solver,
//! energy, inequality, scaling, Euler, order and determinism criteria.
//!
//! Every criterion yields a [`CheckResult`] with a pass flag, a one-line
//! detail and the measured numbers. The `fast` suite skips the ε-sweeps;
//! `full` runs everything.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::collision::{block_moments, collide, post_collision_velocities, CollisionConfig};
use crate::config::{hex_digest, parse, LoadedConfig, RunConfig};
use crate::diagnostics::{k_functional_check, optimal_b, BSample, DiagnosticsRecord, KSlice};
use crate::error::{Error, Result};
use crate::euler::{EulerSolver, InitialVelocity};
use crate::grids::{maxwellian, PhaseField, TorusGrid, VelocityGrid};
use crate::monge_ampere::{
    cofactor_divergence_residual, forward_determinant, FieldMode, FieldSolver, Potential,
};
use crate::scenario::{loglog_slope, resolve_params, simulate_into, summarize, SweepRow};
use crate::spectral::Spectral;
use crate::vlasov::{self, advect_x, DensityProfile, Discard, Schedule, SimulationParams, Trajectory, WellPreparedIC};

pub const QUASINEUTRAL_D1: &str = include_str!("../scenarios/quasineutral_d1.cfg");
pub const QUASINEUTRAL_D2: &str = include_str!("../scenarios/quasineutral_d2.cfg");
pub const EQUILIBRIUM: &str = include_str!("../scenarios/equilibrium.cfg");

/// Tolerance on `h ≤ H` at every output time.
pub const H_BOUND_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Fast,
    Full,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Suite::Fast),
            "full" => Ok(Suite::Full),
            other => Err(Error::Config(format!("unknown check suite '{other}' (expected fast or full)"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: u32,
    pub name: String,
    /// `None` when the suite skips the criterion.
    pub pass: Option<bool>,
    pub detail: String,
    pub metrics: BTreeMap<String, f64>,
    pub seconds: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        let status = match self.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        format!("[{status}] {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub tool: String,
    pub version: String,
    pub passed: bool,
    pub results: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Shared state: the worst `h - H` seen over every run of the suite.
#[derive(Debug, Default)]
struct Context {
    worst_h_gap: f64,
    runs: usize,
    records: usize,
    /// ε list and rows of the d=1 sweep, shared by two criteria.
    d1_sweep: Option<(Vec<f64>, Vec<SweepRow>)>,
}

impl Context {
    fn observe(&mut self, records: &[DiagnosticsRecord]) {
        self.runs += 1;
        for r in records {
            if let (Some(h), Some(big_h)) = (r.h_eps, r.h_mod) {
                self.records += 1;
                self.worst_h_gap = self.worst_h_gap.max(h - big_h);
            }
        }
    }

    fn run(&mut self, params: &SimulationParams) -> Result<Trajectory> {
        match vlasov::run(params, &mut Discard) {
            Ok(t) => {
                self.observe(&t.records);
                Ok(t)
            }
            Err(fail) => {
                self.observe(&fail.partial.records);
                Err(fail.error)
            }
        }
    }
}

/// Outcome of one criterion body: pass flag, detail line and metrics.
struct Verdict {
    pass: bool,
    detail: String,
    metrics: BTreeMap<String, f64>,
}

impl Verdict {
    fn new(pass: bool, detail: String, metrics: &[(&str, f64)]) -> Self {
        Self {
            pass,
            detail,
            metrics: metrics.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

type Body = fn(&mut Context, Suite) -> Result<Verdict>;

const CRITERIA: [(u32, &str, Body); 13] = [
    (1, "collision invariants", collision_invariants),
    (2, "sigma-representation conservation", sigma_conservation),
    (3, "Monge-Ampere round trip", monge_ampere_round_trip),
    (4, "cofactor divergence identity", cofactor_identity),
    (5, "mass compatibility", mass_compatibility),
    (6, "energy conservation", energy_conservation),
    (7, "h <= H at every output time", h_bound),
    (8, "K-functional duality", k_duality),
    (9, "quasineutral scaling", quasineutral_scaling),
    (10, "hydrodynamic limit", hydrodynamic_limit),
    (11, "Euler reference", euler_reference),
    (12, "scheme order", scheme_order),
    (13, "determinism", determinism),
];

/// Runs the suite; criterion 7 is evaluated last so it sees every run.
pub fn run_suite(suite: Suite, mut progress: impl FnMut(&CheckResult)) -> SuiteReport {
    let mut ctx = Context::default();
    let mut order: Vec<usize> = (0..CRITERIA.len()).filter(|&i| CRITERIA[i].0 != 7).collect();
    order.push(6);
    let mut results = Vec::new();
    for i in order {
        let (id, name, body) = CRITERIA[i];
        let start = Instant::now();
        let skipped = suite == Suite::Fast && (id == 9 || id == 10);
        let (pass, detail, metrics) = if skipped {
            (None, "skipped in the fast suite".to_string(), BTreeMap::new())
        } else {
            match body(&mut ctx, suite) {
                Ok(v) => (Some(v.pass), v.detail, v.metrics),
                Err(e) => (Some(false), format!("error: {e}"), BTreeMap::new()),
            }
        };
        let r = CheckResult {
            id,
            name: name.into(),
            pass,
            detail,
            metrics,
            seconds: start.elapsed().as_secs_f64(),
        };
        progress(&r);
        results.push(r);
    }
    results.sort_by_key(|r| r.id);
    SuiteReport {
        suite,
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        passed: results.iter().all(|r| r.pass != Some(false)),
        results,
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Zero-mean trigonometric polynomial with modes `|k|_∞ ≤ k_max` and
/// coefficients `~ U(-1, 1)/|k|²`.
fn random_potential(grid: TorusGrid, rng: &mut ChaCha8Rng, k_max: i64) -> Vec<f64> {
    let mut phi = vec![0.0; grid.len()];
    for kx in 0..=k_max {
        for ky in -k_max..=k_max {
            if kx == 0 && ky <= 0 {
                continue;
            }
            let k2 = (kx * kx + ky * ky) as f64;
            let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0) / k2, rng.gen_range(-1.0..1.0) / k2);
            for (j, p) in phi.iter_mut().enumerate() {
                let x = grid.coords(j);
                let th = 2.0 * PI * (kx as f64 * x[0] + ky as f64 * x[1]);
                *p += a * th.cos() + b * th.sin();
            }
        }
    }
    phi
}

fn scaled(phi: &[f64], s: f64) -> Vec<f64> {
    phi.iter().map(|v| v * s).collect()
}

fn max_hessian(sp: &Spectral, phi: &[f64]) -> f64 {
    sp.hessian(phi).iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
}

// ---------------------------------------------------------------- 1

/// Worst relative change of the node moments: mass against `ρ`, the other
/// moments against `max(|m_i|, ρ)`.
fn moment_change(before: &PhaseField, after: &PhaseField) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..before.x.len() {
        let a = block_moments(&before.v, before.block(j));
        let b = block_moments(&after.v, after.block(j));
        for i in 0..a.len() {
            let scale = a[i].abs().max(a[0]);
            worst = worst.max((a[i] - b[i]).abs() / scale);
        }
    }
    worst
}

fn bimodal_field(x: TorusGrid, v: VelocityGrid, rng: &mut ChaCha8Rng) -> Result<PhaseField> {
    let d = v.dim();
    let mut values = Vec::with_capacity(x.len() * v.len());
    for _ in 0..x.len() {
        let mut u1 = [0.0; 2];
        let mut u2 = [0.0; 2];
        for a in 0..d {
            u1[a] = rng.gen_range(-1.0..1.0);
            u2[a] = rng.gen_range(-1.0..1.0);
        }
        let (r1, r2) = (rng.gen_range(0.2..1.0), rng.gen_range(0.2..1.0));
        let (t1, t2) = (rng.gen_range(0.3..0.6), rng.gen_range(0.3..0.6));
        let a = maxwellian(&v, r1, u1, t1)?;
        let b = maxwellian(&v, r2, u2, t2)?;
        values.extend(a.iter().zip(&b).map(|(p, q)| p + q));
    }
    Ok(PhaseField { x, v, values, time: 0.0 })
}

fn collision_invariants(_: &mut Context, _: Suite) -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_bgk = 0.0f64;
    for (d, n_v) in [(1, 64), (2, 24)] {
        let x = TorusGrid::new(d, 4)?;
        let v = VelocityGrid::new(d, n_v, 5.0)?;
        for tau_dt in [(0.05, 0.01), (0.01, 0.1), (1.0, 1e-3)] {
            let f = bimodal_field(x, v, &mut rng)?;
            let (g, _) = collide(&f, &CollisionConfig::Bgk { tau: tau_dt.0 }, tau_dt.1)?;
            worst_bgk = worst_bgk.max(moment_change(&f, &g));
        }
    }
    let x = TorusGrid::new(2, 4)?;
    let v = VelocityGrid::new(2, 16, 4.0)?;
    let f = bimodal_field(x, v, &mut rng)?;
    let cfg = CollisionConfig::Direct { gamma: 1.0, n_sigma: 16 };
    let (g, clipped) = collide(&f, &cfg, 1e-3)?;
    let worst_direct = moment_change(&f, &g);
    let tol = 1e-10;
    Ok(Verdict::new(
        worst_bgk <= tol && worst_direct <= tol && clipped == 0.0,
        format!("max relative moment change: BGK {worst_bgk:.2e}, direct {worst_direct:.2e} (tol {tol:e})"),
        &[("bgk", worst_bgk), ("direct", worst_direct), ("direct_clipped", clipped)],
    ))
}

// ---------------------------------------------------------------- 2

fn sigma_conservation(_: &mut Context, _: Suite) -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut dp, mut de) = (0.0f64, 0.0f64);
    let count = 10_000;
    for _ in 0..count {
        let xi = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let xi1 = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let angle: f64 = rng.gen_range(0.0..2.0 * PI);
        let mut sigma = [angle.cos(), angle.sin()];
        if sigma[0] * (xi[0] - xi1[0]) + sigma[1] * (xi[1] - xi1[1]) < 0.0 {
            sigma = [-sigma[0], -sigma[1]];
        }
        let (a, b) = post_collision_velocities(&xi, &xi1, &sigma)?;
        let scale_p = xi[0].hypot(xi[1]) + xi1[0].hypot(xi1[1]);
        let e = |u: &[f64]| u[0] * u[0] + u[1] * u[1];
        let scale_e = e(&xi) + e(&xi1);
        for c in 0..2 {
            dp = dp.max((xi[c] + xi1[c] - a[c] - b[c]).abs() / scale_p);
        }
        de = de.max((e(&xi) + e(&xi1) - e(&a) - e(&b)).abs() / scale_e);
    }
    let tol = 1e-12;
    Ok(Verdict::new(
        dp <= tol && de <= tol,
        format!("{count} triples: momentum {dp:.2e}, energy {de:.2e} relative (tol {tol:e})"),
        &[("momentum", dp), ("energy", de)],
    ))
}

// ---------------------------------------------------------------- 3

fn monge_ampere_round_trip(_: &mut Context, _: Suite) -> Result<Verdict> {
    let tp = 2.0 * PI;
    let g = TorusGrid::new(2, 64)?;
    let sp = Spectral::new(g);
    let solver = FieldSolver::new(g);
    let cases: [(f64, Box<dyn Fn([f64; 2]) -> f64>); 2] = [
        (0.2, Box::new(move |x| 0.05 * (tp * x[0]).cos() * (tp * x[1]).cos())),
        (0.3, Box::new(move |x| 0.02 * (tp * x[0]).sin() * (tp * 2.0 * x[1]).cos())),
    ];
    let (mut err2, mut iters) = (0.0f64, 0usize);
    for (eps, phi) in &cases {
        let exact = g.sample(phi);
        let rho = forward_determinant(&sp, &exact, *eps);
        let (p, r) = solver.solve(&rho, *eps, FieldMode::MongeAmpere, None)?;
        err2 = err2.max(max_abs_diff(&p.phi, &exact));
        iters = iters.max(r.iterations);
    }
    let g1 = TorusGrid::new(1, 64)?;
    let (a, eps) = (0.1, 0.1);
    let exact = g1.sample(|x| a * (tp * x[0]).cos());
    let rho = g1.sample(|x| 1.0 - eps * eps * a * tp * tp * (tp * x[0]).cos());
    let (p, _) = FieldSolver::new(g1).solve(&rho, eps, FieldMode::MongeAmpere, None)?;
    let err1 = max_abs_diff(&p.phi, &exact);
    Ok(Verdict::new(
        err2 <= 1e-7 && iters <= 8 && err1 <= 1e-8,
        format!("d=2 n_x=64: max error {err2:.2e} in {iters} Newton iterations; d=1 closed form {err1:.2e}"),
        &[("error_d2", err2), ("iterations", iters as f64), ("error_d1", err1)],
    ))
}

// ---------------------------------------------------------------- 4

fn cofactor_identity(_: &mut Context, _: Suite) -> Result<Verdict> {
    // Modes up to 8 on a 64-grid: the cubic flux stays resolved (24 < 32).
    let g = TorusGrid::new(2, 64)?;
    let sp = Spectral::new(g);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let phi = random_potential(g, &mut rng, 8);
        let phi = scaled(&phi, 1.0 / max_hessian(&sp, &phi));
        let p = Potential::new(&sp, phi, 1.0);
        worst = worst.max(cofactor_divergence_residual(&sp, &p)?);
    }
    Ok(Verdict::new(
        worst <= 1e-8,
        format!("20 potentials with |D²φ|∞ = 1: residual {worst:.2e} (tol 1e-8)"),
        &[("residual", worst)],
    ))
}

// ---------------------------------------------------------------- 5

fn mass_compatibility(_: &mut Context, _: Suite) -> Result<Verdict> {
    let g = TorusGrid::new(2, 32)?;
    let sp = Spectral::new(g);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let eps = 0.3;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let phi = random_potential(g, &mut rng, 4);
        let phi = scaled(&phi, 0.5 / (eps * eps * max_hessian(&sp, &phi)));
        let det = forward_determinant(&sp, &phi, eps);
        worst = worst.max((g.mean(&det) - 1.0).abs());
    }
    Ok(Verdict::new(
        worst <= 1e-10,
        format!("100 potentials: |mean det(I+ε²D²φ) - 1| ≤ {worst:.2e} (tol 1e-10)"),
        &[("mean_deviation", worst)],
    ))
}

// ---------------------------------------------------------------- 6

fn relative_drift(t: &Trajectory) -> f64 {
    let e0 = t.records[0].e_total;
    t.records.iter().fold(0.0, |m, r| m.max(((r.e_total - e0) / e0).abs()))
}

fn energy_params_d1(mode: FieldMode) -> SimulationParams {
    let eps: f64 = 0.1;
    SimulationParams {
        dim: 1,
        n_x: 64,
        n_v: 128,
        v_max: 0.5 + 8.0 * eps.sqrt(),
        eps,
        dt: 2.5e-4,
        t_end: 0.5,
        field_mode: mode,
        collision: CollisionConfig::Bgk { tau: 0.05 },
        ic: WellPreparedIC {
            u0: InitialVelocity::Uniform { value: vec![0.5] },
            delta: Schedule::LINEAR,
            theta: Schedule::LINEAR,
            profile: DensityProfile::CosX,
        },
        snapshot_every: 0,
        cfl: 1.0,
        euler_reference: true,
        field_tol: None,
    }
}

/// Collisionless d=2 flow from rest with `ρ₀ - 1 = 2ε² cos cos`, where the
/// two field models differ at relative order ε².
fn energy_params_d2(eps: f64, mode: FieldMode) -> SimulationParams {
    SimulationParams {
        dim: 2,
        n_x: 16,
        n_v: 32,
        v_max: 7.0,
        eps,
        dt: 0.002,
        t_end: 0.1,
        field_mode: mode,
        collision: CollisionConfig::None,
        ic: WellPreparedIC {
            u0: InitialVelocity::Zero,
            delta: Schedule { coeff: 2.0, power: 2.0 },
            theta: Schedule::fixed(1.0),
            profile: DensityProfile::CosXy,
        },
        snapshot_every: 0,
        cfl: 1.0,
        euler_reference: false,
        field_tol: None,
    }
}

fn energy_conservation(ctx: &mut Context, _: Suite) -> Result<Verdict> {
    let poisson = relative_drift(&ctx.run(&energy_params_d1(FieldMode::Poisson))?);
    let ma = relative_drift(&ctx.run(&energy_params_d1(FieldMode::MongeAmpere))?);
    let eps_list = [0.2, 0.1, 0.05];
    let mut excess = Vec::new();
    let mut ma_d2 = 0.0f64;
    for &eps in &eps_list {
        let p = ctx.run(&energy_params_d2(eps, FieldMode::Poisson))?;
        let m = ctx.run(&energy_params_d2(eps, FieldMode::MongeAmpere))?;
        ma_d2 = ma_d2.max(relative_drift(&m));
        let (p0, m0) = (p.records[0].e_total, m.records[0].e_total);
        let ex = p
            .records
            .iter()
            .zip(&m.records)
            .fold(0.0f64, |acc, (a, b)| acc.max(((b.e_total - m0) - (a.e_total - p0)).abs() / p0));
        excess.push(ex);
    }
    let pts: Vec<(f64, f64)> = eps_list.iter().copied().zip(excess.iter().copied()).collect();
    let exponent = loglog_slope(&pts).unwrap_or(f64::NAN);
    let pass = poisson <= 1e-6 && ma <= 1e-4 && ma_d2 <= 1e-4 && exponent >= 1.5;
    Ok(Verdict::new(
        pass,
        format!(
            "d=1 drift: poisson {poisson:.2e} (tol 1e-6), monge_ampere {ma:.2e} (tol 1e-4); \
             d=2 monge_ampere drift {ma_d2:.2e}, mode excess {:.2e}/{:.2e}/{:.2e} at ε=0.2/0.1/0.05, exponent {exponent:.2} (≥ 1.5)",
            excess[0], excess[1], excess[2]
        ),
        &[
            ("drift_poisson_d1", poisson),
            ("drift_monge_ampere_d1", ma),
            ("drift_monge_ampere_d2", ma_d2),
            ("excess_exponent", exponent),
        ],
    ))
}

// ---------------------------------------------------------------- 7

fn h_bound(ctx: &mut Context, _: Suite) -> Result<Verdict> {
    let gap = ctx.worst_h_gap;
    Ok(Verdict::new(
        gap <= H_BOUND_TOL && ctx.records > 0,
        format!(
            "{} records over {} runs: max(h - H) = {gap:.2e} (tol {H_BOUND_TOL:e})",
            ctx.records, ctx.runs
        ),
        &[("worst_violation", gap), ("records", ctx.records as f64)],
    ))
}

// ---------------------------------------------------------------- 8

fn k_duality(_: &mut Context, _: Suite) -> Result<Verdict> {
    let g = TorusGrid::new(2, 8)?;
    let n = g.len();
    let (mut worst_dual, mut worst_gap) = (f64::NEG_INFINITY, 0.0f64);
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let slices: Vec<KSlice> = (0..4)
            .map(|i| KSlice {
                t: 0.1 * i as f64,
                rho: (0..n).map(|_| rng.gen_range(0.2..2.0)).collect(),
                current: (0..2).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
                z: rng.gen_range(0.0..1.0),
            })
            .collect();
        let mut samples: Vec<BSample> = (0..20)
            .map(|_| {
                (0..4)
                    .map(|_| (0..2).map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect())
                    .collect()
            })
            .collect();
        let (primal, dual) = k_functional_check(g, &slices, &samples)?;
        worst_dual = worst_dual.max(dual - primal);
        samples.push(optimal_b(&slices));
        let (primal, dual) = k_functional_check(g, &slices, &samples)?;
        worst_gap = worst_gap.max((primal - dual).abs());
    }
    Ok(Verdict::new(
        worst_dual <= 0.0 && worst_gap <= 1e-10,
        format!("100 cases: max(dual - primal) = {worst_dual:.2e}, gap at b* = {worst_gap:.2e} (tol 1e-10)"),
        &[("max_dual_minus_primal", worst_dual), ("gap_at_optimum", worst_gap)],
    ))
}

// ---------------------------------------------------------------- 9, 10

fn embedded(name: &str, text: &str) -> Result<LoadedConfig> {
    Ok(LoadedConfig {
        path: PathBuf::from(format!("<bundled>/{name}")),
        hash: hex_digest(text.as_bytes()),
        config: parse(text)?,
    })
}

fn sweep_rows(ctx: &mut Context, config: &RunConfig, eps_list: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &eps in eps_list {
        let mut p = resolve_params(config, eps)?;
        p.euler_reference = true;
        let t = ctx.run(&p)?;
        rows.push(summarize(eps, &t.records));
    }
    Ok(rows)
}

fn column(rows: &[SweepRow], f: impl Fn(&SweepRow) -> Option<f64>) -> Vec<f64> {
    rows.iter().map(|r| f(r).unwrap_or(f64::NAN)).collect()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

fn d1_sweep(ctx: &mut Context) -> Result<(Vec<f64>, Vec<SweepRow>)> {
    if let Some(cached) = &ctx.d1_sweep {
        return Ok(cached.clone());
    }
    let loaded = embedded("quasineutral_d1.cfg", QUASINEUTRAL_D1)?;
    let eps = loaded.config.sweep.as_ref().map(|s| s.epsilons.clone()).unwrap_or_default();
    let rows = sweep_rows(ctx, &loaded.config, &eps)?;
    ctx.d1_sweep = Some((eps.clone(), rows.clone()));
    Ok((eps, rows))
}

fn quasineutral_scaling(ctx: &mut Context, _: Suite) -> Result<Verdict> {
    let (eps, rows) = d1_sweep(ctx)?;
    let q = column(&rows, |r| r.sup_rho_hm1);
    let pts: Vec<(f64, f64)> = eps.iter().copied().zip(q.iter().copied()).collect();
    let slope = loglog_slope(&pts).unwrap_or(f64::NAN);
    Ok(Verdict::new(
        slope >= 0.45,
        format!("sup ‖ρ-1‖_H⁻¹ = {} at ε = {eps:?}: slope {slope:.3} (≥ 0.45)", sci(&q)),
        &[("slope", slope)],
    ))
}

fn hydrodynamic_limit(ctx: &mut Context, _: Suite) -> Result<Verdict> {
    let (_, rows) = d1_sweep(ctx)?;
    let h = column(&rows, |r| r.sup_h_mod);
    let j = column(&rows, |r| r.final_j_err_divfree);
    // ε → ε/4 is two steps down the halving list.
    let worst_ratio = (0..h.len().saturating_sub(2)).map(|i| h[i + 2] / h[i]).fold(0.0f64, f64::max);
    let flags_d1 = [
        strictly_decreasing(&h),
        worst_ratio <= 0.5,
        strictly_decreasing(&j),
        j[j.len() - 1] <= 0.5 * j[0],
    ];

    let d2 = embedded("quasineutral_d2.cfg", QUASINEUTRAL_D2)?;
    let rows2 = sweep_rows(ctx, &d2.config, &[0.2, 0.1])?;
    let h2 = column(&rows2, |r| r.sup_h_mod);
    let j2 = column(&rows2, |r| r.final_j_err_divfree);
    let flags_d2 = [strictly_decreasing(&h2), strictly_decreasing(&j2)];
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    Ok(Verdict::new(
        flags_d1.iter().chain(&flags_d2).all(|&x| x),
        format!(
            "d=1 sup H = {} (worst H(ε/4)/H(ε) {worst_ratio:.3}), final divfree error = {}; \
             d=2 sup H = {}, divfree error = {}",
            sci(&h),
            sci(&j),
            sci(&h2),
            sci(&j2)
        ),
        &[
            ("d1_h_decreasing", b(flags_d1[0])),
            ("d1_h_quarter_ratio", worst_ratio),
            ("d1_h_ratio_ok", b(flags_d1[1])),
            ("d1_divfree_decreasing", b(flags_d1[2])),
            ("d1_divfree_halved", b(flags_d1[3])),
            ("d2_h_decreasing", b(flags_d2[0])),
            ("d2_divfree_decreasing", b(flags_d2[1])),
        ],
    ))
}

// ---------------------------------------------------------------- 11

fn euler_reference(_: &mut Context, _: Suite) -> Result<Verdict> {
    let g = TorusGrid::new(2, 64)?;
    let solver = EulerSolver::new(g);
    let tg0 = solver.initial_state(&InitialVelocity::TaylorGreen.sample(g)?);
    let tg1 = solver.advance_to(&tg0, 0.005, 1.0)?;
    let station = (0..2).fold(0.0f64, |m, a| m.max(max_abs_diff(&tg0.u[a], &tg1.u[a])));
    let tg_energy = ((tg1.kinetic_energy() - tg0.kinetic_energy()) / tg0.kinetic_energy()).abs();

    let g32 = TorusGrid::new(2, 32)?;
    let s32 = EulerSolver::new(g32);
    let u0 = s32.initial_state(&InitialVelocity::RandomBandlimited { seed: 21, max_mode: 4 }.sample(g32)?);
    let finals: Vec<_> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| s32.advance_to(&u0, dt, 0.5))
        .collect::<Result<_>>()?;
    let rand_energy = ((finals[2].kinetic_energy() - u0.kinetic_energy()) / u0.kinetic_energy()).abs();
    let diff = |a: usize, b: usize| g32.l2_norm_vec(
        &(0..2)
            .map(|c| finals[a].u[c].iter().zip(&finals[b].u[c]).map(|(x, y)| x - y).collect())
            .collect::<Vec<Vec<f64>>>(),
    );
    let order = (diff(0, 1) / diff(1, 2)).log2();
    let pass = station <= 1e-6 && tg_energy <= 1e-8 && rand_energy <= 1e-8 && order >= 3.9;
    Ok(Verdict::new(
        pass,
        format!(
            "Taylor-Green n_x=64 t=1: drift {station:.2e}, energy {tg_energy:.2e}; \
             random field energy {rand_energy:.2e}; dt order {order:.2} (≥ 3.9)"
        ),
        &[
            ("tg_stationarity", station),
            ("tg_energy", tg_energy),
            ("random_energy", rand_energy),
            ("dt_order", order),
        ],
    ))
}

// ---------------------------------------------------------------- 12

fn strang_params(dt: f64) -> SimulationParams {
    SimulationParams {
        dim: 1,
        n_x: 64,
        n_v: 128,
        v_max: 6.0,
        eps: 0.3,
        dt,
        t_end: 0.2,
        field_mode: FieldMode::Poisson,
        collision: CollisionConfig::None,
        ic: WellPreparedIC {
            u0: InitialVelocity::Zero,
            delta: Schedule::fixed(0.1),
            theta: Schedule::fixed(1.0),
            profile: DensityProfile::CosX,
        },
        snapshot_every: 0,
        cfl: 20.0,
        euler_reference: false,
        field_tol: None,
    }
}

fn free_streaming_error(n_x: usize) -> Result<f64> {
    let x = TorusGrid::new(1, n_x)?;
    // Velocities dense enough that ξ t / h_x samples every cell fraction.
    let v = VelocityGrid::new(1, 64, 1.0)?;
    let t = 0.2371;
    let profile = |x: f64, xi: f64| {
        (1.0 + 0.5 * (2.0 * PI * x).cos()) * (-0.5 * xi * xi).exp() / (2.0 * PI).sqrt()
    };
    let f0 = PhaseField::from_fn(x, v, |j, k| profile(x.coords(j)[0], v.node_1d(k)))?;
    let (f1, _) = advect_x(&f0, t);
    let exact = PhaseField::from_fn(x, v, |j, k| {
        let xi = v.node_1d(k);
        profile(x.coords(j)[0] - xi * t, xi)
    })?;
    Ok(max_abs_diff(&f1.values, &exact.values))
}

fn scheme_order(ctx: &mut Context, _: Suite) -> Result<Verdict> {
    let finals: Vec<PhaseField> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| {
            ctx.run(&strang_params(dt))?
                .final_state
                .ok_or_else(|| Error::InvalidParameter("run produced no state".into()))
        })
        .collect::<Result<_>>()?;
    let l2 = |a: &PhaseField, b: &PhaseField| {
        a.values.iter().zip(&b.values).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    };
    let strang = (l2(&finals[0], &finals[1]) / l2(&finals[1], &finals[2])).log2();
    let errs: Vec<f64> = [16, 32, 64].iter().map(|&n| free_streaming_error(n)).collect::<Result<_>>()?;
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let space = orders.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Verdict::new(
        strang >= 1.9 && space >= 3.0,
        format!(
            "Strang dt order {strang:.2} (≥ 1.9); free streaming errors {} at n_x = 16/32/64, order {space:.2} (≥ 3)",
            sci(&errs)
        ),
        &[("strang_order", strang), ("space_order", space)],
    ))
}

// ---------------------------------------------------------------- 13

fn scratch_dir(tag: &str) -> PathBuf {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    std::env::temp_dir().join(format!("quasikin-check-{}-{nanos}-{tag}", std::process::id()))
}

fn rerun_identical(ctx: &mut Context, name: &str, text: &str) -> Result<bool> {
    let loaded = embedded(name, text)?;
    let mut csvs = Vec::new();
    for pass in 0..2 {
        let dir = scratch_dir(&format!("{name}-{pass}"));
        let out = simulate_into(&loaded, &loaded.config, loaded.config.physics.eps, &dir);
        let bytes = std::fs::read(dir.join("diagnostics.csv"));
        let _ = std::fs::remove_dir_all(&dir);
        match out {
            Ok(o) => ctx.observe(&o.records),
            Err(e) => return Err(Error::InvalidParameter(e.to_string())),
        }
        csvs.push(bytes?);
    }
    Ok(csvs[0] == csvs[1])
}

fn determinism(ctx: &mut Context, suite: Suite) -> Result<Verdict> {
    let mut scenarios = vec![("equilibrium.cfg", EQUILIBRIUM)];
    if suite == Suite::Full {
        scenarios.push(("quasineutral_d1.cfg", QUASINEUTRAL_D1));
    }
    let mut same = Vec::new();
    for (name, text) in &scenarios {
        same.push((name, rerun_identical(ctx, name, text)?));
    }
    let list = same
        .iter()
        .map(|(n, s)| format!("{n} {}", if *s { "identical" } else { "DIFFERS" }))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Verdict::new(
        same.iter().all(|(_, s)| *s),
        format!("rerun diagnostics.csv: {list}"),
        &[("scenarios", scenarios.len() as f64)],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        assert_eq!("fast".parse::<Suite>().unwrap(), Suite::Fast);
        assert_eq!("full".parse::<Suite>().unwrap(), Suite::Full);
        assert!("quick".parse::<Suite>().is_err());
    }

    #[test]
    fn bundled_scenarios_parse() {
        for text in [QUASINEUTRAL_D1, QUASINEUTRAL_D2, EQUILIBRIUM] {
            parse(text).unwrap();
        }
    }

    #[test]
    fn fast_criteria_pass() {
        let mut ctx = Context::default();
        for (id, name, body) in CRITERIA {
            if matches!(id, 1 | 2 | 3 | 4 | 5 | 8) {
                let v = body(&mut ctx, Suite::Fast).unwrap();
                assert!(v.pass, "{name}: {}", v.detail);
            }
        }
    }

    #[test]
    fn free_streaming_converges() {
        let a = free_streaming_error(16).unwrap();
        let b = free_streaming_error(32).unwrap();
        assert!(b < a / 8.0, "{a} {b}");
    }
}
