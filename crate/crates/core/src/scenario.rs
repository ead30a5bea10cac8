//! Run orchestration behind the command-line verbs: single runs, ε-sweeps
//! and standalone Euler runs, each writing into its own output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::config::{validate_epsilons, LoadedConfig, RunConfig};
use crate::diagnostics::{DiagnosticsRecord, CSV_HEADER};
use crate::error::{Error, Result};
use crate::euler::{EulerSolver, EulerState};
use crate::grids::PhaseField;
use crate::monge_ampere::Potential;
use crate::snapshot;
use crate::vlasov::{self, Observer, SimulationParams, Stepper};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum CommandError {
    Config(Error),
    Runtime(Error),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => EXIT_CONFIG,
            CommandError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CommandError::Config(e) => write!(f, "configuration error: {e}"),
            CommandError::Runtime(e) => write!(f, "runtime error: {e}"),
        }
    }
}

fn config_err(e: Error) -> CommandError {
    CommandError::Config(e)
}

fn runtime_err(e: Error) -> CommandError {
    CommandError::Runtime(e)
}

/// Largest uniform step within the CFL limit that lands exactly on `t_end`.
pub fn auto_dt(params: &SimulationParams) -> Result<f64> {
    let mut probe = params.clone();
    probe.dt = 1.0;
    let stepper = Stepper::new(probe)?;
    let f = stepper.initial_condition()?;
    let (phi, _) = stepper.solve_field(&f)?;
    let limit = stepper.cfl_limit(&phi)?;
    if params.t_end == 0.0 {
        return Ok(limit);
    }
    let n = (params.t_end / limit).ceil().max(1.0);
    Ok(params.t_end / n)
}

/// Parameters at `eps` with a resolved time step.
pub fn resolve_params(config: &RunConfig, eps: f64) -> Result<SimulationParams> {
    let mut p = config.params_for(eps)?;
    if config.time.dt.is_none() {
        p.dt = auto_dt(&p)?;
    }
    Ok(p)
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_path: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub params: Option<SimulationParams>,
    pub parallel: bool,
    pub status: String,
    pub partial: bool,
    pub error: Option<String>,
    pub steps: usize,
    pub h_bound_worst_violation: Option<f64>,
    pub outputs: Vec<String>,
}

impl Manifest {
    fn new(loaded: &LoadedConfig, config: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_path: loaded.path.display().to_string(),
            config_hash: loaded.hash.clone(),
            config: config.clone(),
            params: None,
            parallel: cfg!(feature = "parallel"),
            status: "running".into(),
            partial: false,
            error: None,
            steps: 0,
            h_bound_worst_violation: None,
            outputs: Vec::new(),
        }
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

/// Streams records to `diagnostics.csv` and snapshots to `snapshots/`.
struct FileObserver {
    csv: BufWriter<File>,
    snap_dir: PathBuf,
    worst_violation: f64,
    outputs: Vec<String>,
}

impl FileObserver {
    fn new(dir: &Path) -> Result<Self> {
        let mut csv = BufWriter::new(File::create(dir.join("diagnostics.csv"))?);
        writeln!(csv, "{CSV_HEADER}")?;
        let snap_dir = dir.join("snapshots");
        fs::create_dir_all(&snap_dir)?;
        Ok(Self {
            csv,
            snap_dir,
            worst_violation: f64::NEG_INFINITY,
            outputs: vec!["diagnostics.csv".into()],
        })
    }

    fn snap(&mut self, stem: String, res: Result<()>) -> Result<()> {
        res?;
        self.outputs.push(format!("snapshots/{stem}.bin"));
        Ok(())
    }
}

impl Observer for FileObserver {
    fn on_record(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.csv, "{}", r.csv_row())?;
        self.csv.flush()?;
        if let (Some(h), Some(big_h)) = (r.h_eps, r.h_mod) {
            self.worst_violation = self.worst_violation.max(h - big_h);
        }
        Ok(())
    }

    fn on_snapshot(
        &mut self,
        step: usize,
        f: &PhaseField,
        potential: &Potential,
        reference: Option<&EulerState>,
    ) -> Result<()> {
        let dir = self.snap_dir.clone();
        let stem = format!("f_{step:06}");
        self.snap(stem.clone(), snapshot::write_phase(&dir, &stem, f))?;
        let stem = format!("phi_{step:06}");
        let res = snapshot::write_spatial(&dir, &stem, f.x, f.time, "phi", &potential.phi);
        self.snap(stem, res)?;
        if let Some(u) = reference {
            for (a, comp) in u.u.iter().enumerate() {
                let name = ["u_x", "u_y"][a];
                let stem = format!("{name}_{step:06}");
                let res = snapshot::write_spatial(&dir, &stem, u.grid, u.t, name, comp);
                self.snap(stem, res)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub records: Vec<DiagnosticsRecord>,
    pub error: Option<String>,
}

/// Single kinetic run at `eps` into `dir`. Runtime failures still leave the
/// partial outputs and a manifest flagged `partial`.
pub fn simulate_into(
    loaded: &LoadedConfig,
    config: &RunConfig,
    eps: f64,
    dir: &Path,
) -> std::result::Result<RunOutcome, CommandError> {
    fs::create_dir_all(dir).map_err(|e| runtime_err(e.into()))?;
    let mut manifest = Manifest::new(loaded, config);
    let params = resolve_params(config, eps).map_err(|e| match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidGrid(_) | Error::Unsupported(_) => config_err(e),
        other => runtime_err(other),
    })?;
    manifest.params = Some(params.clone());
    manifest.write(dir).map_err(runtime_err)?;
    let mut obs = FileObserver::new(dir).map_err(runtime_err)?;
    let result = vlasov::run(&params, &mut obs);
    manifest.outputs = obs.outputs.clone();
    manifest.outputs.push("manifest.json".into());
    if obs.worst_violation.is_finite() {
        manifest.h_bound_worst_violation = Some(obs.worst_violation);
    }
    let outcome = match result {
        Ok(traj) => {
            manifest.status = "complete".into();
            manifest.steps = traj.steps;
            manifest.write(dir).map_err(runtime_err)?;
            RunOutcome {
                dir: dir.to_path_buf(),
                records: traj.records,
                error: None,
            }
        }
        Err(fail) => {
            manifest.status = "failed".into();
            manifest.partial = true;
            manifest.steps = fail.partial.steps;
            manifest.error = Some(fail.error.to_string());
            manifest.write(dir).map_err(runtime_err)?;
            return Err(runtime_err(fail.error));
        }
    };
    Ok(outcome)
}

pub fn output_dir(config: &RunConfig, override_dir: Option<&Path>) -> PathBuf {
    override_dir.map(Path::to_path_buf).unwrap_or_else(|| config.output.dir.clone())
}

pub fn run_scenario(path: &Path, out: Option<&Path>) -> std::result::Result<RunOutcome, CommandError> {
    let loaded = crate::config::load(path).map_err(config_err)?;
    let config = loaded.config.clone();
    let dir = output_dir(&config, out);
    simulate_into(&loaded, &config, config.physics.eps, &dir)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub sup_h_mod: Option<f64>,
    pub sup_h_eps: Option<f64>,
    pub sup_rho_hm1: Option<f64>,
    pub final_j_err_divfree: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Least-squares log-log slopes of the four monitored columns.
    pub slopes: [Option<f64>; 4],
}

impl SweepReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.status == "ok")
    }
}

fn sup(records: &[DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> Option<f64>) -> Option<f64> {
    records.iter().map(f).collect::<Option<Vec<f64>>>().map(|v| v.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

pub fn summarize(epsilon: f64, records: &[DiagnosticsRecord]) -> SweepRow {
    SweepRow {
        epsilon,
        sup_h_mod: sup(records, |r| r.h_mod),
        sup_h_eps: sup(records, |r| r.h_eps),
        sup_rho_hm1: sup(records, |r| Some(r.rho_hm1)),
        final_j_err_divfree: records.last().and_then(|r| r.j_err_divfree),
        status: "ok".into(),
    }
}

/// Slope of `log y` against `log x` by least squares.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_convergence_csv(path: &Path, report: &SweepReport) -> Result<()> {
    let mut out = String::from("epsilon,sup_H_eps,sup_h_eps,sup_rho_Hm1,final_J_err_divfree,status\n");
    for r in &report.rows {
        out += &format!(
            "{},{},{},{},{},{}\n",
            r.epsilon,
            cell(r.sup_h_mod),
            cell(r.sup_h_eps),
            cell(r.sup_rho_hm1),
            cell(r.final_j_err_divfree),
            r.status
        );
    }
    let s = &report.slopes;
    out += &format!("slope,{},{},{},{},fit\n", cell(s[0]), cell(s[1]), cell(s[2]), cell(s[3]));
    fs::write(path, out)?;
    Ok(())
}

/// Runs every ε of the `[sweep]` list with the Euler reference enabled.
pub fn sweep_loaded(loaded: &LoadedConfig, out: Option<&Path>) -> std::result::Result<SweepReport, CommandError> {
    let mut config = loaded.config.clone();
    let eps_list = config
        .sweep
        .as_ref()
        .map(|s| s.epsilons.clone())
        .ok_or_else(|| config_err(Error::Config("sweep needs a [sweep] section with epsilons".into())))?;
    validate_epsilons(&eps_list).map_err(config_err)?;
    config.output.euler_reference = true;
    let root = output_dir(&config, out);
    fs::create_dir_all(&root).map_err(|e| runtime_err(e.into()))?;
    let mut rows = Vec::new();
    for &eps in &eps_list {
        let dir = root.join(format!("eps_{eps}"));
        match simulate_into(loaded, &config, eps, &dir) {
            Ok(o) => rows.push(summarize(eps, &o.records)),
            Err(CommandError::Config(e)) => return Err(CommandError::Config(e)),
            Err(CommandError::Runtime(e)) => rows.push(SweepRow {
                epsilon: eps,
                sup_h_mod: None,
                sup_h_eps: None,
                sup_rho_hm1: None,
                final_j_err_divfree: None,
                status: format!("failed: {}", e.to_string().replace(',', ";")),
            }),
        }
    }
    let col = |f: &dyn Fn(&SweepRow) -> Option<f64>| -> Option<f64> {
        let pts: Vec<(f64, f64)> = rows.iter().filter_map(|r| f(r).map(|y| (r.epsilon, y))).collect();
        loglog_slope(&pts)
    };
    let slopes = [
        col(&|r| r.sup_h_mod),
        col(&|r| r.sup_h_eps),
        col(&|r| r.sup_rho_hm1),
        col(&|r| r.final_j_err_divfree),
    ];
    let report = SweepReport { rows, slopes };
    write_convergence_csv(&root.join("convergence.csv"), &report).map_err(runtime_err)?;
    let summary = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config_path": loaded.path.display().to_string(),
        "config_hash": loaded.hash,
        "config": config,
        "epsilons": eps_list,
        "partial": !report.all_ok(),
        "report": report,
    });
    fs::write(root.join("manifest.json"), serde_json::to_string_pretty(&summary).unwrap_or_default() + "\n")
        .map_err(|e| runtime_err(e.into()))?;
    Ok(report)
}

pub fn sweep_epsilon(path: &Path, out: Option<&Path>) -> std::result::Result<SweepReport, CommandError> {
    let loaded = crate::config::load(path).map_err(config_err)?;
    sweep_loaded(&loaded, out)
}

/// Standalone Euler run from the configured `u0`, grid and time settings.
/// Writes `euler.csv` (t, kinetic energy, max divergence) and snapshots.
pub fn run_euler(path: &Path, out: Option<&Path>) -> std::result::Result<usize, CommandError> {
    let loaded = crate::config::load(path).map_err(config_err)?;
    let config = &loaded.config;
    let grid = crate::grids::TorusGrid::new(config.grid.dim, config.grid.n_x).map_err(config_err)?;
    let u0 = config.velocity().map_err(config_err)?.sample(grid).map_err(config_err)?;
    let dir = output_dir(config, out);
    fs::create_dir_all(dir.join("snapshots")).map_err(|e| runtime_err(e.into()))?;
    let mut manifest = Manifest::new(&loaded, config);
    manifest.write(&dir).map_err(runtime_err)?;

    let solver = EulerSolver::new(grid);
    let mut state = solver.initial_state(&u0);
    let dt = config.time.dt.unwrap_or_else(|| solver.cfl_limit(&state).min(config.time.t_end.max(1e-3)));
    let n_steps = if config.time.t_end == 0.0 { 0 } else { (config.time.t_end / dt - 1e-9).ceil() as usize };
    let mut csv = String::from("t,kinetic_energy,max_divergence,max_speed\n");
    let mut row = |s: &EulerState| {
        let div = solver.spectral().divergence(&s.u).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        csv += &format!("{},{},{},{}\n", s.t, s.kinetic_energy(), div, s.max_speed());
    };
    let snap = |s: &EulerState, step: usize, outputs: &mut Vec<String>| -> Result<()> {
        let sd = dir.join("snapshots");
        let mut fields: Vec<(&str, &Vec<f64>)> = s.u.iter().enumerate().map(|(a, c)| (["u_x", "u_y"][a], c)).collect();
        fields.push(("p", &s.p));
        for (name, values) in fields {
            let stem = format!("{name}_{step:06}");
            snapshot::write_spatial(&sd, &stem, s.grid, s.t, name, values)?;
            outputs.push(format!("snapshots/{stem}.bin"));
        }
        Ok(())
    };
    row(&state);
    snap(&state, 0, &mut manifest.outputs).map_err(runtime_err)?;
    let mut failure = None;
    for step in 1..=n_steps {
        let t_next = if step == n_steps { config.time.t_end } else { step as f64 * dt };
        match solver.step(&state, t_next - state.t) {
            Ok(mut s) => {
                s.t = t_next;
                state = s;
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
        row(&state);
        manifest.steps = step;
        let every = config.output.snapshot_every;
        if step == n_steps || (every > 0 && step % every == 0) {
            snap(&state, step, &mut manifest.outputs).map_err(runtime_err)?;
        }
    }
    fs::write(dir.join("euler.csv"), csv).map_err(|e| runtime_err(e.into()))?;
    manifest.outputs.push("euler.csv".into());
    manifest.outputs.push("manifest.json".into());
    match failure {
        None => {
            manifest.status = "complete".into();
            manifest.write(&dir).map_err(runtime_err)?;
            Ok(manifest.steps)
        }
        Some(e) => {
            manifest.status = "failed".into();
            manifest.partial = true;
            manifest.error = Some(e.to_string());
            manifest.write(&dir).map_err(runtime_err)?;
            Err(runtime_err(e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglog_slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05].iter().map(|&e: &f64| (e, 3.0 * e.powf(1.5))).collect();
        assert!((loglog_slope(&pts).unwrap() - 1.5).abs() < 1e-12);
        assert!(loglog_slope(&pts[..1]).is_none());
    }

    #[test]
    fn summary_takes_suprema_and_final_values() {
        let mk = |t: f64, h: f64| DiagnosticsRecord {
            t,
            mass: 1.0,
            momentum: vec![0.0],
            e_kinetic: 0.0,
            e_field: 0.0,
            e_total: 0.0,
            h_mod: Some(h),
            h_eps: Some(h / 2.0),
            rho_hm1: h * 3.0,
            j_err_raw: Some(t),
            j_err_divfree: Some(t),
            clipped_mass: 0.0,
            newton_iters: None,
            field_residual: None,
        };
        let row = summarize(0.1, &[mk(0.0, 1.0), mk(1.0, 2.0), mk(2.0, 0.5)]);
        assert_eq!(row.sup_h_mod, Some(2.0));
        assert_eq!(row.sup_rho_hm1, Some(6.0));
        assert_eq!(row.final_j_err_divfree, Some(2.0));
    }
}
