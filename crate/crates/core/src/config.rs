//! Scenario files: TOML with the sections `[grid]`, `[physics]`, `[time]`,
//! `[collision]`, `[initial]`, `[output]` and `[sweep]`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::collision::CollisionConfig;
use crate::error::{Error, Result};
use crate::euler::InitialVelocity;
use crate::monge_ampere::FieldMode;
use crate::vlasov::{DensityProfile, Schedule, SimulationParams, WellPreparedIC};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub n_x: usize,
    pub n_v: usize,
    /// Defaults to `u_max + v_max_sigmas · sqrt(θ)` at the run's ε.
    pub v_max: Option<f64>,
    #[serde(default = "eight")]
    pub v_max_sigmas: f64,
}

fn eight() -> f64 {
    8.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub eps: f64,
    #[serde(default)]
    pub field_mode: FieldMode,
    pub field_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    /// Defaults to the largest uniform step within the CFL limit.
    pub dt: Option<f64>,
    pub t_end: f64,
    #[serde(default = "one")]
    pub cfl: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocitySection {
    pub kind: String,
    pub value: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub max_mode: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub u0: VelocitySection,
    #[serde(default = "one")]
    pub delta_coeff: f64,
    #[serde(default = "one")]
    pub delta_power: f64,
    #[serde(default = "one")]
    pub theta_coeff: f64,
    #[serde(default = "one")]
    pub theta_power: f64,
    #[serde(default)]
    pub profile: DensityProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default)]
    pub euler_reference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSection,
    pub physics: PhysicsSection,
    pub time: TimeSection,
    #[serde(default = "no_collision")]
    pub collision: CollisionConfig,
    pub initial: InitialSection,
    pub output: OutputSection,
    pub sweep: Option<SweepSection>,
}

fn no_collision() -> CollisionConfig {
    CollisionConfig::None
}

/// A parsed file together with the SHA-256 of its bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub hash: String,
    pub config: RunConfig,
}

pub fn load(path: &Path) -> Result<LoadedConfig> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::Config(format!("config {} is not UTF-8", path.display())))?;
    let config = parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(LoadedConfig {
        path: path.to_path_buf(),
        hash: hex_digest(&bytes),
        config,
    })
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.velocity()?;
        self.params_for(self.physics.eps)?.validate().map_err(|e| Error::Config(e.to_string()))?;
        if let Some(s) = &self.sweep {
            validate_epsilons(&s.epsilons)?;
        }
        Ok(())
    }

    pub fn velocity(&self) -> Result<InitialVelocity> {
        let u = &self.initial.u0;
        let need = |what: &str| Error::Config(format!("u0 kind '{}' needs '{what}'", u.kind));
        Ok(match u.kind.as_str() {
            "zero" => InitialVelocity::Zero,
            "uniform" => InitialVelocity::Uniform {
                value: u.value.clone().ok_or_else(|| need("value"))?,
            },
            "taylor_green" => InitialVelocity::TaylorGreen,
            "shear" => InitialVelocity::Shear,
            "random_bandlimited" => InitialVelocity::RandomBandlimited {
                seed: u.seed.unwrap_or(self.seed),
                max_mode: u.max_mode.ok_or_else(|| need("max_mode"))?,
            },
            other => return Err(Error::Config(format!("unknown u0 kind '{other}'"))),
        })
    }

    pub fn initial_condition(&self) -> Result<WellPreparedIC> {
        Ok(WellPreparedIC {
            u0: self.velocity()?,
            delta: Schedule {
                coeff: self.initial.delta_coeff,
                power: self.initial.delta_power,
            },
            theta: Schedule {
                coeff: self.initial.theta_coeff,
                power: self.initial.theta_power,
            },
            profile: self.initial.profile,
        })
    }

    /// Simulation parameters at `eps`. A missing `dt` is a placeholder here,
    /// resolved from the CFL limit by the scenario runner.
    pub fn params_for(&self, eps: f64) -> Result<SimulationParams> {
        let ic = self.initial_condition()?;
        let v_max = match self.grid.v_max {
            Some(v) => v,
            None => {
                let grid = crate::grids::TorusGrid::new(self.grid.dim, self.grid.n_x)
                    .map_err(|e| Error::Config(e.to_string()))?;
                let u = crate::vlasov::initial_velocity(&ic, grid).map_err(|e| Error::Config(e.to_string()))?;
                let u_max = u.iter().flatten().fold(0.0f64, |m, c| m.max(c.abs()));
                u_max + self.grid.v_max_sigmas * ic.theta.at(eps).max(0.0).sqrt()
            }
        };
        Ok(SimulationParams {
            dim: self.grid.dim,
            n_x: self.grid.n_x,
            n_v: self.grid.n_v,
            v_max,
            eps,
            dt: self.time.dt.unwrap_or(f64::MIN_POSITIVE),
            t_end: self.time.t_end,
            field_mode: self.physics.field_mode,
            collision: self.collision,
            ic,
            snapshot_every: self.output.snapshot_every,
            cfl: self.time.cfl,
            euler_reference: self.output.euler_reference,
            field_tol: self.physics.field_tol,
        })
    }
}

pub fn validate_epsilons(eps: &[f64]) -> Result<()> {
    if eps.len() < 3 {
        return Err(Error::Config(format!(
            "a sweep needs at least 3 epsilons to fit slopes, got {}",
            eps.len()
        )));
    }
    if eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Config("epsilons must be > 0".into()));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("epsilons must be strictly decreasing".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 3
[grid]
dim = 1
n_x = 16
n_v = 32
[physics]
eps = 0.1
field_mode = "poisson"
[time]
dt = 0.001
t_end = 0.01
[collision]
kind = "bgk"
tau = 0.05
[initial]
u0 = { kind = "uniform", value = [0.5] }
delta_power = 1.5
[output]
dir = "out"
"#;

    #[test]
    fn parses_base_config() {
        let c = parse(BASE).unwrap();
        assert_eq!(c.collision, CollisionConfig::Bgk { tau: 0.05 });
        let p = c.params_for(0.1).unwrap();
        assert!((p.v_max - (0.5 + 8.0 * 0.1f64.sqrt())).abs() < 1e-15);
        assert!((p.ic.delta.at(0.01) - 1e-3).abs() < 1e-15);
        assert_eq!(p.field_mode, FieldMode::Poisson);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(parse(&BASE.replace("n_x = 16", "n_x = 15")).is_err());
        assert!(parse(&BASE.replace("tau = 0.05", "tau = -1.0")).is_err());
        assert!(parse(&BASE.replace("kind = \"uniform\", value = [0.5]", "kind = \"vortex\"")).is_err());
        assert!(parse(&format!("{BASE}\nbogus = 1\n")).is_err());
        let sweep = |list: &str| parse(&format!("{BASE}\n[sweep]\nepsilons = {list}\n"));
        assert!(sweep("[0.2]").is_err());
        assert!(sweep("[0.1, 0.2, 0.05]").is_err());
        assert!(sweep("[0.2, 0.1, 0.05]").is_ok());
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = load(Path::new("/nonexistent/scenario.cfg")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/scenario.cfg"));
    }

    #[test]
    fn random_field_uses_global_seed() {
        let text = BASE
            .replace("dim = 1", "dim = 2")
            .replace("kind = \"uniform\", value = [0.5]", "kind = \"random_bandlimited\", max_mode = 2");
        let c = parse(&text).unwrap();
        assert_eq!(c.velocity().unwrap(), InitialVelocity::RandomBandlimited { seed: 3, max_mode: 2 });
    }
}
