//! Collision operators.
//!
//! Production runs use a BGK relaxation towards the discrete Maxwellian that
//! reproduces the node's discrete mass, momentum and energy exactly. A
//! direct quadrature of the Boltzmann integral in the σ-representation is
//! kept for small 2D grids as a reference.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{PhaseField, VelocityGrid};
use crate::linalg::solve_dense;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CollisionConfig {
    None,
    Bgk {
        tau: f64,
    },
    /// Direct Boltzmann quadrature with kernel `|ξ-ξ₁|^gamma / π`.
    Direct {
        #[serde(default = "hard_sphere")]
        gamma: f64,
        n_sigma: usize,
    },
}

fn hard_sphere() -> f64 {
    1.0
}

impl CollisionConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CollisionConfig::None => Ok(()),
            CollisionConfig::Bgk { tau } if tau > 0.0 && tau.is_finite() => Ok(()),
            CollisionConfig::Bgk { tau } => Err(Error::InvalidParameter(format!(
                "BGK relaxation time must be > 0, got {tau}"
            ))),
            CollisionConfig::Direct { n_sigma, gamma } => {
                if n_sigma < 8 || n_sigma % 2 != 0 {
                    return Err(Error::InvalidParameter(format!(
                        "n_sigma must be even and >= 8, got {n_sigma}"
                    )));
                }
                if !gamma.is_finite() {
                    return Err(Error::InvalidParameter("kernel exponent must be finite".into()));
                }
                Ok(())
            }
        }
    }
}

/// Post-collision velocities `ξ' = c + |g|/2 σ`, `ξ₁' = c - |g|/2 σ` with
/// `c = (ξ + ξ₁)/2`, `g = ξ - ξ₁`, for `σ` on the half sphere `σ·g ≥ 0`.
pub fn post_collision_velocities(
    xi: &[f64],
    xi1: &[f64],
    sigma: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if xi.len() != xi1.len() || xi.len() != sigma.len() {
        return Err(Error::InvalidParameter("velocity dimensions differ".into()));
    }
    let norm: f64 = sigma.iter().map(|s| s * s).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("sigma is not a unit vector (|sigma| = {norm})")));
    }
    let g: Vec<f64> = xi.iter().zip(xi1).map(|(a, b)| a - b).collect();
    let g_abs = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sigma_dot_g: f64 = sigma.iter().zip(&g).map(|(s, x)| s * x).sum();
    if sigma_dot_g < -1e-12 * g_abs.max(1.0) {
        return Err(Error::InvalidParameter(
            "sigma must satisfy sigma.xi >= sigma.xi1".into(),
        ));
    }
    let half = 0.5 * g_abs;
    let out = xi
        .iter()
        .zip(xi1)
        .zip(sigma)
        .map(|((a, b), s)| (0.5 * (a + b) + half * s, 0.5 * (a + b) - half * s))
        .unzip();
    Ok(out)
}

/// Collision invariants `1, ξ_a, |ξ|²/2` at velocity node `k`.
fn invariants(v: &VelocityGrid, k: usize) -> [f64; 4] {
    let xi = v.node(k);
    match v.dim() {
        1 => [1.0, xi[0], 0.5 * xi[0] * xi[0], 0.0],
        _ => [1.0, xi[0], xi[1], 0.5 * (xi[0] * xi[0] + xi[1] * xi[1])],
    }
}

/// Discrete moments `(ρ, J, e)` of a velocity block, ordered like [`invariants`].
pub fn block_moments(v: &VelocityGrid, block: &[f64]) -> Vec<f64> {
    let m = v.dim() + 2;
    let w = v.weight();
    (0..m)
        .map(|i| par::pairwise_sum(block.len(), |k| invariants(v, k)[i] * block[k]) * w)
        .collect()
}

/// The sampled Gaussian `exp(α·ψ(ξ))` whose discrete moments equal `target`
/// (`ρ`, `J`, `e` in the order of [`block_moments`]). Solved by Newton's
/// method on the convex dual `Σ w e^{α·ψ} - α·target`.
pub fn discrete_equilibrium(v: &VelocityGrid, target: &[f64]) -> std::result::Result<Vec<f64>, String> {
    let d = v.dim();
    let m = d + 2;
    let nv = v.len();
    let w = v.weight();
    let rho = target[0];
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(format!("non-realizable density {rho}"));
    }
    let u: Vec<f64> = (0..d).map(|a| target[1 + a] / rho).collect();
    let u2: f64 = u.iter().map(|x| x * x).sum();
    let theta = (2.0 * target[m - 1] / rho - u2) / d as f64;
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(format!(
            "non-realizable moments: e_kin too small for |J| (temperature {theta:e})"
        ));
    }
    // Continuous-Gaussian starting point.
    let mut alpha = vec![0.0; m];
    alpha[0] = (rho * (2.0 * PI * theta).powf(-(d as f64) / 2.0)).ln() - u2 / (2.0 * theta);
    for a in 0..d {
        alpha[1 + a] = u[a] / theta;
    }
    alpha[m - 1] = -1.0 / theta;

    let scale: Vec<f64> = {
        let s2 = 2.0 * target[m - 1] / rho;
        let mut s = vec![rho];
        s.extend(std::iter::repeat(rho * s2.sqrt()).take(d));
        s.push(rho * s2);
        s
    };
    let psi: Vec<[f64; 4]> = (0..nv).map(|k| invariants(v, k)).collect();
    let eval = |alpha: &[f64]| -> Vec<f64> {
        psi.iter()
            .map(|p| (0..m).map(|i| alpha[i] * p[i]).sum::<f64>().exp())
            .collect()
    };
    let dual = |vals: &[f64], alpha: &[f64]| -> f64 {
        par::sum(vals) * w - (0..m).map(|i| alpha[i] * target[i]).sum::<f64>()
    };

    let mut vals = eval(&alpha);
    let mut err = f64::INFINITY;
    for _ in 0..100 {
        let grad: Vec<f64> = (0..m)
            .map(|i| par::pairwise_sum(nv, |k| psi[k][i] * vals[k]) * w - target[i])
            .collect();
        err = (0..m).map(|i| (grad[i] / scale[i]).abs()).fold(0.0, f64::max);
        if err < 1e-14 {
            return Ok(vals);
        }
        let mut hess = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let h = par::pairwise_sum(nv, |k| psi[k][i] * psi[k][j] * vals[k]) * w;
                hess[i * m + j] = h;
                hess[j * m + i] = h;
            }
        }
        let mut step: Vec<f64> = grad.iter().map(|g| -g).collect();
        solve_dense(&mut hess, &mut step, m).ok_or("singular moment Jacobian")?;
        let phi0 = dual(&vals, &alpha);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = (0..m).map(|i| alpha[i] + lambda * step[i]).collect();
            let tv = eval(&trial);
            let phi = dual(&tv, &trial);
            if phi.is_finite() && phi <= phi0 + 1e-15 * phi0.abs() {
                alpha = trial;
                vals = tv;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // No further decrease possible at roundoff level.
            if err < 1e-11 {
                return Ok(vals);
            }
            return Err(format!("line search failed (moment error {err:e})"));
        }
    }
    // Stagnation just above the target at roundoff level.
    if err < 1e-11 {
        return Ok(vals);
    }
    Err(format!("Newton iteration limit reached (moment error {err:e})"))
}

/// Exact-relaxation BGK step: `f ← e^{-dt/τ} f + (1 - e^{-dt/τ}) M*`.
pub fn bgk_collide(f: &PhaseField, tau: f64, dt: f64) -> Result<PhaseField> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be > 0, got {tau}")));
    }
    if !(dt >= 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be >= 0, got {dt}")));
    }
    let keep = (-dt / tau).exp();
    if keep == 1.0 {
        return Ok(f.clone());
    }
    let nv = f.v.len();
    let v = f.v;
    let blocks = par::try_map_range::<_, Error, _>(f.x.len(), |j| {
        let block = f.block(j);
        if block.iter().all(|&x| x == 0.0) {
            return Ok(block.to_vec());
        }
        let target = block_moments(&v, block);
        let eq = discrete_equilibrium(&v, &target)
            .map_err(|reason| Error::MomentMatching { node: j, reason })?;
        Ok(block
            .iter()
            .zip(&eq)
            .map(|(a, b)| keep * a + (1.0 - keep) * b)
            .collect::<Vec<f64>>())
    })?;
    let mut out = f.clone();
    for (j, b) in blocks.into_iter().enumerate() {
        out.values[j * nv..(j + 1) * nv].copy_from_slice(&b);
    }
    Ok(out)
}

const DIRECT_MAX_NV: usize = 32;

/// Bilinear interpolation of a 2D velocity block, zero outside the box.
fn bilinear(v: &VelocityGrid, block: &[f64], xi: [f64; 2]) -> f64 {
    let n = v.n();
    let h = v.h();
    let sx = (xi[0] + v.v_max()) / h - 0.5;
    let sy = (xi[1] + v.v_max()) / h - 0.5;
    let ix = sx.floor();
    let iy = sy.floor();
    let tx = sx - ix;
    let ty = sy - iy;
    let (ix, iy) = (ix as i64, iy as i64);
    let at = |a: i64, b: i64| -> f64 {
        if a < 0 || b < 0 || a >= n as i64 || b >= n as i64 {
            0.0
        } else {
            block[a as usize * n + b as usize]
        }
    };
    (1.0 - tx) * (1.0 - ty) * at(ix, iy)
        + tx * (1.0 - ty) * at(ix + 1, iy)
        + (1.0 - tx) * ty * at(ix, iy + 1)
        + tx * ty * at(ix + 1, iy + 1)
}

/// Removes the components of `q` along the collision invariants so that the
/// discrete moments of `q` vanish. With `weight` the correction is
/// `weight(ξ)·Σ c_i ψ_i(ξ)`, which vanishes wherever the weight does (the
/// tails of `f`); a singular weighted system falls back to the unweighted one.
pub fn project_conservative(v: &VelocityGrid, q: &mut [f64], weight: Option<&[f64]>) {
    let m = v.dim() + 2;
    let nv = v.len();
    let w = v.weight();
    let psi: Vec<[f64; 4]> = (0..nv).map(|k| invariants(v, k)).collect();
    let moments: Vec<f64> = (0..m)
        .map(|i| par::pairwise_sum(nv, |k| psi[k][i] * q[k]) * w)
        .collect();
    let attempt = |rho: &dyn Fn(usize) -> f64| -> Option<Vec<f64>> {
        let mut gram = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                gram[i * m + j] = par::pairwise_sum(nv, |k| psi[k][i] * psi[k][j] * rho(k)) * w;
            }
        }
        let mut c = moments.clone();
        solve_dense(&mut gram, &mut c, m).map(|()| c)
    };
    let weighted = weight.and_then(|wt| attempt(&|k| wt[k]).map(|c| (c, true)));
    if let Some((c, is_weighted)) = weighted.or_else(|| attempt(&|_| 1.0).map(|c| (c, false))) {
        for (k, qk) in q.iter_mut().enumerate() {
            let rho = if is_weighted { weight.map_or(1.0, |wt| wt[k]) } else { 1.0 };
            *qk -= rho * (0..m).map(|i| c[i] * psi[k][i]).sum::<f64>();
        }
    }
}

/// Boltzmann collision integral per spatial node by midpoint quadrature in
/// `ξ₁` and a uniform midpoint rule on the half circle `σ·(ξ-ξ₁) ≥ 0`,
/// followed by [`project_conservative`]. 2D only, `n_v ≤ 32`.
pub fn boltzmann_collide_direct(f: &PhaseField, config: &CollisionConfig) -> Result<Vec<f64>> {
    let (gamma, n_sigma) = match *config {
        CollisionConfig::Direct { gamma, n_sigma } => (gamma, n_sigma),
        _ => {
            return Err(Error::InvalidParameter(
                "direct collision needs a Direct config".into(),
            ))
        }
    };
    config.validate()?;
    if f.v.dim() != 2 {
        return Err(Error::Unsupported("direct Boltzmann quadrature needs d = 2".into()));
    }
    if f.v.n() > DIRECT_MAX_NV {
        return Err(Error::Unsupported(format!(
            "direct Boltzmann quadrature is capped at n_v = {DIRECT_MAX_NV}, got {}",
            f.v.n()
        )));
    }
    let v = f.v;
    let nv = v.len();
    let w = v.weight();
    let dsigma = PI / n_sigma as f64;
    let offsets: Vec<f64> = (0..n_sigma)
        .map(|s| -0.5 * PI + (s as f64 + 0.5) * dsigma)
        .collect();
    let blocks = par::map_range(f.x.len(), |j| {
        let block = f.block(j);
        let mut q = vec![0.0; nv];
        for (k, qk) in q.iter_mut().enumerate() {
            let xi = v.node(k);
            let mut acc = 0.0;
            for l in 0..nv {
                let xi1 = v.node(l);
                let g = [xi[0] - xi1[0], xi[1] - xi1[1]];
                let g_abs = g[0].hypot(g[1]);
                if g_abs == 0.0 {
                    continue;
                }
                let kernel = g_abs.powf(gamma) / PI;
                let c = [0.5 * (xi[0] + xi1[0]), 0.5 * (xi[1] + xi1[1])];
                let base = g[1].atan2(g[0]);
                let mut gain = 0.0;
                for &o in &offsets {
                    let (s, co) = (base + o).sin_cos();
                    let r = 0.5 * g_abs;
                    let p = [c[0] + r * co, c[1] + r * s];
                    let p1 = [c[0] - r * co, c[1] - r * s];
                    gain += bilinear(&v, block, p) * bilinear(&v, block, p1);
                }
                let loss = block[k] * block[l] * PI;
                acc += (gain * dsigma - loss) * kernel;
            }
            *qk = acc * w;
        }
        project_conservative(&v, &mut q, Some(block));
        q
    });
    Ok(blocks.concat())
}

/// Applies the configured collision model over a time step `dt` and clips
/// negative values; returns the new field and the clipped mass.
pub fn collide(f: &PhaseField, config: &CollisionConfig, dt: f64) -> Result<(PhaseField, f64)> {
    match *config {
        CollisionConfig::None => Ok((f.clone(), 0.0)),
        CollisionConfig::Bgk { tau } => Ok((bgk_collide(f, tau, dt)?, 0.0)),
        CollisionConfig::Direct { .. } => {
            let q = boltzmann_collide_direct(f, config)?;
            let mut out = f.clone();
            for (a, b) in out.values.iter_mut().zip(&q) {
                *a += dt * b;
            }
            let clipped = out.clip_negative();
            Ok((out, clipped))
        }
    }
}
