//! Discrete functionals tracked along a run: energies, modulated energy,
//! `h`, the `K` duality, the `H⁻¹` quasineutrality norm, moment-equation
//! residuals and the current error against an Euler reference.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler::{leray_project, EulerState};
use crate::grids::{moments, stress, MacroFields, PhaseField, TorusGrid};
use crate::monge_ampere::{FieldSolveReport, Potential};
use crate::par;
use crate::spectral::Spectral;

/// Densities at or below this are treated as vacuum.
pub const RHO_FLOOR: f64 = 1e-12;
/// Largest mismatch `|J - ρu|` tolerated at a vacuum node.
pub const VACUUM_MISMATCH: f64 = 1e-10;

pub const CSV_HEADER: &str = "t,mass,momentum_x,momentum_y,e_kinetic,e_field,e_total,H_eps,h_eps,rho_Hm1,J_err_raw,J_err_divfree,clipped_mass,newton_iters,field_residual";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub e_kinetic: f64,
    pub e_field: f64,
    pub e_total: f64,
    pub h_mod: Option<f64>,
    pub h_eps: Option<f64>,
    pub rho_hm1: f64,
    pub j_err_raw: Option<f64>,
    pub j_err_divfree: Option<f64>,
    /// Mass added by clipping during the step that produced this state.
    pub clipped_mass: f64,
    pub newton_iters: Option<usize>,
    pub field_residual: Option<f64>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl DiagnosticsRecord {
    /// One CSV row matching [`CSV_HEADER`]; absent values are empty fields.
    pub fn csv_row(&self) -> String {
        let cols = [
            self.t.to_string(),
            self.mass.to_string(),
            self.momentum[0].to_string(),
            opt(self.momentum.get(1)),
            self.e_kinetic.to_string(),
            self.e_field.to_string(),
            self.e_total.to_string(),
            opt(self.h_mod),
            opt(self.h_eps),
            self.rho_hm1.to_string(),
            opt(self.j_err_raw),
            opt(self.j_err_divfree),
            self.clipped_mass.to_string(),
            opt(self.newton_iters),
            opt(self.field_residual),
        ];
        cols.join(",")
    }
}

/// `(e_kinetic, e_field, e_total)` with `e_field = (ε²/2) ∫|∇φ|²`.
pub fn total_energy(f: &PhaseField, phi: &Potential) -> (f64, f64, f64) {
    let nv = f.v.len();
    let vg = f.v;
    let ek = 0.5
        * par::pairwise_sum(f.values.len(), |i| vg.speed_squared(i % nv) * f.values[i])
        * f.cell_volume();
    let ef = field_energy(phi);
    (ek, ef, ek + ef)
}

pub fn field_energy(phi: &Potential) -> f64 {
    0.5 * phi.eps * phi.eps * phi.grid.l2_norm_vec(&phi.gradient).powi(2)
}

/// `½ ∫∫ |ξ - u(x)|² f + (ε²/2) ∫ |∇φ|²`.
pub fn modulated_energy(f: &PhaseField, phi: &Potential, u: &[Vec<f64>]) -> f64 {
    let d = f.x.dim();
    let nv = f.v.len();
    let vg = f.v;
    let kinetic = 0.5
        * par::pairwise_sum(f.values.len(), |i| {
            let (j, k) = (i / nv, i % nv);
            let xi = vg.node(k);
            let r2: f64 = (0..d).map(|a| (xi[a] - u[a][j]).powi(2)).sum();
            r2 * f.values[i]
        })
        * f.cell_volume();
    kinetic + field_energy(phi)
}

/// Same functional with the square expanded over the velocity moments.
pub fn modulated_energy_from_moments(m: &MacroFields, phi: &Potential, u: &[Vec<f64>]) -> f64 {
    let g = m.grid;
    let d = g.dim();
    let n = g.len();
    let ek = g.integrate(&m.e_kin);
    let ju = g.integrate(&(0..n).map(|j| (0..d).map(|a| m.current[a][j] * u[a][j]).sum()).collect::<Vec<f64>>());
    let ru = g.integrate(&(0..n).map(|j| m.rho[j] * (0..d).map(|a| u[a][j] * u[a][j]).sum::<f64>()).collect::<Vec<f64>>());
    ek - ju + 0.5 * ru + field_energy(phi)
}

/// `|v|² / (2ρ)` with the vacuum rule.
fn kinetic_ratio(j: usize, rho: f64, mismatch2: f64) -> Result<f64> {
    if rho <= RHO_FLOOR {
        let mismatch = mismatch2.sqrt();
        if mismatch <= VACUUM_MISMATCH {
            Ok(0.0)
        } else {
            Err(Error::DegenerateDensity { node: j, rho, mismatch })
        }
    } else {
        Ok(mismatch2 / (2.0 * rho))
    }
}

/// `h = ∫ |J - ρu|² / (2ρ)`.
pub fn h_functional(m: &MacroFields, u: &[Vec<f64>]) -> Result<f64> {
    let d = m.grid.dim();
    let vals = (0..m.grid.len())
        .map(|j| {
            let r = m.rho[j];
            let w2: f64 = (0..d).map(|a| (m.current[a][j] - r * u[a][j]).powi(2)).sum();
            kinetic_ratio(j, r, w2)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(m.grid.integrate(&vals))
}

/// `‖ρ - 1‖_{H⁻¹} = (Σ_{k≠0} |ĝ_k|² / |2πk|²)^{1/2}`.
pub fn quasineutrality_norm(spectral: &Spectral, rho: &[f64]) -> f64 {
    let coeffs = spectral.coefficients(rho);
    let s: f64 = par::pairwise_sum(coeffs.len(), |s| {
        let k = spectral.wavenumbers(s);
        let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
        if k2 == 0.0 {
            0.0
        } else {
            coeffs[s].norm_sqr() / (4.0 * PI * PI * k2)
        }
    });
    s.sqrt()
}

/// One time slice of the `K` functional.
#[derive(Debug, Clone)]
pub struct KSlice {
    pub t: f64,
    pub rho: Vec<f64>,
    pub current: Vec<Vec<f64>>,
    /// Nonnegative time weight `z(t)`.
    pub z: f64,
}

/// A test field `b(t, x)`: one component-major vector field per slice.
pub type BSample = Vec<Vec<Vec<f64>>>;

fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let m = times.len();
    if m == 1 {
        return vec![1.0];
    }
    (0..m)
        .map(|i| {
            let left = if i > 0 { times[i] - times[i - 1] } else { 0.0 };
            let right = if i + 1 < m { times[i + 1] - times[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// `(primal, dual)` with `primal = ∫ z ∫|J|²/(2ρ)` and `dual` the largest
/// bracket `∫ z ∫ (-½|b|²ρ + b·J)` over `b_samples`. A single slice uses
/// unit time weight.
pub fn k_functional_check(grid: TorusGrid, slices: &[KSlice], b_samples: &[BSample]) -> Result<(f64, f64)> {
    if slices.is_empty() {
        return Err(Error::InsufficientSnapshots(0));
    }
    let d = grid.dim();
    let n = grid.len();
    let tw = trapezoid_weights(&slices.iter().map(|s| s.t).collect::<Vec<_>>());
    let mut primal = 0.0;
    for (s, w) in slices.iter().zip(&tw) {
        if s.z < 0.0 {
            return Err(Error::InvalidParameter(format!("time weight z = {} < 0", s.z)));
        }
        let vals = (0..n)
            .map(|j| kinetic_ratio(j, s.rho[j], (0..d).map(|a| s.current[a][j].powi(2)).sum()))
            .collect::<Result<Vec<f64>>>()?;
        primal += w * s.z * grid.integrate(&vals);
    }
    let mut dual = f64::NEG_INFINITY;
    for b in b_samples {
        if b.len() != slices.len() {
            return Err(Error::GridMismatch("b sample and slices differ in length".into()));
        }
        let mut bracket = 0.0;
        for ((s, bt), w) in slices.iter().zip(b).zip(&tw) {
            let vals: Vec<f64> = (0..n)
                .map(|j| {
                    let b2: f64 = (0..d).map(|a| bt[a][j] * bt[a][j]).sum();
                    let bj: f64 = (0..d).map(|a| bt[a][j] * s.current[a][j]).sum();
                    -0.5 * b2 * s.rho[j] + bj
                })
                .collect();
            bracket += w * s.z * grid.integrate(&vals);
        }
        dual = dual.max(bracket);
    }
    Ok((primal, dual))
}

/// The optimal test field `b* = J/ρ` (zero at vacuum nodes).
pub fn optimal_b(slices: &[KSlice]) -> BSample {
    slices
        .iter()
        .map(|s| {
            s.current
                .iter()
                .map(|c| {
                    c.iter()
                        .zip(&s.rho)
                        .map(|(j, r)| if *r > RHO_FLOOR { j / r } else { 0.0 })
                        .collect()
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentResiduals {
    /// `‖∂_t ρ + ∇·J‖`.
    pub r_mass: f64,
    /// `‖∂_t J + ∇·S - ρ∇φ‖`, the balance implied by the implemented force `+∇φ`.
    pub r_momentum: f64,
    /// `‖∂_t J + ∇·S - ∇φ + (ε²/2)∇|∇φ|² - ε²∇·(∇φ⊗∇φ)‖`, the field terms
    /// written through the potential alone. Equal to `r_momentum` when
    /// `ρ = 1 + ε²Δφ`.
    pub r_momentum_potential_form: f64,
}

/// Largest residuals over the interior entries of a window of consecutive
/// states, using centered time differences and spectral space derivatives.
pub fn moment_residuals(window: &[(PhaseField, Potential)]) -> Result<MomentResiduals> {
    if window.len() < 3 {
        return Err(Error::InsufficientSnapshots(window.len()));
    }
    let grid = window[0].0.x;
    if window.iter().any(|(f, p)| f.x != grid || p.grid != grid) {
        return Err(Error::GridMismatch("window mixes grids".into()));
    }
    let sp = Spectral::new(grid);
    let d = grid.dim();
    let n = grid.len();
    let ms: Vec<MacroFields> = window.iter().map(|(f, _)| moments(f)).collect();
    let mut out = MomentResiduals {
        r_mass: 0.0,
        r_momentum: 0.0,
        r_momentum_potential_form: 0.0,
    };
    for i in 1..window.len() - 1 {
        let dt = window[i + 1].0.time - window[i - 1].0.time;
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("window times must increase".into()));
        }
        let m = &ms[i];
        let div_j = sp.divergence(&m.current);
        let rm: Vec<f64> = (0..n)
            .map(|j| (ms[i + 1].rho[j] - ms[i - 1].rho[j]) / dt + div_j[j])
            .collect();
        out.r_mass = out.r_mass.max(grid.l2_norm(&rm));

        let s = stress(&window[i].0);
        let p = &window[i].1;
        let e2 = p.eps * p.eps;
        let g2: Vec<f64> = (0..n).map(|j| (0..d).map(|a| p.gradient[a][j].powi(2)).sum()).collect();
        let grad_g2 = sp.gradient(&g2);
        let mut dyn_res = Vec::with_capacity(d);
        let mut pot_res = Vec::with_capacity(d);
        for a in 0..d {
            let row: Vec<Vec<f64>> = (0..d).map(|b| s[a * d + b].clone()).collect();
            let div_s = sp.divergence(&row);
            let outer: Vec<Vec<f64>> = (0..d)
                .map(|b| (0..n).map(|j| p.gradient[a][j] * p.gradient[b][j]).collect())
                .collect();
            let div_outer = sp.divergence(&outer);
            let base: Vec<f64> = (0..n)
                .map(|j| (ms[i + 1].current[a][j] - ms[i - 1].current[a][j]) / dt + div_s[j])
                .collect();
            dyn_res.push((0..n).map(|j| base[j] - m.rho[j] * p.gradient[a][j]).collect::<Vec<f64>>());
            pot_res.push(
                (0..n)
                    .map(|j| base[j] - p.gradient[a][j] + 0.5 * e2 * grad_g2[a][j] - e2 * div_outer[j])
                    .collect::<Vec<f64>>(),
            );
        }
        out.r_momentum = out.r_momentum.max(grid.l2_norm_vec(&dyn_res));
        out.r_momentum_potential_form = out.r_momentum_potential_form.max(grid.l2_norm_vec(&pot_res));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurrentErrorMode {
    Raw,
    Divfree,
}

/// `‖J - u‖` or `‖P J - u‖` in `L²`.
pub fn current_error(
    spectral: &Spectral,
    m: &MacroFields,
    t: f64,
    u: &EulerState,
    mode: CurrentErrorMode,
) -> Result<f64> {
    if m.grid != u.grid || spectral.grid() != m.grid {
        return Err(Error::GridMismatch("current and velocity live on different grids".into()));
    }
    if (t - u.t).abs() > 1e-9 * t.abs().max(1.0) {
        return Err(Error::GridMismatch(format!("current at t = {t}, velocity at t = {}", u.t)));
    }
    let j = match mode {
        CurrentErrorMode::Raw => m.current.clone(),
        CurrentErrorMode::Divfree => leray_project(spectral, &m.current),
    };
    let diff: Vec<Vec<f64>> = j
        .iter()
        .zip(&u.u)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    Ok(m.grid.l2_norm_vec(&diff))
}

/// Evaluates the full record for state `f` with field `phi`.
pub fn evaluate(
    spectral: &Spectral,
    f: &PhaseField,
    phi: &Potential,
    report: Option<&FieldSolveReport>,
    reference: Option<&EulerState>,
    clipped_mass: f64,
) -> Result<DiagnosticsRecord> {
    let m = moments(f);
    let (e_kinetic, e_field, e_total) = total_energy(f, phi);
    let (h_mod, h_eps, j_err_raw, j_err_divfree) = match reference {
        Some(u) => (
            Some(modulated_energy(f, phi, &u.u)),
            Some(h_functional(&m, &u.u)?),
            Some(current_error(spectral, &m, f.time, u, CurrentErrorMode::Raw)?),
            Some(current_error(spectral, &m, f.time, u, CurrentErrorMode::Divfree)?),
        ),
        None => (None, None, None, None),
    };
    Ok(DiagnosticsRecord {
        t: f.time,
        mass: m.total_mass(),
        momentum: m.total_momentum(),
        e_kinetic,
        e_field,
        e_total,
        h_mod,
        h_eps,
        rho_hm1: quasineutrality_norm(spectral, &m.rho),
        j_err_raw,
        j_err_divfree,
        clipped_mass,
        newton_iters: report.map(|r| r.iterations),
        field_residual: report.map(|r| r.residual),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{maxwellian, VelocityGrid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_maxwellian(d: usize, nx: usize, nv: usize, vmax: f64, theta: f64) -> PhaseField {
        let x = TorusGrid::new(d, nx).unwrap();
        let v = VelocityGrid::new(d, nv, vmax).unwrap();
        let m = maxwellian(&v, 1.0, [0.0, 0.0], theta).unwrap();
        PhaseField::from_fn(x, v, move |_, k| m[k]).unwrap()
    }

    #[test]
    fn energy_examples() {
        let f = uniform_maxwellian(2, 8, 32, 8.0, 1.0);
        let (ek, ef, et) = total_energy(&f, &Potential::zero(f.x, 0.1));
        assert!((ek - 1.0).abs() < 1e-8 && ef == 0.0 && et == ek);

        let g = TorusGrid::new(1, 32).unwrap();
        let sp = Spectral::new(g);
        let p = Potential::new(&sp, g.sample(|x| (2.0 * PI * x[0]).cos()), 0.5);
        let want = 0.5 * 0.25 * (2.0 * PI).powi(2) / 2.0;
        assert!((field_energy(&p) - want).abs() < 1e-12);
        let zero = PhaseField::zeros(g, VelocityGrid::new(1, 8, 1.0).unwrap()).unwrap();
        let (ek, ef, _) = total_energy(&zero, &Potential::zero(g, 0.5));
        assert_eq!((ek, ef), (0.0, 0.0));
    }

    #[test]
    fn modulated_energy_of_local_maxwellian() {
        let x = TorusGrid::new(2, 8).unwrap();
        let v = VelocityGrid::new(2, 48, 3.0).unwrap();
        let theta = 0.1;
        let u: Vec<Vec<f64>> = vec![
            x.sample(|p| 0.5 * (2.0 * PI * p[1]).sin()),
            x.sample(|p| 0.3 * (2.0 * PI * p[0]).cos()),
        ];
        let uu = u.clone();
        let f = PhaseField::from_fn(x, v, move |j, k| {
            maxwellian(&v, 1.0, [uu[0][j], uu[1][j]], theta).unwrap()[k]
        })
        .unwrap();
        let p = Potential::zero(x, 0.1);
        let h = modulated_energy(&f, &p, &u);
        assert!((h - theta).abs() < 1e-8, "{h}");
        let via = modulated_energy_from_moments(&moments(&f), &p, &u);
        assert!((h - via).abs() < 1e-12);
        let zero = vec![vec![0.0; x.len()]; 2];
        assert!((modulated_energy(&f, &p, &zero) - total_energy(&f, &p).2).abs() < 1e-13);
    }

    #[test]
    fn h_functional_examples() {
        let g = TorusGrid::new(1, 8).unwrap();
        let m = MacroFields {
            grid: g,
            rho: vec![1.0; 8],
            current: vec![vec![0.3; 8]],
            e_kin: vec![0.0; 8],
        };
        assert!((h_functional(&m, &[vec![0.0; 8]]).unwrap() - 0.045).abs() < 1e-15);
        assert!(h_functional(&m, &[vec![0.3; 8]]).unwrap().abs() < 1e-15);
        let mut vac = m.clone();
        vac.rho[2] = 0.0;
        assert!(matches!(
            h_functional(&vac, &[vec![0.0; 8]]),
            Err(Error::DegenerateDensity { node: 2, .. })
        ));
        vac.current[0][2] = 0.0;
        assert!(h_functional(&vac, &[vec![0.0; 8]]).is_ok());
    }

    #[test]
    fn quasineutrality_examples() {
        let g = TorusGrid::new(1, 64).unwrap();
        let sp = Spectral::new(g);
        assert_eq!(quasineutrality_norm(&sp, &vec![1.0; 64]), 0.0);
        let a = 0.3;
        let rho = g.sample(|x| 1.0 + a * (2.0 * PI * x[0]).cos());
        let want = a / (2.0 * PI * 2f64.sqrt());
        assert!((quasineutrality_norm(&sp, &rho) - want).abs() < 1e-14);
        let shifted = g.sample(|x| 1.0 + a * (2.0 * PI * (x[0] - 0.3)).cos());
        assert!((quasineutrality_norm(&sp, &shifted) - want).abs() < 1e-14);
    }

    #[test]
    fn quasineutrality_is_below_l2() {
        let g = TorusGrid::new(2, 16).unwrap();
        let sp = Spectral::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let rho: Vec<f64> = (0..g.len()).map(|_| 1.0 + rng.gen_range(-0.5..0.5)).collect();
            let dev: Vec<f64> = rho.iter().map(|r| r - 1.0).collect();
            let q = quasineutrality_norm(&sp, &rho);
            assert!(q * q * 4.0 * PI * PI <= g.l2_norm(&dev).powi(2) + 1e-14);
        }
    }

    #[test]
    fn k_functional_examples() {
        let g = TorusGrid::new(1, 8).unwrap();
        let slices: Vec<KSlice> = [0.0, 0.5, 1.0]
            .iter()
            .map(|&t| KSlice { t, rho: vec![1.0; 8], current: vec![vec![0.4; 8]], z: 1.0 })
            .collect();
        let b = |v: f64| -> BSample { vec![vec![vec![v; 8]]; 3] };
        let (p, d) = k_functional_check(g, &slices, &[b(0.0), b(0.4), b(1.0)]).unwrap();
        assert!((p - 0.08).abs() < 1e-14 && (d - p).abs() < 1e-14);

        let zero: Vec<KSlice> = slices.iter().map(|s| KSlice { current: vec![vec![0.0; 8]], ..s.clone() }).collect();
        let (p, d) = k_functional_check(g, &zero, &[b(0.0), b(0.7)]).unwrap();
        assert_eq!(p, 0.0);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn csv_row_leaves_missing_fields_empty() {
        let r = DiagnosticsRecord {
            t: 0.5,
            mass: 1.0,
            momentum: vec![0.0],
            e_kinetic: 0.1,
            e_field: 0.0,
            e_total: 0.1,
            h_mod: None,
            h_eps: None,
            rho_hm1: 0.0,
            j_err_raw: None,
            j_err_divfree: None,
            clipped_mass: 0.0,
            newton_iters: None,
            field_residual: None,
        };
        let row = r.csv_row();
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
        assert_eq!(row, "0.5,1,0,,0.1,0,0.1,,,0,,,0,,");
    }

    #[test]
    fn residuals_need_three_states() {
        let f = uniform_maxwellian(1, 8, 16, 6.0, 1.0);
        let p = Potential::zero(f.x, 0.1);
        assert!(matches!(
            moment_residuals(&[(f.clone(), p.clone()), (f, p)]),
            Err(Error::InsufficientSnapshots(2))
        ));
    }

    #[test]
    fn potential_form_matches_dynamics_form_under_poisson_coupling() {
        let x = TorusGrid::new(2, 16).unwrap();
        let v = VelocityGrid::new(2, 12, 5.0).unwrap();
        let sp = Spectral::new(x);
        let eps = 0.3;
        let phi = x.sample(|p| 0.1 * (2.0 * PI * p[0]).cos() + 0.05 * (2.0 * PI * (p[0] + 2.0 * p[1])).sin());
        let pot = Potential::new(&sp, phi, eps);
        let lap = sp.laplacian(&pot.phi);
        let rho: Vec<f64> = lap.iter().map(|l| 1.0 + eps * eps * l).collect();
        let m = maxwellian(&v, 1.0, [0.0, 0.0], 1.0).unwrap();
        let mass = m.iter().sum::<f64>() * v.weight();
        let m: Vec<f64> = m.iter().map(|x| x / mass).collect();
        let window: Vec<(PhaseField, Potential)> = (0..3)
            .map(|i| {
                let mut f = PhaseField::from_fn(x, v, |j, k| rho[j] * m[k]).unwrap();
                f.time = 0.1 * i as f64;
                (f, pot.clone())
            })
            .collect();
        let r = moment_residuals(&window).unwrap();
        assert!(r.r_momentum > 1e-3);
        assert!((r.r_momentum - r.r_momentum_potential_form).abs() < 1e-10 * r.r_momentum, "{r:?}");
    }

    #[test]
    fn equilibrium_residuals_vanish() {
        let mut window = Vec::new();
        for i in 0..3 {
            let mut f = uniform_maxwellian(2, 8, 16, 6.0, 1.0);
            f.time = 0.1 * i as f64;
            window.push((f.clone(), Potential::zero(f.x, 0.1)));
        }
        let r = moment_residuals(&window).unwrap();
        assert!(r.r_mass < 1e-10 && r.r_momentum < 1e-10);
    }

    #[test]
    fn current_error_examples() {
        let g = TorusGrid::new(2, 16).unwrap();
        let sp = Spectral::new(g);
        let u = crate::euler::InitialVelocity::TaylorGreen.sample(g).unwrap();
        let psi = g.sample(|x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
        let grad = sp.gradient(&psi);
        let j: Vec<Vec<f64>> = (0..2).map(|a| (0..g.len()).map(|k| u[a][k] + grad[a][k]).collect()).collect();
        let m = MacroFields { grid: g, rho: vec![1.0; g.len()], current: j, e_kin: vec![0.0; g.len()] };
        let state = EulerState { grid: g, u: u.clone(), p: vec![0.0; g.len()], t: 0.0 };
        assert!(current_error(&sp, &m, 0.0, &state, CurrentErrorMode::Divfree).unwrap() < 1e-12);
        let raw = current_error(&sp, &m, 0.0, &state, CurrentErrorMode::Raw).unwrap();
        assert!((raw - g.l2_norm_vec(&grad)).abs() < 1e-12);
        let other = EulerState { grid: TorusGrid::new(2, 8).unwrap(), u: vec![vec![0.0; 64]; 2], p: vec![0.0; 64], t: 0.0 };
        assert!(matches!(current_error(&sp, &m, 0.0, &other, CurrentErrorMode::Raw), Err(Error::GridMismatch(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn h_is_bounded_by_modulated_energy(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = TorusGrid::new(1, 8).unwrap();
            let v = VelocityGrid::new(1, 12, 3.0).unwrap();
            let vals: Vec<f64> = (0..x.len() * v.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
            let f = PhaseField { x, v, values: vals, time: 0.0 };
            let a = rng.gen_range(-1.0..1.0);
            let u = vec![x.sample(|p| a * (2.0 * PI * p[0]).sin())];
            let m = moments(&f);
            let p = Potential::zero(x, 0.1);
            let h = h_functional(&m, &u).unwrap();
            prop_assert!(h <= modulated_energy(&f, &p, &u) + 1e-12);
        }

        #[test]
        fn k_duality_gap_is_nonnegative(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = TorusGrid::new(1, 8).unwrap();
            let slices: Vec<KSlice> = (0..3).map(|i| KSlice {
                t: 0.25 * i as f64,
                rho: (0..8).map(|_| rng.gen_range(0.2..2.0)).collect(),
                current: vec![(0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()],
                z: rng.gen_range(0.0..1.0),
            }).collect();
            let mut samples: Vec<BSample> = (0..20)
                .map(|_| (0..3).map(|_| vec![(0..8).map(|_| rng.gen_range(-2.0..2.0)).collect()]).collect())
                .collect();
            let (p, d) = k_functional_check(g, &slices, &samples).unwrap();
            prop_assert!(d <= p + 1e-10);
            samples.push(optimal_b(&slices));
            let (p, d) = k_functional_check(g, &slices, &samples).unwrap();
            prop_assert!((p - d).abs() <= 1e-10);
        }
    }
}
