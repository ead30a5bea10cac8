//! Periodic field solve `det(I + ε² D²φ) = ρ` for a zero-mean potential,
//! its linearised (Poisson) counterpart `ε² Δφ = ρ - 1`, and the cofactor
//! identities of the 2D determinant.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::TorusGrid;
use crate::spectral::Spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FieldMode {
    #[default]
    MongeAmpere,
    Poisson,
}

impl fmt::Display for FieldMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldMode::MongeAmpere => "monge_ampere",
            FieldMode::Poisson => "poisson",
        })
    }
}

/// Zero-mean periodic potential with cached spectral derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub grid: TorusGrid,
    pub eps: f64,
    pub phi: Vec<f64>,
    pub gradient: Vec<Vec<f64>>,
    /// Row-major `d×d` Hessian components.
    pub hessian: Vec<Vec<f64>>,
}

impl Potential {
    pub fn new(spectral: &Spectral, phi: Vec<f64>, eps: f64) -> Self {
        let grid = spectral.grid();
        let mean = grid.mean(&phi);
        let phi: Vec<f64> = phi.into_iter().map(|p| p - mean).collect();
        Self {
            grid,
            eps,
            gradient: spectral.gradient(&phi),
            hessian: spectral.hessian(&phi),
            phi,
        }
    }

    pub fn zero(grid: TorusGrid, eps: f64) -> Self {
        let n = grid.len();
        let d = grid.dim();
        Self {
            grid,
            eps,
            phi: vec![0.0; n],
            gradient: vec![vec![0.0; n]; d],
            hessian: vec![vec![0.0; n]; d * d],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSolveReport {
    pub iterations: usize,
    /// `‖det(I + ε²D²φ) - ρ‖_∞` on the modes the potential can reach.
    pub residual: f64,
    pub damping_steps: usize,
    pub mode: FieldMode,
}

/// Pointwise `det(I + ε² H)`.
fn determinant_from_hessian(hessian: &[Vec<f64>], d: usize, eps: f64) -> Vec<f64> {
    let e2 = eps * eps;
    match d {
        1 => hessian[0].iter().map(|h| 1.0 + e2 * h).collect(),
        _ => (0..hessian[0].len())
            .map(|i| {
                let (a, b, c) = (hessian[0][i], hessian[1][i], hessian[3][i]);
                (1.0 + e2 * a) * (1.0 + e2 * c) - e2 * e2 * b * b
            })
            .collect(),
    }
}

/// Smallest eigenvalue of `I + ε² H` over the grid.
fn min_eigenvalue(hessian: &[Vec<f64>], d: usize, eps: f64) -> f64 {
    let e2 = eps * eps;
    match d {
        1 => hessian[0].iter().map(|h| 1.0 + e2 * h).fold(f64::INFINITY, f64::min),
        _ => (0..hessian[0].len())
            .map(|i| {
                let a = 1.0 + e2 * hessian[0][i];
                let b = e2 * hessian[1][i];
                let c = 1.0 + e2 * hessian[3][i];
                0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt()
            })
            .fold(f64::INFINITY, f64::min),
    }
}

/// Forward map `φ ↦ det(I + ε² D²φ)` with spectral derivatives.
pub fn forward_determinant(spectral: &Spectral, phi: &[f64], eps: f64) -> Vec<f64> {
    determinant_from_hessian(&spectral.hessian(phi), spectral.grid().dim(), eps)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    crate::par::pairwise_sum(a.len(), |i| a[i] * b[i])
}

/// Right-preconditioned restarted GMRES for `A x = b`.
fn gmres<A, P>(apply: A, precondition: P, b: &[f64], rel_tol: f64, restart: usize, max_restarts: usize) -> Vec<f64>
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return x;
    }
    for _ in 0..max_restarts {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = dot(&r, &r).sqrt();
        if beta <= rel_tol * b_norm {
            break;
        }
        let mut basis = vec![r.iter().map(|v| v / beta).collect::<Vec<f64>>()];
        let mut zs: Vec<Vec<f64>> = Vec::new();
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        for j in 0..restart {
            let z = precondition(&basis[j]);
            let mut w = apply(&z);
            zs.push(z);
            let mut col = vec![0.0; j + 2];
            for (i, vi) in basis.iter().enumerate() {
                let hij = dot(&w, vi);
                col[i] = hij;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
            let wn = dot(&w, &w).sqrt();
            col[j + 1] = wn;
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let denom = col[j].hypot(col[j + 1]);
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (col[j] / denom, col[j + 1] / denom) };
            col[j] = c * col[j] + s * col[j + 1];
            col[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            let gj = g[j];
            g[j] = c * gj;
            g.push(-s * gj);
            hess.push(col);
            let converged = g[j + 1].abs() <= rel_tol * b_norm;
            if converged || wn == 0.0 || j + 1 == restart {
                let k = j + 1;
                let mut y = vec![0.0; k];
                for i in (0..k).rev() {
                    let mut s = g[i];
                    for l in (i + 1)..k {
                        s -= hess[l][i] * y[l];
                    }
                    y[i] = s / hess[i][i];
                }
                for (yi, zi) in y.iter().zip(&zs) {
                    for (xk, zk) in x.iter_mut().zip(zi) {
                        *xk += yi * zk;
                    }
                }
                if converged || wn == 0.0 {
                    return x;
                }
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
    }
    x
}

/// Field solver bound to one torus grid.
#[derive(Debug)]
pub struct FieldSolver {
    spectral: Spectral,
    pub max_newton: usize,
    pub max_halvings: usize,
    pub min_eigenvalue: f64,
}

impl FieldSolver {
    pub fn new(grid: TorusGrid) -> Self {
        Self {
            spectral: Spectral::new(grid),
            max_newton: 50,
            max_halvings: 30,
            min_eigenvalue: 0.1,
        }
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn grid(&self) -> TorusGrid {
        self.spectral.grid()
    }

    fn reachable_residual(&self, det: &[f64], target: &[f64]) -> Vec<f64> {
        let raw: Vec<f64> = det.iter().zip(target).map(|(a, b)| a - b).collect();
        self.spectral.remove_kernel_modes(&raw)
    }

    /// Solves for the potential of density `rho`. `tol` defaults to
    /// `1e-10 max(1, ‖ρ‖_∞)`.
    pub fn solve(
        &self,
        rho: &[f64],
        eps: f64,
        mode: FieldMode,
        tol: Option<f64>,
    ) -> Result<(Potential, FieldSolveReport)> {
        let grid = self.grid();
        if rho.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "density has {} values, grid has {}",
                rho.len(),
                grid.len()
            )));
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be > 0, got {eps}")));
        }
        if let Some((node, &value)) = rho.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
            return Err(Error::NonPositiveDensity { node, value });
        }
        let mean = grid.mean(rho);
        if (mean - 1.0).abs() > 1e-8 {
            return Err(Error::MassNotNormalized { mean });
        }
        let tol = tol.unwrap_or(1e-10 * max_abs(rho).max(1.0));
        let target: Vec<f64> = rho.iter().map(|r| r - (mean - 1.0)).collect();
        let e2 = eps * eps;
        let source: Vec<f64> = target.iter().map(|r| (r - 1.0) / e2).collect();
        let guess = self.spectral.inverse_laplacian_unchecked(&source);
        let d = grid.dim();

        if mode == FieldMode::Poisson || d == 1 {
            let pot = Potential::new(&self.spectral, guess, eps);
            let det = determinant_from_hessian(&pot.hessian, d, eps);
            let linear: Vec<f64> = if mode == FieldMode::Poisson && d == 2 {
                (0..det.len())
                    .map(|i| 1.0 + e2 * (pot.hessian[0][i] + pot.hessian[3][i]))
                    .collect()
            } else {
                det
            };
            let residual = max_abs(&self.reachable_residual(&linear, &target));
            return Ok((
                pot,
                FieldSolveReport {
                    iterations: 0,
                    residual,
                    damping_steps: 0,
                    mode,
                },
            ));
        }

        self.newton(guess, &target, eps, tol)
    }

    fn newton(
        &self,
        guess: Vec<f64>,
        target: &[f64],
        eps: f64,
        tol: f64,
    ) -> Result<(Potential, FieldSolveReport)> {
        let sp = &self.spectral;
        let e2 = eps * eps;
        let mut phi = guess;
        let mut hess = sp.hessian(&phi);
        let mut halvings = 0;
        while min_eigenvalue(&hess, 2, eps) < self.min_eigenvalue {
            if halvings == self.max_halvings {
                return Err(Error::EllipticityLost {
                    min_eigenvalue: min_eigenvalue(&hess, 2, eps),
                });
            }
            phi.iter_mut().for_each(|p| *p *= 0.5);
            hess = sp.hessian(&phi);
            halvings += 1;
        }
        let mut res = self.reachable_residual(&determinant_from_hessian(&hess, 2, eps), target);
        let mut res_norm = max_abs(&res);
        let mut iterations = 0;
        let mut damping_steps = halvings;

        while res_norm > tol {
            if iterations == self.max_newton {
                return Err(Error::NewtonStalled {
                    iterations,
                    residual: res_norm,
                });
            }
            // Cofactor of I + ε²H: the Jacobian is δ ↦ ε² tr(C D²δ).
            let n = phi.len();
            let cxx: Vec<f64> = (0..n).map(|i| 1.0 + e2 * hess[3][i]).collect();
            let cyy: Vec<f64> = (0..n).map(|i| 1.0 + e2 * hess[0][i]).collect();
            let cxy: Vec<f64> = (0..n).map(|i| -e2 * hess[1][i]).collect();
            let apply = |delta: &[f64]| -> Vec<f64> {
                let h = sp.hessian(delta);
                let out: Vec<f64> = (0..n)
                    .map(|i| e2 * (cxx[i] * h[0][i] + 2.0 * cxy[i] * h[1][i] + cyy[i] * h[3][i]))
                    .collect();
                sp.remove_kernel_modes(&out)
            };
            let precondition = |r: &[f64]| -> Vec<f64> {
                sp.inverse_laplacian_unchecked(r)
                    .into_iter()
                    .map(|v| v / e2)
                    .collect()
            };
            let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
            let step = gmres(apply, precondition, &rhs, 1e-10, 40, 6);

            let mut lambda = 1.0;
            let mut accepted = None;
            let mut lost_ellipticity = true;
            for _ in 0..=self.max_halvings {
                let trial: Vec<f64> = phi.iter().zip(&step).map(|(p, s)| p + lambda * s).collect();
                let th = sp.hessian(&trial);
                if min_eigenvalue(&th, 2, eps) >= self.min_eigenvalue {
                    lost_ellipticity = false;
                    let tr = self.reachable_residual(&determinant_from_hessian(&th, 2, eps), target);
                    let tn = max_abs(&tr);
                    if tn < res_norm {
                        accepted = Some((trial, th, tr, tn));
                        break;
                    }
                }
                lambda *= 0.5;
                damping_steps += 1;
            }
            match accepted {
                Some((p, h, r, rn)) => {
                    phi = p;
                    hess = h;
                    res = r;
                    res_norm = rn;
                    iterations += 1;
                }
                None if lost_ellipticity => {
                    return Err(Error::EllipticityLost {
                        min_eigenvalue: min_eigenvalue(&hess, 2, eps),
                    })
                }
                None => {
                    return Err(Error::NewtonStalled {
                        iterations,
                        residual: res_norm,
                    })
                }
            }
        }
        Ok((
            Potential::new(sp, phi, eps),
            FieldSolveReport {
                iterations,
                residual: res_norm,
                damping_steps,
                mode: FieldMode::MongeAmpere,
            },
        ))
    }
}

/// Convenience wrapper building a one-off [`FieldSolver`].
pub fn solve_field(
    grid: TorusGrid,
    rho: &[f64],
    eps: f64,
    mode: FieldMode,
    tol: Option<f64>,
) -> Result<(Potential, FieldSolveReport)> {
    FieldSolver::new(grid).solve(rho, eps, mode, tol)
}

fn require_2d(grid: &TorusGrid, what: &str) -> Result<()> {
    if grid.dim() != 2 {
        return Err(Error::Unsupported(format!("{what} is defined for d = 2 only")));
    }
    Ok(())
}

/// Pointwise `det D²φ`.
fn hessian_determinant(p: &Potential) -> Vec<f64> {
    (0..p.phi.len())
        .map(|i| p.hessian[0][i] * p.hessian[3][i] - p.hessian[1][i] * p.hessian[1][i])
        .collect()
}

/// Splits `det(I + ε²D²φ) = 1 + ε²Δφ + ε⁴ det D²φ` in 2D. Returns the full
/// determinant, the linear part `ε²Δφ` and `ε⁴ ‖det D²φ‖_∞`.
pub fn determinant_expansion_check(p: &Potential) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    require_2d(&p.grid, "the determinant expansion")?;
    let e2 = p.eps * p.eps;
    let full = determinant_from_hessian(&p.hessian, 2, p.eps);
    let linear: Vec<f64> = (0..full.len())
        .map(|i| e2 * (p.hessian[0][i] + p.hessian[3][i]))
        .collect();
    let remainder = e2 * e2 * max_abs(&hessian_determinant(p));
    Ok((full, linear, remainder))
}

/// `(cof D²φ) ∇φ` as a vector field.
fn cofactor_flux(p: &Potential) -> Vec<Vec<f64>> {
    let n = p.phi.len();
    let (gx, gy) = (&p.gradient[0], &p.gradient[1]);
    let (hxx, hxy, hyy) = (&p.hessian[0], &p.hessian[1], &p.hessian[3]);
    vec![
        (0..n).map(|i| hyy[i] * gx[i] - hxy[i] * gy[i]).collect(),
        (0..n).map(|i| -hxy[i] * gx[i] + hxx[i] * gy[i]).collect(),
    ]
}

/// `‖det D²φ - ½ div((cof D²φ) ∇φ)‖_∞`.
pub fn cofactor_divergence_residual(spectral: &Spectral, p: &Potential) -> Result<f64> {
    require_2d(&p.grid, "the cofactor identity")?;
    let div = spectral.divergence(&cofactor_flux(p));
    let det = hessian_determinant(p);
    Ok(det
        .iter()
        .zip(&div)
        .fold(0.0, |m, (a, b)| m.max((a - 0.5 * b).abs())))
}

/// Discrete L² norm of the pointwise Frobenius norm of `cof D²φ`.
pub fn cofactor_norm(p: &Potential) -> Result<f64> {
    require_2d(&p.grid, "the cofactor norm")?;
    // In 2D the cofactor permutes and negates entries: same Frobenius norm.
    let frob: Vec<Vec<f64>> = p.hessian.clone();
    Ok(p.grid.l2_norm_vec(&frob))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn two_pi() -> f64 {
        2.0 * PI
    }

    #[test]
    fn uniform_density_gives_zero_potential() {
        let g = TorusGrid::new(2, 16).unwrap();
        let (p, r) = solve_field(g, &vec![1.0; g.len()], 0.1, FieldMode::MongeAmpere, None).unwrap();
        assert!(p.phi.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn input_validation() {
        let g = TorusGrid::new(1, 8).unwrap();
        let mut rho = vec![1.0; 8];
        rho[3] = 0.0;
        rho[4] = 2.0;
        assert!(matches!(
            solve_field(g, &rho, 0.1, FieldMode::Poisson, None),
            Err(Error::NonPositiveDensity { node: 3, .. })
        ));
        assert!(matches!(
            solve_field(g, &vec![1.1; 8], 0.1, FieldMode::Poisson, None),
            Err(Error::MassNotNormalized { .. })
        ));
    }

    #[test]
    fn one_dimensional_closed_form() {
        let g = TorusGrid::new(1, 64).unwrap();
        let (a, eps) = (0.1, 0.1);
        let exact = g.sample(|x| a * (two_pi() * x[0]).cos());
        let rho: Vec<f64> = g
            .sample(|x| 1.0 - eps * eps * a * two_pi().powi(2) * (two_pi() * x[0]).cos());
        let (p, r) = solve_field(g, &rho, eps, FieldMode::MongeAmpere, None).unwrap();
        let err = p.phi.iter().zip(&exact).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn two_dimensional_manufactured_solution() {
        let g = TorusGrid::new(2, 64).unwrap();
        let sp = Spectral::new(g);
        let eps = 0.2;
        let exact = g.sample(|x| 0.05 * (two_pi() * x[0]).cos() * (two_pi() * x[1]).cos());
        let rho = forward_determinant(&sp, &exact, eps);
        let (p, r) = FieldSolver::new(g).solve(&rho, eps, FieldMode::MongeAmpere, None).unwrap();
        let err = p.phi.iter().zip(&exact).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-7, "{err}");
        assert!(r.iterations <= 8 && r.iterations >= 1, "{r:?}");
        assert!(r.residual <= 1e-10);
    }

    #[test]
    fn rough_density_loses_ellipticity() {
        let g = TorusGrid::new(2, 32).unwrap();
        // Strong depletion with a tiny eps cannot keep I + eps^2 D^2 phi >= 0.1.
        let rho = g.sample(|x| 1.0 + 0.95 * (two_pi() * 5.0 * x[0]).cos());
        let out = FieldSolver::new(g).solve(&rho, 0.5, FieldMode::MongeAmpere, None);
        assert!(
            matches!(out, Err(Error::EllipticityLost { .. }) | Err(Error::NewtonStalled { .. })),
            "{out:?}"
        );
    }

    #[test]
    fn poisson_and_monge_ampere_agree_to_leading_order() {
        // fixed profile of phi: rho - 1 = eps^2 * s, so phi_P is eps-independent
        let g = TorusGrid::new(2, 32).unwrap();
        let s = g.sample(|x| (two_pi() * x[0]).cos() + 0.5 * (two_pi() * x[1]).sin() * (two_pi() * x[0]).sin());
        let solver = FieldSolver::new(g);
        let diffs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&eps: &f64| {
                let rho: Vec<f64> = s.iter().map(|v| 1.0 + eps * eps * v).collect();
                let (ma, _) = solver.solve(&rho, eps, FieldMode::MongeAmpere, Some(1e-13)).unwrap();
                let (po, _) = solver.solve(&rho, eps, FieldMode::Poisson, None).unwrap();
                ma.phi.iter().zip(&po.phi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
            .collect();
        // |phi_MA - phi_P| = O(eps^2) at this scaling.
        let ratios: Vec<f64> = diffs.iter().zip([0.2f64, 0.1, 0.05]).map(|(d, e)| d / (e * e)).collect();
        assert!((ratios[2] / ratios[1] - 1.0).abs() < 0.1, "{ratios:?}");
    }

    #[test]
    fn expansion_examples() {
        let g = TorusGrid::new(2, 32).unwrap();
        let sp = Spectral::new(g);
        let zero = Potential::zero(g, 0.3);
        let (full, lin, rem) = determinant_expansion_check(&zero).unwrap();
        assert!(full.iter().all(|v| (*v - 1.0).abs() < 1e-15) && lin.iter().all(|v| *v == 0.0) && rem == 0.0);

        let p = Potential::new(&sp, g.sample(|x| (two_pi() * x[0]).cos()), 0.3);
        let (full, lin, rem) = determinant_expansion_check(&p).unwrap();
        assert!(rem < 1e-20);
        assert!(full.iter().zip(&lin).all(|(f, l)| (f - 1.0 - l).abs() < 1e-13));

        let p = Potential::new(
            &sp,
            g.sample(|x| (two_pi() * x[0]).cos() * (two_pi() * x[1]).cos()),
            0.3,
        );
        let (_, _, rem) = determinant_expansion_check(&p).unwrap();
        let oracle = g
            .sample(|x| {
                let (cx, cy) = ((two_pi() * x[0]).cos(), (two_pi() * x[1]).cos());
                let (sx, sy) = ((two_pi() * x[0]).sin(), (two_pi() * x[1]).sin());
                two_pi().powi(4) * (cx * cx * cy * cy - sx * sx * sy * sy)
            })
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((rem / 0.3f64.powi(4) - oracle).abs() < 1e-10 * oracle);

        let g1 = TorusGrid::new(1, 8).unwrap();
        assert!(determinant_expansion_check(&Potential::zero(g1, 0.1)).is_err());
    }

    #[test]
    fn cofactor_examples() {
        let g = TorusGrid::new(2, 64).unwrap();
        let sp = Spectral::new(g);
        assert_eq!(cofactor_divergence_residual(&sp, &Potential::zero(g, 1.0)).unwrap(), 0.0);
        let p = Potential::new(&sp, g.sample(|x| (two_pi() * x[0]).cos()), 1.0);
        assert!(cofactor_divergence_residual(&sp, &p).unwrap() <= 1e-12);
        let p = Potential::new(&sp, g.sample(|x| (two_pi() * x[0]).cos() * (two_pi() * x[1]).cos()), 1.0);
        assert!(cofactor_divergence_residual(&sp, &p).unwrap() <= 1e-8);

        assert_eq!(cofactor_norm(&Potential::zero(g, 1.0)).unwrap(), 0.0);
        let a = 0.3;
        let p = Potential::new(&sp, g.sample(|x| a * (two_pi() * x[0]).cos()), 1.0);
        let want = two_pi().powi(2) * a / 2f64.sqrt();
        assert!((cofactor_norm(&p).unwrap() - want).abs() < 1e-10 * want);
    }

    #[test]
    fn newton_residuals_decrease() {
        let g = TorusGrid::new(2, 32).unwrap();
        let sp = Spectral::new(g);
        let exact = g.sample(|x| 0.02 * (two_pi() * x[0]).sin() * (two_pi() * 2.0 * x[1]).cos());
        let rho = forward_determinant(&sp, &exact, 0.3);
        let solver = FieldSolver::new(g);
        let mut prev = f64::INFINITY;
        for iters in 1..6 {
            let mut s = FieldSolver::new(g);
            s.max_newton = iters;
            match s.solve(&rho, 0.3, FieldMode::MongeAmpere, Some(1e-14)) {
                Err(Error::NewtonStalled { residual, .. }) => {
                    assert!(residual < prev);
                    prev = residual;
                }
                Ok((_, r)) => {
                    assert!(r.residual < prev);
                    break;
                }
                Err(e) => panic!("{e}"),
            }
        }
        let (_, r) = solver.solve(&rho, 0.3, FieldMode::MongeAmpere, None).unwrap();
        assert!(r.residual <= 1e-10);
    }
}
