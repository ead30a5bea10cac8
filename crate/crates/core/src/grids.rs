//! Grids, phase-space containers and velocity moments.
//!
//! Phase-space values are stored row-major over the spatial axes first and
//! the velocity axes second, so the velocity block of spatial node `j` is the
//! contiguous slice `values[j * nv_total .. (j + 1) * nv_total]`.

use crate::error::{Error, Result};
use crate::par;

/// Uniform grid on the unit torus `[0,1)^d`, `d ∈ {1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "spatial dimension must be 1 or 2, got {dim}"
            )));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n_x must be even and >= 4, got {n}"
            )));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Total number of nodes, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Per-axis indices of flat node `j` (first axis slowest).
    pub fn multi_index(&self, j: usize) -> [usize; 2] {
        match self.dim {
            1 => [j, 0],
            _ => [j / self.n, j % self.n],
        }
    }

    /// Coordinates of node `j` in `[0,1)^d`; unused axes are 0.
    pub fn coords(&self, j: usize) -> [f64; 2] {
        let m = self.multi_index(j);
        let h = self.h();
        match self.dim {
            1 => [m[0] as f64 * h, 0.0],
            _ => [m[0] as f64 * h, m[1] as f64 * h],
        }
    }

    /// Samples `f(x)` at every node.
    pub fn sample<F: Fn([f64; 2]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|j| f(self.coords(j))).collect()
    }

    /// Discrete integral `Σ g·h^d`.
    pub fn integrate(&self, g: &[f64]) -> f64 {
        par::sum(g) * self.cell_volume()
    }

    pub fn mean(&self, g: &[f64]) -> f64 {
        par::sum(g) / self.len() as f64
    }

    /// Discrete L² norm `(Σ |g|² h^d)^{1/2}` of a scalar field.
    pub fn l2_norm(&self, g: &[f64]) -> f64 {
        (par::pairwise_sum(g.len(), |i| g[i] * g[i]) * self.cell_volume()).sqrt()
    }

    /// Discrete L² norm of a vector field given component-wise.
    pub fn l2_norm_vec(&self, v: &[Vec<f64>]) -> f64 {
        let n = self.len();
        (par::pairwise_sum(n, |i| v.iter().map(|c| c[i] * c[i]).sum::<f64>())
            * self.cell_volume())
        .sqrt()
    }
}

/// Cell-centred tensor grid on the velocity box `[-v_max, v_max]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityGrid {
    dim: usize,
    n: usize,
    v_max: f64,
}

impl VelocityGrid {
    pub fn new(dim: usize, n: usize, v_max: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "velocity dimension must be 1 or 2, got {dim}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!("n_v must be >= 2, got {n}")));
        }
        if !(v_max > 0.0 && v_max.is_finite()) {
            return Err(Error::InvalidGrid(format!("v_max must be > 0, got {v_max}")));
        }
        Ok(Self { dim, n, v_max })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn h(&self) -> f64 {
        2.0 * self.v_max / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of every node, `h_v^d`.
    pub fn weight(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// 1D node coordinate along an axis.
    pub fn node_1d(&self, k: usize) -> f64 {
        -self.v_max + (k as f64 + 0.5) * self.h()
    }

    /// Velocity of flat node `k`; unused components are 0.
    pub fn node(&self, k: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.node_1d(k), 0.0],
            _ => [self.node_1d(k / self.n), self.node_1d(k % self.n)],
        }
    }

    pub fn speed_squared(&self, k: usize) -> f64 {
        let v = self.node(k);
        v[0] * v[0] + v[1] * v[1]
    }
}

/// Distribution `f(x, ξ)` sampled on a torus × velocity tensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    pub x: TorusGrid,
    pub v: VelocityGrid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl PhaseField {
    pub fn zeros(x: TorusGrid, v: VelocityGrid) -> Result<Self> {
        if x.dim() != v.dim() {
            return Err(Error::GridMismatch(format!(
                "spatial dimension {} vs velocity dimension {}",
                x.dim(),
                v.dim()
            )));
        }
        Ok(Self {
            x,
            v,
            values: vec![0.0; x.len() * v.len()],
            time: 0.0,
        })
    }

    /// Builds `f(x_j, ξ_k) = g(j, k)`.
    pub fn from_fn<F: Fn(usize, usize) -> f64 + Sync + Send>(
        x: TorusGrid,
        v: VelocityGrid,
        g: F,
    ) -> Result<Self> {
        let mut f = Self::zeros(x, v)?;
        let nv = v.len();
        par::for_each_chunk_mut(&mut f.values, nv, |j, block| {
            for (k, out) in block.iter_mut().enumerate() {
                *out = g(j, k);
            }
        });
        Ok(f)
    }

    pub fn block(&self, j: usize) -> &[f64] {
        let nv = self.v.len();
        &self.values[j * nv..(j + 1) * nv]
    }

    /// Phase-space volume element `h_x^d h_v^d`.
    pub fn cell_volume(&self) -> f64 {
        self.x.cell_volume() * self.v.weight()
    }

    pub fn mass(&self) -> f64 {
        par::sum(&self.values) * self.cell_volume()
    }

    /// Checks that every value is finite and nonnegative.
    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.x.len() * self.v.len() {
            return Err(Error::GridMismatch("value count does not match grids".into()));
        }
        if let Some((i, &val)) = self
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "phase value {val} at flat index {i} is negative or non-finite"
            )));
        }
        Ok(())
    }

    /// Zeroes negative values and returns the mass that was added by doing so.
    pub fn clip_negative(&mut self) -> f64 {
        let added = par::pairwise_sum(self.values.len(), |i| (-self.values[i]).max(0.0));
        if added > 0.0 {
            for v in self.values.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        added * self.cell_volume()
    }
}

/// Velocity moments on the torus grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroFields {
    pub grid: TorusGrid,
    pub rho: Vec<f64>,
    /// Current, one vector of length `grid.len()` per component.
    pub current: Vec<Vec<f64>>,
    pub e_kin: Vec<f64>,
}

impl MacroFields {
    pub fn total_mass(&self) -> f64 {
        self.grid.integrate(&self.rho)
    }

    pub fn total_momentum(&self) -> Vec<f64> {
        self.current.iter().map(|c| self.grid.integrate(c)).collect()
    }
}

/// Velocity moments `ρ = Σ f w`, `J = Σ ξ f w`, `e = ½ Σ |ξ|² f w` per node.
pub fn moments(f: &PhaseField) -> MacroFields {
    let d = f.x.dim();
    let nv = f.v.len();
    let w = f.v.weight();
    let vg = f.v;
    let per_node = par::map_range(f.x.len(), |j| {
        let block = &f.values[j * nv..(j + 1) * nv];
        let rho = par::pairwise_sum(nv, |k| block[k]) * w;
        let jx = par::pairwise_sum(nv, |k| vg.node(k)[0] * block[k]) * w;
        let jy = if d == 2 {
            par::pairwise_sum(nv, |k| vg.node(k)[1] * block[k]) * w
        } else {
            0.0
        };
        let e = 0.5 * par::pairwise_sum(nv, |k| vg.speed_squared(k) * block[k]) * w;
        (rho, [jx, jy], e)
    });
    let mut rho = Vec::with_capacity(per_node.len());
    let mut current = vec![Vec::with_capacity(per_node.len()); d];
    let mut e_kin = Vec::with_capacity(per_node.len());
    for (r, jv, e) in per_node {
        rho.push(r);
        for (a, c) in current.iter_mut().enumerate() {
            c.push(jv[a]);
        }
        e_kin.push(e);
    }
    MacroFields {
        grid: f.x,
        rho,
        current,
        e_kin,
    }
}

/// Second velocity moments `S_ab = Σ ξ_a ξ_b f w` per node, stored as
/// `d*d` components in row-major order.
pub fn stress(f: &PhaseField) -> Vec<Vec<f64>> {
    let d = f.x.dim();
    let nv = f.v.len();
    let w = f.v.weight();
    let vg = f.v;
    let per_node = par::map_range(f.x.len(), |j| {
        let block = &f.values[j * nv..(j + 1) * nv];
        let mut s = [0.0; 4];
        for a in 0..d {
            for b in a..d {
                s[a * d + b] =
                    par::pairwise_sum(nv, |k| vg.node(k)[a] * vg.node(k)[b] * block[k]) * w;
                s[b * d + a] = s[a * d + b];
            }
        }
        s
    });
    (0..d * d)
        .map(|c| per_node.iter().map(|s| s[c]).collect())
        .collect()
}

/// Gaussian `ρ (2πθ)^{-d/2} exp(-|ξ-u|²/(2θ))` sampled at the velocity nodes.
pub fn maxwellian(grid: &VelocityGrid, rho: f64, u: [f64; 2], theta: f64) -> Result<Vec<f64>> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "temperature must be > 0, got {theta}"
        )));
    }
    if rho < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "density must be >= 0, got {rho}"
        )));
    }
    let d = grid.dim();
    let norm = rho * (2.0 * std::f64::consts::PI * theta).powf(-(d as f64) / 2.0);
    Ok((0..grid.len())
        .map(|k| {
            let v = grid.node(k);
            let du2: f64 = (0..d).map(|a| (v[a] - u[a]).powi(2)).sum();
            norm * (-du2 / (2.0 * theta)).exp()
        })
        .collect())
}

/// Truncation rule: the box must hold `u_max + 6 sqrt(θ_max)`.
pub fn check_velocity_box(grid: &VelocityGrid, u_max: f64, theta_max: f64) -> Result<()> {
    let needed = u_max + 6.0 * theta_max.sqrt();
    if grid.v_max() < needed {
        return Err(Error::InvalidParameter(format!(
            "v_max = {} is below u_max + 6 sqrt(theta_max) = {needed}",
            grid.v_max()
        )));
    }
    Ok(())
}
