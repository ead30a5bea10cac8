//! Fourier differentiation on the unit torus.
//!
//! Derivatives use the effective wavenumber `κ(m) = 2π m` for `|m| < n/2`
//! and `κ = 0` on the Nyquist index, for first and second derivatives alike.
//! With that convention mixed and pure second derivatives are built from the
//! same multipliers, so discrete Parseval identities such as
//! `Σ φ_xx φ_yy = Σ φ_xy²` hold exactly.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grids::TorusGrid;

pub struct Spectral {
    grid: TorusGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    kappa: Vec<f64>,
    /// Signed integer wavenumber of each index, Nyquist taken as `+n/2`.
    mode: Vec<i64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: TorusGrid) -> Self {
        let n = grid.n();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mode: Vec<i64> = (0..n)
            .map(|m| if m <= n / 2 { m as i64 } else { m as i64 - n as i64 })
            .collect();
        let kappa = mode
            .iter()
            .map(|&m| if m as usize == n / 2 { 0.0 } else { 2.0 * PI * m as f64 })
            .collect();
        Self {
            grid,
            fwd,
            inv,
            kappa,
            mode,
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    /// Per-axis integer wavenumbers of spectral index `s`.
    pub fn wavenumbers(&self, s: usize) -> [i64; 2] {
        let m = self.grid.multi_index(s);
        match self.grid.dim() {
            1 => [self.mode[m[0]], 0],
            _ => [self.mode[m[0]], self.mode[m[1]]],
        }
    }

    fn kappa_of(&self, s: usize) -> [f64; 2] {
        let m = self.grid.multi_index(s);
        match self.grid.dim() {
            1 => [self.kappa[m[0]], 0.0],
            _ => [self.kappa[m[0]], self.kappa[m[1]]],
        }
    }

    fn transform(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n();
        plan.process(buf);
        if self.grid.dim() == 2 {
            transpose(buf, n);
            plan.process(buf);
            transpose(buf, n);
        }
    }

    /// Unnormalised forward DFT.
    pub fn forward(&self, field: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = field.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut buf, &self.fwd);
        buf
    }

    /// Inverse DFT including the `1/N` factor; returns the real part.
    pub fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spec, &self.inv);
        let scale = 1.0 / self.grid.len() as f64;
        spec.iter().map(|c| c.re * scale).collect()
    }

    /// Normalised Fourier coefficients `ĝ_k = N^{-1} Σ g_j e^{-2πi k·x_j}`.
    pub fn coefficients(&self, field: &[f64]) -> Vec<Complex64> {
        let scale = 1.0 / self.grid.len() as f64;
        self.forward(field).into_iter().map(|c| c * scale).collect()
    }

    fn apply<F: Fn([f64; 2]) -> Complex64>(&self, spec: &[Complex64], mult: F) -> Vec<f64> {
        let out: Vec<Complex64> = spec
            .iter()
            .enumerate()
            .map(|(s, &c)| c * mult(self.kappa_of(s)))
            .collect();
        self.inverse(out)
    }

    pub fn derivative(&self, field: &[f64], axis: usize) -> Vec<f64> {
        let spec = self.forward(field);
        self.apply(&spec, |k| Complex64::new(0.0, k[axis]))
    }

    pub fn gradient(&self, field: &[f64]) -> Vec<Vec<f64>> {
        let spec = self.forward(field);
        (0..self.grid.dim())
            .map(|a| self.apply(&spec, |k| Complex64::new(0.0, k[a])))
            .collect()
    }

    /// Hessian components in row-major `d×d` order (symmetric).
    pub fn hessian(&self, field: &[f64]) -> Vec<Vec<f64>> {
        let d = self.grid.dim();
        let spec = self.forward(field);
        let mut out = vec![Vec::new(); d * d];
        for a in 0..d {
            for b in a..d {
                let c = self.apply(&spec, |k| Complex64::new(-k[a] * k[b], 0.0));
                if a != b {
                    out[b * d + a] = c.clone();
                }
                out[a * d + b] = c;
            }
        }
        out
    }

    pub fn divergence(&self, v: &[Vec<f64>]) -> Vec<f64> {
        let n = self.grid.len();
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        for (a, comp) in v.iter().enumerate() {
            let spec = self.forward(comp);
            for (s, c) in spec.iter().enumerate() {
                acc[s] += c * Complex64::new(0.0, self.kappa_of(s)[a]);
            }
        }
        self.inverse(acc)
    }

    pub fn laplacian(&self, field: &[f64]) -> Vec<f64> {
        let spec = self.forward(field);
        self.apply(&spec, |k| Complex64::new(-(k[0] * k[0] + k[1] * k[1]), 0.0))
    }

    /// Zero-mean solution `ψ` of `Δψ = g`. Modes in the kernel of the
    /// discrete Laplacian (the mean and pure-Nyquist modes) are set to zero.
    pub fn inverse_laplacian_zero_mean(&self, g: &[f64]) -> Result<Vec<f64>> {
        let mean = self.grid.mean(g);
        if mean.abs() > 1e-10 {
            return Err(Error::NonZeroMean { mean });
        }
        Ok(self.inverse_laplacian_unchecked(g))
    }

    /// [`Self::inverse_laplacian_zero_mean`] without the mean check; the mean
    /// is simply discarded.
    pub fn inverse_laplacian_unchecked(&self, g: &[f64]) -> Vec<f64> {
        let spec = self.forward(g);
        self.apply(&spec, |k| {
            let k2 = k[0] * k[0] + k[1] * k[1];
            if k2 == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(-1.0 / k2, 0.0)
            }
        })
    }

    /// Removes the Fourier modes in the kernel of the discrete Laplacian.
    pub fn remove_kernel_modes(&self, g: &[f64]) -> Vec<f64> {
        let spec = self.forward(g);
        self.apply(&spec, |k| {
            if k[0] == 0.0 && k[1] == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
    }

    /// Indicator of the modes kept by the 2/3 dealiasing rule.
    pub fn dealias_keep(&self, s: usize) -> bool {
        let cutoff = (self.grid.n() / 3) as i64;
        let k = self.wavenumbers(s);
        k[0].abs() <= cutoff && k[1].abs() <= cutoff
    }

    /// Applies the 2/3 rule to a real field.
    pub fn dealias(&self, g: &[f64]) -> Vec<f64> {
        let mut spec = self.forward(g);
        for (s, c) in spec.iter_mut().enumerate() {
            if !self.dealias_keep(s) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        self.inverse(spec)
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}
