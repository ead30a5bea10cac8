//! Phase-space simulation of the Boltzmann/Vlasov-Monge-Ampère system on the
//! periodic torus `[0,1)^d`, together with a pseudo-spectral incompressible
//! Euler reference solver and the diagnostics used to track the quasineutral
//! hydrodynamic limit.
//!
//! Module map:
//!
//! * [`grids`]: torus and velocity grids, phase-space fields, velocity moments.
//! * [`spectral`]: FFT-based differentiation on the torus.
//! * [`spline`]: periodic cubic-spline shifts used by the semi-Lagrangian steps.
//! * [`collision`]: conservative BGK relaxation and the direct Boltzmann integral.
//! * [`monge_ampere`]: the field solve `det(I + ε² D²φ) = ρ` and its cofactor tools.
//! * [`vlasov`]: Strang-split semi-Lagrangian time integration.
//! * [`euler`]: Leray projection and the incompressible Euler reference.
//! * [`diagnostics`]: energies, modulated energy, quasineutrality and current errors.
//! * [`config`], [`scenario`], [`check`]: configuration files, run orchestration
//!   and built-in verification suites behind the `quasikin` binary.

pub mod check;
pub mod collision;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod euler;
pub mod grids;
mod linalg;
pub mod monge_ampere;
pub mod par;
pub mod scenario;
pub mod snapshot;
pub mod spectral;
pub mod spline;
pub mod vlasov;

pub use error::{Error, Result};
pub use grids::{MacroFields, PhaseField, TorusGrid, VelocityGrid};
