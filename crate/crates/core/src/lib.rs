//! Numerical kernels for compound vortices of the two-component
//! Ginzburg-Landau energy: radial profiles, mode-reduced spectra, disk
//! minimization, and continuation of the symmetry-broken branch.

pub mod acceptance;
pub mod bifurc;
pub mod disk;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod radial;
pub mod real;
pub mod spectral;

pub use real::Real;

/// Default tolerances used across the solvers (all arithmetic in f64 by
/// default; f32 instantiations should loosen these).
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub shooting_residual: f64,
    pub ode_local_error: f64,
    pub eigen_residual: f64,
    pub newton_residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            shooting_residual: 1e-10,
            ode_local_error: 1e-8,
            eigen_residual: 1e-10,
            newton_residual: 1e-8,
        }
    }
}

/// Concrete f64 instantiations, the types most code should use.
pub type RadialGrid = grid::RadialGrid<f64>;
pub type RadialProfile = radial::RadialProfile<f64>;
pub type ShootingResult = radial::ShootingResult<f64>;
