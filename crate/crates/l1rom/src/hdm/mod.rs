//! High-dimensional discretizations: the steady advection / Burgers /
//! advection-diffusion problems and the unsteady Burgers and Euler
//! finite-volume solvers, all first order with Roe fluxes.

mod advdiff2d;
mod advect;
mod burgers;
mod euler;

pub use advdiff2d::{advdiff2d, AdvDiff2d};
pub use advect::{advect1d_exact, advect1d_steady, advection_source, Advect1dSteady, UpwindAdvection};
pub use burgers::{
    burgers1d_steady, burgers1d_unsteady, burgers_initial, burgers_source, roe_flux_burgers,
    Burgers1dSteady, RoeBurgers, BURGERS_UMAX,
};
pub use euler::{
    blend_primitives, euler1d_unsteady, euler_family_max_speed, euler_step, euler_step_raw, euler_trajectory,
    lax_primitives, roe_flux_euler, sod_primitives, EulerState, EulerTrajectory, GAMMA,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HdmError {
    #[error("Newton did not converge after {0} iterations")]
    NewtonDiverged(usize),
    #[error("non-physical state: {0}")]
    NonPhysicalState(String),
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
}

/// Uniform 1D cell-centered or node grid.
#[derive(Debug, Clone)]
pub struct Grid1D {
    pub x: Vec<f64>,
    pub dx: f64,
}

impl Grid1D {
    /// Nodes x_i = i*dx for i = 1..=n on (0, length]; the inflow node x = 0
    /// carries the Dirichlet value and is not an unknown.
    pub fn interior_nodes(n: usize, length: f64) -> Self {
        let dx = length / n as f64;
        Self {
            x: (1..=n).map(|i| i as f64 * dx).collect(),
            dx,
        }
    }

    /// Cell centers on [0, length) with periodic wrap.
    pub fn periodic_cells(n: usize, length: f64) -> Self {
        let dx = length / n as f64;
        Self {
            x: (0..n).map(|i| (i as f64 + 0.5) * dx).collect(),
            dx,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Uniform 2D grid, nx points per direction including boundaries.
#[derive(Debug, Clone)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub lx: f64,
    pub ly: f64,
}

impl Grid2D {
    pub fn square(nx: usize, length: f64) -> Self {
        assert!(nx >= 3);
        let h = length / (nx - 1) as f64;
        Self {
            nx,
            ny: nx,
            hx: h,
            hy: h,
            lx: length,
            ly: length,
        }
    }
}

/// A discretized steady problem r(u; mu) = 0 with Jacobian-vector products,
/// as consumed by the reduction layer.
pub trait SteadyProblem: Send + Sync {
    fn dim(&self) -> usize;
    fn residual(&self, u: &[f64]) -> Vec<f64>;
    /// v -> dr/du (u) v.
    fn jacobian_apply(&self, u: &[f64], v: &[f64]) -> Vec<f64>;
    fn is_linear(&self) -> bool;
    /// Solve the full problem to machine-level residual.
    fn solve(&self) -> Result<Vec<f64>, HdmError>;
}

/// Interface numerical flux for scalar 1D conservation laws.
pub trait ScalarFlux: Send + Sync {
    fn flux(&self, ul: f64, ur: f64) -> f64;
    fn max_speed(&self, u: &[f64]) -> f64;
}

/// One forward-Euler step of the periodic finite-volume scheme.
pub fn scalar_step(flux: &dyn ScalarFlux, u: &[f64], dt_over_dx: f64) -> Vec<f64> {
    let n = u.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let im = (i + n - 1) % n;
        let ip = (i + 1) % n;
        let f_right = flux.flux(u[i], u[ip]);
        let f_left = flux.flux(u[im], u[i]);
        out[i] = u[i] - dt_over_dx * (f_right - f_left);
    }
    out
}

/// March a scalar periodic problem, storing every state (including the
/// initial one).
pub fn scalar_trajectory(
    flux: &dyn ScalarFlux,
    u0: Vec<f64>,
    dt_over_dx: f64,
    n_steps: usize,
) -> Vec<Vec<f64>> {
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(u0);
    for _ in 0..n_steps {
        let next = scalar_step(flux, states.last().unwrap(), dt_over_dx);
        states.push(next);
    }
    states
}

/// Shared trajectory container for scalar problems.
#[derive(Debug, Clone)]
pub struct ScalarTrajectory {
    pub grid: Grid1D,
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
}

impl ScalarTrajectory {
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }
}
