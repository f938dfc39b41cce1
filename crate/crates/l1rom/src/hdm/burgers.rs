use super::{scalar_trajectory, Grid1D, HdmError, ScalarFlux, ScalarTrajectory, SteadyProblem};
use crate::linalg::norm_inf;

const K: f64 = 100.0;
const NEWTON_MAX: usize = 50;
const NEWTON_TOL: f64 = 1e-10;

/// Largest |u| over the whole initial-condition family mu in [0,1]; fixes a
/// shared time step so dictionary trajectories align in time index.
pub const BURGERS_UMAX: f64 = 1.1;

/// Source term -k e^s (1 + 3 e^s) / (1+e^s)^3 with s = -2k(x - mu),
/// branched on the sign of s to avoid overflow of e^s cubed. This is the
/// derivative of u^2/2 for u(x) = 1/2 + e^s/(1+e^s), the layer profile with
/// u(0) = 1.5 and downstream plateau 1/2; the doubled-prefactor variant
/// integrates to -2 over the layer, which no flux function u^2/2 starting
/// from u(0) = 1.5 can accommodate.
pub fn burgers_source(x: f64, mu: f64) -> f64 {
    let s = -2.0 * K * (x - mu);
    if s <= 0.0 {
        let e = s.exp();
        -K * e * (1.0 + 3.0 * e) / (1.0 + e).powi(3)
    } else {
        let q = (-s).exp();
        -K * q * (q + 3.0) / (q + 1.0).powi(3)
    }
}

/// Steady Burgers 1/2 (u^2)_x = f(x; mu) on (0,1], u(0) = 1.5, conservative
/// upwind (the solution stays positive, so upwinding looks left).
pub struct Burgers1dSteady {
    pub grid: Grid1D,
    pub mu: f64,
}

pub fn burgers1d_steady(mu: f64, n: usize) -> Burgers1dSteady {
    assert!(mu > 0.0 && mu < 1.0);
    assert!(n >= 10);
    Burgers1dSteady {
        grid: Grid1D::interior_nodes(n, 1.0),
        mu,
    }
}

impl SteadyProblem for Burgers1dSteady {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn residual(&self, u: &[f64]) -> Vec<f64> {
        let dx = self.grid.dx;
        let mut r = Vec::with_capacity(u.len());
        for (i, &x) in self.grid.x.iter().enumerate() {
            let left = if i == 0 { 1.5 } else { u[i - 1] };
            r.push(0.5 * (u[i] * u[i] - left * left) / dx - burgers_source(x, self.mu));
        }
        r
    }

    fn jacobian_apply(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let dx = self.grid.dx;
        let mut out = Vec::with_capacity(v.len());
        for i in 0..v.len() {
            let left = if i == 0 { 0.0 } else { u[i - 1] * v[i - 1] };
            out.push((u[i] * v[i] - left) / dx);
        }
        out
    }

    fn is_linear(&self) -> bool {
        false
    }

    fn solve(&self) -> Result<Vec<f64>, HdmError> {
        let n = self.dim();
        let dx = self.grid.dx;
        let mut u = vec![1.5; n];
        for _ in 0..NEWTON_MAX {
            let r = self.residual(&u);
            let r_norm = norm_inf(&r);
            if r_norm < NEWTON_TOL {
                return Ok(u);
            }
            // The Jacobian is lower bidiagonal: (u_i v_i - u_{i-1} v_{i-1})/dx,
            // so the Newton system solves by forward substitution.
            let mut delta = vec![0.0; n];
            for i in 0..n {
                let carried = if i == 0 { 0.0 } else { u[i - 1] * delta[i - 1] };
                if u[i].abs() < 1e-14 {
                    return Err(HdmError::LinearSolve(
                        "zero diagonal in Burgers Newton step".into(),
                    ));
                }
                delta[i] = (-r[i] * dx + carried) / u[i];
            }
            // Step halving until the residual actually decreases.
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(ui, di)| ui + step * di).collect();
                if norm_inf(&self.residual(&trial)) < r_norm {
                    u = trial;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                return Err(HdmError::NewtonDiverged(NEWTON_MAX));
            }
        }
        let r = self.residual(&u);
        if norm_inf(&r) < NEWTON_TOL {
            Ok(u)
        } else {
            Err(HdmError::NewtonDiverged(NEWTON_MAX))
        }
    }
}

/// Roe flux for Burgers: 1/2(f(uL) + f(uR)) - 1/2 |a| (uR - uL) with
/// a = (uL + uR)/2.
pub fn roe_flux_burgers(ul: f64, ur: f64) -> f64 {
    let a = 0.5 * (ul + ur);
    0.5 * (0.5 * ul * ul + 0.5 * ur * ur) - 0.5 * a.abs() * (ur - ul)
}

pub struct RoeBurgers;

impl ScalarFlux for RoeBurgers {
    fn flux(&self, ul: f64, ur: f64) -> f64 {
        roe_flux_burgers(ul, ur)
    }

    fn max_speed(&self, u: &[f64]) -> f64 {
        u.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }
}

pub fn burgers_initial(mu: f64, x: f64) -> f64 {
    mu * (2.0 * x).sin().abs() + 0.1
}

/// Unsteady Burgers on [0, 2pi], periodic, first-order Roe finite volume,
/// forward Euler. The time step is fixed from the family-wide maximum speed
/// and then rounded so t_end is an integer number of steps; trajectories at
/// different mu therefore share time indices.
pub fn burgers1d_unsteady(mu: f64, n: usize, t_end: f64, cfl: f64) -> ScalarTrajectory {
    assert!((0.0..=1.0).contains(&mu));
    assert!(cfl > 0.0 && cfl <= 1.0);
    let grid = Grid1D::periodic_cells(n, 2.0 * std::f64::consts::PI);
    let dt_raw = cfl * grid.dx / BURGERS_UMAX;
    let n_steps = (t_end / dt_raw).ceil() as usize;
    let dt = t_end / n_steps as f64;
    let u0: Vec<f64> = grid.x.iter().map(|&x| burgers_initial(mu, x)).collect();
    let states = scalar_trajectory(&RoeBurgers, u0, dt / grid.dx, n_steps);
    ScalarTrajectory { grid, dt, states }
}
