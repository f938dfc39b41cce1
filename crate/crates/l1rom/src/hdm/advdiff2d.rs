use super::{Grid2D, HdmError, SteadyProblem};
use crate::linalg::BandedMatrix;

const LENGTH: f64 = 0.018;
const KAPPA: f64 = 2e-7;
const SPEED: f64 = 0.5;

/// Steady 2D advection-diffusion lambda(mu).grad(u) - kappa lap(u) = 0 on
/// [0, 0.018]^2 with lambda = 0.5 (cos mu, sin mu). Inflow Dirichlet data
/// u = 0 on x = 0 and u = 1 on y = 0 create an internal layer along the ray
/// at angle mu; the outflow edges carry homogeneous Neumann conditions.
///
/// Unknowns are the nodes with i >= 1 and j >= 1 (Neumann boundary nodes
/// included), ordered x-fastest: k = (i-1) + (j-1)(nx-1).
pub struct AdvDiff2d {
    pub grid: Grid2D,
    pub mu: f64,
    ax: f64,
    ay: f64,
}

pub fn coefficient_angle(mu: f64) -> (f64, f64) {
    (SPEED * mu.cos(), SPEED * mu.sin())
}

pub fn advdiff2d(mu: f64, nx: usize) -> AdvDiff2d {
    AdvDiff2d::new(mu, nx)
}

impl AdvDiff2d {
    pub fn new(mu: f64, nx: usize) -> Self {
        assert!(mu > 0.0 && mu < std::f64::consts::FRAC_PI_2);
        assert!(nx >= 32);
        let (ax, ay) = coefficient_angle(mu);
        Self {
            grid: Grid2D::square(nx, LENGTH),
            mu,
            ax,
            ay,
        }
    }

    fn m(&self) -> usize {
        self.grid.nx - 1
    }

    /// Stencil application with boundary data (gx on x=0, gy on y=0).
    /// The Jacobian is the same stencil with zero boundary data.
    fn apply(&self, u: &[f64], gx: f64, gy: f64) -> Vec<f64> {
        let m = self.m();
        let h = self.grid.hx;
        let (ax, ay) = (self.ax, self.ay);
        let k2 = KAPPA / (h * h);
        let mut r = vec![0.0; m * m];
        for j in 1..=m {
            for i in 1..=m {
                let k = (i - 1) + (j - 1) * m;
                let uc = u[k];
                let uw = if i == 1 { gx } else { u[k - 1] };
                let us = if j == 1 { gy } else { u[k - m] };
                let ue = if i == m { uc } else { u[k + 1] };
                let un = if j == m { uc } else { u[k + m] };
                r[k] = ax * (uc - uw) / h + ay * (uc - us) / h
                    - k2 * (ue - 2.0 * uc + uw)
                    - k2 * (un - 2.0 * uc + us);
            }
        }
        r
    }
}

impl SteadyProblem for AdvDiff2d {
    fn dim(&self) -> usize {
        self.m() * self.m()
    }

    fn residual(&self, u: &[f64]) -> Vec<f64> {
        self.apply(u, 0.0, 1.0)
    }

    fn jacobian_apply(&self, _u: &[f64], v: &[f64]) -> Vec<f64> {
        self.apply(v, 0.0, 0.0)
    }

    fn is_linear(&self) -> bool {
        true
    }

    fn solve(&self) -> Result<Vec<f64>, HdmError> {
        let m = self.m();
        let n = m * m;
        let h = self.grid.hx;
        let (ax, ay) = (self.ax, self.ay);
        let k2 = KAPPA / (h * h);
        let mut a = BandedMatrix::zeros(n, m);
        for j in 1..=m {
            for i in 1..=m {
                let k = (i - 1) + (j - 1) * m;
                let cx = if i == m { 1.0 } else { 2.0 };
                let cy = if j == m { 1.0 } else { 2.0 };
                a.add(k, k, ax / h + ay / h + k2 * (cx + cy));
                if i > 1 {
                    a.add(k, k - 1, -ax / h - k2);
                }
                if j > 1 {
                    a.add(k, k - m, -ay / h - k2);
                }
                if i < m {
                    a.add(k, k + 1, -k2);
                }
                if j < m {
                    a.add(k, k + m, -k2);
                }
            }
        }
        // r(u) = A u - b, so b = -r(0).
        let b: Vec<f64> = self.residual(&vec![0.0; n]).iter().map(|v| -v).collect();
        let lu = a
            .lu_factorize()
            .map_err(|e| HdmError::LinearSolve(e.to_string()))?;
        Ok(lu.solve(&b))
    }
}
