use super::{Grid1D, HdmError};

pub const GAMMA: f64 = 1.4;

/// Conserved variables (rho, m = rho*u, E) on a 1D cell grid.
#[derive(Debug, Clone)]
pub struct EulerState {
    pub rho: Vec<f64>,
    pub m: Vec<f64>,
    pub e: Vec<f64>,
    pub gamma: f64,
}

impl EulerState {
    pub fn from_primitives(rho: &[f64], u: &[f64], p: &[f64]) -> Self {
        let m: Vec<f64> = rho.iter().zip(u).map(|(r, v)| r * v).collect();
        let e: Vec<f64> = rho
            .iter()
            .zip(u)
            .zip(p)
            .map(|((r, v), pr)| pr / (GAMMA - 1.0) + 0.5 * r * v * v)
            .collect();
        Self {
            rho: rho.to_vec(),
            m,
            e,
            gamma: GAMMA,
        }
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn velocity(&self, i: usize) -> f64 {
        self.m[i] / self.rho[i]
    }

    pub fn pressure(&self, i: usize) -> f64 {
        (self.gamma - 1.0) * (self.e[i] - 0.5 * self.m[i] * self.m[i] / self.rho[i])
    }

    pub fn validate(&self) -> Result<(), HdmError> {
        for i in 0..self.len() {
            if !(self.rho[i] > 0.0) {
                return Err(HdmError::NonPhysicalState(format!(
                    "rho[{}] = {}",
                    i, self.rho[i]
                )));
            }
            let p = self.pressure(i);
            if !(p > 0.0) {
                return Err(HdmError::NonPhysicalState(format!("p[{}] = {}", i, p)));
            }
        }
        Ok(())
    }

    /// Stack [rho; m; E] into a single vector of length 3N.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.len());
        out.extend_from_slice(&self.rho);
        out.extend_from_slice(&self.m);
        out.extend_from_slice(&self.e);
        out
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        assert_eq!(flat.len() % 3, 0);
        let n = flat.len() / 3;
        Self {
            rho: flat[..n].to_vec(),
            m: flat[n..2 * n].to_vec(),
            e: flat[2 * n..].to_vec(),
            gamma: GAMMA,
        }
    }

    pub fn total_mass(&self, dx: f64) -> f64 {
        self.rho.iter().sum::<f64>() * dx
    }

    pub fn total_energy(&self, dx: f64) -> f64 {
        self.e.iter().sum::<f64>() * dx
    }

    pub fn max_wave_speed(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let u = self.velocity(i);
                let c = (self.gamma * self.pressure(i) / self.rho[i]).sqrt();
                u.abs() + c
            })
            .fold(0.0, f64::max)
    }
}

pub fn sod_primitives(x: f64) -> (f64, f64, f64) {
    if x <= 0.5 {
        (1.0, 0.0, 1.0)
    } else {
        (0.125, 0.0, 0.1)
    }
}

pub fn lax_primitives(x: f64) -> (f64, f64, f64) {
    if x <= 0.5 {
        (0.445, 0.698, 3.528)
    } else {
        (0.5, 0.0, 0.571)
    }
}

/// Primitive-variable blend V0(x; mu) = mu V_Sod + (1-mu) V_Lax.
pub fn blend_primitives(mu: f64, x: f64) -> (f64, f64, f64) {
    let (rs, us, ps) = sod_primitives(x);
    let (rl, ul, pl) = lax_primitives(x);
    (
        mu * rs + (1.0 - mu) * rl,
        mu * us + (1.0 - mu) * ul,
        mu * ps + (1.0 - mu) * pl,
    )
}

fn analytic_flux(rho: f64, m: f64, e: f64, gamma: f64) -> [f64; 3] {
    let u = m / rho;
    let p = (gamma - 1.0) * (e - 0.5 * m * u);
    [m, m * u + p, u * (e + p)]
}

/// Roe flux for the 1D Euler equations; no entropy fix (the first-order
/// dissipation is enough for the shock-tube family used here).
pub fn roe_flux_euler(ul: &[f64; 3], ur: &[f64; 3], gamma: f64) -> Result<[f64; 3], HdmError> {
    let check = |u: &[f64; 3]| -> Result<(f64, f64, f64, f64), HdmError> {
        let rho = u[0];
        if !(rho > 0.0) {
            return Err(HdmError::NonPhysicalState(format!("rho = {}", rho)));
        }
        let vel = u[1] / rho;
        let p = (gamma - 1.0) * (u[2] - 0.5 * u[1] * vel);
        if !(p > 0.0) {
            return Err(HdmError::NonPhysicalState(format!("p = {}", p)));
        }
        let h = (u[2] + p) / rho;
        Ok((rho, vel, p, h))
    };
    let (rho_l, u_l, _p_l, h_l) = check(ul)?;
    let (rho_r, u_r, _p_r, h_r) = check(ur)?;

    let sl = rho_l.sqrt();
    let sr = rho_r.sqrt();
    let u = (sl * u_l + sr * u_r) / (sl + sr);
    let h = (sl * h_l + sr * h_r) / (sl + sr);
    let c2 = (gamma - 1.0) * (h - 0.5 * u * u);
    if !(c2 > 0.0) {
        return Err(HdmError::NonPhysicalState(format!(
            "Roe sound speed^2 = {}",
            c2
        )));
    }
    let c = c2.sqrt();

    let d_rho = ur[0] - ul[0];
    let d_m = ur[1] - ul[1];
    let d_e = ur[2] - ul[2];

    let alpha2 = (gamma - 1.0) / c2 * (d_rho * (h - u * u) + u * d_m - d_e);
    let alpha1 = (d_rho * (u + c) - d_m - c * alpha2) / (2.0 * c);
    let alpha3 = d_rho - alpha1 - alpha2;

    let waves = [
        (alpha1, u - c, [1.0, u - c, h - u * c]),
        (alpha2, u, [1.0, u, 0.5 * u * u]),
        (alpha3, u + c, [1.0, u + c, h + u * c]),
    ];

    let fl = analytic_flux(ul[0], ul[1], ul[2], gamma);
    let fr = analytic_flux(ur[0], ur[1], ur[2], gamma);
    let mut f = [0.0; 3];
    for k in 0..3 {
        f[k] = 0.5 * (fl[k] + fr[k]);
        for (alpha, lambda, ev) in &waves {
            f[k] -= 0.5 * alpha * lambda.abs() * ev[k];
        }
    }
    Ok(f)
}

fn cell(state: &EulerState, i: usize) -> [f64; 3] {
    [state.rho[i], state.m[i], state.e[i]]
}

/// One forward-Euler step with transmissive (zero-gradient) boundaries.
pub fn euler_step(state: &EulerState, dt_over_dx: f64) -> Result<EulerState, HdmError> {
    let next = euler_step_raw(state, dt_over_dx)?;
    next.validate()?;
    Ok(next)
}

/// The same conservative update without validating the result, for callers
/// that post-process the output (e.g. reduced-order fitting targets, which
/// may undershoot without invalidating the run).
pub fn euler_step_raw(state: &EulerState, dt_over_dx: f64) -> Result<EulerState, HdmError> {
    let n = state.len();
    let gamma = state.gamma;
    // Interface fluxes, including the two boundary interfaces where the
    // ghost cell copies its neighbor (flux reduces to the analytic flux).
    let mut fluxes = Vec::with_capacity(n + 1);
    fluxes.push(roe_flux_euler(&cell(state, 0), &cell(state, 0), gamma)?);
    for i in 0..n - 1 {
        fluxes.push(roe_flux_euler(&cell(state, i), &cell(state, i + 1), gamma)?);
    }
    fluxes.push(roe_flux_euler(
        &cell(state, n - 1),
        &cell(state, n - 1),
        gamma,
    )?);

    let mut next = state.clone();
    for i in 0..n {
        next.rho[i] -= dt_over_dx * (fluxes[i + 1][0] - fluxes[i][0]);
        next.m[i] -= dt_over_dx * (fluxes[i + 1][1] - fluxes[i][1]);
        next.e[i] -= dt_over_dx * (fluxes[i + 1][2] - fluxes[i][2]);
    }
    Ok(next)
}

/// March an Euler state, storing every step.
pub fn euler_trajectory(
    u0: EulerState,
    dt_over_dx: f64,
    n_steps: usize,
) -> Result<Vec<EulerState>, HdmError> {
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(u0);
    for _ in 0..n_steps {
        let next = euler_step(states.last().unwrap(), dt_over_dx)?;
        states.push(next);
    }
    Ok(states)
}

#[derive(Debug, Clone)]
pub struct EulerTrajectory {
    pub grid: Grid1D,
    pub dt: f64,
    pub states: Vec<EulerState>,
}

/// Largest initial wave speed over the whole blend family mu in [0,1].
/// Left Lax state dominates: |u| + c = 0.698 + sqrt(1.4*3.528/0.445).
pub fn euler_family_max_speed() -> f64 {
    let mut worst = 0.0_f64;
    for k in 0..=10 {
        let mu = k as f64 / 10.0;
        for &x in &[0.25, 0.75] {
            let (r, u, p) = blend_primitives(mu, x);
            worst = worst.max(u.abs() + (GAMMA * p / r).sqrt());
        }
    }
    worst
}

/// Shock-tube run for the blended initial condition. The step is fixed from
/// the family-wide maximum initial speed (with a safety factor for wave
/// interactions) so different mu share time indices, then rounded to make
/// t_end an exact multiple.
pub fn euler1d_unsteady(
    mu: f64,
    n_cells: usize,
    t_end: f64,
    cfl: f64,
) -> Result<EulerTrajectory, HdmError> {
    assert!((0.0..=1.0).contains(&mu));
    let grid = Grid1D::periodic_cells(n_cells, 1.0);
    let smax = 1.5 * euler_family_max_speed();
    let dt_raw = cfl * grid.dx / smax;
    let n_steps = (t_end / dt_raw).ceil() as usize;
    let dt = t_end / n_steps as f64;
    let (mut rho, mut u, mut p) = (Vec::new(), Vec::new(), Vec::new());
    for &x in &grid.x {
        let (r, v, pr) = blend_primitives(mu, x);
        rho.push(r);
        u.push(v);
        p.push(pr);
    }
    let u0 = EulerState::from_primitives(&rho, &u, &p);
    u0.validate()?;
    let states = euler_trajectory(u0, dt / grid.dx, n_steps)?;
    Ok(EulerTrajectory { grid, dt, states })
}
