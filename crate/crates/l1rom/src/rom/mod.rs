//! Dictionary-based reduction: steady coefficient solves against a
//! dictionary of high-dimensional solutions, unsteady coefficient
//! propagation, the Galerkin baseline, the two Euler reconstruction
//! strategies, and random rank repair for degenerate dictionaries.

use crate::hdm::{
    blend_primitives, euler_step_raw, EulerState, Grid1D, HdmError, ScalarFlux, SteadyProblem, GAMMA,
};
use crate::linalg::{norm1, norm2, DenseMatrix, QrFactors};
use crate::minimize::{
    add_regularization, gauss_newton_l2, huber_irls, l1_gn_irls, l1_gn_lp, l1_irls, l1_lp,
    qr_least_squares, Backend, Functional, MinimizeError, NonlinearResidual, NormKind,
    SolveReport, DEFAULT_EPS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

const GALERKIN_MAX_NEWTON: usize = 50;

#[derive(Debug, Error)]
pub enum RomError {
    #[error("dictionary matrix is rank deficient and perturbation is disabled")]
    DegenerateDictionary,
    #[error("Galerkin Newton did not converge after {0} iterations")]
    NewtonDiverged(usize),
    #[error(transparent)]
    Minimize(#[from] MinimizeError),
    #[error(transparent)]
    Hdm(#[from] HdmError),
}

/// Which conserved variable a dictionary holds; `All` for scalar problems
/// and for the stacked Euler dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariableTag {
    All,
    Rho,
    M,
    E,
}

/// Steady dictionary: one high-dimensional solution per parameter.
#[derive(Debug, Clone)]
pub struct Dictionary {
    pub mus: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub variable_tag: VariableTag,
}

impl Dictionary {
    pub fn new(mus: Vec<f64>, states: Vec<Vec<f64>>) -> Self {
        assert_eq!(mus.len(), states.len());
        assert!(!mus.is_empty());
        let n = states[0].len();
        assert!(states.iter().all(|s| s.len() == n));
        Self {
            mus,
            states,
            variable_tag: VariableTag::All,
        }
    }

    pub fn len(&self) -> usize {
        self.mus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mus.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn matrix(&self) -> DenseMatrix {
        DenseMatrix::from_columns(&self.states)
    }
}

/// Unsteady dictionary: one trajectory per parameter, all on the shared
/// time grid (fixed dt, common step count).
#[derive(Debug, Clone)]
pub struct UnsteadyDictionary {
    pub mus: Vec<f64>,
    /// trajectories[l][n] is the state of entry l at time index n.
    pub trajectories: Vec<Vec<Vec<f64>>>,
    pub grid: Grid1D,
    pub dt: f64,
}

impl UnsteadyDictionary {
    pub fn new(mus: Vec<f64>, trajectories: Vec<Vec<Vec<f64>>>, grid: Grid1D, dt: f64) -> Self {
        assert_eq!(mus.len(), trajectories.len());
        assert!(!mus.is_empty());
        let steps = trajectories[0].len();
        assert!(trajectories.iter().all(|t| t.len() == steps));
        Self {
            mus,
            trajectories,
            grid,
            dt,
        }
    }

    pub fn r(&self) -> usize {
        self.mus.len()
    }

    pub fn n_steps(&self) -> usize {
        self.trajectories[0].len() - 1
    }

    /// Dictionary matrix A^n with columns u^n(mu_l).
    pub fn matrix_at(&self, n: usize) -> DenseMatrix {
        let cols: Vec<Vec<f64>> = self.trajectories.iter().map(|t| t[n].clone()).collect();
        DenseMatrix::from_columns(&cols)
    }
}

#[derive(Debug, Clone)]
pub struct RomCoefficients {
    pub alpha: Vec<f64>,
    pub mu_target: f64,
    pub time_index: usize,
    pub converged: bool,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct RomTrajectory {
    pub coefficients: Vec<RomCoefficients>,
    pub reconstructed: Vec<Vec<f64>>,
    pub residual_norms: Vec<f64>,
    pub functional_used: Functional,
}

/// Random perturbation applied to degenerate dictionary matrices.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct PerturbationConfig {
    pub enabled: bool,
    pub scale: f64,
    pub seed: u64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            scale: 1e-8,
            seed: 0,
        }
    }
}

/// Entrywise i.i.d. uniform(-1,1) * scale * l_ref perturbation, seeded.
pub fn rank_repair(a: &DenseMatrix, cfg: &PerturbationConfig, l_ref: f64) -> DenseMatrix {
    assert!(cfg.enabled);
    assert!(cfg.scale >= 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = a.clone();
    for v in out.data_mut() {
        *v += rng.gen_range(-1.0..1.0) * cfg.scale * l_ref;
    }
    out
}

/// Numerical full-column-rank check via the QR diagonal.
pub fn has_full_column_rank(a: &DenseMatrix) -> bool {
    if a.rows() < a.cols() {
        return false;
    }
    let qr = QrFactors::compute(a);
    let (_, dmin) = qr.min_abs_diag();
    dmin > 1e-10 * (1.0 + a.max_abs())
}

/// Variable range max - min over the dictionary entries of a matrix, used
/// as the reference length for rank repair.
pub fn variable_range(a: &DenseMatrix) -> f64 {
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for &v in a.data() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (hi - lo).max(0.0)
}

fn nearest_unit(mus: &[f64], mu: f64) -> Vec<f64> {
    let mut best = 0;
    for (l, &m) in mus.iter().enumerate() {
        if (m - mu).abs() < (mus[best] - mu).abs() {
            best = l;
        }
    }
    let mut z = vec![0.0; mus.len()];
    z[best] = 1.0;
    z
}

/// Linear minimization dispatch for min ||A z + b|| in the functional's
/// norm; z0 warm-starts the iterative backends.
pub fn minimize_linear(
    a: &DenseMatrix,
    b: &[f64],
    z0: &[f64],
    functional: &Functional,
) -> Result<SolveReport, MinimizeError> {
    assert!(functional.is_valid());
    let (a, b) = add_regularization(a, b, functional.eta);
    match (functional.kind, functional.backend) {
        (NormKind::L2, _) => qr_least_squares(&a, &b),
        (NormKind::L1, Backend::Lp) => l1_lp(&a, &b),
        (NormKind::L1, _) => l1_irls(&a, &b, z0, DEFAULT_EPS),
        (NormKind::Huber, _) => {
            let res = NonlinearResidual::from_linear(a.clone(), b.to_vec());
            let d = DenseMatrix::identity(a.cols());
            huber_irls(&res, &d, z0, DEFAULT_EPS, functional.huber_eps2)
        }
    }
}

/// Steady reduced solve: alpha = argmin J(r(D alpha; mu)). Linear problems
/// dispatch to the direct backends from a zero start; nonlinear problems run
/// the Gauss-Newton variants warm-started on the nearest dictionary entry.
pub fn solve_steady_rom(
    problem: &dyn SteadyProblem,
    dict: &Dictionary,
    functional: &Functional,
    mu: f64,
) -> Result<(RomCoefficients, Vec<f64>, SolveReport), RomError> {
    assert!(functional.is_valid());
    let d = dict.matrix();
    if !has_full_column_rank(&d) {
        return Err(RomError::DegenerateDictionary);
    }
    let res = NonlinearResidual {
        dim_in: problem.dim(),
        dim_out: problem.dim(),
        eval: Box::new(|u: &[f64]| problem.residual(u)),
        jac_apply: Box::new(|u: &[f64], v: &[f64]| problem.jacobian_apply(u, v)),
    };
    let report = if problem.is_linear() {
        // r(D alpha) = (J D) alpha + r(0).
        let a = res.compose_jacobian(&vec![0.0; problem.dim()], &d);
        let b = problem.residual(&vec![0.0; problem.dim()]);
        let z0 = vec![0.0; dict.len()];
        minimize_linear(&a, &b, &z0, functional)?
    } else {
        let z0 = nearest_unit(&dict.mus, mu);
        match (functional.kind, functional.backend) {
            (NormKind::L2, _) => gauss_newton_l2(&res, &d, &z0, DEFAULT_EPS)?,
            (NormKind::L1, Backend::Lp) => l1_gn_lp(&res, &d, &z0, DEFAULT_EPS)?,
            (NormKind::L1, _) => l1_gn_irls(&res, &d, &z0, DEFAULT_EPS)?,
            (NormKind::Huber, _) => {
                huber_irls(&res, &d, &z0, DEFAULT_EPS, functional.huber_eps2)?
            }
        }
    };
    let reconstruction = d.matvec(&report.solution);
    let coeffs = RomCoefficients {
        alpha: report.solution.clone(),
        mu_target: mu,
        time_index: 0,
        converged: report.converged,
        objective: report.objective,
    };
    Ok((coeffs, reconstruction, report))
}

/// Galerkin baseline: solve D^T r(D alpha; mu) = 0 by Newton on the r x r
/// projected system.
pub fn solve_galerkin(
    problem: &dyn SteadyProblem,
    dict: &Dictionary,
    mu: f64,
) -> Result<(RomCoefficients, Vec<f64>), RomError> {
    let d = dict.matrix();
    if !has_full_column_rank(&d) {
        return Err(RomError::DegenerateDictionary);
    }
    let r_dim = dict.len();
    let mut alpha = nearest_unit(&dict.mus, mu);
    let projected = |a: &[f64]| -> Vec<f64> {
        let u = d.matvec(a);
        d.matvec_transpose(&problem.residual(&u))
    };
    let mut g = projected(&alpha);
    let tol = 1e-10 * (1.0 + crate::linalg::norm_inf(&g));
    for _ in 0..GALERKIN_MAX_NEWTON {
        if crate::linalg::norm_inf(&g) <= tol {
            let u = d.matvec(&alpha);
            let coeffs = RomCoefficients {
                alpha: alpha.clone(),
                mu_target: mu,
                time_index: 0,
                converged: true,
                objective: norm2(&problem.residual(&u)),
            };
            return Ok((coeffs, u));
        }
        // Projected Jacobian D^T J D, column by column.
        let u = d.matvec(&alpha);
        let cols: Vec<Vec<f64>> = (0..r_dim)
            .map(|j| d.matvec_transpose(&problem.jacobian_apply(&u, d.column(j))))
            .collect();
        let jp = DenseMatrix::from_columns(&cols);
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let delta = crate::linalg::solve_dense(&jp, &neg_g)
            .map_err(|e| RomError::Minimize(MinimizeError::RankDeficient(e.to_string())))?;
        // Step halving on the projected residual norm.
        let g_norm = norm2(&g);
        let mut step = 1.0;
        let mut advanced = false;
        for _ in 0..30 {
            let trial: Vec<f64> = alpha
                .iter()
                .zip(&delta)
                .map(|(ai, di)| ai + step * di)
                .collect();
            let g_trial = projected(&trial);
            if norm2(&g_trial) < g_norm || crate::linalg::norm_inf(&g_trial) <= tol {
                alpha = trial;
                g = g_trial;
                advanced = true;
                break;
            }
            step *= 0.5;
        }
        if !advanced {
            return Err(RomError::NewtonDiverged(GALERKIN_MAX_NEWTON));
        }
    }
    if crate::linalg::norm_inf(&g) <= tol {
        let u = d.matvec(&alpha);
        let coeffs = RomCoefficients {
            alpha,
            mu_target: mu,
            time_index: 0,
            converged: true,
            objective: norm2(&problem.residual(&u)),
        };
        Ok((coeffs, u))
    } else {
        Err(RomError::NewtonDiverged(GALERKIN_MAX_NEWTON))
    }
}

fn solve_matrix(
    dict: &UnsteadyDictionary,
    n: usize,
    perturbation: &PerturbationConfig,
) -> DenseMatrix {
    let a = dict.matrix_at(n);
    if perturbation.enabled {
        let l_ref = variable_range(&a);
        let cfg = PerturbationConfig {
            seed: perturbation.seed.wrapping_add(n as u64),
            ..*perturbation
        };
        rank_repair(&a, &cfg, l_ref)
    } else {
        a
    }
}

/// One unsteady step: minimize J(A^{n+1} beta - b^n) where b^n is the
/// forward-Euler update of the current reconstruction w^n.
pub fn advance_unsteady_rom(
    dict: &UnsteadyDictionary,
    alpha_n: &RomCoefficients,
    functional: &Functional,
    flux: &dyn ScalarFlux,
    dt_over_dx: f64,
    perturbation: &PerturbationConfig,
) -> Result<RomCoefficients, RomError> {
    let n = alpha_n.time_index;
    let w = dict.matrix_at(n).matvec(&alpha_n.alpha);
    let target = crate::hdm::scalar_step(flux, &w, dt_over_dx);
    let a = solve_matrix(dict, n + 1, perturbation);
    let b: Vec<f64> = target.iter().map(|v| -v).collect();
    let report = minimize_linear(&a, &b, &alpha_n.alpha, functional)?;
    Ok(RomCoefficients {
        alpha: report.solution,
        mu_target: alpha_n.mu_target,
        time_index: n + 1,
        converged: report.converged,
        objective: report.objective,
    })
}

/// Full unsteady run: fit alpha^0 to the target initial condition, then
/// propagate. Reconstructions use the unperturbed dictionary columns.
pub fn run_unsteady_rom(
    dict: &UnsteadyDictionary,
    mu: f64,
    u0_target: &[f64],
    functional: &Functional,
    flux: &dyn ScalarFlux,
    n_steps: usize,
    perturbation: &PerturbationConfig,
) -> Result<RomTrajectory, RomError> {
    assert!(n_steps <= dict.n_steps());
    let dt_over_dx = dict.dt / dict.grid.dx;
    let a0 = solve_matrix(dict, 0, perturbation);
    let b0: Vec<f64> = u0_target.iter().map(|v| -v).collect();
    let z0 = nearest_unit(&dict.mus, mu);
    let report0 = minimize_linear(&a0, &b0, &z0, functional)?;
    let mut coefficients = vec![RomCoefficients {
        alpha: report0.solution,
        mu_target: mu,
        time_index: 0,
        converged: report0.converged,
        objective: report0.objective,
    }];
    for _ in 0..n_steps {
        let next = advance_unsteady_rom(
            dict,
            coefficients.last().unwrap(),
            functional,
            flux,
            dt_over_dx,
            perturbation,
        )?;
        coefficients.push(next);
    }
    let reconstructed: Vec<Vec<f64>> = coefficients
        .iter()
        .map(|c| dict.matrix_at(c.time_index).matvec(&c.alpha))
        .collect();
    let residual_norms = coefficients.iter().map(|c| c.objective).collect();
    Ok(RomTrajectory {
        coefficients,
        reconstructed,
        residual_norms,
        functional_used: *functional,
    })
}

fn euler_initial_flat(mu: f64, grid: &Grid1D) -> Vec<f64> {
    let (mut rho, mut u, mut p) = (Vec::new(), Vec::new(), Vec::new());
    for &x in &grid.x {
        let (r, v, pr) = blend_primitives(mu, x);
        rho.push(r);
        u.push(v);
        p.push(pr);
    }
    EulerState::from_primitives(&rho, &u, &p).to_flat()
}

fn block(v: &[f64], k: usize) -> &[f64] {
    let n = v.len() / 3;
    &v[k * n..(k + 1) * n]
}

fn block_matrix(a: &DenseMatrix, k: usize) -> DenseMatrix {
    let n = a.rows() / 3;
    let cols: Vec<Vec<f64>> = (0..a.cols())
        .map(|j| a.column(j)[k * n..(k + 1) * n].to_vec())
        .collect();
    DenseMatrix::from_columns(&cols)
}

/// Density and pressure floors applied to reconstructed states before a
/// forward-Euler update. Least-squares and L1 reconstructions can undershoot
/// at the shock foot; without a floor the Roe flux sees a (slightly)
/// negative pressure and the sound speed is undefined. The floor only
/// touches the update target, never the high-dimensional trajectories.
const EULER_RHO_FLOOR: f64 = 1e-6;
const EULER_P_FLOOR: f64 = 1e-6;
/// Caps on the magnitude of reconstructed states. A diverging reconstruction
/// (possible when a poor fit is advanced for many steps, e.g. the
/// single-expansion L2 variant) then stays finite and reports its large
/// error instead of overflowing mid-run.
const EULER_STATE_CAP: f64 = 1e12;
const EULER_ENERGY_CAP: f64 = 1e30;

fn floor_euler_state(state: &mut EulerState) {
    for i in 0..state.len() {
        let rho = state.rho[i];
        state.rho[i] = if rho.is_finite() {
            rho.clamp(EULER_RHO_FLOOR, EULER_STATE_CAP)
        } else {
            EULER_RHO_FLOOR
        };
        let m = state.m[i];
        state.m[i] = if m.is_finite() {
            m.clamp(-EULER_STATE_CAP, EULER_STATE_CAP)
        } else {
            0.0
        };
        let e = state.e[i];
        state.e[i] = if e.is_finite() {
            e.min(EULER_ENERGY_CAP)
        } else {
            0.0 // repaired by the pressure floor below
        };
        let ke = 0.5 * state.m[i] * state.m[i] / state.rho[i];
        // The pressure floor is relative to the kinetic energy: far below
        // that, E - ke cancels to roundoff and the pressure recomputed
        // inside the flux can come out nonpositive again.
        let p_floor = EULER_P_FLOOR.max(1e-9 * ke);
        if !(state.pressure(i) >= p_floor) {
            state.e[i] = p_floor / (GAMMA - 1.0) + ke;
        }
    }
}

/// Euler forward-Euler update of a flat [rho; m; E] state. Both the input
/// reconstruction and the update are floored: the result is a fitting
/// target, not a physical trajectory, and must merely stay inside the
/// domain of the Roe flux.
fn euler_flat_step(w: &[f64], dt_over_dx: f64) -> Result<Vec<f64>, RomError> {
    let mut state = EulerState::from_flat(w);
    floor_euler_state(&mut state);
    let mut next = euler_step_raw(&state, dt_over_dx)?;
    floor_euler_state(&mut next);
    Ok(next.to_flat())
}

/// Single-expansion Euler reconstruction: one coefficient vector per step,
/// fitted on the density block only and applied to all three variables.
pub fn euler_rom_single_expansion(
    dict: &UnsteadyDictionary,
    mu: f64,
    functional: &Functional,
    n_steps: usize,
    perturbation: &PerturbationConfig,
) -> Result<RomTrajectory, RomError> {
    assert!(n_steps <= dict.n_steps());
    let dt_over_dx = dict.dt / dict.grid.dx;
    let u0 = euler_initial_flat(mu, &dict.grid);
    let fit = |n: usize, target: &[f64], z0: &[f64]| -> Result<SolveReport, RomError> {
        let a = block_matrix(&solve_matrix(dict, n, perturbation), 0);
        let b: Vec<f64> = block(target, 0).iter().map(|v| -v).collect();
        Ok(minimize_linear(&a, &b, z0, functional)?)
    };
    let z0 = nearest_unit(&dict.mus, mu);
    let report0 = fit(0, &u0, &z0)?;
    let mut coefficients = vec![RomCoefficients {
        alpha: report0.solution,
        mu_target: mu,
        time_index: 0,
        converged: report0.converged,
        objective: report0.objective,
    }];
    for n in 0..n_steps {
        let prev = coefficients.last().unwrap();
        let w = dict.matrix_at(n).matvec(&prev.alpha);
        let target = euler_flat_step(&w, dt_over_dx)?;
        let report = fit(n + 1, &target, &prev.alpha)?;
        coefficients.push(RomCoefficients {
            alpha: report.solution,
            mu_target: mu,
            time_index: n + 1,
            converged: report.converged,
            objective: report.objective,
        });
    }
    let reconstructed: Vec<Vec<f64>> = coefficients
        .iter()
        .map(|c| dict.matrix_at(c.time_index).matvec(&c.alpha))
        .collect();
    let residual_norms = coefficients.iter().map(|c| c.objective).collect();
    Ok(RomTrajectory {
        coefficients,
        reconstructed,
        residual_norms,
        functional_used: *functional,
    })
}

/// Per-variable Euler reconstruction: three independent coefficient vectors
/// per step (density, momentum, energy), each fitted on its own block.
pub fn euler_rom_per_variable(
    dict: &UnsteadyDictionary,
    mu: f64,
    functional: &Functional,
    n_steps: usize,
    perturbation: &PerturbationConfig,
) -> Result<RomTrajectory, RomError> {
    assert!(n_steps <= dict.n_steps());
    let dt_over_dx = dict.dt / dict.grid.dx;
    let cells = dict.grid.len();
    let u0 = euler_initial_flat(mu, &dict.grid);
    let fit_all = |n: usize,
                   target: &[f64],
                   z0: &[Vec<f64>; 3]|
     -> Result<([Vec<f64>; 3], f64, bool), RomError> {
        let a = solve_matrix(dict, n, perturbation);
        let mut alphas: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut objective = 0.0;
        let mut converged = true;
        for k in 0..3 {
            let ak = block_matrix(&a, k);
            let bk: Vec<f64> = block(target, k).iter().map(|v| -v).collect();
            let report = minimize_linear(&ak, &bk, &z0[k], functional)?;
            objective += report.objective;
            converged &= report.converged;
            alphas[k] = report.solution;
        }
        Ok((alphas, objective, converged))
    };
    let reconstruct = |n: usize, alphas: &[Vec<f64>; 3]| -> Vec<f64> {
        let a = dict.matrix_at(n);
        let mut out = Vec::with_capacity(3 * cells);
        for (k, alpha) in alphas.iter().enumerate() {
            out.extend(block_matrix(&a, k).matvec(alpha));
        }
        out
    };
    let z_init = nearest_unit(&dict.mus, mu);
    let z0 = [z_init.clone(), z_init.clone(), z_init];
    let mut per_step: Vec<([Vec<f64>; 3], f64, bool)> = vec![fit_all(0, &u0, &z0)?];
    for n in 0..n_steps {
        let alphas = per_step[n].0.clone();
        let w = reconstruct(n, &alphas);
        let target = euler_flat_step(&w, dt_over_dx)?;
        per_step.push(fit_all(n + 1, &target, &alphas)?);
    }
    let mut coefficients = Vec::with_capacity(per_step.len());
    let mut reconstructed = Vec::with_capacity(per_step.len());
    let mut residual_norms = Vec::with_capacity(per_step.len());
    for (n, (alphas, objective, converged)) in per_step.iter().enumerate() {
        // Stack the three coefficient vectors [alpha_rho; alpha_m; alpha_E].
        let mut alpha = alphas[0].clone();
        alpha.extend_from_slice(&alphas[1]);
        alpha.extend_from_slice(&alphas[2]);
        coefficients.push(RomCoefficients {
            alpha,
            mu_target: mu,
            time_index: n,
            converged: *converged,
            objective: *objective,
        });
        reconstructed.push(reconstruct(n, alphas));
        residual_norms.push(*objective);
    }
    Ok(RomTrajectory {
        coefficients,
        reconstructed,
        residual_norms,
        functional_used: *functional,
    })
}

/// L1 and L2 norms of the steady residual at a reconstruction, for the
/// residual-dominance comparisons.
pub fn residual_norms(problem: &dyn SteadyProblem, u: &[f64]) -> (f64, f64) {
    let r = problem.residual(u);
    (norm1(&r), norm2(&r))
}

#[cfg(test)]
mod tests;
