//! Residual-minimization solvers: linear and nonlinear least squares,
//! L1 minimization by linear programming and by iteratively reweighted
//! least squares, and Huber function minimization.
//!
//! Sign convention used throughout the crate: the residual of a linear
//! problem is r = A z + b, so reconstruction problems are assembled with
//! b = -target.

mod simplex;

pub use simplex::{solve_l1_lp, LpSolution, SimplexError};

use crate::linalg::{norm1, norm2, norm_inf, DenseMatrix, LinalgError, QrFactors};
use thiserror::Error;

pub const GN_MAX_OUTER: usize = 100;
pub const IRLS_MAX_ITER: usize = 200;
pub const DEFAULT_EPS: f64 = 1e-8;
pub const DEFAULT_HUBER_EPS2: f64 = 1e-6;
const MAX_HALVINGS: usize = 20;
const MAX_CONSECUTIVE_INCREASES: usize = 5;

#[derive(Debug, Error)]
pub enum MinimizeError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("rank deficient system: {0}")]
    RankDeficient(String),
    #[error("line search failed: objective increased for {0} consecutive outer steps")]
    LineSearchFailure(usize),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
}

impl From<LinalgError> for MinimizeError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::DimensionMismatch(s) => MinimizeError::DimensionMismatch(s),
            other => MinimizeError::RankDeficient(other.to_string()),
        }
    }
}

/// Which norm of the residual is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum NormKind {
    L2,
    L1,
    Huber,
}

/// Algorithmic backend for the chosen norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Backend {
    Qr,
    Lp,
    Irls,
}

/// A choice of minimization functional: norm, backend, regularization weight
/// and the Huber threshold factor.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Functional {
    pub kind: NormKind,
    pub backend: Backend,
    pub eta: f64,
    pub huber_eps2: f64,
}

impl Functional {
    pub fn l2() -> Self {
        Self {
            kind: NormKind::L2,
            backend: Backend::Qr,
            eta: 0.0,
            huber_eps2: DEFAULT_HUBER_EPS2,
        }
    }

    pub fn l1_lp() -> Self {
        Self {
            kind: NormKind::L1,
            backend: Backend::Lp,
            eta: 0.0,
            huber_eps2: DEFAULT_HUBER_EPS2,
        }
    }

    pub fn l1_irls() -> Self {
        Self {
            kind: NormKind::L1,
            backend: Backend::Irls,
            eta: 0.0,
            huber_eps2: DEFAULT_HUBER_EPS2,
        }
    }

    pub fn huber() -> Self {
        Self {
            kind: NormKind::Huber,
            backend: Backend::Irls,
            eta: 0.0,
            huber_eps2: DEFAULT_HUBER_EPS2,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        assert!(eta >= 0.0);
        self.eta = eta;
        self
    }

    pub fn is_valid(&self) -> bool {
        let combo_ok = match self.kind {
            NormKind::L2 => self.backend == Backend::Qr,
            NormKind::Huber => self.backend == Backend::Irls,
            NormKind::L1 => matches!(self.backend, Backend::Lp | Backend::Irls),
        };
        combo_ok && self.eta >= 0.0 && self.huber_eps2 > 0.0
    }

    pub fn label(&self) -> &'static str {
        match (self.kind, self.backend) {
            (NormKind::L2, _) => "l2",
            (NormKind::L1, Backend::Lp) => "l1lp",
            (NormKind::L1, _) => "l1irls",
            (NormKind::Huber, _) => "huber",
        }
    }
}

/// Outcome of a single minimization.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual_norm_history: Vec<f64>,
}

/// A nonlinear residual on the high-dimensional state, with a
/// Jacobian-vector product for Gauss-Newton composition with a dictionary.
pub struct NonlinearResidual<'a> {
    pub dim_in: usize,
    pub dim_out: usize,
    pub eval: Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync + 'a>,
    /// v -> J(u) v evaluated at state u.
    pub jac_apply: Box<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'a>,
}

impl<'a> NonlinearResidual<'a> {
    /// Wrap a linear residual r(u) = M u + b_fixed given as closures.
    pub fn from_linear(a: DenseMatrix, b: Vec<f64>) -> NonlinearResidual<'static> {
        let a2 = a.clone();
        NonlinearResidual {
            dim_in: a.cols(),
            dim_out: a.rows(),
            eval: Box::new(move |u| {
                let mut r = a.matvec(u);
                for (ri, bi) in r.iter_mut().zip(&b) {
                    *ri += bi;
                }
                r
            }),
            jac_apply: Box::new(move |_u, v| a2.matvec(v)),
        }
    }

    /// W = J(u) D, column by column.
    pub fn compose_jacobian(&self, u: &[f64], d: &DenseMatrix) -> DenseMatrix {
        let cols: Vec<Vec<f64>> = (0..d.cols())
            .map(|j| (self.jac_apply)(u, d.column(j)))
            .collect();
        DenseMatrix::from_columns(&cols)
    }
}

/// Solve min_z ||A z + b||_2^2 by Householder QR (z = -R^{-1} Q^T b).
pub fn qr_least_squares(a: &DenseMatrix, b: &[f64]) -> Result<SolveReport, MinimizeError> {
    if a.rows() < a.cols() {
        return Err(MinimizeError::DimensionMismatch(format!(
            "matrix must be skinny, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if b.len() != a.rows() {
        return Err(MinimizeError::DimensionMismatch(format!(
            "rhs length {} != rows {}",
            b.len(),
            a.rows()
        )));
    }
    let qr = QrFactors::compute(a);
    let threshold = 1e-12 * a.max_abs();
    let (idx, dmin) = qr.min_abs_diag();
    if dmin < threshold {
        return Err(MinimizeError::RankDeficient(format!(
            "|R[{idx},{idx}]| = {dmin:e} < {threshold:e}"
        )));
    }
    let qtb = qr.q_transpose_apply(b);
    let mut z = qr.r_solve(&qtb)?;
    for zi in z.iter_mut() {
        *zi = -*zi;
    }
    let mut r = a.matvec(&z);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri += bi;
    }
    let obj = norm2(&r);
    Ok(SolveReport {
        solution: z,
        objective: obj,
        iterations: 1,
        converged: true,
        residual_norm_history: vec![obj],
    })
}

/// Append the rows [eta * I | 0] so that the stacked residual carries the
/// coefficient penalty. For eta = 0 the system is returned unchanged.
pub fn add_regularization(
    a: &DenseMatrix,
    b: &[f64],
    eta: f64,
) -> (DenseMatrix, Vec<f64>) {
    assert!(eta >= 0.0);
    if eta == 0.0 {
        return (a.clone(), b.to_vec());
    }
    let r = a.cols();
    let mut penalty = DenseMatrix::zeros(r, r);
    for j in 0..r {
        penalty[(j, j)] = eta;
    }
    let a_aug = a.vstack(&penalty);
    let mut b_aug = b.to_vec();
    b_aug.extend(std::iter::repeat(0.0).take(r));
    (a_aug, b_aug)
}

/// Nonlinear L2 minimization of ||r(D z)||_2 by damped Gauss-Newton.
pub fn gauss_newton_l2(
    res: &NonlinearResidual,
    d: &DenseMatrix,
    z0: &[f64],
    eps: f64,
) -> Result<SolveReport, MinimizeError> {
    assert!(eps > 0.0);
    let mut z = z0.to_vec();
    let mut u = d.matvec(&z);
    let mut r = (res.eval)(&u);
    let mut w = res.compose_jacobian(&u, d);
    let g0 = norm2(&w.matvec_transpose(&r));
    let mut history = vec![norm2(&r)];
    let mut consecutive_increases = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;
    for l in 0..GN_MAX_OUTER {
        if norm2(&w.matvec_transpose(&r)) <= eps * g0 {
            converged = true;
            break;
        }
        let step = qr_least_squares(&w, &r)?;
        let dz = step.solution;
        let obj_old = norm2(&r);
        // Step halving keeps the Burgers residuals from overshooting.
        let mut scale = 1.0;
        let mut best = None;
        for _ in 0..=MAX_HALVINGS {
            let mut z_try = z.clone();
            for (zi, di) in z_try.iter_mut().zip(&dz) {
                *zi += scale * di;
            }
            let u_try = d.matvec(&z_try);
            let r_try = (res.eval)(&u_try);
            let obj_try = norm2(&r_try);
            if obj_try <= obj_old || best.is_none() {
                let improved = obj_try <= obj_old;
                best = Some((z_try, u_try, r_try, obj_try));
                if improved {
                    break;
                }
            }
            scale *= 0.5;
        }
        let (z_new, u_new, r_new, obj_new) = best.expect("at least one trial step");
        if obj_new > obj_old {
            consecutive_increases += 1;
            if consecutive_increases >= MAX_CONSECUTIVE_INCREASES {
                return Err(MinimizeError::LineSearchFailure(consecutive_increases));
            }
        } else {
            consecutive_increases = 0;
        }
        z = z_new;
        u = u_new;
        r = r_new;
        w = res.compose_jacobian(&u, d);
        history.push(obj_new);
        iterations = l + 1;
    }
    Ok(SolveReport {
        solution: z,
        objective: norm2(&r),
        iterations,
        converged,
        residual_norm_history: history,
    })
}

/// IRLS weight floor; the weights 1/sqrt(|r_i|) would blow up on zero
/// residual entries otherwise.
fn irls_floor(r0: &[f64]) -> f64 {
    1e-12 * norm_inf(r0).max(1.0)
}

/// Linear L1 minimization min_z ||A z + b||_1 by iteratively reweighted
/// least squares.
pub fn l1_irls(
    a: &DenseMatrix,
    b: &[f64],
    z0: &[f64],
    eps: f64,
) -> Result<SolveReport, MinimizeError> {
    assert!(eps > 0.0);
    if b.len() != a.rows() || z0.len() != a.cols() {
        return Err(MinimizeError::DimensionMismatch(
            "l1_irls shape".to_string(),
        ));
    }
    let mut z = z0.to_vec();
    let mut r = residual_linear(a, &z, b);
    let tau = irls_floor(&r);
    let mut history = vec![norm1(&r)];
    let mut converged = false;
    let mut iterations = 0usize;
    for l in 0..IRLS_MAX_ITER {
        let weights: Vec<f64> = r.iter().map(|ri| ri.abs().max(tau).powf(-0.5)).collect();
        let wa = a.scale_rows(&weights);
        let wr: Vec<f64> = r.iter().zip(&weights).map(|(ri, wi)| ri * wi).collect();
        let dz = qr_least_squares(&wa, &wr)?.solution;
        let z_norm_before = norm1(&z);
        for (zi, di) in z.iter_mut().zip(&dz) {
            *zi += di;
        }
        r = residual_linear(a, &z, b);
        history.push(norm1(&r));
        iterations = l + 1;
        if norm1(&dz) <= eps * (1.0 + z_norm_before) {
            converged = true;
            break;
        }
    }
    // The fixed point of the reweighted iteration is not always an L1
    // minimizer (the weight floor can pin the iterate where many residual
    // entries are exactly zero), so the converged flag is confirmed by a
    // subgradient certificate.
    if converged && !l1_subgradient_certificate(a, &r) {
        converged = false;
    }
    Ok(SolveReport {
        solution: z,
        objective: norm1(&r),
        iterations,
        converged,
        residual_norm_history: history,
    })
}

fn residual_linear(a: &DenseMatrix, z: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = a.matvec(z);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri += bi;
    }
    r
}

/// Check whether a valid L1 subgradient exists at the residual r: a vector g
/// with g_i = sign(r_i) on the large entries and |g_i| <= 1 on the near-zero
/// ones such that A^T g = 0. Constructs g on the near-zero set by a
/// minimum-norm completion; failure to find one marks the point non-optimal.
pub fn l1_subgradient_certificate(a: &DenseMatrix, r: &[f64]) -> bool {
    let scale = 1.0 + norm_inf(r);
    let zero_tol = 1e-6 * scale;
    let ncols = a.cols();
    let mut c = vec![0.0; ncols];
    let mut zero_rows = Vec::new();
    for (i, ri) in r.iter().enumerate() {
        if ri.abs() <= zero_tol {
            zero_rows.push(i);
        } else {
            let s = ri.signum();
            for j in 0..ncols {
                c[j] += s * a[(i, j)];
            }
        }
    }
    let col_scale = 1.0 + a.max_abs() * (a.rows() as f64);
    if zero_rows.is_empty() {
        return norm_inf(&c) <= 1e-6 * col_scale;
    }
    // Minimum 2-norm g on the zero set with A_0^T g = -c:
    // g = A_0 (A_0^T A_0)^{-1} (-c), with a tiny ridge against singularity.
    let mut gram = DenseMatrix::zeros(ncols, ncols);
    for j in 0..ncols {
        for k in j..ncols {
            let mut s = 0.0;
            for &i in &zero_rows {
                s += a[(i, j)] * a[(i, k)];
            }
            gram[(j, k)] = s;
            gram[(k, j)] = s;
        }
    }
    let ridge = 1e-12 * (1.0 + gram.max_abs());
    for j in 0..ncols {
        gram[(j, j)] += ridge;
    }
    let neg_c: Vec<f64> = c.iter().map(|v| -v).collect();
    let coef = match crate::linalg::solve_dense(&gram, &neg_c) {
        Ok(x) => x,
        Err(_) => return false,
    };
    let mut g_inf: f64 = 0.0;
    let mut atg = c.clone();
    for &i in &zero_rows {
        let mut gi = 0.0;
        for j in 0..ncols {
            gi += a[(i, j)] * coef[j];
        }
        g_inf = g_inf.max(gi.abs());
        for j in 0..ncols {
            atg[j] += a[(i, j)] * gi;
        }
    }
    g_inf <= 1.05 && norm_inf(&atg) <= 1e-5 * col_scale
}

/// Nonlinear L1 minimization by Gauss-Newton with an LP inner solve.
pub fn l1_gn_lp(
    res: &NonlinearResidual,
    d: &DenseMatrix,
    z0: &[f64],
    eps: f64,
) -> Result<SolveReport, MinimizeError> {
    assert!(eps > 0.0);
    let mut z = z0.to_vec();
    let mut u = d.matvec(&z);
    let mut r = (res.eval)(&u);
    let r0_norm = norm1(&r);
    let mut history = vec![r0_norm];
    let mut converged = r0_norm == 0.0;
    let mut iterations = 0usize;
    let mut consecutive_increases = 0usize;
    if !converged {
        for _ in 0..=GN_MAX_OUTER {
            let w = res.compose_jacobian(&u, d);
            let inner = solve_l1_lp(&w, &r)?;
            let dz = inner.solution;
            let obj_old = norm1(&r);
            let predicted = inner.objective;
            if (predicted - obj_old).abs() <= eps * r0_norm {
                converged = true;
                break;
            }
            if iterations >= GN_MAX_OUTER {
                break;
            }
            // Damped update on the true L1 objective.
            let mut scale = 1.0;
            let mut best = None;
            for _ in 0..=MAX_HALVINGS {
                let mut z_try = z.clone();
                for (zi, di) in z_try.iter_mut().zip(&dz) {
                    *zi += scale * di;
                }
                let u_try = d.matvec(&z_try);
                let r_try = (res.eval)(&u_try);
                let obj_try = norm1(&r_try);
                if obj_try <= obj_old || best.is_none() {
                    let improved = obj_try <= obj_old;
                    best = Some((z_try, u_try, r_try, obj_try));
                    if improved {
                        break;
                    }
                }
                scale *= 0.5;
            }
            let (z_new, u_new, r_new, obj_new) = best.expect("trial step");
            if obj_new > obj_old {
                consecutive_increases += 1;
                if consecutive_increases >= MAX_CONSECUTIVE_INCREASES {
                    return Err(MinimizeError::LineSearchFailure(consecutive_increases));
                }
            } else {
                consecutive_increases = 0;
            }
            z = z_new;
            u = u_new;
            r = r_new;
            history.push(obj_new);
            iterations += 1;
        }
    }
    Ok(SolveReport {
        solution: z,
        objective: norm1(&r),
        iterations,
        converged,
        residual_norm_history: history,
    })
}

/// Nonlinear L1 minimization by Gauss-Newton with reweighted least-squares
/// steps. This variant is permitted to fail on hard instances; the converged
/// flag reports it.
pub fn l1_gn_irls(
    res: &NonlinearResidual,
    d: &DenseMatrix,
    z0: &[f64],
    eps: f64,
) -> Result<SolveReport, MinimizeError> {
    assert!(eps > 0.0);
    let mut z = z0.to_vec();
    let mut u = d.matvec(&z);
    let mut r = (res.eval)(&u);
    let tau = irls_floor(&r);
    let mut history = vec![norm1(&r)];
    let mut converged = false;
    let mut iterations = 0usize;
    for l in 0..IRLS_MAX_ITER {
        let w = res.compose_jacobian(&u, d);
        let weights: Vec<f64> = r.iter().map(|ri| ri.abs().max(tau).powf(-0.5)).collect();
        let ww = w.scale_rows(&weights);
        let wr: Vec<f64> = r.iter().zip(&weights).map(|(ri, wi)| ri * wi).collect();
        let dz = qr_least_squares(&ww, &wr)?.solution;
        let z_norm_before = norm1(&z);
        for (zi, di) in z.iter_mut().zip(&dz) {
            *zi += di;
        }
        u = d.matvec(&z);
        r = (res.eval)(&u);
        history.push(norm1(&r));
        iterations = l + 1;
        if norm1(&dz) <= eps * (1.0 + z_norm_before) {
            converged = true;
            break;
        }
    }
    if converged {
        let w = res.compose_jacobian(&u, d);
        if !l1_subgradient_certificate(&w, &r) {
            converged = false;
        }
    }
    Ok(SolveReport {
        solution: z,
        objective: norm1(&r),
        iterations,
        converged,
        residual_norm_history: history,
    })
}

fn huber_value(r: &[f64], m: f64) -> f64 {
    r.iter()
        .map(|&x| {
            if x.abs() <= m {
                x * x
            } else {
                m * (x.abs() - m)
            }
        })
        .sum()
}

/// Huber function minimization by IRLS. The threshold M is refreshed every
/// iteration as M = eps2 * max(1, max|r_i|); with the default eps2 = 1e-6
/// this behaves like a smoothed L1 minimization.
pub fn huber_irls(
    res: &NonlinearResidual,
    d: &DenseMatrix,
    z0: &[f64],
    eps: f64,
    eps2: f64,
) -> Result<SolveReport, MinimizeError> {
    assert!(eps > 0.0 && eps2 > 0.0);
    let mut z = z0.to_vec();
    let mut u = d.matvec(&z);
    let mut r = (res.eval)(&u);
    let mut m = eps2 * norm_inf(&r).max(1.0);
    let mut history = vec![huber_value(&r, m)];
    let mut converged = false;
    let mut iterations = 0usize;
    for l in 0..IRLS_MAX_ITER {
        let w = res.compose_jacobian(&u, d);
        // Quadratic branch keeps unit weight; linear branch gets
        // sqrt(M/|r|) so the weighted normal equations match the Huber
        // gradient in both branches.
        let weights: Vec<f64> = r
            .iter()
            .map(|ri| {
                let a = ri.abs();
                if a < m {
                    1.0
                } else {
                    (m / a).sqrt()
                }
            })
            .collect();
        let ww = w.scale_rows(&weights);
        let wr: Vec<f64> = r.iter().zip(&weights).map(|(ri, wi)| ri * wi).collect();
        let dz = qr_least_squares(&ww, &wr)?.solution;
        let z_norm_before = norm1(&z);
        for (zi, di) in z.iter_mut().zip(&dz) {
            *zi += di;
        }
        u = d.matvec(&z);
        r = (res.eval)(&u);
        m = eps2 * norm_inf(&r).max(1.0);
        history.push(huber_value(&r, m));
        iterations = l + 1;
        if norm1(&dz) <= eps * (1.0 + z_norm_before) {
            converged = true;
            break;
        }
    }
    Ok(SolveReport {
        solution: z,
        objective: huber_value(&r, m),
        iterations,
        converged,
        residual_norm_history: history,
    })
}

/// Linear L1 minimization via the LP backend, returning a standard report.
pub fn l1_lp(a: &DenseMatrix, b: &[f64]) -> Result<SolveReport, MinimizeError> {
    let sol = solve_l1_lp(a, b)?;
    Ok(SolveReport {
        objective: sol.objective,
        solution: sol.solution,
        iterations: sol.pivots,
        converged: true,
        residual_norm_history: vec![sol.objective],
    })
}

#[cfg(test)]
mod tests;
