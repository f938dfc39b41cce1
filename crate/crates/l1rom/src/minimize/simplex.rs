//! Dense primal simplex specialized to the L1 fitting program
//!
//!   min 1^T (s + t)   s.t.   A z - s + t = -b,   s, t >= 0,
//!
//! whose optimum minimizes ||A z + b||_1 (the slacks split the residual,
//! s - t = A z + b). The free variables z are split into positive and
//! negative parts. The basis always contains at most `cols(A)` dense
//! columns, the rest are signed unit columns, so basis solves reduce to a
//! small dense system refactorized exactly at every pivot.
//!
//! Entering rule: Dantzig pricing with a switch to Bland's rule after a run
//! of non-improving pivots, which prevents cycling on the (heavily
//! degenerate) L1 vertices.

use crate::linalg::{dot, norm1, norm2, solve_dense, DenseMatrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimplexError {
    #[error("simplex stalled after {0} pivots")]
    Stalled(usize),
    #[error("unbounded linear program (should not occur for the L1 program)")]
    Unbounded,
    #[error("numerical breakdown in basis solve at pivot {0}")]
    NumericalBreakdown(usize),
}

/// Solution of the L1 linear program.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub solution: Vec<f64>,
    /// ||A z + b||_1 at the solution.
    pub objective: f64,
    /// Optimal dual subgradient g: g_i = sign(r_i) on nonzero residuals,
    /// |g_i| <= 1 elsewhere, A^T g = 0 up to rounding.
    pub subgradient: Vec<f64>,
    pub pivots: usize,
}

const BLAND_TRIGGER: usize = 50;

struct L1Program<'a> {
    a: &'a DenseMatrix,
    nrows: usize,
    ncols: usize, // columns of A
}

impl<'a> L1Program<'a> {
    // Variable layout: [p(0..r) | q(r..2r) | s(2r..2r+N) | t(2r+N..2r+2N)]
    fn nvars(&self) -> usize {
        2 * self.ncols + 2 * self.nrows
    }

    fn is_slack(&self, j: usize) -> bool {
        j >= 2 * self.ncols
    }

    /// (row, sign) for a slack column: s_i is -e_i, t_i is +e_i.
    fn slack_row_sign(&self, j: usize) -> (usize, f64) {
        let k = j - 2 * self.ncols;
        if k < self.nrows {
            (k, -1.0)
        } else {
            (k - self.nrows, 1.0)
        }
    }

    /// (column of A, sign) for a dense column: p_j is +A_j, q_j is -A_j.
    fn dense_col_sign(&self, j: usize) -> (usize, f64) {
        if j < self.ncols {
            (j, 1.0)
        } else {
            (j - self.ncols, -1.0)
        }
    }

    /// The opposite-sign slack on the same row: s_i <-> t_i.
    fn slack_twin(&self, j: usize) -> usize {
        debug_assert!(self.is_slack(j));
        let k = j - 2 * self.ncols;
        if k < self.nrows {
            j + self.nrows
        } else {
            j - self.nrows
        }
    }

    fn column_entry(&self, j: usize, i: usize) -> f64 {
        if self.is_slack(j) {
            let (row, sign) = self.slack_row_sign(j);
            if row == i {
                sign
            } else {
                0.0
            }
        } else {
            let (col, sign) = self.dense_col_sign(j);
            sign * self.a[(i, col)]
        }
    }

}

struct Basis {
    vars: Vec<usize>,
    in_basis: Vec<bool>,
    /// Positions holding dense (z-part) columns.
    dense_positions: Vec<usize>,
    /// Rows not pinned by a slack basis column; |free_rows| == |dense_positions|.
    free_rows: Vec<usize>,
}

impl Basis {
    fn rebuild_structure(&mut self, prog: &L1Program) {
        self.dense_positions.clear();
        let mut covered = vec![false; prog.nrows];
        for (k, &j) in self.vars.iter().enumerate() {
            if prog.is_slack(j) {
                let (row, _) = prog.slack_row_sign(j);
                covered[row] = true;
            } else {
                self.dense_positions.push(k);
            }
        }
        self.free_rows = (0..prog.nrows).filter(|&i| !covered[i]).collect();
    }

    /// Small system matrix S[f][d] = column(dense_positions[d]) at free_rows[f].
    fn small_matrix(&self, prog: &L1Program) -> DenseMatrix {
        let m = self.dense_positions.len();
        let mut s = DenseMatrix::zeros(m, m);
        for (dcol, &k) in self.dense_positions.iter().enumerate() {
            let j = self.vars[k];
            for (frow, &i) in self.free_rows.iter().enumerate() {
                s[(frow, dcol)] = prog.column_entry(j, i);
            }
        }
        s
    }

    /// Solve B w = rhs, returning w indexed by basis position.
    fn solve(&self, prog: &L1Program, rhs: &[f64]) -> Option<Vec<f64>> {
        let m = self.dense_positions.len();
        let mut w = vec![0.0; prog.nrows];
        let wd = if m > 0 {
            let s = self.small_matrix(prog);
            let rf: Vec<f64> = self.free_rows.iter().map(|&i| rhs[i]).collect();
            solve_dense(&s, &rf).ok()?
        } else {
            Vec::new()
        };
        for (dcol, &k) in self.dense_positions.iter().enumerate() {
            w[k] = wd[dcol];
        }
        for (k, &j) in self.vars.iter().enumerate() {
            if prog.is_slack(j) {
                let (row, sign) = prog.slack_row_sign(j);
                let mut acc = rhs[row];
                for (dcol, &kd) in self.dense_positions.iter().enumerate() {
                    let jd = self.vars[kd];
                    acc -= prog.column_entry(jd, row) * wd[dcol];
                }
                w[k] = sign * acc; // sign^{-1} == sign for +-1
            }
        }
        Some(w)
    }

    /// Solve B^T y = c_B for the row prices.
    fn prices(&self, prog: &L1Program) -> Option<Vec<f64>> {
        let mut y = vec![0.0; prog.nrows];
        for &j in &self.vars {
            if prog.is_slack(j) {
                let (row, sign) = prog.slack_row_sign(j);
                y[row] = sign; // cost of slack columns is 1
            }
        }
        let m = self.dense_positions.len();
        if m > 0 {
            // Dense basic columns have zero cost: column^T y = 0.
            let s = self.small_matrix(prog);
            let mut st = DenseMatrix::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    st[(i, j)] = s[(j, i)];
                }
            }
            let mut rhs = vec![0.0; m];
            for (dcol, &k) in self.dense_positions.iter().enumerate() {
                let j = self.vars[k];
                let mut acc = 0.0;
                for i in 0..prog.nrows {
                    // Skip free rows; their y is the unknown.
                    acc += prog.column_entry(j, i) * y[i];
                }
                rhs[dcol] = -acc;
            }
            let yf = solve_dense(&st, &rhs).ok()?;
            for (frow, &i) in self.free_rows.iter().enumerate() {
                y[i] = yf[frow];
            }
        }
        Some(y)
    }
}

/// Keep a direction if its norm after orthogonalization exceeds this times
/// the original column norm.
const RANK_TOL: f64 = 1e-13;

/// Modified Gram-Schmidt with one reorthogonalization pass: A = Q C with
/// Q^T Q = I. Returns (columns of Q, rows of C, pivot column indices); the
/// pivot submatrix of C is upper triangular with positive diagonal.
fn orthonormal_columns(a: &DenseMatrix) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<usize>) {
    let n = a.cols();
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut coef: Vec<Vec<f64>> = Vec::new();
    let mut pivot_cols: Vec<usize> = Vec::new();
    for j in 0..n {
        let mut v = a.column(j).to_vec();
        let norm0 = norm2(&v);
        // Two passes keep Q orthonormal to machine precision even for
        // nearly dependent columns.
        for _ in 0..2 {
            for (k, qk) in q.iter().enumerate() {
                let s = dot(qk, &v);
                coef[k][j] += s;
                for (vi, qi) in v.iter_mut().zip(qk) {
                    *vi -= s * qi;
                }
            }
        }
        let vn = norm2(&v);
        if vn > RANK_TOL * norm0 {
            for vi in v.iter_mut() {
                *vi /= vn;
            }
            let mut row = vec![0.0; n];
            row[j] = vn;
            coef.push(row);
            q.push(v);
            pivot_cols.push(j);
        }
    }
    (q, coef, pivot_cols)
}

/// Minimize ||A z + b||_1 over z.
///
/// The simplex itself runs on an orthonormal basis Q of the column space
/// (A = Q C), which keeps every working basis well conditioned even when A
/// has nearly dependent columns; z is then recovered by back substitution
/// on the pivot columns of C. The subgradient lives in residual space and
/// is unaffected by the change of variables.
pub fn solve_l1_lp(a: &DenseMatrix, b: &[f64]) -> Result<LpSolution, SimplexError> {
    assert_eq!(b.len(), a.rows(), "rhs length must match rows");
    assert!(a.rows() >= a.cols(), "matrix must be skinny");
    let (q_cols, coef, pivot_cols) = orthonormal_columns(a);
    if q_cols.is_empty() {
        // A is numerically zero: any z is optimal, the residual is b.
        let subgradient = b
            .iter()
            .map(|&v| if v == 0.0 { 0.0 } else { v.signum() })
            .collect();
        return Ok(LpSolution {
            solution: vec![0.0; a.cols()],
            objective: norm1(b),
            subgradient,
            pivots: 0,
        });
    }
    let qmat = DenseMatrix::from_columns(&q_cols);
    let core = solve_l1_lp_core(&qmat, b)?;
    let rank = pivot_cols.len();
    let mut z = vec![0.0; a.cols()];
    for k in (0..rank).rev() {
        let mut s = core.solution[k];
        for l in (k + 1)..rank {
            s -= coef[k][pivot_cols[l]] * z[pivot_cols[l]];
        }
        z[pivot_cols[k]] = s / coef[k][pivot_cols[k]];
    }
    let mut residual = a.matvec(&z);
    for (ri, bi) in residual.iter_mut().zip(b) {
        *ri += bi;
    }
    Ok(LpSolution {
        solution: z,
        objective: norm1(&residual),
        subgradient: core.subgradient,
        pivots: core.pivots,
    })
}

fn solve_l1_lp_core(a: &DenseMatrix, b: &[f64]) -> Result<LpSolution, SimplexError> {
    let prog = L1Program {
        a,
        nrows: a.rows(),
        ncols: a.cols(),
    };
    let n = prog.nrows;
    let r = prog.ncols;
    // Constraint RHS is -b so that s - t equals the residual A z + b.
    let d: Vec<f64> = b.iter().map(|v| -v).collect();

    let mut basis = Basis {
        vars: Vec::with_capacity(n),
        in_basis: vec![false; prog.nvars()],
        dense_positions: Vec::new(),
        free_rows: Vec::new(),
    };
    let mut x_b = vec![0.0; n];
    for i in 0..n {
        let j = if d[i] >= 0.0 {
            2 * r + n + i // t_i
        } else {
            2 * r + i // s_i
        };
        basis.vars.push(j);
        basis.in_basis[j] = true;
        x_b[i] = d[i].abs();
    }
    basis.rebuild_structure(&prog);

    let rc_tol = 1e-9 * (1.0 + a.max_abs());
    let pivot_cap = 50 * (2 * n + r);
    let mut pivots = 0usize;
    let mut bland = false;
    let mut stagnant = 0usize;
    let mut last_dual = vec![0.0; n];

    loop {
        let y = basis
            .prices(&prog)
            .ok_or(SimplexError::NumericalBreakdown(pivots))?;
        last_dual = y.clone();
        // g = A^T y prices all dense columns at once.
        let g = a.matvec_transpose(&y);
        let mut entering: Option<(usize, f64)> = None;
        let consider = |j: usize, rc: f64, entering: &mut Option<(usize, f64)>| {
            if rc < -rc_tol {
                match entering {
                    None => *entering = Some((j, rc)),
                    Some((jb, rcb)) => {
                        if bland {
                            if j < *jb {
                                *entering = Some((j, rc));
                            }
                        } else if rc < *rcb {
                            *entering = Some((j, rc));
                        }
                    }
                }
            }
        };
        for j in 0..r {
            // Skip a column whose p/q twin is basic: the pair is a zero-cost
            // ray of the split z = p - q (its reduced cost is exactly zero in
            // exact arithmetic), and entering it on a rounded negative cost
            // produces a spurious unbounded direction.
            if !basis.in_basis[j] && !basis.in_basis[r + j] {
                consider(j, -g[j], &mut entering);
                consider(r + j, g[j], &mut entering);
            }
        }
        for i in 0..n {
            let js = 2 * r + i;
            if !basis.in_basis[js] {
                consider(js, 1.0 + y[i], &mut entering);
            }
            let jt = 2 * r + n + i;
            if !basis.in_basis[jt] {
                consider(jt, 1.0 - y[i], &mut entering);
            }
        }
        let Some((j_in, rc_in)) = entering else {
            break; // optimal
        };

        let col_in: Vec<f64> = (0..n).map(|i| prog.column_entry(j_in, i)).collect();
        let w = basis
            .solve(&prog, &col_in)
            .ok_or(SimplexError::NumericalBreakdown(pivots))?;
        // Multi-breakpoint ratio test: a basic slack may pass through zero
        // by swapping to its sign twin (both cost 1), which raises the
        // directional derivative by 2 w_k at its breakpoint. One pivot can
        // therefore cross many breakpoints at once — on heavily degenerate
        // instances (residual nearly zero on most rows) a textbook ratio
        // test instead crawls through them one sign swap at a time. Dense
        // basic variables cannot swap and block the step.
        let w_scale = w.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        let step_tol = 1e-9 * (1.0 + w_scale);
        let mut hard_stop: Option<(usize, f64)> = None; // blocking dense row
        let mut breaks: Vec<(f64, usize)> = Vec::new(); // slack breakpoints
        for k in 0..n {
            if w[k] > step_tol {
                let theta = x_b[k].max(0.0) / w[k];
                if prog.is_slack(basis.vars[k]) {
                    breaks.push((theta, k));
                } else {
                    match hard_stop {
                        Some((kb, tb)) => {
                            if theta < tb || (theta == tb && w[k] > w[kb]) {
                                hard_stop = Some((k, theta));
                            }
                        }
                        None => hard_stop = Some((k, theta)),
                    }
                }
            }
        }
        let theta_hard = hard_stop.map_or(f64::INFINITY, |(_, t)| t);
        breaks.retain(|&(t, _)| t <= theta_hard);
        // Walk breakpoints in order; among ties prefer large pivot elements
        // so the leaving row is numerically solid.
        breaks.sort_by(|a, b| a.0.total_cmp(&b.0).then(w[b.1].total_cmp(&w[a.1])));
        let mut gdir = rc_in;
        let mut leave: Option<(usize, f64)> = None;
        let mut crossed = 0usize;
        for &(theta, k) in &breaks {
            gdir += 2.0 * w[k];
            if gdir >= 0.0 {
                leave = Some((k, theta));
                break;
            }
            crossed += 1;
        }
        let (k_out, theta) = match (leave, hard_stop) {
            (Some(stop), _) => stop,
            (None, Some(stop)) => stop,
            (None, None) => return Err(SimplexError::Unbounded),
        };
        // Crossed slacks flip to their twins; their recomputed basic value
        // theta * w_k - x_b[k] is nonnegative past the breakpoint.
        for &(_, k) in breaks.iter().take(crossed) {
            let j = basis.vars[k];
            let twin = prog.slack_twin(j);
            basis.in_basis[j] = false;
            basis.in_basis[twin] = true;
            basis.vars[k] = twin;
        }

        let j_out = basis.vars[k_out];
        basis.in_basis[j_out] = false;
        basis.in_basis[j_in] = true;
        basis.vars[k_out] = j_in;
        basis.rebuild_structure(&prog);
        // The basis is refactorized exactly, so recompute the primal values
        // from scratch as well; incremental updates drift on long runs.
        x_b = basis
            .solve(&prog, &d)
            .ok_or(SimplexError::NumericalBreakdown(pivots))?;
        for v in x_b.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }

        pivots += 1;
        if theta <= step_tol {
            stagnant += 1;
            if stagnant >= BLAND_TRIGGER {
                bland = true;
            }
        } else {
            stagnant = 0;
            bland = false;
        }
        if pivots > pivot_cap {
            return Err(SimplexError::Stalled(pivots));
        }
    }

    let mut z = vec![0.0; r];
    for (k, &j) in basis.vars.iter().enumerate() {
        if !prog.is_slack(j) {
            let (col, sign) = prog.dense_col_sign(j);
            z[col] += sign * x_b[k];
        }
    }
    let mut residual = a.matvec(&z);
    for (ri, bi) in residual.iter_mut().zip(b) {
        *ri += bi;
    }
    let objective = norm1(&residual);
    let subgradient: Vec<f64> = last_dual.iter().map(|v| -v).collect();
    Ok(LpSolution {
        solution: z,
        objective,
        subgradient,
        pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_three() {
        // ones(3,1), b = -(1,2,10): the L1 fit of a constant is the median.
        let a = DenseMatrix::from_rows(&[&[1.0], &[1.0], &[1.0]]);
        let b = vec![-1.0, -2.0, -10.0];
        let sol = solve_l1_lp(&a, &b).unwrap();
        assert!((sol.solution[0] - 2.0).abs() < 1e-12);
        assert!((sol.objective - 9.0).abs() < 1e-12);
    }

    #[test]
    fn exact_interpolation() {
        let a = DenseMatrix::identity(2);
        let b = vec![3.0, -4.0];
        let sol = solve_l1_lp(&a, &b).unwrap();
        assert!((sol.solution[0] + 3.0).abs() < 1e-12);
        assert!((sol.solution[1] - 4.0).abs() < 1e-12);
        assert!(sol.objective < 1e-12);
    }

    #[test]
    fn dual_is_valid_subgradient() {
        let a = DenseMatrix::from_rows(&[
            &[1.0, 0.3],
            &[1.0, -0.4],
            &[1.0, 1.2],
            &[1.0, 2.0],
            &[1.0, -1.5],
        ]);
        let b = vec![-1.0, 0.5, -2.0, 1.0, 0.25];
        let sol = solve_l1_lp(&a, &b).unwrap();
        let mut res = a.matvec(&sol.solution);
        for (ri, bi) in res.iter_mut().zip(&b) {
            *ri += bi;
        }
        for (i, g) in sol.subgradient.iter().enumerate() {
            assert!(g.abs() <= 1.0 + 1e-9);
            if res[i].abs() > 1e-9 {
                assert!((g - res[i].signum()).abs() < 1e-9, "row {i}");
            }
        }
        let atg = a.matvec_transpose(&sol.subgradient);
        for v in atg {
            assert!(v.abs() < 1e-9);
        }
    }
}
