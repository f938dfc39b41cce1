//! Snapshot-based proper orthogonal decomposition, plus the slow-decay
//! study showing why truncated linear bases are a poor fit for traveling
//! discontinuities: the normalized spectrum of a moving-front snapshot set
//! decays only like 1/k, so no small basis captures the family.

use crate::hdm::advect1d_exact;
use crate::linalg::{jacobi_eigh, symmetric_eigenvalues, DenseMatrix, LinalgError};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PodError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("eigen-decomposition failed: {0}")]
    Eigen(#[from] LinalgError),
}

/// Snapshots stored column-by-column in time order.
#[derive(Debug, Clone)]
pub struct SnapshotMatrix {
    pub s: DenseMatrix,
    /// Spatial coordinates of the rows (metadata only).
    pub x: Vec<f64>,
    /// Snapshot times, one per column, non-decreasing.
    pub times: Vec<f64>,
}

impl SnapshotMatrix {
    pub fn new(s: DenseMatrix, x: Vec<f64>, times: Vec<f64>) -> Self {
        assert_eq!(s.rows(), x.len(), "one coordinate per row");
        assert_eq!(s.cols(), times.len(), "one time per column");
        assert!(s.is_finite(), "snapshot entries must be finite");
        assert!(
            times.windows(2).all(|w| w[0] <= w[1]),
            "columns must be ordered by time"
        );
        Self { s, x, times }
    }

    pub fn n_snapshots(&self) -> usize {
        self.s.cols()
    }

    pub fn dim(&self) -> usize {
        self.s.rows()
    }
}

/// Truncated orthonormal snapshot basis with the full Gram spectrum.
#[derive(Debug, Clone)]
pub struct PodBasis {
    /// First `m` modes, one per column, orthonormal.
    pub modes: DenseMatrix,
    /// All min(rows, cols) eigenvalues of S^T S, non-negative, decreasing.
    pub eigenvalues: Vec<f64>,
    pub m: usize,
}

/// Compute the first `m` POD modes of the snapshot set: the leading left
/// singular vectors of S, obtained from the eigen-decomposition of the Gram
/// matrix on the smaller side. The eigenvalues are the squared singular
/// values; the optimal projection error onto `m` modes is the tail sum.
pub fn pod_compute(snap: &SnapshotMatrix, m: usize) -> Result<PodBasis, PodError> {
    let (np, nt) = (snap.dim(), snap.n_snapshots());
    let k = np.min(nt);
    if m > k {
        return Err(PodError::Dimension(format!(
            "requested {m} modes from a {np}x{nt} snapshot matrix"
        )));
    }
    let gram = if nt <= np {
        gram_columns(&snap.s)
    } else {
        gram_rows(&snap.s)
    };
    let (mut values, vectors) = jacobi_eigh(&gram)?;
    for v in values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0; // Gram matrices are PSD; clip rounding noise.
        }
    }
    let scale = values.first().copied().unwrap_or(0.0);
    let mut modes = DenseMatrix::zeros(np, m);
    for l in 0..m {
        if values[l] <= 1e-28 * scale.max(1.0) {
            return Err(PodError::Dimension(format!(
                "mode {l} is beyond the numerical rank of the snapshots"
            )));
        }
        if nt <= np {
            // Left singular vector from the right one: phi = S v / sigma.
            let phi = snap.s.matvec(vectors.column(l));
            let sigma = values[l].sqrt();
            for i in 0..np {
                modes[(i, l)] = phi[i] / sigma;
            }
        } else {
            // Eigenvectors of S S^T are the modes directly.
            for i in 0..np {
                modes[(i, l)] = vectors[(i, l)];
            }
        }
    }
    Ok(PodBasis {
        modes,
        eigenvalues: values,
        m,
    })
}

/// Relative truncation error sum_{l > m} lambda_l / sum_l lambda_l: the
/// energy missed by the best rank-m snapshot reconstruction.
pub fn truncation_error(basis: &PodBasis, m: usize) -> f64 {
    let total: f64 = basis.eigenvalues.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let tail: f64 = basis.eigenvalues.iter().skip(m).sum();
    tail / total
}

/// One row of the decay study: normalized spectrum entry for grid size `n`.
#[derive(Debug, Clone, Copy)]
pub struct DecayRow {
    pub n: usize,
    pub ell: usize,
    /// sigma_ell / sigma_1, singular values of the snapshot matrix.
    pub lambda_ratio: f64,
}

/// Full singular spectrum (decreasing) of the moving-front snapshot set on
/// an n-cell grid: nodes x_i = i/n, snapshots at t_k = k/n for k = 0..n of
/// the exact unit-speed front. The snapshot matrix is (n+1) x (n+1).
pub fn decay_spectrum(n: usize) -> Vec<f64> {
    let cols: Vec<Vec<f64>> = (0..=n)
        .map(|k| advect1d_exact(n, k as f64 / n as f64))
        .collect();
    let s = DenseMatrix::from_columns(&cols);
    let gram = gram_columns(&s);
    let eigs = symmetric_eigenvalues(&gram).expect("Gram spectra converge");
    eigs.into_iter().map(|v| v.max(0.0).sqrt()).collect()
}

/// Normalized-spectrum table for a family of grid sizes, suitable for
/// log-log plotting. Each grid contributes its full spectrum; the study's
/// point is that the decay is ~1/ell with a leading value ~0.63 n, so
/// refining the grid never produces a compact basis.
pub fn pod_decay_study(n_list: &[usize]) -> Vec<DecayRow> {
    let spectra: Vec<(usize, Vec<f64>)> = n_list
        .par_iter()
        .map(|&n| (n, decay_spectrum(n)))
        .collect();
    let mut rows = Vec::new();
    for (n, sigma) in spectra {
        let lead = sigma[0];
        for (idx, &s) in sigma.iter().enumerate() {
            rows.push(DecayRow {
                n,
                ell: idx + 1,
                lambda_ratio: s / lead,
            });
        }
    }
    rows
}

/// Least-squares slope of log(lambda_ratio) vs log(ell) over ell in
/// [2, n/10] for one grid size of a decay table.
pub fn decay_slope(rows: &[DecayRow], n: usize) -> f64 {
    let window: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.n == n && r.ell >= 2 && r.ell <= n / 10)
        .map(|r| ((r.ell as f64).ln(), r.lambda_ratio.ln()))
        .collect();
    let k = window.len() as f64;
    let sx: f64 = window.iter().map(|p| p.0).sum();
    let sy: f64 = window.iter().map(|p| p.1).sum();
    let sxx: f64 = window.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = window.iter().map(|p| p.0 * p.1).sum();
    (k * sxy - sx * sy) / (k * sxx - sx * sx)
}

fn gram_columns(s: &DenseMatrix) -> DenseMatrix {
    let nt = s.cols();
    let mut g = DenseMatrix::zeros(nt, nt);
    for i in 0..nt {
        for j in i..nt {
            let v = crate::linalg::dot(s.column(i), s.column(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

fn gram_rows(s: &DenseMatrix) -> DenseMatrix {
    let (np, nt) = (s.rows(), s.cols());
    let mut g = DenseMatrix::zeros(np, np);
    for k in 0..nt {
        let col = s.column(k);
        for i in 0..np {
            for j in i..np {
                g[(i, j)] += col[i] * col[j];
            }
        }
    }
    for i in 0..np {
        for j in 0..i {
            g[(i, j)] = g[(j, i)];
        }
    }
    g
}

/// Frobenius norm squared of S - Phi Phi^T S, the projection residual used
/// to check the tail-sum identity.
pub fn projection_error_sq(snap: &SnapshotMatrix, basis: &PodBasis) -> f64 {
    let mut total = 0.0;
    for k in 0..snap.n_snapshots() {
        let col = snap.s.column(k);
        let coeffs = basis.modes.matvec_transpose(col);
        let recon = basis.modes.matvec(&coeffs);
        total += col
            .iter()
            .zip(&recon)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm2, norm_inf};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn snapshot(cols: &[Vec<f64>]) -> SnapshotMatrix {
        let np = cols[0].len();
        let x = (0..np).map(|i| i as f64).collect();
        let times = (0..cols.len()).map(|k| k as f64).collect();
        SnapshotMatrix::new(DenseMatrix::from_columns(cols), x, times)
    }

    #[test]
    fn rank_one_snapshots_give_the_normalized_column() {
        let v = vec![3.0, 0.0, 4.0];
        let cols = vec![vec![0.0; 3], v.clone(), vec![0.0; 3]];
        let snap = snapshot(&cols);
        let basis = pod_compute(&snap, 1).unwrap();
        assert!((basis.eigenvalues[0] - 25.0).abs() < 1e-12);
        assert!(basis.eigenvalues[1].abs() < 1e-12);
        assert!(basis.eigenvalues[2].abs() < 1e-12);
        let norm = norm2(&v);
        for i in 0..3 {
            assert!((basis.modes[(i, 0)].abs() - v[i] / norm).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_columns_give_squared_norms() {
        let cols = vec![
            vec![3.0, 0.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ];
        let basis = pod_compute(&snapshot(&cols), 3).unwrap();
        let expected = [9.0, 4.0, 1.0];
        for (v, e) in basis.eigenvalues.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvalue_sum_matches_frobenius_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cols: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let snap = snapshot(&cols);
        let basis = pod_compute(&snap, 10).unwrap();
        let fro_sq: f64 = snap.s.data().iter().map(|v| v * v).sum();
        let sum: f64 = basis.eigenvalues.iter().sum();
        assert!((sum - fro_sq).abs() <= 1e-10 * fro_sq);
    }

    #[test]
    fn modes_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cols: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let basis = pod_compute(&snapshot(&cols), 8).unwrap();
        for a in 0..8 {
            for b in 0..8 {
                let d = crate::linalg::dot(basis.modes.column(a), basis.modes.column(b));
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-10, "({a},{b}) = {d}");
            }
        }
    }

    #[test]
    fn projection_error_equals_tail_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cols: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let snap = snapshot(&cols);
        for m in [1, 3, 6, 10] {
            let basis = pod_compute(&snap, m).unwrap();
            let tail: f64 = basis.eigenvalues.iter().skip(m).sum();
            let err = projection_error_sq(&snap, &basis);
            assert!(
                (err - tail).abs() <= 1e-8 * tail.max(1e-30),
                "m={m}: {err} vs {tail}"
            );
        }
    }

    #[test]
    fn truncation_error_endpoints_and_monotonicity() {
        let cols = vec![
            vec![3.0, 0.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ];
        let basis = pod_compute(&snapshot(&cols), 3).unwrap();
        assert!((truncation_error(&basis, 0) - 1.0).abs() < 1e-12);
        assert!(truncation_error(&basis, 3).abs() < 1e-12);
        let mut prev = 1.0;
        for m in 1..=3 {
            let e = truncation_error(&basis, m);
            assert!(e <= prev + 1e-15);
            prev = e;
        }
        let rank1 = pod_compute(&snapshot(&[vec![1.0, 2.0]]), 1).unwrap();
        assert!(truncation_error(&rank1, 1).abs() < 1e-12);
    }

    #[test]
    fn over_truncation_is_rejected() {
        let cols = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(matches!(
            pod_compute(&snapshot(&cols), 3),
            Err(PodError::Dimension(_))
        ));
        // Rank-deficient: a second mode does not exist.
        let rank1 = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        assert!(matches!(
            pod_compute(&snapshot(&rank1), 2),
            Err(PodError::Dimension(_))
        ));
    }

    #[test]
    fn wide_snapshot_matrix_uses_row_gram() {
        // More snapshots than spatial points: modes from S S^T.
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let cols: Vec<Vec<f64>> = (0..15)
            .map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let snap = snapshot(&cols);
        let basis = pod_compute(&snap, 6).unwrap();
        let fro_sq: f64 = snap.s.data().iter().map(|v| v * v).sum();
        let sum: f64 = basis.eigenvalues.iter().sum();
        assert!((sum - fro_sq).abs() <= 1e-10 * fro_sq);
        for a in 0..6 {
            for b in 0..6 {
                let d = crate::linalg::dot(basis.modes.column(a), basis.modes.column(b));
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn moving_front_spectrum_decays_like_one_over_ell() {
        let rows = pod_decay_study(&[400]);
        let slope = decay_slope(&rows, 400);
        assert!((slope + 1.0).abs() < 0.15, "slope {slope}");
    }

    #[test]
    fn leading_singular_value_scales_linearly_with_n() {
        let s400 = decay_spectrum(400);
        let s800 = decay_spectrum(800);
        assert!(s400[0] / 400.0 > 0.55 && s400[0] / 400.0 < 0.70, "{}", s400[0]);
        assert!(s800[0] / 800.0 > 0.55 && s800[0] / 800.0 < 0.70, "{}", s800[0]);
        let ratio = s800[0] / s400[0];
        assert!(ratio > 1.8 && ratio < 2.2, "doubling ratio {ratio}");
    }

    #[test]
    fn spectra_match_between_eigen_solvers() {
        // Cross-check the two symmetric solvers on the same Gram matrix.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let cols: Vec<Vec<f64>> = (0..9)
            .map(|_| (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let s = DenseMatrix::from_columns(&cols);
        let gram = super::gram_columns(&s);
        let (jac, _) = jacobi_eigh(&gram).unwrap();
        let ql = symmetric_eigenvalues(&gram).unwrap();
        let scale = norm_inf(&jac);
        for (a, b) in jac.iter().zip(&ql) {
            assert!((a - b).abs() < 1e-10 * scale, "{a} vs {b}");
        }
    }
}
