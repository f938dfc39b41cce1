use super::*;
use crate::linalg::solve_dense;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_instance(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> (DenseMatrix, Vec<f64>) {
    let cols_data: Vec<Vec<f64>> = (0..cols)
        .map(|_| (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let b = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (DenseMatrix::from_columns(&cols_data), b)
}

/// Independent normal-equations oracle: solve A^T A z = -A^T b by Gaussian
/// elimination.
fn normal_equations_oracle(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let r = a.cols();
    let mut gram = DenseMatrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            gram[(i, j)] = crate::linalg::dot(a.column(i), a.column(j));
        }
    }
    let rhs: Vec<f64> = (0..r).map(|j| -crate::linalg::dot(a.column(j), b)).collect();
    solve_dense(&gram, &rhs).unwrap()
}

#[test]
fn qr_identity_case() {
    let a = DenseMatrix::identity(2);
    let rep = qr_least_squares(&a, &[1.0, 2.0]).unwrap();
    assert!((rep.solution[0] + 1.0).abs() < 1e-14);
    assert!((rep.solution[1] + 2.0).abs() < 1e-14);
    assert!(rep.objective < 1e-14);
}

#[test]
fn qr_mean_of_two() {
    let a = DenseMatrix::from_rows(&[&[1.0], &[1.0]]);
    let rep = qr_least_squares(&a, &[-1.0, -3.0]).unwrap();
    assert!((rep.solution[0] - 2.0).abs() < 1e-14);
}

#[test]
fn qr_matches_normal_equations_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (a, b) = random_instance(&mut rng, 10, 3);
    let rep = qr_least_squares(&a, &b).unwrap();
    let oracle = normal_equations_oracle(&a, &b);
    for k in 0..3 {
        assert!(
            (rep.solution[k] - oracle[k]).abs() < 1e-9 * (1.0 + oracle[k].abs()),
            "{:?} vs {:?}",
            rep.solution,
            oracle
        );
    }
    // Normal equations certificate at the returned solution.
    let mut r = a.matvec(&rep.solution);
    for (ri, bi) in r.iter_mut().zip(&b) {
        *ri += bi;
    }
    let grad = a.matvec_transpose(&r);
    assert!(norm_inf(&grad) < 1e-10);
}

#[test]
fn qr_rejects_rank_deficient() {
    let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0], &[3.0, 6.0]]);
    assert!(matches!(
        qr_least_squares(&a, &[1.0, 1.0, 1.0]),
        Err(MinimizeError::RankDeficient(_))
    ));
}

#[test]
fn gauss_newton_exact_on_linear_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (a, b) = random_instance(&mut rng, 12, 4);
    let res = NonlinearResidual::from_linear(a.clone(), b.clone());
    let d = DenseMatrix::identity(4);
    let rep = gauss_newton_l2(&res, &d, &[0.0; 4], 1e-10).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.iterations, 1);
    let direct = qr_least_squares(&a, &b).unwrap();
    for k in 0..4 {
        assert!((rep.solution[k] - direct.solution[k]).abs() < 1e-10);
    }
}

#[test]
fn gauss_newton_finds_closed_form_root() {
    // r(z) = (z1^2 - 1, z2) has roots z = (+-1, 0).
    let res = NonlinearResidual {
        dim_in: 2,
        dim_out: 2,
        eval: Box::new(|u: &[f64]| vec![u[0] * u[0] - 1.0, u[1]]),
        jac_apply: Box::new(|u: &[f64], v: &[f64]| vec![2.0 * u[0] * v[0], v[1]]),
    };
    let d = DenseMatrix::identity(2);
    let rep = gauss_newton_l2(&res, &d, &[2.0, 1.0], 1e-12).unwrap();
    assert!(rep.converged);
    assert!((rep.solution[0].abs() - 1.0).abs() < 1e-8);
    assert!(rep.solution[1].abs() < 1e-8);
    assert!(rep.objective < 1e-7);
}

#[test]
fn lp_and_irls_agree_on_seeded_instance() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (a, b) = random_instance(&mut rng, 20, 3);
    let lp = l1_lp(&a, &b).unwrap();
    let irls = l1_irls(&a, &b, &[0.0; 3], 1e-10).unwrap();
    assert!(
        (lp.objective - irls.objective).abs() < 1e-6 * lp.objective.max(1e-12),
        "lp {} irls {}",
        lp.objective,
        irls.objective
    );
}

#[test]
fn irls_median() {
    let a = DenseMatrix::from_rows(&[&[1.0], &[1.0], &[1.0]]);
    let rep = l1_irls(&a, &[-1.0, -2.0, -10.0], &[0.0], 1e-10).unwrap();
    assert!((rep.solution[0] - 2.0).abs() < 1e-6);
}

#[test]
fn irls_zero_residual_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (a, _) = random_instance(&mut rng, 10, 2);
    let z_star = vec![0.7, -0.2];
    // b = -A z* makes the residual vanish exactly at z*.
    let b: Vec<f64> = a.matvec(&z_star).iter().map(|v| -v).collect();
    let rep = l1_irls(&a, &b, &z_star, 1e-10).unwrap();
    assert!(rep.objective < 1e-10);
    for k in 0..2 {
        assert!((rep.solution[k] - z_star[k]).abs() < 1e-10);
    }
}

#[test]
fn irls_matches_lp_on_larger_instance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (a, b) = random_instance(&mut rng, 50, 5);
    let lp = l1_lp(&a, &b).unwrap();
    let irls = l1_irls(&a, &b, &[0.0; 5], 1e-12).unwrap();
    assert!((irls.objective - lp.objective).abs() / lp.objective < 1e-6);
}

#[test]
fn l1_gn_lp_linear_matches_lp_in_one_outer_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (a, b) = random_instance(&mut rng, 15, 3);
    let res = NonlinearResidual::from_linear(a.clone(), b.clone());
    let d = DenseMatrix::identity(3);
    let rep = l1_gn_lp(&res, &d, &[0.0; 3], 1e-10).unwrap();
    let lp = l1_lp(&a, &b).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.iterations, 1);
    assert!((rep.objective - lp.objective).abs() < 1e-9);
}

#[test]
fn l1_gn_lp_median_via_nonlinear_path() {
    let res = NonlinearResidual {
        dim_in: 1,
        dim_out: 3,
        eval: Box::new(|u: &[f64]| vec![u[0] - 1.0, u[0] - 2.0, u[0] - 10.0]),
        jac_apply: Box::new(|_u: &[f64], v: &[f64]| vec![v[0], v[0], v[0]]),
    };
    let d = DenseMatrix::identity(1);
    let rep = l1_gn_lp(&res, &d, &[0.0], 1e-10).unwrap();
    assert!((rep.solution[0] - 2.0).abs() < 1e-9);
}

#[test]
fn l1_gn_irls_linear_matches_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (a, b) = random_instance(&mut rng, 25, 4);
    let res = NonlinearResidual::from_linear(a.clone(), b.clone());
    let d = DenseMatrix::identity(4);
    let rep = l1_gn_irls(&res, &d, &[0.0; 4], 1e-12).unwrap();
    let lp = l1_lp(&a, &b).unwrap();
    assert!((rep.objective - lp.objective).abs() / lp.objective < 1e-6);
}

#[test]
fn l1_gn_irls_zero_initial_residual_returns_z0() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let (a, _) = random_instance(&mut rng, 10, 2);
    let z0 = vec![0.3, 0.4];
    let b: Vec<f64> = a.matvec(&z0).iter().map(|v| -v).collect();
    let res = NonlinearResidual::from_linear(a, b);
    let d = DenseMatrix::identity(2);
    let rep = l1_gn_irls(&res, &d, &z0, 1e-10).unwrap();
    for k in 0..2 {
        assert!((rep.solution[k] - z0[k]).abs() < 1e-12);
    }
}

#[test]
fn huber_reduces_to_l2_for_large_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (a, b) = random_instance(&mut rng, 20, 3);
    let res = NonlinearResidual::from_linear(a.clone(), b.clone());
    let d = DenseMatrix::identity(3);
    // eps2 large enough that M >= 2 max|r_i| at every iterate.
    let huber = huber_irls(&res, &d, &[0.0; 3], 1e-12, 1e3).unwrap();
    let l2 = qr_least_squares(&a, &b).unwrap();
    for k in 0..3 {
        assert!((huber.solution[k] - l2.solution[k]).abs() < 1e-8);
    }
}

#[test]
fn huber_median_in_small_threshold_regime() {
    let res = NonlinearResidual {
        dim_in: 1,
        dim_out: 3,
        eval: Box::new(|u: &[f64]| vec![u[0] - 1.0, u[0] - 2.0, u[0] - 10.0]),
        jac_apply: Box::new(|_u: &[f64], v: &[f64]| vec![v[0], v[0], v[0]]),
    };
    let d = DenseMatrix::identity(1);
    let rep = huber_irls(&res, &d, &[0.0], 1e-12, DEFAULT_HUBER_EPS2).unwrap();
    assert!((rep.solution[0] - 2.0).abs() < 1e-4, "{}", rep.solution[0]);
}

#[test]
fn regularization_eta_zero_is_identity() {
    let a = DenseMatrix::identity(2);
    let b = vec![1.0, 2.0];
    let (a2, b2) = add_regularization(&a, &b, 0.0);
    assert_eq!(a2.rows(), 2);
    assert_eq!(b2, b);
}

#[test]
fn regularization_scalar_case() {
    // (z - 1)^2 + z^2 is minimized at z = 1/2.
    let a = DenseMatrix::identity(1);
    let b = vec![-1.0];
    let (a2, b2) = add_regularization(&a, &b, 1.0);
    let rep = qr_least_squares(&a2, &b2).unwrap();
    assert!((rep.solution[0] - 0.5).abs() < 1e-12);
}

#[test]
fn regularization_large_eta_shrinks_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let (a, b) = random_instance(&mut rng, 20, 3);
    let plain = qr_least_squares(&a, &b).unwrap();
    let (a2, b2) = add_regularization(&a, &b, 1e3);
    let shrunk = qr_least_squares(&a2, &b2).unwrap();
    assert!(norm2(&shrunk.solution) < 1e-2 * norm2(&plain.solution));
}

#[test]
fn functional_validation() {
    assert!(Functional::l2().is_valid());
    assert!(Functional::l1_lp().is_valid());
    assert!(Functional::l1_irls().is_valid());
    assert!(Functional::huber().is_valid());
    let bad = Functional {
        kind: NormKind::L2,
        backend: Backend::Lp,
        eta: 0.0,
        huber_eps2: 1e-6,
    };
    assert!(!bad.is_valid());
}
