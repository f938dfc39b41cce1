//! Per-experiment drivers: dictionary generation, reduced solves across the
//! requested functionals, and table assembly.

use super::artifacts::{CsvTable, CsvValue};
use super::{FunctionalChoice, ResolvedConfig};
use crate::hdm::{
    advdiff2d, advect1d_steady, burgers1d_steady, burgers1d_unsteady, burgers_initial,
    euler1d_unsteady, EulerState, Grid1D, RoeBurgers, ScalarTrajectory, SteadyProblem,
};
use crate::linalg::DenseMatrix;
use crate::rom::{
    euler_rom_per_variable, euler_rom_single_expansion, minimize_linear, run_unsteady_rom,
    solve_galerkin, solve_steady_rom, Dictionary, RomCoefficients, RomTrajectory,
    UnsteadyDictionary,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;

pub(super) type Tables = Vec<(String, CsvTable)>;
pub(super) type Statuses = BTreeMap<String, String>;

// ---------------------------------------------------------------------------
// Regression
// ---------------------------------------------------------------------------

/// Seeded instance of the line-fit demo: y = 2x + 0.4 + 0.1 U(-1, 1) at 22
/// random abscissas, optionally contaminated by two far-off points. The
/// outlier coordinates are fixed, well above the line.
#[derive(Debug, Clone)]
pub struct RegressionInstance {
    pub points: Vec<(f64, f64)>,
    pub outliers: Vec<(f64, f64)>,
}

pub const REGRESSION_TARGET: (f64, f64) = (2.0, 0.4);

impl RegressionInstance {
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts: Vec<(f64, f64)> = (0..22)
            .map(|_| {
                let x: f64 = rng.gen_range(0.0..1.0);
                let noise: f64 = rng.gen_range(-1.0..1.0);
                (x, 2.0 * x + 0.4 + 0.1 * noise)
            })
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Self {
            points: pts,
            outliers: vec![(0.5, 3.5), (0.9, 4.5)],
        }
    }

    fn design(&self, with_outliers: bool) -> (DenseMatrix, Vec<f64>) {
        let mut pts = self.points.clone();
        if with_outliers {
            pts.extend_from_slice(&self.outliers);
        }
        let xcol: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ones = vec![1.0; pts.len()];
        let a = DenseMatrix::from_columns(&[xcol, ones]);
        // Residual convention r = A z + b, so b carries -y.
        let b: Vec<f64> = pts.iter().map(|p| -p.1).collect();
        (a, b)
    }
}

/// One fitted line: slope/intercept estimate per functional and case.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub label: &'static str,
    pub with_outliers: bool,
    pub alpha: [f64; 2],
    pub converged: bool,
    pub objective: f64,
}

/// Fit the seeded instance with every requested functional, with and
/// without the injected outliers.
pub fn run_regression(
    seed: u64,
    functionals: &[FunctionalChoice],
) -> (RegressionInstance, Vec<RegressionFit>) {
    let instance = RegressionInstance::generate(seed);
    let mut fits = Vec::new();
    for &with_outliers in &[false, true] {
        let (a, b) = instance.design(with_outliers);
        for choice in functionals {
            let Some(f) = choice.functional() else {
                continue; // Galerkin has no meaning for a plain fit.
            };
            let z0 = vec![0.0; 2];
            match minimize_linear(&a, &b, &z0, &f) {
                Ok(r) => fits.push(RegressionFit {
                    label: choice.label(),
                    with_outliers,
                    alpha: [r.solution[0], r.solution[1]],
                    converged: r.converged,
                    objective: r.objective,
                }),
                Err(_) => fits.push(RegressionFit {
                    label: choice.label(),
                    with_outliers,
                    alpha: [f64::NAN, f64::NAN],
                    converged: false,
                    objective: f64::NAN,
                }),
            }
        }
    }
    (instance, fits)
}

pub(super) fn regression_tables(cfg: &ResolvedConfig) -> (Tables, Statuses) {
    let (instance, fits) = run_regression(cfg.seed, &cfg.functionals);
    let mut solutions = CsvTable::new(&["case", "x", "y"]);
    for &(x, y) in &instance.points {
        solutions.push(vec!["point".into(), x.into(), y.into()]);
    }
    for &(x, y) in &instance.outliers {
        solutions.push(vec!["outlier".into(), x.into(), y.into()]);
    }
    let mut coefficients = CsvTable::new(&[
        "series",
        "case",
        "alpha1",
        "alpha2",
        "converged",
        "objective",
    ]);
    let mut residuals = CsvTable::new(&["series", "case", "x", "value"]);
    let mut statuses = Statuses::new();
    for fit in &fits {
        let case = if fit.with_outliers { "outliers" } else { "clean" };
        coefficients.push(vec![
            fit.label.into(),
            case.into(),
            fit.alpha[0].into(),
            fit.alpha[1].into(),
            flag(fit.converged),
            fit.objective.into(),
        ]);
        let mut pts = instance.points.clone();
        if fit.with_outliers {
            pts.extend_from_slice(&instance.outliers);
        }
        for &(x, y) in &pts {
            let r = fit.alpha[0] * x + fit.alpha[1] - y;
            residuals.push(vec![fit.label.into(), case.into(), x.into(), r.into()]);
        }
        let status = if fit.alpha[0].is_nan() {
            "error: fit failed".to_string()
        } else {
            "ok".to_string()
        };
        statuses.insert(fit.label.to_string(), status);
    }
    (
        vec![
            ("solutions.csv".to_string(), solutions),
            ("residuals.csv".to_string(), residuals),
            ("coefficients.csv".to_string(), coefficients),
        ],
        statuses,
    )
}

// ---------------------------------------------------------------------------
// Steady problems
// ---------------------------------------------------------------------------

struct SteadyResult {
    label: &'static str,
    coeffs: RomCoefficients,
    reconstruction: Vec<f64>,
    residual: Vec<f64>,
}

fn run_steady_functionals(
    make: &(dyn Fn(f64) -> Box<dyn SteadyProblem> + Sync),
    cfg: &ResolvedConfig,
) -> (Vec<SteadyResult>, Statuses, Vec<f64>) {
    let states: Vec<Result<Vec<f64>, String>> = cfg
        .mus
        .par_iter()
        .map(|&m| make(m).solve().map_err(|e| e.to_string()))
        .collect();
    let mut statuses = Statuses::new();
    let mut dict_states = Vec::new();
    for (m, s) in cfg.mus.iter().zip(states) {
        match s {
            Ok(v) => dict_states.push(v),
            Err(e) => {
                statuses.insert(
                    "dictionary".to_string(),
                    format!("error: solve at mu={m} failed: {e}"),
                );
                return (Vec::new(), statuses, Vec::new());
            }
        }
    }
    let dict = Dictionary::new(cfg.mus.clone(), dict_states);
    let problem = make(cfg.target_mu);
    let hdm = match problem.solve() {
        Ok(v) => v,
        Err(e) => {
            statuses.insert(
                "dictionary".to_string(),
                format!("error: target solve failed: {e}"),
            );
            return (Vec::new(), statuses, Vec::new());
        }
    };
    let outcomes: Vec<(FunctionalChoice, Result<(RomCoefficients, Vec<f64>), String>)> = cfg
        .functionals
        .par_iter()
        .map(|&choice| {
            let problem = make(cfg.target_mu);
            let solved = match choice.functional() {
                None => solve_galerkin(problem.as_ref(), &dict, cfg.target_mu)
                    .map_err(|e| e.to_string()),
                Some(f) => {
                    let f = f.with_eta(cfg.eta);
                    solve_steady_rom(problem.as_ref(), &dict, &f, cfg.target_mu)
                        .map(|(c, u, _)| (c, u))
                        .map_err(|e| e.to_string())
                }
            };
            (choice, solved)
        })
        .collect();
    let mut results = Vec::new();
    for (choice, outcome) in outcomes {
        match outcome {
            Ok((coeffs, reconstruction)) => {
                let residual = problem.residual(&reconstruction);
                statuses.insert(choice.label().to_string(), "ok".to_string());
                results.push(SteadyResult {
                    label: choice.label(),
                    coeffs,
                    reconstruction,
                    residual,
                });
            }
            Err(e) => {
                statuses.insert(choice.label().to_string(), format!("error: {e}"));
            }
        }
    }
    (results, statuses, hdm)
}

pub(super) fn steady_1d(cfg: &ResolvedConfig) -> (Tables, Statuses) {
    let n = cfg.grid;
    let make: Box<dyn Fn(f64) -> Box<dyn SteadyProblem> + Sync> = match cfg.experiment {
        super::ExperimentKind::Advect1d => {
            Box::new(move |m| Box::new(advect1d_steady(m, n)) as Box<dyn SteadyProblem>)
        }
        _ => Box::new(move |m| Box::new(burgers1d_steady(m, n)) as Box<dyn SteadyProblem>),
    };
    let (results, statuses, hdm) = run_steady_functionals(make.as_ref(), cfg);
    let grid = Grid1D::interior_nodes(n, 1.0);
    let mut solutions = CsvTable::new(&["series", "x", "value"]);
    for (x, v) in grid.x.iter().zip(&hdm) {
        solutions.push(vec!["hdm".into(), (*x).into(), (*v).into()]);
    }
    let mut residuals = CsvTable::new(&["series", "x", "value"]);
    let mut coefficients = coefficients_table();
    for r in &results {
        for (x, v) in grid.x.iter().zip(&r.reconstruction) {
            solutions.push(vec![r.label.into(), (*x).into(), (*v).into()]);
        }
        for (x, v) in grid.x.iter().zip(&r.residual) {
            residuals.push(vec![r.label.into(), (*x).into(), (*v).into()]);
        }
        push_coefficients(&mut coefficients, r.label, &cfg.mus, &r.coeffs);
    }
    (standard_tables(solutions, residuals, coefficients), statuses)
}

pub(super) fn advdiff(cfg: &ResolvedConfig) -> (Tables, Statuses) {
    let nx = cfg.grid;
    let make: Box<dyn Fn(f64) -> Box<dyn SteadyProblem> + Sync> =
        Box::new(move |m| Box::new(advdiff2d(m, nx)) as Box<dyn SteadyProblem>);
    let (results, statuses, hdm) = run_steady_functionals(make.as_ref(), cfg);
    let m = nx - 1;
    let h = 0.018 / (nx - 1) as f64;
    let coord = |k: usize| -> (f64, f64) {
        let i = k % m + 1;
        let j = k / m + 1;
        (i as f64 * h, j as f64 * h)
    };
    let mut solutions = CsvTable::new(&["series", "x", "y", "value"]);
    for (k, v) in hdm.iter().enumerate() {
        let (x, y) = coord(k);
        solutions.push(vec!["hdm".into(), x.into(), y.into(), (*v).into()]);
    }
    let mut residuals = CsvTable::new(&["series", "x", "y", "value"]);
    let mut coefficients = coefficients_table();
    for r in &results {
        for (k, v) in r.reconstruction.iter().enumerate() {
            let (x, y) = coord(k);
            solutions.push(vec![r.label.into(), x.into(), y.into(), (*v).into()]);
        }
        for (k, v) in r.residual.iter().enumerate() {
            let (x, y) = coord(k);
            residuals.push(vec![r.label.into(), x.into(), y.into(), (*v).into()]);
        }
        push_coefficients(&mut coefficients, r.label, &cfg.mus, &r.coeffs);
    }
    (standard_tables(solutions, residuals, coefficients), statuses)
}

// ---------------------------------------------------------------------------
// Unsteady Burgers
// ---------------------------------------------------------------------------

pub(super) fn burgers_unsteady(cfg: &ResolvedConfig) -> (Tables, Statuses) {
    let n = cfg.grid;
    let trajs: Vec<ScalarTrajectory> = cfg
        .mus
        .par_iter()
        .map(|&m| burgers1d_unsteady(m, n, cfg.t_end, cfg.cfl))
        .collect();
    let hdm = burgers1d_unsteady(cfg.target_mu, n, cfg.t_end, cfg.cfl);
    let grid = trajs[0].grid.clone();
    let dt = trajs[0].dt;
    let dict = UnsteadyDictionary::new(
        cfg.mus.clone(),
        trajs.into_iter().map(|t| t.states).collect(),
        grid.clone(),
        dt,
    );
    let n_steps = dict.n_steps();
    let u0: Vec<f64> = grid.x.iter().map(|&x| burgers_initial(cfg.target_mu, x)).collect();
    let outcomes: Vec<(FunctionalChoice, Result<RomTrajectory, String>)> = cfg
        .functionals
        .par_iter()
        .map(|&choice| {
            let f = choice.functional().expect("validated").with_eta(cfg.eta);
            let out = run_unsteady_rom(
                &dict,
                cfg.target_mu,
                &u0,
                &f,
                &RoeBurgers,
                n_steps,
                &cfg.perturbation,
            )
            .map_err(|e| e.to_string());
            (choice, out)
        })
        .collect();
    let steps: Vec<usize> = cfg
        .output_times
        .iter()
        .map(|&t| ((t / dt).round() as usize).min(n_steps))
        .collect();
    let mut solutions = CsvTable::new(&["series", "time", "x", "value"]);
    for &s in &steps {
        for (x, v) in grid.x.iter().zip(&hdm.states[s]) {
            solutions.push(vec!["hdm".into(), (s as f64 * dt).into(), (*x).into(), (*v).into()]);
        }
    }
    let mut residuals = CsvTable::new(&["series", "time", "value"]);
    let mut coefficients = CsvTable::new(&["series", "time", "index", "mu", "alpha", "converged"]);
    let mut statuses = Statuses::new();
    for (choice, outcome) in outcomes {
        match outcome {
            Ok(traj) => {
                statuses.insert(choice.label().to_string(), "ok".to_string());
                for &s in &steps {
                    let t = s as f64 * dt;
                    for (x, v) in grid.x.iter().zip(&traj.reconstructed[s]) {
                        solutions.push(vec![
                            choice.label().into(),
                            t.into(),
                            (*x).into(),
                            (*v).into(),
                        ]);
                    }
                    let c = &traj.coefficients[s];
                    for (idx, (&mu, &a)) in cfg.mus.iter().zip(&c.alpha).enumerate() {
                        coefficients.push(vec![
                            choice.label().into(),
                            t.into(),
                            idx.into(),
                            mu.into(),
                            a.into(),
                            flag(c.converged),
                        ]);
                    }
                }
                for (s, r) in traj.residual_norms.iter().enumerate() {
                    residuals.push(vec![
                        choice.label().into(),
                        (s as f64 * dt).into(),
                        (*r).into(),
                    ]);
                }
            }
            Err(e) => {
                statuses.insert(choice.label().to_string(), format!("error: {e}"));
            }
        }
    }
    (standard_tables(solutions, residuals, coefficients), statuses)
}

// ---------------------------------------------------------------------------
// Euler
// ---------------------------------------------------------------------------

pub(super) fn euler(cfg: &ResolvedConfig) -> (Tables, Statuses) {
    let n = cfg.grid;
    let trajs: Vec<Result<_, String>> = cfg
        .mus
        .par_iter()
        .map(|&m| euler1d_unsteady(m, n, cfg.t_end, cfg.cfl).map_err(|e| e.to_string()))
        .collect();
    let mut statuses = Statuses::new();
    let mut flat = Vec::new();
    let mut grid = None;
    let mut dt = 0.0;
    for (m, t) in cfg.mus.iter().zip(trajs) {
        match t {
            Ok(tr) => {
                grid = Some(tr.grid.clone());
                dt = tr.dt;
                flat.push(tr.states.iter().map(|s| s.to_flat()).collect::<Vec<_>>());
            }
            Err(e) => {
                statuses.insert(
                    "dictionary".to_string(),
                    format!("error: trajectory at mu={m} failed: {e}"),
                );
                return (Vec::new(), statuses);
            }
        }
    }
    let grid = grid.expect("non-empty dictionary");
    let hdm = match euler1d_unsteady(cfg.target_mu, n, cfg.t_end, cfg.cfl) {
        Ok(t) => t,
        Err(e) => {
            statuses.insert(
                "dictionary".to_string(),
                format!("error: target trajectory failed: {e}"),
            );
            return (Vec::new(), statuses);
        }
    };
    let dict = UnsteadyDictionary::new(cfg.mus.clone(), flat, grid.clone(), dt);
    let n_steps = dict.n_steps();
    let jobs: Vec<(String, FunctionalChoice, bool)> = cfg
        .functionals
        .iter()
        .flat_map(|&c| {
            [
                (format!("single_{}", c.label()), c, false),
                (format!("pervar_{}", c.label()), c, true),
            ]
        })
        .collect();
    let outcomes: Vec<(String, Result<RomTrajectory, String>)> = jobs
        .par_iter()
        .map(|(name, choice, per_variable)| {
            let f = choice.functional().expect("validated").with_eta(cfg.eta);
            let out = if *per_variable {
                euler_rom_per_variable(&dict, cfg.target_mu, &f, n_steps, &cfg.perturbation)
            } else {
                euler_rom_single_expansion(&dict, cfg.target_mu, &f, n_steps, &cfg.perturbation)
            }
            .map_err(|e| e.to_string());
            (name.clone(), out)
        })
        .collect();
    let steps: Vec<usize> = cfg
        .output_times
        .iter()
        .map(|&t| ((t / dt).round() as usize).min(n_steps))
        .collect();
    let mut solutions = CsvTable::new(&["series", "time", "x", "variable", "value"]);
    for &s in &steps {
        push_euler_state(&mut solutions, "hdm", s as f64 * dt, &grid, &hdm.states[s].to_flat());
    }
    let mut residuals = CsvTable::new(&["series", "time", "value"]);
    let mut coefficients = CsvTable::new(&["series", "time", "index", "alpha", "converged"]);
    for (name, outcome) in outcomes {
        match outcome {
            Ok(traj) => {
                statuses.insert(name.clone(), "ok".to_string());
                for &s in &steps {
                    let t = s as f64 * dt;
                    push_euler_state(&mut solutions, &name, t, &grid, &traj.reconstructed[s]);
                    let c = &traj.coefficients[s];
                    for (idx, &a) in c.alpha.iter().enumerate() {
                        coefficients.push(vec![
                            name.as_str().into(),
                            t.into(),
                            idx.into(),
                            a.into(),
                            flag(c.converged),
                        ]);
                    }
                }
                for (s, r) in traj.residual_norms.iter().enumerate() {
                    residuals.push(vec![
                        name.as_str().into(),
                        (s as f64 * dt).into(),
                        (*r).into(),
                    ]);
                }
            }
            Err(e) => {
                statuses.insert(name, format!("error: {e}"));
            }
        }
    }
    (standard_tables(solutions, residuals, coefficients), statuses)
}

fn push_euler_state(table: &mut CsvTable, series: &str, t: f64, grid: &Grid1D, flat: &[f64]) {
    let state = EulerState::from_flat(flat);
    for (i, &x) in grid.x.iter().enumerate() {
        table.push(vec![
            series.into(),
            t.into(),
            x.into(),
            "rho".into(),
            state.rho[i].into(),
        ]);
        table.push(vec![
            series.into(),
            t.into(),
            x.into(),
            "u".into(),
            state.velocity(i).into(),
        ]);
        table.push(vec![
            series.into(),
            t.into(),
            x.into(),
            "p".into(),
            state.pressure(i).into(),
        ]);
    }
}

// ---------------------------------------------------------------------------
// POD decay
// ---------------------------------------------------------------------------

pub(super) fn pod_decay(cfg: &ResolvedConfig) -> (Tables, Statuses) {
    let rows = crate::pod::pod_decay_study(&cfg.n_list);
    let mut table = CsvTable::new(&["N", "ell", "lambda_ratio"]);
    for r in rows {
        table.push(vec![r.n.into(), r.ell.into(), r.lambda_ratio.into()]);
    }
    let mut statuses = Statuses::new();
    statuses.insert("pod-decay".to_string(), "ok".to_string());
    (vec![("solutions.csv".to_string(), table)], statuses)
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn coefficients_table() -> CsvTable {
    CsvTable::new(&["series", "index", "mu", "alpha", "converged", "objective"])
}

fn push_coefficients(table: &mut CsvTable, label: &str, mus: &[f64], c: &RomCoefficients) {
    for (idx, (&mu, &a)) in mus.iter().zip(&c.alpha).enumerate() {
        table.push(vec![
            label.into(),
            idx.into(),
            mu.into(),
            a.into(),
            flag(c.converged),
            c.objective.into(),
        ]);
    }
}

fn standard_tables(
    solutions: CsvTable,
    residuals: CsvTable,
    coefficients: CsvTable,
) -> Tables {
    vec![
        ("solutions.csv".to_string(), solutions),
        ("residuals.csv".to_string(), residuals),
        ("coefficients.csv".to_string(), coefficients),
    ]
}

fn flag(converged: bool) -> CsvValue {
    CsvValue::Int(converged as i64)
}
