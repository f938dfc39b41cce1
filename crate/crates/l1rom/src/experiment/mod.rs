//! Experiment registry and batch runner: JSON config ingestion, dictionary
//! generation, reduced solves across the requested functionals, and CSV /
//! manifest emission for every test problem in the suite.

mod artifacts;
mod runners;

pub use artifacts::{
    diff_against_reference, sha256_hex, CsvTable, CsvValue, DiffReport, DiffTolerances,
};
pub use runners::{run_regression, RegressionFit, RegressionInstance, REGRESSION_TARGET};

use crate::rom::PerturbationConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    ConfigInvalid(Vec<String>),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("solver failure in functional '{0}': {1}")]
    Solver(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Regression,
    Advect1d,
    Advdiff2d,
    BurgersSteady,
    BurgersUnsteady,
    Euler,
    PodDecay,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExperimentKind::Regression => "regression",
            ExperimentKind::Advect1d => "advect1d",
            ExperimentKind::Advdiff2d => "advdiff2d",
            ExperimentKind::BurgersSteady => "burgers-steady",
            ExperimentKind::BurgersUnsteady => "burgers-unsteady",
            ExperimentKind::Euler => "euler",
            ExperimentKind::PodDecay => "pod-decay",
        };
        f.write_str(s)
    }
}

/// A functional to run: one of the minimization backends or the Galerkin
/// projection baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionalChoice {
    L2,
    L1lp,
    L1irls,
    Huber,
    Galerkin,
}

impl FunctionalChoice {
    pub fn label(&self) -> &'static str {
        match self {
            FunctionalChoice::L2 => "l2",
            FunctionalChoice::L1lp => "l1lp",
            FunctionalChoice::L1irls => "l1irls",
            FunctionalChoice::Huber => "huber",
            FunctionalChoice::Galerkin => "galerkin",
        }
    }

    /// The minimize-layer functional; None for Galerkin.
    pub fn functional(&self) -> Option<crate::minimize::Functional> {
        use crate::minimize::Functional;
        match self {
            FunctionalChoice::L2 => Some(Functional::l2()),
            FunctionalChoice::L1lp => Some(Functional::l1_lp()),
            FunctionalChoice::L1irls => Some(Functional::l1_irls()),
            FunctionalChoice::Huber => Some(Functional::huber()),
            FunctionalChoice::Galerkin => None,
        }
    }
}

impl FromStr for FunctionalChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "l2" => Ok(FunctionalChoice::L2),
            "l1lp" => Ok(FunctionalChoice::L1lp),
            "l1irls" => Ok(FunctionalChoice::L1irls),
            "huber" => Ok(FunctionalChoice::Huber),
            "galerkin" => Ok(FunctionalChoice::Galerkin),
            other => Err(format!(
                "unknown functional '{other}' (expected l2, l1lp, l1irls, huber or galerkin)"
            )),
        }
    }
}

/// On-disk experiment configuration. Missing fields take per-experiment
/// defaults; see [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Cells / nodes per direction for PDE experiments.
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub dictionary_mus: Option<Vec<f64>>,
    #[serde(default)]
    pub target_mu: Option<f64>,
    #[serde(default)]
    pub functionals: Option<Vec<FunctionalChoice>>,
    #[serde(default)]
    pub cfl: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Regularization weight eta for the minimization backends.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub perturbation: Option<PerturbationConfig>,
    /// Grid sizes for the pod-decay study.
    #[serde(default)]
    pub n_list: Option<Vec<usize>>,
    #[serde(default)]
    pub t_end: Option<f64>,
    /// Times at which unsteady solutions are written.
    #[serde(default)]
    pub output_times: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let body = std::fs::read_to_string(path)?;
        serde_json::from_str(&body).map_err(|e| {
            ExperimentError::ConfigInvalid(vec![format!(
                "{}: line {}, column {}: {}",
                path.display(),
                e.line(),
                e.column(),
                e
            )])
        })
    }

    /// Fill per-experiment defaults and validate parameter domains.
    pub fn resolve(&self) -> Result<ResolvedConfig, ExperimentError> {
        use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};
        let kind = self.experiment;
        let defaults: Defaults = match kind {
            ExperimentKind::Regression => Defaults {
                grid: 0,
                mus: vec![],
                target: 0.0,
                functionals: all_four(),
                cfl: 0.5,
                t_end: 0.0,
                output_times: vec![],
                n_list: vec![],
            },
            ExperimentKind::Advect1d => Defaults {
                grid: 1000,
                mus: vec![0.3, 0.34, 0.38, 0.42, 0.46, 0.5],
                target: 0.45,
                functionals: all_five(),
                cfl: 0.5,
                t_end: 0.0,
                output_times: vec![],
                n_list: vec![],
            },
            ExperimentKind::BurgersSteady => Defaults {
                grid: 1000,
                mus: vec![0.3, 0.34, 0.38, 0.42, 0.46, 0.5],
                target: 0.45,
                functionals: all_five(),
                cfl: 0.5,
                t_end: 0.0,
                output_times: vec![],
                n_list: vec![],
            },
            ExperimentKind::Advdiff2d => Defaults {
                grid: 304,
                mus: vec![FRAC_PI_3, FRAC_PI_6],
                target: FRAC_PI_4,
                functionals: vec![
                    FunctionalChoice::Galerkin,
                    FunctionalChoice::L2,
                    FunctionalChoice::L1irls,
                    FunctionalChoice::Huber,
                ],
                cfl: 0.5,
                t_end: 0.0,
                output_times: vec![],
                n_list: vec![],
            },
            ExperimentKind::BurgersUnsteady => Defaults {
                grid: 1000,
                mus: vec![0.0, 0.2, 0.4, 0.6, 1.0],
                target: 0.5,
                functionals: all_four(),
                cfl: 0.5,
                t_end: PI,
                output_times: vec![FRAC_PI_4, FRAC_PI_2, PI],
                n_list: vec![],
            },
            ExperimentKind::Euler => Defaults {
                grid: 1000,
                mus: vec![0.0, 0.2, 0.4, 0.5, 0.8, 1.0],
                target: 0.6,
                functionals: all_four(),
                cfl: 0.5,
                t_end: 0.16,
                output_times: vec![0.0, 0.16],
                n_list: vec![],
            },
            ExperimentKind::PodDecay => Defaults {
                grid: 0,
                mus: vec![],
                target: 0.0,
                functionals: vec![],
                cfl: 0.5,
                t_end: 0.0,
                output_times: vec![],
                n_list: vec![400, 600, 800, 1000, 1500],
            },
        };

        let resolved = ResolvedConfig {
            experiment: kind,
            grid: self.grid.unwrap_or(defaults.grid),
            mus: self
                .dictionary_mus
                .clone()
                .unwrap_or_else(|| defaults.mus.clone()),
            target_mu: self.target_mu.unwrap_or(defaults.target),
            functionals: self
                .functionals
                .clone()
                .unwrap_or_else(|| defaults.functionals.clone()),
            cfl: self.cfl.unwrap_or(defaults.cfl),
            seed: self.seed.unwrap_or(42),
            out_dir: self
                .out_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("runs/{kind}"))),
            eta: self.eta.unwrap_or(0.0),
            perturbation: self.perturbation.unwrap_or_else(|| {
                // The Euler and unsteady-Burgers initial dictionaries are
                // exactly rank-deficient (affine families of two vectors),
                // so rank repair defaults on for them.
                let enabled = matches!(
                    kind,
                    ExperimentKind::Euler | ExperimentKind::BurgersUnsteady
                );
                PerturbationConfig {
                    enabled,
                    scale: 1e-8,
                    seed: self.seed.unwrap_or(42),
                }
            }),
            n_list: self.n_list.clone().unwrap_or(defaults.n_list),
            t_end: self.t_end.unwrap_or(defaults.t_end),
            output_times: self
                .output_times
                .clone()
                .unwrap_or(defaults.output_times),
        };
        resolved.validate()?;
        Ok(resolved)
    }
}

struct Defaults {
    grid: usize,
    mus: Vec<f64>,
    target: f64,
    functionals: Vec<FunctionalChoice>,
    cfl: f64,
    t_end: f64,
    output_times: Vec<f64>,
    n_list: Vec<usize>,
}

fn all_four() -> Vec<FunctionalChoice> {
    vec![
        FunctionalChoice::L2,
        FunctionalChoice::L1lp,
        FunctionalChoice::L1irls,
        FunctionalChoice::Huber,
    ]
}

fn all_five() -> Vec<FunctionalChoice> {
    vec![
        FunctionalChoice::Galerkin,
        FunctionalChoice::L2,
        FunctionalChoice::L1lp,
        FunctionalChoice::L1irls,
        FunctionalChoice::Huber,
    ]
}

/// Fully resolved, validated experiment description.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub experiment: ExperimentKind,
    pub grid: usize,
    pub mus: Vec<f64>,
    pub target_mu: f64,
    pub functionals: Vec<FunctionalChoice>,
    pub cfl: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub eta: f64,
    pub perturbation: PerturbationConfig,
    pub n_list: Vec<usize>,
    pub t_end: f64,
    pub output_times: Vec<f64>,
}

impl ResolvedConfig {
    /// Shrink grids to desk scale: 1D problems 250 cells, 2D 64 nodes per
    /// direction, Euler 300 cells, decay study {400, 800}.
    pub fn desk_scale(&mut self) {
        match self.experiment {
            ExperimentKind::Advect1d
            | ExperimentKind::BurgersSteady
            | ExperimentKind::BurgersUnsteady => self.grid = 250,
            ExperimentKind::Advdiff2d => self.grid = 64,
            ExperimentKind::Euler => self.grid = 300,
            ExperimentKind::PodDecay => self.n_list = vec![400, 800],
            ExperimentKind::Regression => {}
        }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        use std::f64::consts::FRAC_PI_2;
        let mut diags = Vec::new();
        let kind = self.experiment;
        let pde = !matches!(
            kind,
            ExperimentKind::Regression | ExperimentKind::PodDecay
        );
        if pde {
            if self.mus.is_empty() {
                diags.push("dictionary_mus: must contain at least one sample".to_string());
            }
            let (lo, hi, domain) = match kind {
                ExperimentKind::Advdiff2d => (0.0, FRAC_PI_2, "(0, pi/2)"),
                _ => (0.0, 1.0, "[0, 1]"),
            };
            let open = kind == ExperimentKind::Advdiff2d
                || kind == ExperimentKind::Advect1d
                || kind == ExperimentKind::BurgersSteady;
            let inside = |m: f64| {
                if open {
                    m > lo && m < hi
                } else {
                    (lo..=hi).contains(&m)
                }
            };
            for &m in &self.mus {
                if !inside(m) {
                    diags.push(format!("dictionary_mus: {m} outside the domain {domain}"));
                }
            }
            if !inside(self.target_mu) {
                diags.push(format!(
                    "target_mu: {} outside the domain {domain}",
                    self.target_mu
                ));
            }
            if self.functionals.is_empty() {
                diags.push("functionals: at least one must be requested".to_string());
            }
        }
        if kind == ExperimentKind::Regression
            && self.functionals.contains(&FunctionalChoice::Galerkin)
        {
            diags.push("functionals: galerkin is not available for regression".to_string());
        }
        let unsteady = matches!(
            kind,
            ExperimentKind::BurgersUnsteady | ExperimentKind::Euler
        );
        if unsteady {
            if self.functionals.contains(&FunctionalChoice::Galerkin) {
                diags.push(
                    "functionals: galerkin is not available for unsteady experiments".to_string(),
                );
            }
            if !(self.cfl > 0.0 && self.cfl <= 1.0) {
                diags.push(format!("cfl: {} outside (0, 1]", self.cfl));
            }
            if self.t_end <= 0.0 {
                diags.push(format!("t_end: {} must be positive", self.t_end));
            }
            for &t in &self.output_times {
                if t < 0.0 || t > self.t_end + 1e-12 {
                    diags.push(format!("output_times: {t} outside [0, t_end]"));
                }
            }
        }
        if kind == ExperimentKind::Advdiff2d && self.grid < 32 {
            diags.push(format!("grid: {} is below the 2D minimum of 32", self.grid));
        }
        if pde && kind != ExperimentKind::Advdiff2d && self.grid < 10 {
            diags.push(format!("grid: {} is too coarse", self.grid));
        }
        if kind == ExperimentKind::PodDecay && self.n_list.is_empty() {
            diags.push("n_list: must contain at least one grid size".to_string());
        }
        if self.eta < 0.0 {
            diags.push(format!("eta: {} must be non-negative", self.eta));
        }
        if diags.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::ConfigInvalid(diags))
        }
    }
}

/// Outcome of a run: files written and one status line per functional.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub statuses: BTreeMap<String, String>,
}

impl RunSummary {
    /// True if a requested functional failed with a solver error (distinct
    /// from a recorded non-convergence, which is data, not failure).
    pub fn has_solver_failure(&self) -> bool {
        self.statuses.values().any(|s| s.starts_with("error"))
    }
}

/// Run the experiment and write `solutions.csv`, `residuals.csv`,
/// `coefficients.csv` (as applicable) plus `manifest.json` into the output
/// directory. Per-functional solver errors are recorded in the statuses and
/// do not abort the remaining functionals.
pub fn run_experiment(cfg: &ResolvedConfig) -> Result<RunSummary, ExperimentError> {
    let (tables, statuses) = match cfg.experiment {
        ExperimentKind::Regression => runners::regression_tables(cfg),
        ExperimentKind::Advect1d | ExperimentKind::BurgersSteady => runners::steady_1d(cfg),
        ExperimentKind::Advdiff2d => runners::advdiff(cfg),
        ExperimentKind::BurgersUnsteady => runners::burgers_unsteady(cfg),
        ExperimentKind::Euler => runners::euler(cfg),
        ExperimentKind::PodDecay => runners::pod_decay(cfg),
    };
    let echo = serde_json::to_value(cfg)?;
    artifacts::write_run(&cfg.out_dir, &tables, echo, cfg.seed, &statuses)?;
    let mut files: Vec<String> = tables.iter().map(|(n, _)| n.clone()).collect();
    files.push("manifest.json".to_string());
    Ok(RunSummary {
        out_dir: cfg.out_dir.clone(),
        files,
        statuses,
    })
}
