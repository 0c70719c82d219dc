//! The `run` and `diagnose` pipelines.

use std::path::Path;

use log::{info, warn};
use mildhjb::evolution::{CoefficientField, TimeGrid};
use mildhjb::gaussian::{gamma_series_diagnostic, GammaSeries};
use mildhjb::hjb::{HjbSettings, HjbSolver, SolveReport, ValueIterate};
use mildhjb::linalg::spectral_norm;
use mildhjb::ou::{default_alpha_pairs, sample_triples, AlphaFit, OuModel};
use nalgebra::DMatrix;

use crate::config::ScenarioConfig;
use crate::error::{CliError, Tag};

/// Composition of the evolution family, relative to `‖S(t,s)‖`.
pub const COMPOSITION_TOL: f64 = 1e-12;
/// Gramian additivity, relative to `‖Q_{t,s}‖`.
pub const ADDITIVITY_TOL: f64 = 1e-10;
/// Slack on the embedding bound `≤ 1`.
pub const EMBEDDING_SLACK: f64 = 1e-8;
/// Triples used for the composition and additivity probes.
pub const AXIOM_TRIPLES: usize = 50;

/// One sampled triple `s < r < t` of the kernel-space diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct OuRow {
    pub s: f64,
    pub t: f64,
    pub r: f64,
    pub embedding_norm: f64,
    pub sigma_norm: f64,
    pub gramian_rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeStatus {
    Pass,
    Fail,
    Info,
}

impl ProbeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeStatus::Pass => "pass",
            ProbeStatus::Fail => "fail",
            ProbeStatus::Info => "info",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub status: ProbeStatus,
}

impl Probe {
    fn check(name: &str, value: f64, bound: f64, ok: bool) -> Self {
        Probe {
            name: name.into(),
            value,
            bound: format!("{bound:e}"),
            status: if ok {
                ProbeStatus::Pass
            } else {
                ProbeStatus::Fail
            },
        }
    }
}

/// Everything `run` computed, written or not.
#[derive(Debug)]
pub struct RunOutcome {
    pub config: ScenarioConfig,
    pub iterate: Option<ValueIterate>,
    pub report: SolveReport,
    pub alpha_fit: Option<AlphaFit>,
    pub alpha: f64,
    pub sigma_constant: f64,
    pub contraction_constant: f64,
    pub x_max: f64,
    pub ou_rows: Vec<OuRow>,
}

impl RunOutcome {
    /// The tagged failure a converged-or-not outcome maps to.
    pub fn failure(&self) -> Option<CliError> {
        (!self.report.converged).then(|| {
            CliError::new(
                Tag::NotConverged,
                format!(
                    "no convergence after {} iterations (last residual {:e}, tol {:e})",
                    self.report.iterations,
                    self.report
                        .unweighted_residuals
                        .last()
                        .copied()
                        .unwrap_or(f64::NAN),
                    self.report.tol
                ),
            )
        })
    }
}

#[derive(Debug)]
pub struct DiagnoseOutcome {
    pub config: ScenarioConfig,
    pub probes: Vec<Probe>,
    pub ou_rows: Vec<OuRow>,
    pub gamma: Vec<GammaSeries>,
    pub alpha_fit: AlphaFit,
}

impl DiagnoseOutcome {
    pub fn all_pass(&self) -> bool {
        self.probes.iter().all(|p| p.status != ProbeStatus::Fail)
    }
}

/// Coefficients, time grid and the cached OU quantities.
pub fn build_model(cfg: &ScenarioConfig) -> Result<OuModel, CliError> {
    let c = &cfg.coefficients;
    let coeffs = match &c.file {
        Some(path) => CoefficientField::from_lattice_csv(path),
        None => CoefficientField::builtin(&c.builtin, &c.params, c.horizon),
    }
    .map_err(CliError::setup)?;
    coeffs.validate().map_err(CliError::setup)?;
    let d = &cfg.discretization;
    let grid = TimeGrid::graded(coeffs.horizon, d.cells, d.grading).map_err(CliError::setup)?;
    info!(
        "model: {} coefficients, {} modes, {} cells (grading {}), {} substeps",
        coeffs.name, d.modes, d.cells, d.grading, d.substeps
    );
    OuModel::new(coeffs, d.modes, grid, d.substeps).map_err(CliError::numerical)
}

/// Rough peak memory of the solver caches and iterates, in MiB.
pub fn memory_estimate_mb(cfg: &ScenarioConfig, rule_len: usize) -> f64 {
    let n = cfg.discretization.modes as f64;
    let m = cfg.discretization.cells as f64;
    let lattice = (cfg.solver.lattice_nodes as f64).powf(n);
    let iterates = 4.0 * (m + 1.0) * lattice * (1.0 + n);
    let pairs = 0.5 * m * (m + 1.0) * (rule_len as f64 * n + 3.0 * n * n);
    8.0 * (iterates + pairs) / (1024.0 * 1024.0)
}

/// Embedding and `Σ` norms on seeded triples.
pub fn ou_diagnostics(model: &OuModel, count: usize, seed: u64) -> Result<Vec<OuRow>, CliError> {
    let triples = sample_triples(model.grid().len(), count, seed).map_err(CliError::numerical)?;
    triples
        .into_iter()
        .map(|(i, k, j)| {
            let sigma = model.sigma_map(i, j)?;
            Ok(OuRow {
                s: model.grid().time(i),
                t: model.grid().time(j),
                r: model.grid().time(k),
                embedding_norm: model.embedding_norm(i, k, j)?,
                sigma_norm: sigma.op_norm,
                gramian_rank: model.gaussian(i, j)?.rank(),
            })
        })
        .collect::<mildhjb::Result<Vec<_>>>()
        .map_err(CliError::numerical)
}

/// Solver exponent from the fit: rounded up to one decimal, kept in `[0.1, 0.9]`.
pub fn solver_alpha(alpha_hat: f64) -> f64 {
    ((alpha_hat * 10.0).ceil() / 10.0).clamp(0.1, 0.9)
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunOutcome, CliError> {
    let cfg = cfg.clone().resolve()?;
    let hamiltonian = cfg.hamiltonian()?;
    let cubature = cfg.cubature();
    let rule_len = cubature
        .rule(cfg.discretization.modes)
        .map_err(CliError::setup)?
        .len();
    let mem = memory_estimate_mb(&cfg, rule_len);
    if mem > cfg.solver.memory_budget_mb {
        return Err(CliError::new(
            Tag::ConfigMemoryBudget,
            format!(
                "estimated {mem:.0} MiB exceeds solver.memory_budget_mb = {}",
                cfg.solver.memory_budget_mb
            ),
        ));
    }
    let model = build_model(&cfg)?;
    let ou_rows = ou_diagnostics(&model, cfg.diagnostics.triples, cfg.seed)?;

    let pairs = default_alpha_pairs(model.grid());
    let alpha_fit = match model.smoothing_alpha_fit(&pairs) {
        Ok(fit) => Some(fit),
        Err(e) if cfg.solver.alpha.is_some() => {
            warn!("exponent fit skipped ({e}); using the configured alpha");
            None
        }
        Err(e) => return Err(CliError::numerical(e)),
    };
    let alpha = match (cfg.solver.alpha, &alpha_fit) {
        (Some(a), _) => a,
        (None, Some(fit)) => {
            if !(fit.alpha_hat > 0.0 && fit.alpha_hat < 1.0) {
                return Err(CliError::numerical(mildhjb::Error::ExponentOutOfRange {
                    alpha: fit.alpha_hat,
                }));
            }
            solver_alpha(fit.alpha_hat)
        }
        (None, None) => unreachable!("fit failures without an override return early"),
    };
    let sigma_constant = model
        .sigma_constant(&pairs, alpha)
        .map_err(CliError::numerical)?;
    let contraction_constant = cfg
        .solver
        .contraction_constant
        .unwrap_or(hamiltonian.lipschitz() * sigma_constant.max(1.0));
    info!("alpha = {alpha}, C_sigma = {sigma_constant}, C = {contraction_constant}");

    let settings = HjbSettings {
        alpha,
        lattice_nodes: cfg.solver.lattice_nodes,
        x_max: cfg.solver.x_max,
        cubature,
        tol: cfg.solver.tol,
        max_iter: cfg.solver.max_iter,
        beta: cfg.solver.beta,
        contraction_constant: Some(contraction_constant),
    };
    let solver = HjbSolver::new(&model, hamiltonian, cfg.terminal(), settings)
        .map_err(CliError::numerical)?;
    let x_max = solver.lattice().x_max();
    let (iterate, report) = match solver.picard_solve() {
        Ok((v, r)) => (Some(v), r),
        Err(mildhjb::Error::NonContraction { report }) => {
            return Err(CliError {
                tag: Tag::NonContraction,
                message: "picard iteration stopped contracting".into(),
                report: Some(report),
            })
        }
        Err(e) => return Err(CliError::numerical(e)),
    };
    Ok(RunOutcome {
        config: cfg,
        iterate,
        report,
        alpha_fit,
        alpha,
        sigma_constant,
        contraction_constant,
        x_max,
        ou_rows,
    })
}

pub fn diagnose(cfg: &ScenarioConfig) -> Result<DiagnoseOutcome, CliError> {
    let cfg = cfg.clone().resolve()?;
    let model = build_model(&cfg)?;
    let grid_len = model.grid().len();
    let prop = model.propagator();
    let mut probes = Vec::new();

    let identity = (0..grid_len)
        .map(|i| {
            let s = prop.at(i, i);
            (s - DMatrix::<f64>::identity(s.nrows(), s.nrows())).amax()
        })
        .fold(0.0, f64::max);
    probes.push(Probe::check(
        "evolution_identity",
        identity,
        0.0,
        identity == 0.0,
    ));

    let triples = sample_triples(grid_len, AXIOM_TRIPLES, cfg.seed).map_err(CliError::numerical)?;
    let mut composition: f64 = 0.0;
    let mut additivity: f64 = 0.0;
    for &(i, k, j) in &triples {
        let direct = prop.at(i, j);
        let err = spectral_norm(&(direct - prop.at(k, j) * prop.at(i, k)));
        composition = composition.max(err / spectral_norm(direct));
        let g = model.gramians();
        let q = g.covariance(i, j);
        let s = prop.at(k, j);
        let chained = g.covariance(k, j) + s * g.covariance(i, k) * s.transpose();
        additivity = additivity.max(spectral_norm(&(q - chained)) / spectral_norm(q));
    }
    probes.push(Probe::check(
        "evolution_composition",
        composition,
        COMPOSITION_TOL,
        composition <= COMPOSITION_TOL,
    ));
    probes.push(Probe::check(
        "gramian_additivity",
        additivity,
        ADDITIVITY_TOL,
        additivity <= ADDITIVITY_TOL,
    ));

    let ou_rows = ou_diagnostics(&model, cfg.diagnostics.triples, cfg.seed)?;
    let embedding = ou_rows.iter().map(|r| r.embedding_norm).fold(0.0, f64::max);
    probes.push(Probe::check(
        "embedding_norm_max",
        embedding,
        1.0 + EMBEDDING_SLACK,
        embedding <= 1.0 + EMBEDDING_SLACK,
    ));

    let alpha_fit = model
        .smoothing_alpha_fit(&default_alpha_pairs(model.grid()))
        .map_err(CliError::numerical)?;
    let a = alpha_fit.alpha_hat;
    probes.push(Probe {
        name: "alpha_hat".into(),
        value: a,
        bound: "(0, 1)".into(),
        status: if a > 0.0 && a < 1.0 {
            ProbeStatus::Pass
        } else {
            ProbeStatus::Fail
        },
    });

    let gamma = cfg
        .diagnostics
        .gamma_sigmas
        .iter()
        .map(|&s| gamma_series_diagnostic(s, cfg.diagnostics.gamma_n_max))
        .collect::<mildhjb::Result<Vec<_>>>()
        .map_err(CliError::setup)?;
    for g in &gamma {
        probes.push(Probe {
            name: format!("gamma_series_sigma_{}", g.sigma),
            value: g.doubling_tail,
            bound: if g.converged {
                "converged".into()
            } else {
                "not_converged".into()
            },
            status: ProbeStatus::Info,
        });
    }
    Ok(DiagnoseOutcome {
        config: cfg,
        probes,
        ou_rows,
        gamma,
        alpha_fit,
    })
}

/// Runs a verb end to end: pipeline, then files under `out`.
pub fn run_to_dir(cfg: &ScenarioConfig, out: &Path) -> Result<RunOutcome, CliError> {
    match run(cfg) {
        Ok(outcome) => {
            crate::output::write_run(&outcome, out)?;
            Ok(outcome)
        }
        Err(e) => {
            if let Some(report) = &e.report {
                crate::output::write_failed_report(cfg, report, &e, out)?;
            }
            Err(e)
        }
    }
}

pub fn diagnose_to_dir(cfg: &ScenarioConfig, out: &Path) -> Result<DiagnoseOutcome, CliError> {
    let outcome = diagnose(cfg)?;
    crate::output::write_diagnose(&outcome, out)?;
    Ok(outcome)
}
