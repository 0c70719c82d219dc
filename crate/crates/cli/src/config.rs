//! Scenario configuration: TOML with every key optional and unknown keys rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mildhjb::gaussian::Cubature;
use mildhjb::hjb::{Hamiltonian, TerminalFunction};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Tag};

/// Every default in one place.
pub mod defaults {
    pub const SEED: u64 = 0;
    pub const BUILTIN: &str = "lp_example";
    pub const HORIZON: f64 = 1.0;
    pub const MODES: usize = 3;
    pub const CELLS: usize = 16;
    pub const GRADING: f64 = 3.0;
    pub const SUBSTEPS: usize = 4;
    pub const NODES_PER_DIM: usize = 9;
    pub const SAMPLES: usize = 20_000;
    pub const TOL: f64 = 1e-4;
    pub const MAX_ITER: usize = 50;
    pub const LATTICE_NODES: usize = 9;
    pub const MEMORY_BUDGET_MB: f64 = 2048.0;
    pub const TRIPLES: usize = 100;
    pub const GAMMA_SIGMAS: [f64; 3] = [0.25, 0.5, 1.0];
    pub const GAMMA_N_MAX: usize = 100_000;
    pub const OUTPUT_DIR: &str = "out";
    /// Controls `(mode, amplitude, cost)`: push mode 1 up cheaply or down at a higher cost.
    pub const CONTROLS: [(usize, f64, f64); 2] = [(1, 1.0, 0.2), (1, -1.0, 0.5)];
    /// Terminal frequencies `u_k = COS_SCALE / k`.
    pub const COS_SCALE: f64 = 2.0;
    pub const QUADRATIC_CAP: f64 = 1.0;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub coefficients: CoefficientsConfig,
    pub discretization: DiscretizationConfig,
    /// Unset: tensor Gauss-Hermite up to three modes, seeded Monte Carlo above.
    pub cubature: Option<Cubature>,
    pub hamiltonian: HamiltonianConfig,
    pub terminal: TerminalConfig,
    pub solver: SolverConfig,
    pub diagnostics: DiagnosticsConfig,
    pub output: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: defaults::SEED,
            coefficients: CoefficientsConfig::default(),
            discretization: DiscretizationConfig::default(),
            cubature: None,
            hamiltonian: HamiltonianConfig::default(),
            terminal: TerminalConfig::default(),
            solver: SolverConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientsConfig {
    /// `constant`, `linear_in_time` or `lp_example`; ignored when `file` is set.
    pub builtin: String,
    /// CSV lattice with header `t,xi,a,b,c,g`, relative to the config file.
    pub file: Option<PathBuf>,
    /// Horizon for built-ins; a lattice file carries its own.
    pub horizon: f64,
    pub params: BTreeMap<String, f64>,
}

impl Default for CoefficientsConfig {
    fn default() -> Self {
        CoefficientsConfig {
            builtin: defaults::BUILTIN.into(),
            file: None,
            horizon: defaults::HORIZON,
            params: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationConfig {
    pub modes: usize,
    pub cells: usize,
    /// Grid `t_j = T (1 - (1 - j/M)^grading)`; 1 is uniform.
    pub grading: f64,
    pub substeps: usize,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        DiscretizationConfig {
            modes: defaults::MODES,
            cells: defaults::CELLS,
            grading: defaults::GRADING,
            substeps: defaults::SUBSTEPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    Zero,
    FiniteControl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HamiltonianConfig {
    pub kind: HamiltonianKind,
    pub controls: Vec<ControlConfig>,
}

impl Default for HamiltonianConfig {
    fn default() -> Self {
        HamiltonianConfig {
            kind: HamiltonianKind::FiniteControl,
            controls: defaults::CONTROLS
                .iter()
                .map(|&(mode, amplitude, cost)| ControlConfig {
                    drift: None,
                    mode: Some(mode),
                    amplitude,
                    cost,
                })
                .collect(),
        }
    }
}

/// One control: either an explicit drift vector or `amplitude · e_mode`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<f64>>,
    /// 1-based mode index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<usize>,
    #[serde(default = "one")]
    pub amplitude: f64,
    pub cost: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalKind {
    CosLinear,
    BoundedQuadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerminalConfig {
    pub kind: TerminalKind,
    /// `cos_linear` frequencies, one per mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
    /// `bounded_quadratic` cap.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
}

impl Default for TerminalConfig {
    fn default() -> Self {
        TerminalConfig {
            kind: TerminalKind::CosLinear,
            u: None,
            cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Unset: the fitted exponent rounded up to one decimal.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub lattice_nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction_constant: Option<f64>,
    pub memory_budget_mb: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: None,
            tol: defaults::TOL,
            max_iter: defaults::MAX_ITER,
            lattice_nodes: defaults::LATTICE_NODES,
            x_max: None,
            beta: None,
            contraction_constant: None,
            memory_budget_mb: defaults::MEMORY_BUDGET_MB,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    pub triples: usize,
    pub gamma_sigmas: Vec<f64>,
    pub gamma_n_max: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            triples: defaults::TRIPLES,
            gamma_sigmas: defaults::GAMMA_SIGMAS.to_vec(),
            gamma_n_max: defaults::GAMMA_N_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from(defaults::OUTPUT_DIR),
        }
    }
}

impl ScenarioConfig {
    /// Parses a config file; relative paths inside it are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            let tag = if e.kind() == std::io::ErrorKind::NotFound {
                Tag::ConfigMissingFile
            } else {
                Tag::ConfigIo
            };
            CliError::new(tag, format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(file) = &cfg.coefficients.file {
            if file.is_relative() {
                cfg.coefficients.file = Some(base.join(file));
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::new(Tag::ConfigParse, one_line(&e.to_string())))
    }

    /// Fills every unset field that does not depend on the model, and checks ranges.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let n = self.discretization.modes;
        let invalid = |msg: String| Err(CliError::new(Tag::ConfigInvalid, msg));
        if n == 0 {
            return invalid("discretization.modes must be positive".into());
        }
        if self.discretization.cells < 2 || self.discretization.substeps == 0 {
            return invalid("discretization needs at least 2 cells and 1 substep".into());
        }
        if !(self.discretization.grading >= 1.0) {
            return invalid(format!(
                "discretization.grading must be >= 1, got {}",
                self.discretization.grading
            ));
        }
        if self.cubature.is_none() {
            self.cubature = Some(Cubature::auto(
                n,
                defaults::NODES_PER_DIM,
                defaults::SAMPLES,
                self.seed,
            ));
        }
        match self.terminal.kind {
            TerminalKind::CosLinear => {
                if self.terminal.cap.is_some() {
                    return invalid("terminal.cap applies to bounded_quadratic only".into());
                }
                let u = self.terminal.u.get_or_insert_with(|| {
                    (1..=n).map(|k| defaults::COS_SCALE / k as f64).collect()
                });
                if u.len() != n {
                    return invalid(format!("terminal.u has {} entries for {n} modes", u.len()));
                }
            }
            TerminalKind::BoundedQuadratic => {
                if self.terminal.u.is_some() {
                    return invalid("terminal.u applies to cos_linear only".into());
                }
                let cap = *self.terminal.cap.get_or_insert(defaults::QUADRATIC_CAP);
                if !(cap > 0.0) {
                    return invalid(format!("terminal.cap must be positive, got {cap}"));
                }
            }
        }
        if self.hamiltonian.kind == HamiltonianKind::Zero && !self.hamiltonian.controls.is_empty() {
            self.hamiltonian.controls.clear();
        }
        self.hamiltonian()?;
        if let Some(a) = self.solver.alpha {
            if !(a > 0.0 && a < 1.0) {
                return invalid(format!("solver.alpha must lie in (0, 1), got {a}"));
            }
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 || self.solver.lattice_nodes < 2 {
            return invalid("solver needs tol > 0, max_iter >= 1 and lattice_nodes >= 2".into());
        }
        if self.diagnostics.gamma_sigmas.iter().any(|s| !(*s > 0.0))
            || self.diagnostics.gamma_n_max < 4
        {
            return invalid(
                "diagnostics.gamma_sigmas must be positive and gamma_n_max >= 4".into(),
            );
        }
        if let Some(file) = &self.coefficients.file {
            if !file.exists() {
                return Err(CliError::new(
                    Tag::ConfigMissingFile,
                    format!("coefficient lattice {} does not exist", file.display()),
                ));
            }
        }
        Ok(self)
    }

    pub fn cubature(&self) -> Cubature {
        self.cubature.unwrap_or_default()
    }

    pub fn hamiltonian(&self) -> Result<Hamiltonian, CliError> {
        let n = self.discretization.modes;
        match self.hamiltonian.kind {
            HamiltonianKind::Zero => Ok(Hamiltonian::Zero),
            HamiltonianKind::FiniteControl => {
                let mut drifts = Vec::new();
                let mut costs = Vec::new();
                for (k, c) in self.hamiltonian.controls.iter().enumerate() {
                    let drift = match (&c.drift, c.mode) {
                        (Some(d), None) => d.iter().map(|v| v * c.amplitude).collect(),
                        (None, Some(m)) if (1..=n).contains(&m) => {
                            let mut d = vec![0.0; n];
                            d[m - 1] = c.amplitude;
                            d
                        }
                        _ => {
                            return Err(CliError::new(
                                Tag::ConfigInvalid,
                                format!(
                                    "control {} needs exactly one of drift or mode in 1..={n}",
                                    k + 1
                                ),
                            ))
                        }
                    };
                    if drift.len() != n {
                        return Err(CliError::new(
                            Tag::ConfigInvalid,
                            format!(
                                "control {} drift has {} entries for {n} modes",
                                k + 1,
                                drift.len()
                            ),
                        ));
                    }
                    drifts.push(drift);
                    costs.push(c.cost);
                }
                Hamiltonian::finite_control(drifts, costs)
                    .map_err(|e| CliError::new(Tag::ConfigInvalid, e.to_string()))
            }
        }
    }

    pub fn terminal(&self) -> TerminalFunction {
        match self.terminal.kind {
            TerminalKind::CosLinear => TerminalFunction::CosLinear {
                u: self.terminal.u.clone().unwrap_or_default(),
            },
            TerminalKind::BoundedQuadratic => TerminalFunction::BoundedQuadratic {
                cap: self.terminal.cap.unwrap_or(defaults::QUADRATIC_CAP),
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

pub(crate) fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
