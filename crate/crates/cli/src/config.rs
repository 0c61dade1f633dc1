//! Run configuration files (TOML).
//!
//! ```toml
//! experiment = "three_spin_ground"   # two_spin_spectrum | three_spin_ground | custom
//! total_time = 10.0
//! dt = 0.01
//! convention = "tdvp"               # tdvp | mclachlan
//! output_dir = "runs/three_spin"
//!
//! [solver]
//! kind = "least_squares"             # least_squares | tikhonov (with lambda)
//!
//! [estimator]
//! mode = "exact"                     # exact | hadamard_exact | hadamard_shots | grid_interp
//! shots = 8192
//! seed = 7
//!
//! [estimator.readout.default]
//! p00 = 0.937
//! p11 = 0.841
//!
//! [bootstrap]
//! n_samples = 100
//! sigma = 0.1
//! ```
//!
//! `custom` experiments also set `ansatz`, and optionally `level`,
//! `n_qubits`, `boundary` and `two_site_bonds`. Unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vqdyn_core::circuit::{reference_ansatz, AnsatzName};
use vqdyn_core::estimator::{Convention, EstimatorConfig};
use vqdyn_core::hamiltonian::{build_tfim_with, Boundary, Schedule, TwoSiteBonds};
use vqdyn_core::vqs::{EvolutionProblem, NoiseScale, Solver, DEFAULT_DT, DEFAULT_TOTAL_TIME};

use crate::CliError;

/// Environment variable naming the directory that relative output paths
/// resolve against.
pub const OUTPUT_ROOT_ENV: &str = "VQDYN_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    TwoSpinSpectrum,
    ThreeSpinGround,
    Custom,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::TwoSpinSpectrum => "two_spin_spectrum",
            Experiment::ThreeSpinGround => "three_spin_ground",
            Experiment::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub enabled: bool,
    pub n_samples: usize,
    pub sigma: f64,
    pub scale: NoiseScale,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            enabled: true,
            n_samples: 100,
            sigma: 0.1,
            scale: NoiseScale::Outcome,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOutput {
    /// Schedule time at which the stored force is evaluated; defaults to
    /// the middle of the sweep.
    pub time: Option<f64>,
    pub file: String,
}

impl Default for GridOutput {
    fn default() -> Self {
        GridOutput {
            time: None,
            file: "grid.txt".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub n_qubits: Option<usize>,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub two_site_bonds: TwoSiteBonds,
    #[serde(default = "default_total_time", alias = "T")]
    pub total_time: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub ansatz: Option<AnsatzName>,
    #[serde(default)]
    pub level: Option<usize>,
    #[serde(default)]
    pub convention: Convention,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub bootstrap: Option<BootstrapConfig>,
    #[serde(default)]
    pub grid: GridOutput,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_total_time() -> f64 {
    DEFAULT_TOTAL_TIME
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

/// One trajectory to run: output index, ansatz and level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Member {
    pub index: usize,
    pub ansatz: AnsatzName,
    pub level: usize,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn n_qubits(&self) -> usize {
        match self.experiment {
            Experiment::TwoSpinSpectrum => 2,
            Experiment::ThreeSpinGround => 3,
            Experiment::Custom => self.ansatz.map_or(0, AnsatzName::n_qubits),
        }
    }

    pub fn members(&self) -> Result<Vec<Member>, CliError> {
        match self.experiment {
            Experiment::TwoSpinSpectrum => (0..4)
                .map(|level| {
                    let ansatz = vqdyn_core::vqs::two_spin_assignment(level).map_err(config_error)?;
                    Ok(Member { index: level, ansatz, level })
                })
                .collect(),
            Experiment::ThreeSpinGround => Ok(vec![Member {
                index: 0,
                ansatz: AnsatzName::Tfim3Qaoa,
                level: 0,
            }]),
            Experiment::Custom => {
                let ansatz = self.ansatz.ok_or_else(|| CliError::Config("custom experiments need an `ansatz`".into()))?;
                let level = self.level.unwrap_or(ansatz.levels()[0]);
                Ok(vec![Member { index: 0, ansatz, level }])
            }
        }
    }

    /// Checks every field and builds one problem per member.
    pub fn problems(&self) -> Result<Vec<(Member, EvolutionProblem)>, CliError> {
        if self.experiment != Experiment::Custom {
            for (key, set) in [("ansatz", self.ansatz.is_some()), ("level", self.level.is_some())] {
                if set {
                    return Err(CliError::Config(format!("`{key}` is only allowed for custom experiments")));
                }
            }
        }
        if let Some(n) = self.n_qubits {
            if n != self.n_qubits() {
                return Err(CliError::Config(format!(
                    "n_qubits = {n} does not match the {} experiment ({} qubits)",
                    self.experiment.as_str(),
                    self.n_qubits()
                )));
            }
        }
        if let Some(b) = &self.bootstrap {
            if b.enabled && b.n_samples < 2 {
                return Err(CliError::Config(format!("bootstrap needs n_samples >= 2, got {}", b.n_samples)));
            }
            if !(b.sigma.is_finite() && b.sigma >= 0.0) {
                return Err(CliError::Config(format!("bootstrap sigma must be non-negative, got {}", b.sigma)));
            }
        }
        let grid_time = self.grid_time();
        if !grid_time.is_finite() || grid_time < 0.0 || grid_time > self.total_time {
            return Err(CliError::Config(format!("grid time {grid_time} lies outside [0, {}]", self.total_time)));
        }
        if self.grid.file.is_empty() || Path::new(&self.grid.file).components().count() != 1 {
            return Err(CliError::Config(format!("grid file must be a plain file name, got {:?}", self.grid.file)));
        }
        let schedule = Schedule::new(self.total_time).map_err(config_error)?;
        let (h0, ht) = build_tfim_with(self.n_qubits(), self.boundary, self.two_site_bonds).map_err(config_error)?;
        self.members()?
            .into_iter()
            .map(|m| {
                let ansatz = reference_ansatz(m.ansatz, m.ansatz.n_qubits(), m.level).map_err(config_error)?;
                let mut p = EvolutionProblem::new(ansatz, h0.clone(), ht.clone());
                p.schedule = schedule;
                p.dt = self.dt;
                p.estimator = self.estimator.clone();
                p.solver = self.solver;
                p.convention = self.convention;
                p.validate().map_err(config_error)?;
                Ok((m, p))
            })
            .collect()
    }

    pub fn grid_time(&self) -> f64 {
        self.grid.time.unwrap_or(0.5 * self.total_time)
    }

    pub fn bootstrap_enabled(&self) -> bool {
        self.bootstrap.as_ref().is_some_and(|b| b.enabled)
    }

    /// Output directory: absolute paths are used as given, relative ones
    /// resolve under the output root, and a missing entry falls back to the
    /// config file stem.
    pub fn output_dir(&self, config_path: &Path) -> PathBuf {
        let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
        match &self.output_dir {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => root.join(p),
            None => root.join(config_path.file_stem().unwrap_or_else(|| "run".as_ref())),
        }
    }
}

fn config_error(e: vqdyn_core::Error) -> CliError {
    CliError::Config(e.to_string())
}
