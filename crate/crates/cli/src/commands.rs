use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vqdyn_core::estimator::{derive_seed, EstimatorMode, GridDatabase};
use vqdyn_core::vqs::{bootstrap_errors_scaled, exact_levels, run, spectrum_csv, Trajectory, TrajectorySummary};

use crate::config::{Experiment, RunConfig};
use crate::CliError;

pub const SUMMARY_FILE: &str = "summary.json";
pub const SPECTRUM_FILE: &str = "spectrum.csv";
const BOOTSTRAP_KEY: u64 = 0xB0075;

pub fn trajectory_file(index: usize) -> String {
    format!("trajectory_{index}.csv")
}

/// Files produced by one command, written only after everything succeeded.
#[derive(Debug, Default)]
pub struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    /// Refuses to touch existing files unless `force` is set.
    pub fn check(dir: &Path, names: &[String], force: bool) -> Result<(), CliError> {
        if force {
            return Ok(());
        }
        let existing: Vec<&str> = names.iter().filter(|n| dir.join(n).exists()).map(String::as_str).collect();
        if existing.is_empty() {
            Ok(())
        } else {
            Err(CliError::Exists(format!(
                "{} already holds {}; pass --force to overwrite",
                dir.display(),
                existing.join(", ")
            )))
        }
    }

    pub fn write(self, force: bool) -> Result<Vec<PathBuf>, CliError> {
        let names: Vec<String> = self.files.iter().map(|(n, _)| n.clone()).collect();
        Self::check(&self.dir, &names, force)?;
        std::fs::create_dir_all(&self.dir).map_err(|e| CliError::Io(format!("{}: {e}", self.dir.display())))?;
        let mut written = Vec::new();
        for (name, contents) in self.files {
            let path = self.dir.join(name);
            std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            written.push(path);
        }
        Ok(written)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub file: String,
    #[serde(flatten)]
    pub summary: TrajectorySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub version: String,
    pub experiment: Experiment,
    pub bootstrap: bool,
    pub spectrum: String,
    pub trajectories: Vec<TrajectoryEntry>,
    pub config: RunConfig,
}

fn numeric(e: vqdyn_core::Error) -> CliError {
    match e {
        vqdyn_core::Error::NonFinite { .. } | vqdyn_core::Error::IntegrationFailure { .. } | vqdyn_core::Error::EigenResidual { .. } => {
            CliError::Numerical(e.to_string())
        }
        other => CliError::Config(other.to_string()),
    }
}

fn run_file_names(config: &RunConfig) -> Result<Vec<String>, CliError> {
    let mut names: Vec<String> = config.members()?.iter().map(|m| trajectory_file(m.index)).collect();
    names.push(SPECTRUM_FILE.into());
    names.push(SUMMARY_FILE.into());
    Ok(names)
}

pub fn cmd_run(config: &RunConfig, dir: &Path, force: bool) -> Result<Vec<PathBuf>, CliError> {
    let problems = config.problems()?;
    Outputs::check(dir, &run_file_names(config)?, force)?;

    let trajectories: Vec<(usize, Trajectory)> = problems
        .iter()
        .map(|(member, problem)| {
            let mut p = problem.clone();
            // distinct random streams per trajectory of a multi-trajectory experiment
            if problems.len() > 1 {
                p.estimator.seed = derive_seed(config.estimator.seed, &[member.index as u64]);
            }
            p.prepare().map_err(numeric)?;
            let mut tr = run(&p).map_err(numeric)?;
            if let Some(b) = config.bootstrap.as_ref().filter(|b| b.enabled) {
                let seed = derive_seed(p.estimator.seed, &[BOOTSTRAP_KEY]);
                tr = bootstrap_errors_scaled(&p, &tr, b.n_samples, b.sigma, seed, b.scale).map_err(numeric)?;
            }
            Ok((member.index, tr))
        })
        .collect::<Result<_, CliError>>()?;

    let (_, first) = &problems[0];
    let times: Vec<f64> = trajectories[0].1.records.iter().map(|r| r.t).collect();
    let exact = exact_levels(&first.h0, &first.ht, &first.schedule, &times).map_err(numeric)?;

    let mut out = Outputs::new(dir);
    let mut entries = Vec::new();
    for (index, tr) in &trajectories {
        let file = trajectory_file(*index);
        out.add(file.clone(), tr.to_csv().map_err(numeric)?);
        entries.push(TrajectoryEntry {
            file,
            summary: tr.summary(),
        });
    }
    out.add(SPECTRUM_FILE, spectrum_csv(&times, &exact).map_err(numeric)?);
    let summary = RunSummary {
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: config.experiment,
        bootstrap: config.bootstrap_enabled(),
        spectrum: SPECTRUM_FILE.into(),
        trajectories: entries,
        config: config.clone(),
    };
    out.add(SUMMARY_FILE, serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n");
    out.write(force)
}

pub fn cmd_grid(config: &RunConfig, dir: &Path, force: bool) -> Result<Vec<PathBuf>, CliError> {
    let problems = config.problems()?;
    let (member, problem) = &problems[0];
    let n_params = problem.ansatz.circuit.n_params();
    if n_params != 2 {
        return Err(CliError::Config(format!("grids need a two-parameter ansatz, {} has {n_params}", member.ansatz)));
    }
    Outputs::check(dir, std::slice::from_ref(&config.grid.file), force)?;
    let mut est = config.estimator.clone();
    // nodes are filled with the configured base estimator
    if est.mode == EstimatorMode::GridInterp {
        est.mode = est.grid_base;
    }
    est.grid_base = est.mode;
    let grid = GridDatabase::build(&problem.ansatz.circuit, &problem.h0, &problem.ht, config.convention, &est).map_err(numeric)?;
    let (b, j) = problem.schedule.coefficients(config.grid_time()).map_err(numeric)?;
    let mut out = Outputs::new(dir);
    out.add(
        config.grid.file.clone(),
        grid.to_text(member.ansatz.as_str(), member.level, config.grid_time(), b, j),
    );
    out.write(force)
}
