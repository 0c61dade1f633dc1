//! Plot-ready column files derived from a finished run directory.
//!
//! | experiment          | files                                   |
//! |---------------------|-----------------------------------------|
//! | `two_spin_spectrum` | `fig3a.csv` `fig3b.csv` `fig3c.csv`     |
//! | `three_spin_ground` | `fig4a.csv` `fig4b.csv` `fig4c.csv`     |
//! | `custom`            | `theta.csv` `energy.csv` `fidelity.csv` |
//!
//! The first file holds parameter paths, the second energies beside the
//! exact levels, the third fidelities (with `err` columns when the run was
//! bootstrapped).

use std::path::{Path, PathBuf};

use crate::commands::{Outputs, RunSummary, SUMMARY_FILE};
use crate::config::Experiment;
use crate::CliError;

/// A parsed CSV file addressed by column name.
#[derive(Debug, Clone)]
pub struct Table {
    name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        let bad = |e: csv::Error| CliError::Artifact(format!("{name}: {e}"));
        let mut reader = csv::Reader::from_path(path).map_err(bad)?;
        let header = reader.headers().map_err(bad)?.iter().map(String::from).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(String::from).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()
            .map_err(bad)?;
        if rows.is_empty() {
            return Err(CliError::Artifact(format!("{name}: no rows")));
        }
        Ok(Table { name, header, rows })
    }

    fn index(&self, column: &str) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| CliError::Artifact(format!("{}: missing column {column}", self.name)))
    }

    pub fn column(&self, column: &str) -> Result<Vec<f64>, CliError> {
        let k = self.index(column)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(line, row)| {
                row[k]
                    .parse::<f64>()
                    .map_err(|_| CliError::Artifact(format!("{}: row {}: bad {column} value {:?}", self.name, line + 1, row[k])))
            })
            .collect()
    }

    pub fn columns_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.header.iter().filter(|h| h.starts_with(prefix)).cloned().collect()
    }
}

struct Columns {
    header: Vec<String>,
    data: Vec<Vec<f64>>,
}

impl Columns {
    fn new(t: Vec<f64>) -> Self {
        Columns {
            header: vec!["t".into()],
            data: vec![t],
        }
    }

    fn push(&mut self, name: String, values: Vec<f64>) {
        self.header.push(name);
        self.data.push(values);
    }

    fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for k in 0..self.data[0].len() {
            w.write_record(self.data.iter().map(|c| c[k].to_string())).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv output is utf-8")
    }
}

pub fn load_summary(dir: &Path) -> Result<RunSummary, CliError> {
    let path = dir.join(SUMMARY_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Artifact(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Artifact(format!("{SUMMARY_FILE}: {e}")))
}

pub fn report_file_names(experiment: Experiment) -> [&'static str; 3] {
    match experiment {
        Experiment::TwoSpinSpectrum => ["fig3a.csv", "fig3b.csv", "fig3c.csv"],
        Experiment::ThreeSpinGround => ["fig4a.csv", "fig4b.csv", "fig4c.csv"],
        Experiment::Custom => ["theta.csv", "energy.csv", "fidelity.csv"],
    }
}

pub fn cmd_report(dir: &Path, force: bool) -> Result<Vec<PathBuf>, CliError> {
    let summary = load_summary(dir)?;
    let names = report_file_names(summary.experiment);
    Outputs::check(dir, &names.map(String::from), force)?;

    let spectrum = Table::read(&dir.join(&summary.spectrum))?;
    let t = spectrum.column("t")?;
    let tables = summary
        .trajectories
        .iter()
        .map(|e| Table::read(&dir.join(&e.file)))
        .collect::<Result<Vec<_>, _>>()?;
    if tables.is_empty() {
        return Err(CliError::Artifact("summary lists no trajectories".into()));
    }
    for table in &tables {
        let tt = table.column("t")?;
        if tt.len() != t.len() || tt.iter().zip(&t).any(|(a, b)| (a - b).abs() > 1e-12) {
            return Err(CliError::Artifact(format!("{}: time grid differs from {}", table.name, spectrum.name)));
        }
    }
    let multi = tables.len() > 1;
    let suffix = |k: usize| if multi { format!("_traj{k}") } else { String::new() };

    let mut theta = Columns::new(t.clone());
    let mut energy = Columns::new(t.clone());
    let mut fid = Columns::new(t.clone());
    for (k, table) in tables.iter().enumerate() {
        for name in table.columns_with_prefix("theta_") {
            theta.push(format!("{name}{}", suffix(k)), table.column(&name)?);
        }
        energy.push(if multi { format!("E_traj{k}") } else { "energy".into() }, table.column("energy")?);
        fid.push(if multi { format!("F_traj{k}") } else { "fidelity".into() }, table.column("fidelity")?);
        if summary.bootstrap {
            let err = table.column("fidelity_err")?;
            if err.iter().any(|e| e.is_nan() || *e < 0.0) {
                return Err(CliError::Artifact(format!("{}: negative or missing fidelity error", table.name)));
            }
            fid.push(if multi { format!("err_traj{k}") } else { "err".into() }, err);
        }
    }
    let levels: Vec<usize> = summary.trajectories.iter().map(|e| e.summary.level).collect();
    for level in levels {
        let name = format!("E_exact{level}");
        energy.push(name.clone(), spectrum.column(&name)?);
    }

    let mut out = Outputs::new(dir);
    out.add(names[0], theta.to_csv());
    out.add(names[1], energy.to_csv());
    out.add(names[2], fid.to_csv());
    out.write(force)
}
