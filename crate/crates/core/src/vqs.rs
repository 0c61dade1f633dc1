//! Variational time evolution: assemble `M theta_dot = V`, solve, step
//! with explicit Euler, and score every step against the exact oracle.

use nalgebra::{DMatrix, DVector, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{reference_ansatz, AnsatzName, AnsatzSpec};
use crate::error::{Error, Result};
use crate::estimator::{derive_seed, Convention, Estimator, EstimatorConfig, EstimatorMode, GridDatabase};
use crate::hamiltonian::{build_tfim_with, eigenspectrum, hamiltonian_at, step_count, Boundary, Propagator, Schedule, TwoSiteBonds, ORACLE_DT};
use crate::pauli::PauliSum;
use crate::statevector::{expect_pauli, fidelity, StateVec};

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_TOTAL_TIME: f64 = 10.0;
pub const DEFAULT_TIKHONOV: f64 = 1e-6;
/// Condition numbers above this mark a step as ill-conditioned.
pub const CONDITION_WARNING: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Solver {
    /// Minimum-norm least squares through the SVD.
    #[default]
    LeastSquares,
    /// `(M^T M + lambda I) x = M^T V`
    Tikhonov {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
}

fn default_lambda() -> f64 {
    DEFAULT_TIKHONOV
}

/// Diagnostics raised while solving one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepFlags {
    pub ill_conditioned: bool,
    pub inconsistent: bool,
}

impl StepFlags {
    /// `|`-separated flag names, empty when no flag is raised.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.ill_conditioned {
            parts.push("ill_conditioned");
        }
        if self.inconsistent {
            parts.push("inconsistent");
        }
        parts.join("|")
    }

    pub fn any(&self) -> bool {
        self.ill_conditioned || self.inconsistent
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub theta_dot: DVector<f64>,
    /// Ratio of extreme singular values; infinite for singular matrices.
    pub condition: f64,
    pub flags: StepFlags,
}

/// Solves `M x = V` according to `solver`.
pub fn solve_thetadot(m: &DMatrix<f64>, v: &DVector<f64>, solver: Solver) -> Result<Solution> {
    if !m.is_square() || m.nrows() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: v.len(),
        });
    }
    let n = m.nrows();
    let svd = SVD::new(m.clone(), true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    let theta_dot = match solver {
        Solver::LeastSquares => {
            let cutoff = f64::max(1e-12, 1e-10 * smax);
            let u = svd.u.as_ref().expect("u requested");
            let vt = svd.v_t.as_ref().expect("v_t requested");
            let mut x = DVector::zeros(n);
            for (k, s) in svd.singular_values.iter().enumerate() {
                if *s > cutoff {
                    let coef = u.column(k).dot(v) / s;
                    x += vt.row(k).transpose() * coef;
                }
            }
            x
        }
        Solver::Tikhonov { lambda } => {
            if !(lambda.is_finite() && lambda > 0.0) {
                return Err(Error::InvalidProblem(format!("Tikhonov lambda must be positive, got {lambda}")));
            }
            let mt = m.transpose();
            let normal = &mt * m + DMatrix::identity(n, n) * lambda;
            normal
                .cholesky()
                .ok_or_else(|| Error::InvalidProblem("regularized normal matrix is not positive definite".into()))?
                .solve(&(mt * v))
        }
    };
    let residual = (m * &theta_dot - v).norm();
    let flags = StepFlags {
        ill_conditioned: condition > CONDITION_WARNING,
        inconsistent: residual > 1e-8 * f64::max(1.0, v.norm()),
    };
    Ok(Solution {
        theta_dot,
        condition,
        flags,
    })
}

/// A complete variational run description.
#[derive(Debug, Clone)]
pub struct EvolutionProblem {
    pub ansatz: AnsatzSpec,
    pub h0: PauliSum,
    pub ht: PauliSum,
    pub schedule: Schedule,
    pub dt: f64,
    pub estimator: EstimatorConfig,
    pub solver: Solver,
    pub convention: Convention,
    /// Step of the exact RK4 oracle.
    pub oracle_dt: f64,
    /// Prebuilt grid for [`EstimatorMode::GridInterp`]; built on demand when absent.
    pub grid: Option<GridDatabase>,
}

impl EvolutionProblem {
    /// Defaults: `T = 10`, `dt = 0.01`, exact estimator, least squares.
    pub fn new(ansatz: AnsatzSpec, h0: PauliSum, ht: PauliSum) -> Self {
        EvolutionProblem {
            ansatz,
            h0,
            ht,
            schedule: Schedule::new(DEFAULT_TOTAL_TIME).expect("positive"),
            dt: DEFAULT_DT,
            estimator: EstimatorConfig::default(),
            solver: Solver::LeastSquares,
            convention: Convention::Tdvp,
            oracle_dt: ORACLE_DT,
            grid: None,
        }
    }

    /// Periodic transverse-field Ising chain with a reference ansatz.
    pub fn tfim(name: AnsatzName, level: usize) -> Result<Self> {
        Self::tfim_with(name, level, Boundary::Periodic, TwoSiteBonds::Single)
    }

    pub fn tfim_with(name: AnsatzName, level: usize, boundary: Boundary, two_site: TwoSiteBonds) -> Result<Self> {
        let n = name.n_qubits();
        let ansatz = reference_ansatz(name, n, level)?;
        let (h0, ht) = build_tfim_with(n, boundary, two_site)?;
        Ok(Self::new(ansatz, h0, ht))
    }

    pub fn steps(&self) -> Result<usize> {
        step_count(self.schedule.total_time(), self.dt)
    }

    pub fn initial_state(&self) -> Result<StateVec> {
        self.ansatz.circuit.evaluate(&self.ansatz.theta0)
    }

    pub fn validate(&self) -> Result<()> {
        self.steps()?;
        self.estimator.validate()?;
        self.ansatz.circuit.validate()?;
        let n = self.ansatz.circuit.n_qubits();
        for h in [&self.h0, &self.ht] {
            if h.n_qubits() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: h.n_qubits(),
                });
            }
        }
        if self.ansatz.theta0.len() != self.ansatz.circuit.n_params() {
            return Err(Error::ParameterCount {
                expected: self.ansatz.circuit.n_params(),
                found: self.ansatz.theta0.len(),
            });
        }
        if let Solver::Tikhonov { lambda } = self.solver {
            if !(lambda.is_finite() && lambda > 0.0) {
                return Err(Error::InvalidProblem(format!("Tikhonov lambda must be positive, got {lambda}")));
            }
        }
        if self.estimator.mode == EstimatorMode::GridInterp && self.ansatz.circuit.n_params() != 2 {
            return Err(Error::GridDimension(self.ansatz.circuit.n_params()));
        }
        self.check_initial_eigenstate()
    }

    /// The starting state must be an eigenstate of `H0`.
    fn check_initial_eigenstate(&self) -> Result<()> {
        if self.h0.n_qubits() > crate::hamiltonian::MAX_DENSE_QUBITS {
            return Ok(());
        }
        let psi = self.initial_state()?;
        let spec = eigenspectrum(&self.h0)?;
        let e = expect_pauli(&psi, &self.h0)?;
        let weight: f64 = spec
            .eigenvalues
            .iter()
            .zip(&spec.eigenvectors)
            .filter(|(l, _)| (**l - e).abs() < 1e-9)
            .map(|(_, v)| fidelity(v, &psi).unwrap_or(0.0))
            .sum();
        if (weight - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidProblem(format!(
                "initial state is not an eigenstate of H0 (weight {weight} in the E = {e} eigenspace)"
            )));
        }
        Ok(())
    }

    /// Builds the grid database when the estimator needs one.
    pub fn prepare(&mut self) -> Result<()> {
        if self.estimator.mode == EstimatorMode::GridInterp && self.grid.is_none() {
            self.grid = Some(GridDatabase::build(&self.ansatz.circuit, &self.h0, &self.ht, self.convention, &self.estimator)?);
        }
        Ok(())
    }
}

/// `(M, V)` at parameters `theta` and time `t`. `stream` separates the
/// random streams of different steps in shot mode.
pub fn assemble(problem: &EvolutionProblem, theta: &[f64], t: f64, stream: u64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if let Some(bad) = theta.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidProblem(format!("non-finite parameter {bad}")));
    }
    let est = Estimator::new(&problem.ansatz.circuit, &problem.estimator)?;
    if problem.estimator.mode == EstimatorMode::GridInterp {
        let grid = problem.grid.as_ref().ok_or(Error::MissingGrid)?;
        let (b, j) = problem.schedule.coefficients(t)?;
        return Ok((grid.lookup_matrix(theta)?, grid.lookup_force(theta, b, j)?));
    }
    let h = hamiltonian_at(&problem.h0, &problem.ht, &problem.schedule, t)?;
    let (m, mut v) = est.system(theta, problem.convention, &[&h], stream)?;
    Ok((m, v.remove(0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub theta: Vec<f64>,
    pub energy: f64,
    pub fidelity: f64,
    pub energy_err: Option<f64>,
    pub fidelity_err: Option<f64>,
    pub cond_m: f64,
    pub flags: StepFlags,
}

/// Recorded run. `systems[k]` is the linear system solved to step from
/// record `k` to record `k + 1`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub ansatz: AnsatzName,
    pub level: usize,
    pub records: Vec<StepRecord>,
    pub systems: Vec<(DMatrix<f64>, DVector<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub ansatz: String,
    pub level: usize,
    pub steps: usize,
    pub final_t: f64,
    pub final_theta: Vec<f64>,
    pub final_energy: f64,
    pub final_fidelity: f64,
    pub min_fidelity: f64,
    pub t_min_fidelity: f64,
    /// Written as the string `"inf"` when some step had a singular matrix.
    #[serde(with = "extended_float")]
    pub max_cond_m: f64,
    pub flagged_steps: usize,
}

impl Trajectory {
    pub fn final_record(&self) -> &StepRecord {
        self.records.last().expect("trajectory holds at least one record")
    }

    pub fn n_params(&self) -> usize {
        self.records.first().map_or(0, |r| r.theta.len())
    }

    /// Interior local minima of the fidelity curve as `(t, fidelity)`.
    pub fn fidelity_local_minima(&self) -> Vec<(f64, f64)> {
        let r = &self.records;
        (1..r.len().saturating_sub(1))
            .filter(|&k| r[k].fidelity < r[k - 1].fidelity && r[k].fidelity <= r[k + 1].fidelity)
            .map(|k| (r[k].t, r[k].fidelity))
            .collect()
    }

    pub fn summary(&self) -> TrajectorySummary {
        let last = self.final_record();
        let (t_min, f_min) = self
            .records
            .iter()
            .map(|r| (r.t, r.fidelity))
            .fold((0.0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        TrajectorySummary {
            ansatz: self.ansatz.to_string(),
            level: self.level,
            steps: self.records.len() - 1,
            final_t: last.t,
            final_theta: last.theta.clone(),
            final_energy: last.energy,
            final_fidelity: last.fidelity,
            min_fidelity: f_min,
            t_min_fidelity: t_min,
            max_cond_m: self.records.iter().map(|r| r.cond_m).fold(0.0, f64::max),
            flagged_steps: self.records.iter().filter(|r| r.flags.any()).count(),
        }
    }

    pub fn csv_header(n_params: usize) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((1..=n_params).map(|k| format!("theta_{k}")));
        h.extend(["energy", "fidelity", "energy_err", "fidelity_err", "cond_M", "flags"].map(String::from));
        h
    }

    /// CSV export; missing error bars are empty fields.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::InvalidProblem(format!("csv: {e}"));
        w.write_record(Self::csv_header(self.n_params())).map_err(io)?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![r.t.to_string()];
            row.extend(r.theta.iter().map(|x| x.to_string()));
            row.extend([
                r.energy.to_string(),
                r.fidelity.to_string(),
                opt(r.energy_err),
                opt(r.fidelity_err),
                r.cond_m.to_string(),
                r.flags.label(),
            ]);
            w.write_record(&row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidProblem(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// JSON has no infinities; non-finite values travel as strings.
mod extended_float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            Repr::Number(*x)
        } else {
            Repr::Text(x.to_string())
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(x) => Ok(x),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Runs explicit Euler over `T / dt` steps, recording energies and oracle
/// fidelities at every step including `t = 0` and `t = T`.
pub fn run(problem: &EvolutionProblem) -> Result<Trajectory> {
    problem.validate()?;
    let mut owned;
    let problem = if problem.estimator.mode == EstimatorMode::GridInterp && problem.grid.is_none() {
        owned = problem.clone();
        owned.prepare()?;
        &owned
    } else {
        problem
    };
    let steps = problem.steps()?;
    let dt = problem.dt;
    let psi0 = problem.initial_state()?;
    let mut oracle = Propagator::new(&psi0, &problem.schedule, &problem.h0, &problem.ht, problem.oracle_dt)?;
    let mut theta = problem.ansatz.theta0.clone();
    let mut records = Vec::with_capacity(steps + 1);
    let mut systems = Vec::with_capacity(steps);
    for k in 0..=steps {
        let t = if k == steps { problem.schedule.total_time() } else { k as f64 * dt };
        let (m, v) = assemble(problem, &theta, t, k as u64)?;
        let sol = solve_thetadot(&m, &v, problem.solver)?;
        let phi = problem.ansatz.circuit.evaluate(&theta)?;
        let h = hamiltonian_at(&problem.h0, &problem.ht, &problem.schedule, t)?;
        let exact = oracle.advance_to(t)?;
        records.push(StepRecord {
            step: k,
            t,
            theta: theta.clone(),
            energy: expect_pauli(&phi, &h)?,
            fidelity: fidelity(exact, &phi)?,
            energy_err: None,
            fidelity_err: None,
            cond_m: sol.condition,
            flags: sol.flags,
        });
        if k == steps {
            break;
        }
        for (th, d) in theta.iter_mut().zip(sol.theta_dot.iter()) {
            *th += dt * d;
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                step: k + 1,
                t: t + dt,
                theta,
            });
        }
        systems.push((m, v));
    }
    Ok(Trajectory {
        ansatz: problem.ansatz.name,
        level: problem.ansatz.level,
        records,
        systems,
    })
}

/// Scale of the synthetic noise added to each element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScale {
    /// `sigma` is the spread of each underlying circuit outcome; an element
    /// receives `sigma` times the norm of its outcome weights.
    #[default]
    Outcome,
    /// `sigma` is added to every element directly.
    Element,
}

/// Norms of the outcome weights of each matrix and force element.
fn outcome_weights(problem: &EvolutionProblem, t: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let c = &problem.ansatz.circuit;
    let l = c.n_params();
    let h = hamiltonian_at(&problem.h0, &problem.ht, &problem.schedule, t)?;
    let h_norm: f64 = h.terms().iter().map(|(x, _)| x * x).sum::<f64>();
    let mut wm = DMatrix::zeros(l, l);
    let mut wv = DVector::zeros(l);
    for i in 0..l {
        let ti = c.derivative_terms(i)?;
        let fi: f64 = ti.iter().map(|d| d.coefficient.norm_sqr()).sum();
        for j in 0..l {
            if i == j && problem.convention == Convention::Tdvp {
                continue;
            }
            let fj: f64 = c.derivative_terms(j)?.iter().map(|d| d.coefficient.norm_sqr()).sum();
            wm[(i, j)] = (fi * fj).sqrt();
        }
        wv[i] = (fi * h_norm).sqrt();
    }
    Ok((wm, wv))
}

/// Sample standard deviation of `x - x0`; exactly zero when all samples
/// coincide with the reference.
fn shifted_std(samples: &[f64], reference: f64) -> f64 {
    let n = samples.len() as f64;
    let d: Vec<f64> = samples.iter().map(|x| x - reference).collect();
    let mean = d.iter().sum::<f64>() / n;
    (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Monte Carlo error bars. For record `k > 0`, every element of the system
/// that produced it is perturbed by independent Gaussian noise, the step is
/// re-solved from record `k - 1`, and the spread of the resulting energy and
/// fidelity over `n_samples` draws is the error bar. Record 0 carries zero
/// error.
pub fn bootstrap_errors(problem: &EvolutionProblem, trajectory: &Trajectory, n_samples: usize, sigma: f64, seed: u64) -> Result<Trajectory> {
    bootstrap_errors_scaled(problem, trajectory, n_samples, sigma, seed, NoiseScale::Outcome)
}

pub fn bootstrap_errors_scaled(
    problem: &EvolutionProblem,
    trajectory: &Trajectory,
    n_samples: usize,
    sigma: f64,
    seed: u64,
    scale: NoiseScale,
) -> Result<Trajectory> {
    if n_samples < 2 {
        return Err(Error::TooFewSamples(n_samples));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidProblem(format!("bootstrap sigma must be non-negative, got {sigma}")));
    }
    if trajectory.systems.len() + 1 != trajectory.records.len() {
        return Err(Error::InvalidProblem("trajectory is incomplete".into()));
    }
    let psi0 = problem.initial_state()?;
    let mut oracle = Propagator::new(&psi0, &problem.schedule, &problem.h0, &problem.ht, problem.oracle_dt)?;
    let mut exact_states = Vec::with_capacity(trajectory.records.len());
    for r in &trajectory.records {
        exact_states.push(oracle.advance_to(r.t)?.clone());
    }
    let dt = problem.dt;
    let circuit = &problem.ansatz.circuit;

    let errors: Vec<(f64, f64)> = (1..trajectory.records.len())
        .into_par_iter()
        .map(|k| {
            let prev = &trajectory.records[k - 1];
            let rec = &trajectory.records[k];
            let (m, v) = &trajectory.systems[k - 1];
            let (wm, wv) = match scale {
                NoiseScale::Outcome => outcome_weights(problem, prev.t)?,
                NoiseScale::Element => (DMatrix::from_element(m.nrows(), m.ncols(), 1.0), DVector::from_element(v.len(), 1.0)),
            };
            let h = hamiltonian_at(&problem.h0, &problem.ht, &problem.schedule, rec.t)?;
            let observe = |m: &DMatrix<f64>, v: &DVector<f64>| -> Result<(f64, f64)> {
                let sol = solve_thetadot(m, v, problem.solver)?;
                let theta: Vec<f64> = prev.theta.iter().zip(sol.theta_dot.iter()).map(|(a, d)| a + dt * d).collect();
                let phi = circuit.evaluate(&theta)?;
                Ok((expect_pauli(&phi, &h)?, fidelity(&exact_states[k], &phi)?))
            };
            let (e0, f0) = observe(m, v)?;
            let mut es = Vec::with_capacity(n_samples);
            let mut fs = Vec::with_capacity(n_samples);
            for s in 0..n_samples {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[k as u64, s as u64]));
                let mut noise = || -> f64 { StandardNormal.sample(&mut rng) };
                let mp = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] + sigma * wm[(i, j)] * noise());
                let vp = DVector::from_fn(v.len(), |i, _| v[i] + sigma * wv[i] * noise());
                let (e, f) = observe(&mp, &vp)?;
                es.push(e);
                fs.push(f);
            }
            Ok((shifted_std(&es, e0), shifted_std(&fs, f0)))
        })
        .collect::<Result<_>>()?;

    let mut out = trajectory.clone();
    out.records[0].energy_err = Some(0.0);
    out.records[0].fidelity_err = Some(0.0);
    for (r, (ee, fe)) in out.records[1..].iter_mut().zip(errors) {
        r.energy_err = Some(ee);
        r.fidelity_err = Some(fe);
    }
    Ok(out)
}

/// Four two-spin trajectories, one per `H0` eigenstate, with the exact
/// instantaneous spectrum at every recorded time.
#[derive(Debug, Clone)]
pub struct SpectrumExperiment {
    pub trajectories: Vec<Trajectory>,
    pub times: Vec<f64>,
    /// `exact[k][level]`
    pub exact: Vec<Vec<f64>>,
}

impl SpectrumExperiment {
    /// Largest deviation between each trajectory energy and its exact level.
    pub fn max_energy_deviation(&self) -> f64 {
        self.trajectories
            .iter()
            .enumerate()
            .flat_map(|(level, tr)| tr.records.iter().zip(&self.exact).map(move |(r, e)| (r.energy - e[level]).abs()))
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> Result<String> {
        spectrum_csv(&self.times, &self.exact)
    }
}

/// Sorted eigenvalues of `H(t)` at each time.
pub fn exact_levels(h0: &PauliSum, ht: &PauliSum, schedule: &Schedule, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    times
        .par_iter()
        .map(|&t| Ok(eigenspectrum(&hamiltonian_at(h0, ht, schedule, t)?)?.eigenvalues))
        .collect()
}

/// Columns `t,E_exact0,...`.
pub fn spectrum_csv(times: &[f64], exact: &[Vec<f64>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidProblem(format!("csv: {e}"));
    let levels = exact.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((0..levels).map(|k| format!("E_exact{k}")));
    w.write_record(&header).map_err(io)?;
    for (t, e) in times.iter().zip(exact) {
        let mut row = vec![t.to_string()];
        row.extend(e.iter().map(|x| x.to_string()));
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidProblem(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Ansatz family and level used for each two-spin eigenstate.
pub fn two_spin_assignment(level: usize) -> Result<AnsatzName> {
    match level {
        0 | 3 => Ok(AnsatzName::Tfim2Even),
        1 | 2 => Ok(AnsatzName::Tfim2Odd),
        _ => Err(Error::UnsupportedAnsatz {
            name: "two_spin".into(),
            n: 2,
            level,
        }),
    }
}

/// Runs all four two-spin levels with settings copied from `template`
/// (schedule, step, estimator, solver, convention); the ansatz and
/// Hamiltonian of `template` are replaced per level.
pub fn eigenspectrum_experiment(template: &EvolutionProblem, two_site: TwoSiteBonds) -> Result<SpectrumExperiment> {
    let (h0, ht) = build_tfim_with(2, Boundary::Periodic, two_site)?;
    let trajectories: Vec<Trajectory> = (0..4)
        .into_par_iter()
        .map(|level| {
            let name = two_spin_assignment(level)?;
            let mut p = template.clone();
            p.ansatz = reference_ansatz(name, 2, level)?;
            p.h0 = h0.clone();
            p.ht = ht.clone();
            p.grid = None;
            // distinct random streams per level
            p.estimator.seed = derive_seed(template.estimator.seed, &[level as u64]);
            run(&p)
        })
        .collect::<Result<_>>()?;
    let times: Vec<f64> = trajectories[0].records.iter().map(|r| r.t).collect();
    let exact = exact_levels(&h0, &ht, &template.schedule, &times)?;
    Ok(SpectrumExperiment {
        trajectories,
        times,
        exact,
    })
}
