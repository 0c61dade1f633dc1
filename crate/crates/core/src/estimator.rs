//! Estimation of the linear system that drives the parameters.
//!
//! Every matrix and force element is a real linear combination of real or
//! imaginary parts of overlaps `<0|A^dagger B|0>` between two concrete gate
//! lists. Those overlaps are evaluated directly from state vectors, by a
//! simulated Hadamard test, or by a Hadamard test with finite shots and
//! readout errors. A precomputed grid over two parameters can stand in for
//! all of them.
//!
//! # Grid file format
//!
//! ```text
//! vqdyn-grid 1
//! resolution 20
//! ansatz tfim2_even
//! level 0
//! t 5.0
//! mode exact
//! seed 0
//! convention tdvp
//! # i j node_a node_b value
//! 1 2 0 0 0.25
//! 1 0 0 0 -0.0
//! ```
//!
//! Rows with `j > 0` are matrix elements `(i, j)`; rows with `j = 0` are
//! force elements `i`. Indices are 1-based. Node `(a, b)` sits at
//! `(a, b) * 2 pi / resolution`. Values use shortest round-trip formatting.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{compile_exact, ParamCircuit};
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::statevector::{expect_pauli, inner, sample_bitstrings, Gate, Histogram, StateVec};

pub const DEFAULT_SHOTS: u64 = 8192;
pub const DEFAULT_FD_STEP: f64 = 1e-3;
pub const DEFAULT_GRID_RESOLUTION: usize = 20;
pub const GRID_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    #[default]
    Exact,
    HadamardExact,
    HadamardShots,
    GridInterp,
}

impl EstimatorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorMode::Exact => "exact",
            EstimatorMode::HadamardExact => "hadamard_exact",
            EstimatorMode::HadamardShots => "hadamard_shots",
            EstimatorMode::GridInterp => "grid_interp",
        }
    }
}

impl fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            EstimatorMode::Exact,
            EstimatorMode::HadamardExact,
            EstimatorMode::HadamardShots,
            EstimatorMode::GridInterp,
        ]
        .into_iter()
        .find(|m| m.as_str() == s)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown estimator mode {s:?}")))
    }
}

/// How the force vector is obtained in the default convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VMode {
    #[default]
    Hadamard,
    /// `V_i = (E(theta + d e_i) - E(theta - d e_i)) / (4 d)`
    EnergyGradient,
}

/// Form of the linear system `matrix * theta_dot = force`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `M_ij = -Im<d_i phi|d_j phi>`, `V_i = Re<d_i phi|H|phi>`.
    #[default]
    Tdvp,
    /// `A_ij = Re<d_i|d_j> - Re(<d_i|phi><phi|d_j>)`,
    /// `C_i = Im<d_i|H|phi> - E Im<d_i|phi>`.
    McLachlan,
}

impl Convention {
    pub fn as_str(self) -> &'static str {
        match self {
            Convention::Tdvp => "tdvp",
            Convention::McLachlan => "mclachlan",
        }
    }
}

/// Readout confusion of one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    /// Probability of reading 0 when the qubit is 0.
    pub p00: f64,
    /// Probability of reading 1 when the qubit is 1.
    pub p11: f64,
}

impl Confusion {
    pub const IDEAL: Confusion = Confusion { p00: 1.0, p11: 1.0 };

    pub fn new(p00: f64, p11: f64) -> Result<Self> {
        let c = Confusion { p00, p11 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for p in [self.p00, self.p11] {
            if !(0.5..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("confusion probability {p} outside [0.5, 1]")));
            }
        }
        let det = self.det();
        if det <= 0.0 {
            return Err(Error::SingularConfusion(self.p00 + self.p11));
        }
        Ok(())
    }

    fn det(&self) -> f64 {
        self.p00 + self.p11 - 1.0
    }

    /// Probability of reading the opposite value when the true bit is `bit`.
    fn flip_probability(&self, bit: bool) -> f64 {
        if bit {
            1.0 - self.p11
        } else {
            1.0 - self.p00
        }
    }

    /// `C^{-1}` for `C = [[p00, 1 - p11], [1 - p00, p11]]` acting on
    /// `(freq_0, freq_1)`.
    fn inverse(&self) -> [[f64; 2]; 2] {
        let d = self.det();
        [[self.p11 / d, -(1.0 - self.p11) / d], [-(1.0 - self.p00) / d, self.p00 / d]]
    }
}

/// Independent readout errors per qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub default: Confusion,
    #[serde(default)]
    pub per_qubit: BTreeMap<usize, Confusion>,
}

impl ReadoutModel {
    pub fn uniform(c: Confusion) -> Self {
        ReadoutModel {
            default: c,
            per_qubit: BTreeMap::new(),
        }
    }

    pub fn for_qubit(&self, q: usize) -> Confusion {
        self.per_qubit.get(&q).copied().unwrap_or(self.default)
    }

    pub fn validate(&self) -> Result<()> {
        self.default.validate()?;
        self.per_qubit.values().try_for_each(Confusion::validate)
    }
}

/// Flips every measured bit independently according to `model`.
pub fn apply_readout_noise(hist: &Histogram, model: &ReadoutModel, seed: u64) -> Result<Histogram> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buckets: BTreeMap<usize, u64> = hist.counts().clone();
    for q in 0..hist.n_qubits() {
        let c = model.for_qubit(q);
        let mut next: BTreeMap<usize, u64> = BTreeMap::new();
        for (&outcome, &count) in &buckets {
            let p = c.flip_probability(outcome >> q & 1 == 1);
            let flipped = if p > 0.0 {
                Binomial::new(count, p)
                    .map_err(|e| Error::InvalidConfig(e.to_string()))?
                    .sample(&mut rng)
            } else {
                0
            };
            if count > flipped {
                *next.entry(outcome).or_insert(0) += count - flipped;
            }
            if flipped > 0 {
                *next.entry(outcome ^ (1 << q)).or_insert(0) += flipped;
            }
        }
        buckets = next;
    }
    Ok(Histogram::from_counts(hist.n_qubits(), buckets))
}

/// Applies the tensor-product inverse confusion matrix to the relative
/// frequencies. The result sums to one but may have negative entries.
pub fn povm_correct(hist: &Histogram, model: &ReadoutModel) -> Result<Vec<f64>> {
    model.validate()?;
    let mut f = hist.frequencies();
    for q in 0..hist.n_qubits() {
        let inv = model.for_qubit(q).inverse();
        let bit = 1usize << q;
        for i in 0..f.len() {
            if i & bit == 0 {
                let (a, b) = (f[i], f[i | bit]);
                f[i] = inv[0][0] * a + inv[0][1] * b;
                f[i | bit] = inv[1][0] * a + inv[1][1] * b;
            }
        }
    }
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub mode: EstimatorMode,
    pub shots: u64,
    pub seed: u64,
    pub readout: Option<ReadoutModel>,
    pub povm_correction: bool,
    pub v_mode: VMode,
    /// Central-difference step for [`VMode::EnergyGradient`].
    pub fd_step: f64,
    pub grid_resolution: usize,
    /// Estimator used to fill grid nodes.
    pub grid_base: EstimatorMode,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            mode: EstimatorMode::Exact,
            shots: DEFAULT_SHOTS,
            seed: 0,
            readout: None,
            povm_correction: false,
            v_mode: VMode::Hadamard,
            fd_step: DEFAULT_FD_STEP,
            grid_resolution: DEFAULT_GRID_RESOLUTION,
            grid_base: EstimatorMode::Exact,
        }
    }
}

impl EstimatorConfig {
    pub fn with_mode(mode: EstimatorMode) -> Self {
        EstimatorConfig {
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 && (self.mode == EstimatorMode::HadamardShots || self.grid_base == EstimatorMode::HadamardShots) {
            return Err(Error::ZeroShots);
        }
        if !(self.fd_step.is_finite() && self.fd_step > 0.0) {
            return Err(Error::InvalidConfig(format!("fd_step must be positive, got {}", self.fd_step)));
        }
        if self.grid_resolution < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid resolution must be at least 2, got {}",
                self.grid_resolution
            )));
        }
        if self.grid_base == EstimatorMode::GridInterp {
            return Err(Error::InvalidConfig("grid_base cannot itself be grid_interp".into()));
        }
        if let Some(r) = &self.readout {
            r.validate()?;
        }
        Ok(())
    }

    /// Mode used for individual circuit evaluations.
    fn circuit_mode(&self) -> EstimatorMode {
        match self.mode {
            EstimatorMode::GridInterp => self.grid_base,
            m => m,
        }
    }
}

/// SplitMix64 finalizer.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one task, a pure function of the master seed and the task key.
pub fn derive_seed(master: u64, key: &[u64]) -> u64 {
    key.iter().fold(splitmix(master), |acc, k| splitmix(acc ^ splitmix(*k)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Part {
    Re,
    Im,
}

/// Ancilla-assisted estimate of `<0|A^dagger B|0>`.
///
/// The ancilla is the qubit above the system register and starts in `|+>`.
/// `common` runs uncontrolled, `branch0` runs when the ancilla is 0 and
/// `branch1` when it is 1. Measuring X on the ancilla gives the real part,
/// measuring Y the imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct HadamardCircuit {
    pub n_system: usize,
    pub common: Vec<Gate>,
    pub branch0: Vec<Gate>,
    pub branch1: Vec<Gate>,
}

impl HadamardCircuit {
    /// Estimates `<psi|W|psi>` with `|psi> = prep |0>`.
    pub fn new(n_system: usize, prep: &[Gate], controlled: &[Gate]) -> Self {
        HadamardCircuit {
            n_system,
            common: prep.to_vec(),
            branch0: Vec::new(),
            branch1: controlled.to_vec(),
        }
    }

    /// Estimates `<0|A^dagger B|0>`. Shared leading gates run uncontrolled,
    /// shared trailing gates cancel, and both branches are compiled.
    pub fn between(n_system: usize, a: &[Gate], b: &[Gate]) -> Self {
        let mut suffix = 0;
        while suffix < a.len().min(b.len()) && a[a.len() - 1 - suffix] == b[b.len() - 1 - suffix] {
            suffix += 1;
        }
        let (a, b) = (&a[..a.len() - suffix], &b[..b.len() - suffix]);
        let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
        HadamardCircuit {
            n_system,
            common: a[..prefix].to_vec(),
            branch0: compile_exact(&a[prefix..], n_system),
            branch1: compile_exact(&b[prefix..], n_system),
        }
    }

    pub fn ancilla(&self) -> usize {
        self.n_system
    }

    /// Probability that the ancilla reads 1 after the basis change for `part`.
    pub fn ancilla_probability_one(&self, part: Part) -> Result<f64> {
        let anc = self.ancilla();
        let mut s = StateVec::zero(self.n_system + 1);
        s.apply(&Gate::H(anc))?;
        for g in &self.common {
            g.validate(self.n_system)?;
            s.apply(g)?;
        }
        for (gates, value) in [(&self.branch0, false), (&self.branch1, true)] {
            for g in gates.iter() {
                g.validate(self.n_system)?;
                s.apply_controlled(g, anc, value)?;
            }
        }
        if part == Part::Im {
            s.apply(&Gate::Sdg(anc))?;
        }
        s.apply(&Gate::H(anc))?;
        Ok(s.probability_one(anc).clamp(0.0, 1.0))
    }

    /// Noiseless ancilla expectation value.
    pub fn exact(&self, part: Part) -> Result<f64> {
        Ok(1.0 - 2.0 * self.ancilla_probability_one(part)?)
    }

    /// Finite-shot estimate with optional readout errors on the ancilla.
    pub fn sample(&self, part: Part, config: &EstimatorConfig, seed: u64) -> Result<f64> {
        if config.shots == 0 {
            return Err(Error::ZeroShots);
        }
        let p1 = self.ancilla_probability_one(part)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ones = Binomial::new(config.shots, p1)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .sample(&mut rng);
        let hist = Histogram::from_counts(1, [(0usize, config.shots - ones), (1, ones)]);
        let freqs = match &config.readout {
            None => hist.frequencies(),
            Some(model) => {
                // the measured register is the ancilla alone
                let local = ReadoutModel::uniform(model.for_qubit(self.ancilla()));
                let noisy = apply_readout_noise(&hist, &local, splitmix(seed))?;
                if config.povm_correction {
                    povm_correct(&noisy, &local)?
                } else {
                    noisy.frequencies()
                }
            }
        };
        Ok(freqs[0] - freqs[1])
    }

    pub fn estimate(&self, part: Part, config: &EstimatorConfig, seed: u64) -> Result<f64> {
        match config.circuit_mode() {
            EstimatorMode::HadamardShots => self.sample(part, config, seed),
            _ => self.exact(part),
        }
    }
}

/// Hadamard test of `<psi|W|psi>` for `|psi> = prep |0>`, with the
/// controlled gate list implementing `W`.
pub fn hadamard_test(n_system: usize, prep: &[Gate], controlled: &[Gate], part: Part, config: &EstimatorConfig) -> Result<f64> {
    config.validate()?;
    let circuit = HadamardCircuit::new(n_system, prep, controlled);
    match config.circuit_mode() {
        EstimatorMode::Exact => {
            let mut psi = StateVec::zero(n_system);
            psi.apply_all(prep)?;
            let mut w = psi.clone();
            w.apply_all(controlled)?;
            let z = inner(&psi, &w)?;
            Ok(match part {
                Part::Re => z.re,
                Part::Im => z.im,
            })
        }
        _ => circuit.estimate(part, config, derive_seed(config.seed, &[0x4854])),
    }
}

/// One overlap `<0|A^dagger B|0>` weighted by `w` inside an element.
struct WeightedOverlap {
    w: Complex64,
    a: Vec<Gate>,
    b: Vec<Gate>,
    key: Vec<u64>,
}

/// Evaluates ensembles of overlaps for one circuit and parameter point.
pub struct Estimator<'a> {
    circuit: &'a ParamCircuit,
    config: &'a EstimatorConfig,
    grid: Option<&'a GridDatabase>,
}

impl<'a> Estimator<'a> {
    pub fn new(circuit: &'a ParamCircuit, config: &'a EstimatorConfig) -> Result<Self> {
        config.validate()?;
        circuit.validate()?;
        Ok(Estimator {
            circuit,
            config,
            grid: None,
        })
    }

    pub fn with_grid(mut self, grid: &'a GridDatabase) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn config(&self) -> &EstimatorConfig {
        self.config
    }

    fn seed(&self, stream: u64, key: &[u64]) -> u64 {
        let mut full = Vec::with_capacity(key.len() + 1);
        full.push(stream);
        full.extend_from_slice(key);
        derive_seed(self.config.seed, &full)
    }

    /// `Part(sum_k w_k z_k)` where each `z_k` is estimated by Hadamard tests.
    fn weighted_part(&self, terms: &[WeightedOverlap], part: Part, stream: u64) -> Result<f64> {
        let mut total = 0.0;
        for t in terms {
            // Re(wz) = Re w Re z - Im w Im z ; Im(wz) = Re w Im z + Im w Re z
            let (c_re, c_im) = match part {
                Part::Re => (t.w.re, -t.w.im),
                Part::Im => (t.w.im, t.w.re),
            };
            let hc = HadamardCircuit::between(self.circuit.n_qubits(), &t.a, &t.b);
            for (coef, p, tag) in [(c_re, Part::Re, 0u64), (c_im, Part::Im, 1u64)] {
                if coef != 0.0 {
                    let mut key = t.key.clone();
                    key.push(tag);
                    total += coef * hc.estimate(p, self.config, self.seed(stream, &key))?;
                }
            }
        }
        Ok(total)
    }

    fn gram_terms(&self, theta: &[f64], i: usize, j: usize) -> Result<Vec<WeightedOverlap>> {
        let mut out = Vec::new();
        for ti in self.circuit.derivative_terms(i)? {
            for tj in self.circuit.derivative_terms(j)? {
                out.push(WeightedOverlap {
                    w: ti.coefficient.conj() * tj.coefficient,
                    a: self.circuit.branch_gates(theta, &ti)?,
                    b: self.circuit.branch_gates(theta, &tj)?,
                    key: vec![1, i as u64, j as u64, ti.branch as u64, tj.branch as u64],
                });
            }
        }
        Ok(out)
    }

    /// Terms of `<d_i phi| O |phi>` where `O` is the Pauli sum `h`, or the
    /// identity when `h` is `None`.
    fn force_terms(&self, theta: &[f64], i: usize, h: Option<&PauliSum>, tag: u64) -> Result<Vec<WeightedOverlap>> {
        let u = self.circuit.concrete(theta)?;
        let identity = [(1.0, PauliString::identity(self.circuit.n_qubits()))];
        let ops: &[(f64, PauliString)] = match h {
            Some(h) => h.terms(),
            None => &identity,
        };
        let mut out = Vec::new();
        for ti in self.circuit.derivative_terms(i)? {
            let a = self.circuit.branch_gates(theta, &ti)?;
            for (p_idx, (c, p)) in ops.iter().enumerate() {
                let mut b = u.clone();
                if !p.is_identity() {
                    b.push(Gate::Pauli(p.clone()));
                }
                out.push(WeightedOverlap {
                    w: ti.coefficient.conj() * *c,
                    a: a.clone(),
                    b,
                    key: vec![tag, i as u64, ti.branch as u64, p_idx as u64],
                });
            }
        }
        Ok(out)
    }

    fn energy_terms(&self, theta: &[f64], h: &PauliSum, tag: u64) -> Result<Vec<WeightedOverlap>> {
        let u = self.circuit.concrete(theta)?;
        Ok(h.terms()
            .iter()
            .enumerate()
            .map(|(p_idx, (c, p))| {
                let mut b = u.clone();
                b.push(Gate::Pauli(p.clone()));
                WeightedOverlap {
                    w: Complex64::new(*c, 0.0),
                    a: u.clone(),
                    b,
                    key: vec![tag, p_idx as u64],
                }
            })
            .collect())
    }

    /// Energy `<phi|H|phi>`: exact in noiseless modes, sampled from
    /// Pauli-basis measurements with readout errors in shot mode.
    pub fn energy(&self, theta: &[f64], h: &PauliSum, stream: u64) -> Result<f64> {
        let phi = self.circuit.evaluate(theta)?;
        if self.config.circuit_mode() != EstimatorMode::HadamardShots {
            return expect_pauli(&phi, h);
        }
        let mut total = 0.0;
        for (p_idx, (c, p)) in h.terms().iter().enumerate() {
            if p.is_identity() {
                total += c;
                continue;
            }
            let seed = self.seed(stream, &[5, p_idx as u64, theta_key(theta)]);
            total += c * measure_pauli(&phi, p, self.config, seed)?;
        }
        Ok(total)
    }

    /// Matrix and force vectors for each Pauli sum in `forces`.
    pub fn system(&self, theta: &[f64], convention: Convention, forces: &[&PauliSum], stream: u64) -> Result<(DMatrix<f64>, Vec<DVector<f64>>)> {
        if theta.len() != self.circuit.n_params() {
            return Err(Error::ParameterCount {
                expected: self.circuit.n_params(),
                found: theta.len(),
            });
        }
        for h in forces {
            if h.n_qubits() != self.circuit.n_qubits() {
                return Err(Error::DimensionMismatch {
                    expected: self.circuit.n_qubits(),
                    found: h.n_qubits(),
                });
            }
        }
        if self.config.v_mode == VMode::EnergyGradient && convention == Convention::McLachlan {
            return Err(Error::InvalidConfig(
                "energy-gradient forces are defined only for the default convention".into(),
            ));
        }
        match self.config.mode {
            EstimatorMode::GridInterp => self.system_from_grid(theta, forces),
            EstimatorMode::Exact => self.system_exact(theta, convention, forces, stream),
            _ => self.system_sampled(theta, convention, forces, stream),
        }
    }

    pub fn matrix(&self, theta: &[f64], convention: Convention, stream: u64) -> Result<DMatrix<f64>> {
        Ok(self.system(theta, convention, &[], stream)?.0)
    }

    pub fn force(&self, theta: &[f64], h: &PauliSum, convention: Convention, stream: u64) -> Result<DVector<f64>> {
        let (_, mut v) = self.system(theta, convention, &[h], stream)?;
        Ok(v.remove(0))
    }

    fn system_from_grid(&self, theta: &[f64], forces: &[&PauliSum]) -> Result<(DMatrix<f64>, Vec<DVector<f64>>)> {
        let grid = self.grid.ok_or(Error::MissingGrid)?;
        if !forces.is_empty() {
            return Err(Error::InvalidConfig(
                "grid_interp stores forces for H0 and HT only; use GridDatabase::lookup_force".into(),
            ));
        }
        Ok((grid.lookup_matrix(theta)?, Vec::new()))
    }

    fn system_exact(&self, theta: &[f64], convention: Convention, forces: &[&PauliSum], stream: u64) -> Result<(DMatrix<f64>, Vec<DVector<f64>>)> {
        let l = self.circuit.n_params();
        let phi = self.circuit.evaluate(theta)?;
        let tangents: Vec<StateVec> = (0..l).map(|i| self.circuit.tangent(theta, i)).collect::<Result<_>>()?;
        let overlaps: Vec<Complex64> = tangents.iter().map(|t| inner(t, &phi)).collect::<Result<_>>()?;
        let mut m = DMatrix::zeros(l, l);
        for i in 0..l {
            for j in 0..l {
                let g = inner(&tangents[i], &tangents[j])?;
                m[(i, j)] = match convention {
                    Convention::Tdvp if i == j => 0.0,
                    Convention::Tdvp => -g.im,
                    Convention::McLachlan => g.re - (overlaps[i] * overlaps[j].conj()).re,
                };
            }
        }
        let mut vs = Vec::with_capacity(forces.len());
        for (f_idx, h) in forces.iter().enumerate() {
            if self.config.v_mode == VMode::EnergyGradient {
                vs.push(self.energy_gradient(theta, h, stream, f_idx as u64)?);
                continue;
            }
            let mut hphi = phi.clone();
            let mut acc = vec![Complex64::new(0.0, 0.0); phi.dim()];
            for (c, p) in h.terms() {
                hphi.clone_from(&phi);
                hphi.apply_pauli(p)?;
                for (a, x) in acc.iter_mut().zip(hphi.amplitudes()) {
                    *a += *c * x;
                }
            }
            let hphi = StateVec::from_amplitudes(acc)?;
            let e = inner(&phi, &hphi)?.re;
            let v = DVector::from_iterator(
                l,
                (0..l).map(|i| {
                    let z = inner(&tangents[i], &hphi).expect("matching dimensions");
                    match convention {
                        Convention::Tdvp => z.re,
                        Convention::McLachlan => z.im - e * overlaps[i].im,
                    }
                }),
            );
            vs.push(v);
        }
        Ok((m, vs))
    }

    fn system_sampled(&self, theta: &[f64], convention: Convention, forces: &[&PauliSum], stream: u64) -> Result<(DMatrix<f64>, Vec<DVector<f64>>)> {
        let l = self.circuit.n_params();
        // overlaps <d_i phi|phi>, needed only for the phase-corrected form
        let tangent_overlaps: Vec<Complex64> = match convention {
            Convention::Tdvp => vec![Complex64::new(0.0, 0.0); l],
            Convention::McLachlan => (0..l)
                .into_par_iter()
                .map(|i| {
                    let t = self.force_terms(theta, i, None, 2)?;
                    Ok(Complex64::new(self.weighted_part(&t, Part::Re, stream)?, self.weighted_part(&t, Part::Im, stream)?))
                })
                .collect::<Result<_>>()?,
        };
        let pairs: Vec<(usize, usize)> = (0..l).flat_map(|i| (0..l).map(move |j| (i, j))).collect();
        let entries: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| match convention {
                Convention::Tdvp if i == j => Ok(0.0),
                Convention::Tdvp => Ok(-self.weighted_part(&self.gram_terms(theta, i, j)?, Part::Im, stream)?),
                Convention::McLachlan => Ok(self.weighted_part(&self.gram_terms(theta, i, j)?, Part::Re, stream)?
                    - (tangent_overlaps[i] * tangent_overlaps[j].conj()).re),
            })
            .collect::<Result<_>>()?;
        let m = DMatrix::from_row_slice(l, l, &entries);

        let mut vs = Vec::with_capacity(forces.len());
        for (f_idx, h) in forces.iter().enumerate() {
            let tag = 3 + 16 * f_idx as u64;
            if self.config.v_mode == VMode::EnergyGradient {
                vs.push(self.energy_gradient(theta, h, stream, f_idx as u64)?);
                continue;
            }
            let energy = match convention {
                Convention::Tdvp => 0.0,
                Convention::McLachlan => self.weighted_part(&self.energy_terms(theta, h, tag + 1)?, Part::Re, stream)?,
            };
            let elems: Vec<f64> = (0..l)
                .into_par_iter()
                .map(|i| {
                    let t = self.force_terms(theta, i, Some(h), tag)?;
                    match convention {
                        Convention::Tdvp => self.weighted_part(&t, Part::Re, stream),
                        Convention::McLachlan => Ok(self.weighted_part(&t, Part::Im, stream)? - energy * tangent_overlaps[i].im),
                    }
                })
                .collect::<Result<_>>()?;
            vs.push(DVector::from_vec(elems));
        }
        Ok((m, vs))
    }

    fn energy_gradient(&self, theta: &[f64], h: &PauliSum, stream: u64, f_idx: u64) -> Result<DVector<f64>> {
        let d = self.config.fd_step;
        let l = theta.len();
        let vals: Vec<f64> = (0..l)
            .into_par_iter()
            .map(|i| {
                let mut p = theta.to_vec();
                let mut m = theta.to_vec();
                p[i] += d;
                m[i] -= d;
                let sub = derive_seed(stream, &[6, f_idx, i as u64]);
                Ok((self.energy(&p, h, sub)? - self.energy(&m, h, splitmix(sub))?) / (4.0 * d))
            })
            .collect::<Result<_>>()?;
        Ok(DVector::from_vec(vals))
    }
}

fn theta_key(theta: &[f64]) -> u64 {
    theta.iter().fold(0u64, |acc, t| splitmix(acc ^ t.to_bits()))
}

/// Measures a Pauli string by rotating to the computational basis, sampling,
/// applying readout errors and (optionally) the inverse confusion matrix.
fn measure_pauli(phi: &StateVec, p: &PauliString, config: &EstimatorConfig, seed: u64) -> Result<f64> {
    let mut s = phi.clone();
    for (q, op) in p.paulis().iter().enumerate() {
        match op {
            Pauli::X => s.apply(&Gate::H(q))?,
            Pauli::Y => {
                s.apply(&Gate::Sdg(q))?;
                s.apply(&Gate::H(q))?;
            }
            _ => {}
        }
    }
    let hist = sample_bitstrings(&s, config.shots, seed)?;
    let freqs = match &config.readout {
        None => hist.frequencies(),
        Some(model) => {
            let noisy = apply_readout_noise(&hist, model, splitmix(seed))?;
            if config.povm_correction {
                povm_correct(&noisy, model)?
            } else {
                noisy.frequencies()
            }
        }
    };
    let support: usize = p.support().iter().map(|q| 1usize << q).sum();
    Ok(freqs
        .iter()
        .enumerate()
        .map(|(b, f)| if (b & support).count_ones() % 2 == 1 { -f } else { *f })
        .sum())
}

/// `M_ij` in the default convention.
pub fn estimate_m(circuit: &ParamCircuit, theta: &[f64], i: usize, j: usize, config: &EstimatorConfig) -> Result<f64> {
    check_slot(circuit, i)?;
    check_slot(circuit, j)?;
    Ok(Estimator::new(circuit, config)?.matrix(theta, Convention::Tdvp, 0)?[(i, j)])
}

/// `V_i` in the default convention for the Hamiltonian `h`.
pub fn estimate_v(circuit: &ParamCircuit, theta: &[f64], i: usize, h: &PauliSum, config: &EstimatorConfig) -> Result<f64> {
    check_slot(circuit, i)?;
    Ok(Estimator::new(circuit, config)?.force(theta, h, Convention::Tdvp, 0)?[i])
}

fn check_slot(circuit: &ParamCircuit, i: usize) -> Result<()> {
    if i >= circuit.n_params() {
        return Err(Error::ParameterCount {
            expected: circuit.n_params(),
            found: i + 1,
        });
    }
    Ok(())
}

/// Descriptive metadata written into grid files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub resolution: usize,
    pub ansatz: String,
    pub level: usize,
    pub t: f64,
    pub mode: EstimatorMode,
    pub seed: u64,
    pub convention: Convention,
}

/// Matrix and force elements tabulated on a periodic two-parameter grid.
///
/// Forces are stored separately for `H0` and `HT`; the force at schedule
/// coefficients `(B, J)` is `B * F0 + J * FT`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDatabase {
    resolution: usize,
    convention: Convention,
    base_mode: EstimatorMode,
    seed: u64,
    /// `matrix[i][j][node]`
    matrix: Vec<Vec<Vec<f64>>>,
    force_h0: Vec<Vec<f64>>,
    force_ht: Vec<Vec<f64>>,
}

/// Fixed-point scale used to snap interpolation coordinates.
const GRID_QUANTUM: f64 = 4_294_967_296.0;

impl GridDatabase {
    /// Evaluates every element at every node with `config.grid_base`.
    pub fn build(circuit: &ParamCircuit, h0: &PauliSum, ht: &PauliSum, convention: Convention, config: &EstimatorConfig) -> Result<Self> {
        config.validate()?;
        if circuit.n_params() != 2 {
            return Err(Error::GridDimension(circuit.n_params()));
        }
        let res = config.grid_resolution;
        let node_config = EstimatorConfig {
            mode: config.grid_base,
            ..config.clone()
        };
        let est = Estimator::new(circuit, &node_config)?;
        let step = TAU / res as f64;
        let nodes: Vec<(DMatrix<f64>, Vec<DVector<f64>>)> = (0..res * res)
            .into_par_iter()
            .map(|node| {
                let (a, b) = (node / res, node % res);
                let theta = [a as f64 * step, b as f64 * step];
                est.system(&theta, convention, &[h0, ht], 1 << 40 | node as u64)
            })
            .collect::<Result<_>>()?;
        let l = 2;
        let mut matrix = vec![vec![vec![0.0; res * res]; l]; l];
        let mut force_h0 = vec![vec![0.0; res * res]; l];
        let mut force_ht = vec![vec![0.0; res * res]; l];
        for (node, (m, v)) in nodes.iter().enumerate() {
            for i in 0..l {
                for j in 0..l {
                    matrix[i][j][node] = m[(i, j)];
                }
                force_h0[i][node] = v[0][i];
                force_ht[i][node] = v[1][i];
            }
        }
        Ok(GridDatabase {
            resolution: res,
            convention,
            base_mode: config.grid_base,
            seed: config.seed,
            matrix,
            force_h0,
            force_ht,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn node_count(&self) -> usize {
        self.resolution * self.resolution
    }

    /// Node spacing `2 pi / resolution`.
    pub fn step(&self) -> f64 {
        TAU / self.resolution as f64
    }

    /// Lower-left node and fractional offsets for `theta`, wrapped into
    /// `[0, 2 pi)`. Coordinates are snapped to a `2^-32` lattice so that
    /// nodes are hit exactly and `theta + 2 pi` maps to the same cell.
    fn locate(&self, theta: &[f64]) -> Result<[(usize, usize, f64); 2]> {
        if theta.len() != 2 {
            return Err(Error::GridDimension(theta.len()));
        }
        let res = self.resolution as i128;
        let period = res << 32;
        let mut out = [(0, 0, 0.0); 2];
        for (k, t) in theta.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::InvalidProblem(format!("non-finite grid coordinate {t}")));
            }
            let q = ((t / self.step()) * GRID_QUANTUM).round() as i128;
            let q = q.rem_euclid(period);
            let lo = (q >> 32) as usize;
            let frac = (q & 0xFFFF_FFFF) as f64 / GRID_QUANTUM;
            out[k] = (lo, (lo + 1) % self.resolution, frac);
        }
        Ok(out)
    }

    fn interpolate(&self, table: &[f64], theta: &[f64]) -> Result<f64> {
        let [(a0, a1, fa), (b0, b1, fb)] = self.locate(theta)?;
        let r = self.resolution;
        let at = |a: usize, b: usize| table[a * r + b];
        if fa == 0.0 && fb == 0.0 {
            return Ok(at(a0, b0));
        }
        Ok((1.0 - fa) * (1.0 - fb) * at(a0, b0) + fa * (1.0 - fb) * at(a1, b0) + (1.0 - fa) * fb * at(a0, b1) + fa * fb * at(a1, b1))
    }

    pub fn lookup_matrix(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                m[(i, j)] = self.interpolate(&self.matrix[i][j], theta)?;
            }
        }
        Ok(m)
    }

    /// Force at schedule coefficients `(b, j)`.
    pub fn lookup_force(&self, theta: &[f64], b: f64, j: f64) -> Result<DVector<f64>> {
        let mut v = DVector::zeros(2);
        for i in 0..2 {
            v[i] = b * self.interpolate(&self.force_h0[i], theta)? + j * self.interpolate(&self.force_ht[i], theta)?;
        }
        Ok(v)
    }

    /// Matrix element `(i, j)` stored at node `(a, b)`.
    pub fn node_matrix(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        self.matrix[i][j][a * self.resolution + b]
    }

    /// Serializes the matrix and the force at schedule coefficients `(b, j)`.
    pub fn to_text(&self, ansatz: &str, level: usize, t: f64, b: f64, j: f64) -> String {
        let header = GridHeader {
            resolution: self.resolution,
            ansatz: ansatz.to_string(),
            level,
            t,
            mode: self.base_mode,
            seed: self.seed,
            convention: self.convention,
        };
        let r = self.resolution;
        let mut out = format!(
            "vqdyn-grid {GRID_FORMAT_VERSION}\nresolution {}\nansatz {}\nlevel {}\nt {:?}\nmode {}\nseed {}\nconvention {}\n# i j node_a node_b value\n",
            header.resolution,
            header.ansatz,
            header.level,
            header.t,
            header.mode,
            header.seed,
            header.convention.as_str()
        );
        for i in 0..2 {
            for jj in 0..2 {
                for node in 0..r * r {
                    out.push_str(&format!("{} {} {} {} {:?}\n", i + 1, jj + 1, node / r, node % r, self.matrix[i][jj][node]));
                }
            }
        }
        for i in 0..2 {
            for node in 0..r * r {
                let v = b * self.force_h0[i][node] + j * self.force_ht[i][node];
                out.push_str(&format!("{} 0 {} {} {:?}\n", i + 1, node / r, node % r, v));
            }
        }
        out
    }
}

/// `((i, j), (node_a, node_b))`, with `j = 0` for force rows.
pub type GridKey = ((usize, usize), (usize, usize));

/// Parsed grid file.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTable {
    pub header: GridHeader,
    pub rows: BTreeMap<GridKey, f64>,
}

impl GridTable {
    pub fn parse(text: &str) -> Result<GridTable> {
        let mut fields: BTreeMap<String, String> = BTreeMap::new();
        let mut rows = BTreeMap::new();
        let mut version_seen = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |message: String| Error::Parse { line: line_no, message };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            if !version_seen {
                if tok.len() != 2 || tok[0] != "vqdyn-grid" {
                    return Err(err("missing `vqdyn-grid <version>` header".into()));
                }
                if tok[1] != GRID_FORMAT_VERSION.to_string() {
                    return Err(err(format!("unsupported grid format version {}", tok[1])));
                }
                version_seen = true;
                continue;
            }
            if tok.len() == 2 {
                fields.insert(tok[0].to_string(), tok[1].to_string());
                continue;
            }
            if tok.len() != 5 {
                return Err(err(format!("expected 5 columns, found {}", tok.len())));
            }
            let ints: Vec<usize> = tok[..4]
                .iter()
                .map(|s| s.parse().map_err(|_| err(format!("invalid index {s:?}"))))
                .collect::<Result<_>>()?;
            let v: f64 = tok[4].parse().map_err(|_| err(format!("invalid value {:?}", tok[4])))?;
            if rows.insert(((ints[0], ints[1]), (ints[2], ints[3])), v).is_some() {
                return Err(err("duplicate row".into()));
            }
        }
        let get = |k: &str| {
            fields.get(k).cloned().ok_or(Error::Parse {
                line: 0,
                message: format!("missing header field {k:?}"),
            })
        };
        let parse_err = |k: &str| Error::Parse {
            line: 0,
            message: format!("invalid header field {k:?}"),
        };
        let convention = match get("convention")?.as_str() {
            "tdvp" => Convention::Tdvp,
            "mclachlan" => Convention::McLachlan,
            _ => return Err(parse_err("convention")),
        };
        let header = GridHeader {
            resolution: get("resolution")?.parse().map_err(|_| parse_err("resolution"))?,
            ansatz: get("ansatz")?,
            level: get("level")?.parse().map_err(|_| parse_err("level"))?,
            t: get("t")?.parse().map_err(|_| parse_err("t"))?,
            mode: get("mode")?.parse().map_err(|_| parse_err("mode"))?,
            seed: get("seed")?.parse().map_err(|_| parse_err("seed"))?,
            convention,
        };
        let expected = 6 * header.resolution * header.resolution;
        if rows.len() != expected {
            return Err(Error::Parse {
                line: 0,
                message: format!("expected {expected} rows, found {}", rows.len()),
            });
        }
        Ok(GridTable { header, rows })
    }
}
