//! Dense state vectors and gate kernels.
//!
//! Qubit `q` is bit `q` of the basis index, so qubit 0 is the least
//! significant bit. Gates are applied in place by strided kernels; no
//! `2^n x 2^n` matrices are formed.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliMasks, PauliString, PauliSum};

type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Pure state of `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVec {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVec {
    /// `|0...0>`
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[index] = ONE;
        StateVec { n_qubits, amps }
    }

    /// `|+...+>`
    pub fn plus(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        StateVec {
            n_qubits,
            amps: vec![a; dim],
        }
    }

    /// Wraps raw amplitudes. The vector is not renormalized.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        Ok(StateVec {
            n_qubits: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= n);
        }
        self
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `alpha * self + beta * other`, for linearity checks on unnormalized vectors.
    pub fn combine(&self, alpha: Complex64, other: &StateVec, beta: Complex64) -> Result<StateVec> {
        check_dims(self, other)?;
        let amps = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(StateVec {
            n_qubits: self.n_qubits,
            amps,
        })
    }

    pub fn scaled(&self, factor: Complex64) -> StateVec {
        StateVec {
            n_qubits: self.n_qubits,
            amps: self.amps.iter().map(|a| a * factor).collect(),
        }
    }

    /// In-place gate application.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        apply_unchecked(&mut self.amps, gate, Control::NONE);
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for g in gates {
            self.apply(g)?;
        }
        Ok(())
    }

    /// Applies `gate` only on the branch where qubit `control` equals `value`.
    pub fn apply_controlled(&mut self, gate: &Gate, control: usize, value: bool) -> Result<()> {
        gate.validate(self.n_qubits)?;
        if control >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                index: control,
                n_qubits: self.n_qubits,
            });
        }
        if gate.targets().contains(&control) {
            return Err(Error::DuplicateTarget(control));
        }
        let ctrl = Control {
            mask: 1 << control,
            value: if value { 1 << control } else { 0 },
        };
        apply_unchecked(&mut self.amps, gate, ctrl);
        Ok(())
    }

    /// Multiplies by a Pauli string in place.
    pub fn apply_pauli(&mut self, pauli: &PauliString) -> Result<()> {
        if pauli.len() > self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: pauli.len(),
            });
        }
        pauli_kernel(&mut self.amps, pauli.masks(), Control::NONE);
        Ok(())
    }

    /// Probability that qubit `q` is measured as 1.
    pub fn probability_one(&self, q: usize) -> f64 {
        let bit = 1usize << q;
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Expectation `<self|P|self>` of a single Pauli string (complex in
    /// general; real for normalized states).
    pub fn pauli_expectation(&self, pauli: &PauliString) -> Complex64 {
        let m = pauli.masks();
        self.amps
            .iter()
            .enumerate()
            .map(|(b, a)| self.amps[b ^ m.x].conj() * m.phase(b) * a)
            .sum()
    }
}

/// Returns a new state with `gate` applied.
pub fn apply_gate(state: &StateVec, gate: &Gate) -> Result<StateVec> {
    let mut out = state.clone();
    out.apply(gate)?;
    Ok(out)
}

fn check_dims(a: &StateVec, b: &StateVec) -> Result<()> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: a.n_qubits,
            found: b.n_qubits,
        });
    }
    Ok(())
}

/// `<a|b>`, conjugate-linear in `a`.
pub fn inner(a: &StateVec, b: &StateVec) -> Result<Complex64> {
    check_dims(a, b)?;
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

/// Global-phase-insensitive overlap `|<a|b>|^2`.
pub fn fidelity(a: &StateVec, b: &StateVec) -> Result<f64> {
    Ok(inner(a, b)?.norm_sqr())
}

/// `<state|obs|state>` for a Hermitian Pauli sum acting on at most
/// `state.n_qubits()` qubits.
pub fn expect_pauli(state: &StateVec, obs: &PauliSum) -> Result<f64> {
    if obs.n_qubits() > state.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: state.n_qubits,
            found: obs.n_qubits(),
        });
    }
    Ok(obs
        .terms()
        .iter()
        .map(|(c, p)| c * state.pauli_expectation(p).re)
        .sum())
}

/// `H|psi>` for a Pauli sum, written into `out` (accumulating from zero).
pub(crate) fn apply_pauli_sum_into(h: &[(f64, PauliMasks)], psi: &[Complex64], out: &mut [Complex64]) {
    out.iter_mut().for_each(|o| *o = ZERO);
    for &(c, m) in h {
        for (b, a) in psi.iter().enumerate() {
            out[b ^ m.x] += c * m.phase(b) * a;
        }
    }
}

/// Measurement outcome counts. Bitstrings print with qubit 0 first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    n_qubits: usize,
    counts: BTreeMap<usize, u64>,
}

impl Histogram {
    pub fn new(n_qubits: usize) -> Self {
        Histogram {
            n_qubits,
            counts: BTreeMap::new(),
        }
    }

    pub fn from_counts(n_qubits: usize, counts: impl IntoIterator<Item = (usize, u64)>) -> Self {
        let mut h = Histogram::new(n_qubits);
        for (k, c) in counts {
            h.add(k, c);
        }
        h
    }

    pub fn add(&mut self, outcome: usize, count: u64) {
        if count > 0 {
            *self.counts.entry(outcome).or_insert(0) += count;
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn counts(&self) -> &BTreeMap<usize, u64> {
        &self.counts
    }

    pub fn count(&self, outcome: usize) -> u64 {
        self.counts.get(&outcome).copied().unwrap_or(0)
    }

    pub fn shots(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Relative frequencies over all `2^n` outcomes.
    pub fn frequencies(&self) -> Vec<f64> {
        let total = self.shots() as f64;
        let mut f = vec![0.0; 1 << self.n_qubits];
        if total > 0.0 {
            for (&k, &c) in &self.counts {
                f[k] = c as f64 / total;
            }
        }
        f
    }

    pub fn bitstring(&self, outcome: usize) -> String {
        (0..self.n_qubits)
            .map(|q| if outcome >> q & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    /// Counts keyed by bitstring.
    pub fn by_bitstring(&self) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .map(|(&k, &c)| (self.bitstring(k), c))
            .collect()
    }
}

impl fmt::Display for Histogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .counts
            .iter()
            .map(|(&k, c)| format!("\"{}\": {}", self.bitstring(k), c))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Samples `shots` computational-basis outcomes from `|amplitude|^2`.
pub fn sample_bitstrings(state: &StateVec, shots: u64, seed: u64) -> Result<Histogram> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_bitstrings_with(state, shots, &mut rng)
}

pub fn sample_bitstrings_with<R: Rng + ?Sized>(state: &StateVec, shots: u64, rng: &mut R) -> Result<Histogram> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let probs = state.probabilities();
    let dist = WeightedIndex::new(&probs).map_err(|e| Error::InvalidConfig(format!("cannot sample state: {e}")))?;
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..shots {
        counts[dist.sample(rng)] += 1;
    }
    Ok(Histogram::from_counts(
        state.n_qubits,
        counts.into_iter().enumerate().filter(|(_, c)| *c > 0),
    ))
}

/// Gate set. Rotations follow `R_P(a) = exp(-i a P / 2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    H(usize),
    X(usize),
    Y(usize),
    Z(usize),
    S(usize),
    Sdg(usize),
    Rx(usize, f64),
    Ry(usize, f64),
    Rz(usize, f64),
    Cz(usize, usize),
    Cnot { control: usize, target: usize },
    /// `exp(-i a P / 2)` for a Pauli string `P`.
    PauliRotation { pauli: PauliString, angle: f64 },
    /// Multiplication by a Pauli string; used for derivative insertions and
    /// Hamiltonian terms in Hadamard tests.
    Pauli(PauliString),
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::H(_) => "H",
            Gate::X(_) => "X",
            Gate::Y(_) => "Y",
            Gate::Z(_) => "Z",
            Gate::S(_) => "S",
            Gate::Sdg(_) => "SDG",
            Gate::Rx(..) => "RX",
            Gate::Ry(..) => "RY",
            Gate::Rz(..) => "RZ",
            Gate::Cz(..) => "CZ",
            Gate::Cnot { .. } => "CNOT",
            Gate::PauliRotation { .. } => "PR",
            Gate::Pauli(_) => "P",
        }
    }

    pub fn targets(&self) -> Vec<usize> {
        match self {
            Gate::H(q) | Gate::X(q) | Gate::Y(q) | Gate::Z(q) | Gate::S(q) | Gate::Sdg(q) => vec![*q],
            Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::Rz(q, _) => vec![*q],
            Gate::Cz(a, b) => vec![*a, *b],
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::PauliRotation { pauli, .. } | Gate::Pauli(pauli) => pauli.support(),
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match self {
            Gate::Rx(_, a) | Gate::Ry(_, a) | Gate::Rz(_, a) => Some(*a),
            Gate::PauliRotation { angle, .. } => Some(*angle),
            _ => None,
        }
    }

    pub fn is_rotation(&self) -> bool {
        self.angle().is_some()
    }

    /// Copy of a rotation gate with a new angle; other gates are returned unchanged.
    pub fn with_angle(&self, a: f64) -> Gate {
        match self {
            Gate::Rx(q, _) => Gate::Rx(*q, a),
            Gate::Ry(q, _) => Gate::Ry(*q, a),
            Gate::Rz(q, _) => Gate::Rz(*q, a),
            Gate::PauliRotation { pauli, .. } => Gate::PauliRotation {
                pauli: pauli.clone(),
                angle: a,
            },
            g => g.clone(),
        }
    }

    /// Pauli generator `P` of a rotation `exp(-i a P / 2)`, padded to `n` qubits.
    pub fn generator(&self, n: usize) -> Option<PauliString> {
        let single = |q: usize, p: Pauli| PauliString::from_sparse(n, &[(q, p)]).ok();
        match self {
            Gate::Rx(q, _) => single(*q, Pauli::X),
            Gate::Ry(q, _) => single(*q, Pauli::Y),
            Gate::Rz(q, _) => single(*q, Pauli::Z),
            Gate::PauliRotation { pauli, .. } => Some(pauli.padded(n)),
            _ => None,
        }
    }

    pub fn inverse(&self) -> Gate {
        match self {
            Gate::S(q) => Gate::Sdg(*q),
            Gate::Sdg(q) => Gate::S(*q),
            Gate::Rx(q, a) => Gate::Rx(*q, -a),
            Gate::Ry(q, a) => Gate::Ry(*q, -a),
            Gate::Rz(q, a) => Gate::Rz(*q, -a),
            Gate::PauliRotation { pauli, angle } => Gate::PauliRotation {
                pauli: pauli.clone(),
                angle: -angle,
            },
            g => g.clone(),
        }
    }

    /// Diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        match self {
            Gate::Z(_) | Gate::S(_) | Gate::Sdg(_) | Gate::Rz(..) | Gate::Cz(..) => true,
            Gate::PauliRotation { pauli, .. } | Gate::Pauli(pauli) => pauli.is_diagonal(),
            _ => false,
        }
    }

    /// Checks target validity against a register of `n_qubits`.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if let Some(a) = self.angle() {
            if !a.is_finite() {
                return Err(Error::NonUnitary(format!("{} with angle {a}", self.name())));
            }
        }
        if let Gate::PauliRotation { pauli, .. } | Gate::Pauli(pauli) = self {
            if pauli.len() > n_qubits {
                return Err(Error::DimensionMismatch {
                    expected: n_qubits,
                    found: pauli.len(),
                });
            }
        }
        let targets = self.targets();
        for (k, &q) in targets.iter().enumerate() {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange { index: q, n_qubits });
            }
            if targets[..k].contains(&q) {
                return Err(Error::DuplicateTarget(q));
            }
        }
        Ok(())
    }

    fn matrix_1q(&self) -> Option<(usize, Mat2)> {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let m = match self {
            Gate::H(q) => (*q, [[h, h], [h, -h]]),
            Gate::X(q) => (*q, [[ZERO, ONE], [ONE, ZERO]]),
            Gate::Y(q) => (*q, [[ZERO, -I], [I, ZERO]]),
            Gate::Z(q) => (*q, [[ONE, ZERO], [ZERO, -ONE]]),
            Gate::S(q) => (*q, [[ONE, ZERO], [ZERO, I]]),
            Gate::Sdg(q) => (*q, [[ONE, ZERO], [ZERO, -I]]),
            Gate::Rx(q, a) => {
                let (c, s) = ((a / 2.0).cos(), (a / 2.0).sin());
                (*q, [[c.into(), -I * s], [-I * s, c.into()]])
            }
            Gate::Ry(q, a) => {
                let (c, s) = ((a / 2.0).cos(), (a / 2.0).sin());
                (*q, [[c.into(), (-s).into()], [s.into(), c.into()]])
            }
            Gate::Rz(q, a) => {
                let e = Complex64::from_polar(1.0, -a / 2.0);
                (*q, [[e, ZERO], [ZERO, e.conj()]])
            }
            _ => return None,
        };
        Some(m)
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::Cz(a, b) => write!(f, "CZ q{a} q{b}"),
            Gate::Cnot { control, target } => write!(f, "CNOT q{control} q{target}"),
            Gate::PauliRotation { pauli, angle } => write!(f, "PR {pauli} {angle:?}"),
            Gate::Pauli(p) => write!(f, "P {p}"),
            g => {
                let q = g.targets()[0];
                match g.angle() {
                    Some(a) => write!(f, "{} q{q} {a:?}", g.name()),
                    None => write!(f, "{} q{q}", g.name()),
                }
            }
        }
    }
}

/// Restricts a kernel to basis states with `index & mask == value`.
#[derive(Debug, Clone, Copy)]
struct Control {
    mask: usize,
    value: usize,
}

impl Control {
    const NONE: Control = Control { mask: 0, value: 0 };

    #[inline]
    fn admits(&self, index: usize) -> bool {
        index & self.mask == self.value
    }
}

fn apply_unchecked(amps: &mut [Complex64], gate: &Gate, ctrl: Control) {
    if let Some((q, m)) = gate.matrix_1q() {
        single_qubit_kernel(amps, q, &m, ctrl);
        return;
    }
    match gate {
        Gate::Cz(a, b) => {
            let both = (1 << a) | (1 << b);
            for (i, amp) in amps.iter_mut().enumerate() {
                if i & both == both && ctrl.admits(i) {
                    *amp = -*amp;
                }
            }
        }
        Gate::Cnot { control, target } => {
            let c = 1 << control;
            let t = 1 << target;
            for i in 0..amps.len() {
                if i & c != 0 && i & t == 0 && ctrl.admits(i) {
                    amps.swap(i, i | t);
                }
            }
        }
        Gate::PauliRotation { pauli, angle } => rotation_kernel(amps, pauli.masks(), *angle, ctrl),
        Gate::Pauli(pauli) => pauli_kernel(amps, pauli.masks(), ctrl),
        _ => unreachable!("single-qubit gates handled above"),
    }
}

fn single_qubit_kernel(amps: &mut [Complex64], q: usize, m: &Mat2, ctrl: Control) {
    let bit = 1usize << q;
    let dim = amps.len();
    // iterate over blocks of size 2*bit, pairing i with i|bit
    let mut base = 0;
    while base < dim {
        for i in base..base + bit {
            if !ctrl.admits(i) {
                continue;
            }
            let j = i | bit;
            let (a0, a1) = (amps[i], amps[j]);
            amps[i] = m[0][0] * a0 + m[0][1] * a1;
            amps[j] = m[1][0] * a0 + m[1][1] * a1;
        }
        base += 2 * bit;
    }
}

fn pauli_kernel(amps: &mut [Complex64], m: PauliMasks, ctrl: Control) {
    if m.x == 0 {
        for (b, a) in amps.iter_mut().enumerate() {
            if ctrl.admits(b) {
                *a *= m.phase(b);
            }
        }
        return;
    }
    let pivot = 1usize << (usize::BITS - 1 - m.x.leading_zeros());
    for b in 0..amps.len() {
        // visit each pair {b, b ^ x} once, from the member with the pivot bit clear
        if b & pivot != 0 || !ctrl.admits(b) {
            continue;
        }
        let c = b ^ m.x;
        let (ab, ac) = (amps[b], amps[c]);
        amps[c] = m.phase(b) * ab;
        amps[b] = m.phase(c) * ac;
    }
}

fn rotation_kernel(amps: &mut [Complex64], m: PauliMasks, angle: f64, ctrl: Control) {
    let cos = Complex64::new((angle / 2.0).cos(), 0.0);
    let msin = Complex64::new(0.0, -(angle / 2.0).sin());
    if m.x == 0 {
        for (b, a) in amps.iter_mut().enumerate() {
            if ctrl.admits(b) {
                *a *= cos + msin * m.phase(b);
            }
        }
        return;
    }
    let pivot = 1usize << (usize::BITS - 1 - m.x.leading_zeros());
    for b in 0..amps.len() {
        if b & pivot != 0 || !ctrl.admits(b) {
            continue;
        }
        let c = b ^ m.x;
        let (ab, ac) = (amps[b], amps[c]);
        amps[b] = cos * ab + msin * m.phase(c) * ac;
        amps[c] = cos * ac + msin * m.phase(b) * ab;
    }
}

/// Full unitary of a gate list on `n` qubits, column `k` = image of `|k>`.
/// Intended for small registers (tests and compiler checks).
pub fn circuit_unitary(n: usize, gates: &[Gate]) -> Result<Vec<Vec<Complex64>>> {
    (0..1usize << n)
        .map(|k| {
            let mut s = StateVec::basis(n, k);
            s.apply_all(gates)?;
            Ok(s.into_amplitudes())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_state(s: &StateVec, expected: &[Complex64]) {
        for (a, b) in s.amplitudes().iter().zip(expected) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-12);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn hadamard_on_zero() {
        let s = apply_gate(&StateVec::zero(1), &Gate::H(0)).unwrap();
        assert_state(&s, &[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]);
    }

    #[test]
    fn rx_pi_on_zero() {
        let s = apply_gate(&StateVec::zero(1), &Gate::Rx(0, PI)).unwrap();
        assert_state(&s, &[c(0.0, 0.0), c(0.0, -1.0)]);
    }

    #[test]
    fn cz_on_plus_plus() {
        let s = apply_gate(&StateVec::plus(2), &Gate::Cz(0, 1)).unwrap();
        assert_state(&s, &[c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(-0.5, 0.0)]);
    }

    #[test]
    fn cnot_respects_bit_order() {
        // |q0=1, q1=0> is index 1; CNOT(0 -> 1) sends it to index 3
        let s = apply_gate(&StateVec::basis(2, 1), &Gate::Cnot { control: 0, target: 1 }).unwrap();
        assert_eq!(s.amplitudes()[3], ONE);
    }

    #[test]
    fn invalid_targets() {
        let mut s = StateVec::zero(2);
        assert_eq!(s.apply(&Gate::H(2)), Err(Error::QubitOutOfRange { index: 2, n_qubits: 2 }));
        assert_eq!(s.apply(&Gate::Cz(1, 1)), Err(Error::DuplicateTarget(1)));
        assert!(s.apply(&Gate::Rx(0, f64::NAN)).is_err());
    }

    #[test]
    fn inner_products() {
        let zero = StateVec::zero(1);
        let plus = StateVec::plus(1);
        assert_abs_diff_eq!(inner(&zero, &plus).unwrap().re, FRAC_1_SQRT_2, epsilon = 1e-15);
        let h = FRAC_1_SQRT_2;
        let ghz = StateVec::from_amplitudes(vec![c(h, 0.0), ZERO, ZERO, c(h, 0.0)]).unwrap();
        let phi_minus = StateVec::from_amplitudes(vec![c(h, 0.0), ZERO, ZERO, c(-h, 0.0)]).unwrap();
        assert_abs_diff_eq!(inner(&ghz, &phi_minus).unwrap().norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(inner(&ghz, &ghz).unwrap().re, 1.0, epsilon = 1e-15);
        assert!(inner(&zero, &ghz).is_err());
    }

    #[test]
    fn pauli_expectations() {
        let xs = |s: &str, c: f64| PauliSum::new(s.len(), vec![(c, s.parse().unwrap())]).unwrap();
        assert_abs_diff_eq!(expect_pauli(&StateVec::plus(1), &xs("X", 1.0)).unwrap(), 1.0, epsilon = 1e-14);
        let h = FRAC_1_SQRT_2;
        let mut amps = vec![ZERO; 8];
        amps[0] = c(h, 0.0);
        amps[7] = c(h, 0.0);
        let ghz3 = StateVec::from_amplitudes(amps).unwrap();
        assert_abs_diff_eq!(expect_pauli(&ghz3, &xs("XXX", 1.0)).unwrap(), 1.0, epsilon = 1e-14);
        let h0 = PauliSum::new(2, vec![(-1.0, "XI".parse().unwrap()), (-1.0, "IX".parse().unwrap())]).unwrap();
        assert_abs_diff_eq!(expect_pauli(&StateVec::plus(2), &h0).unwrap(), -2.0, epsilon = 1e-14);
        // observable wider than the state
        assert!(expect_pauli(&StateVec::plus(1), &h0).is_err());
    }

    #[test]
    fn sampling_basics() {
        let h = sample_bitstrings(&StateVec::zero(1), 100, 7).unwrap();
        assert_eq!(h.by_bitstring(), BTreeMap::from([("0".to_string(), 100)]));
        assert_eq!(sample_bitstrings(&StateVec::zero(1), 0, 7), Err(Error::ZeroShots));
        let a = sample_bitstrings(&StateVec::plus(3), 1000, 11).unwrap();
        let b = sample_bitstrings(&StateVec::plus(3), 1000, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_frequencies_converge() {
        let plus = sample_bitstrings(&StateVec::plus(1), 200_000, 3).unwrap().frequencies();
        assert_abs_diff_eq!(plus[0], 0.5, epsilon = 0.005);
        let h = FRAC_1_SQRT_2;
        let ghz = StateVec::from_amplitudes(vec![c(h, 0.0), ZERO, ZERO, c(h, 0.0)]).unwrap();
        let f = sample_bitstrings(&ghz, 200_000, 4).unwrap().frequencies();
        assert_abs_diff_eq!(f[0], 0.5, epsilon = 0.005);
        assert_abs_diff_eq!(f[3], 0.5, epsilon = 0.005);
        assert_eq!(f[1] + f[2], 0.0);
    }

    #[test]
    fn sampling_chi_square() {
        // fixed non-uniform 3-qubit state; 7 degrees of freedom, 0.999 quantile = 24.32
        let mut s = StateVec::zero(3);
        s.apply_all(&[Gate::Ry(0, 0.7), Gate::Ry(1, 1.9), Gate::Cnot { control: 0, target: 2 }, Gate::Rx(2, 0.4)])
            .unwrap();
        let shots = 100_000u64;
        let hist = sample_bitstrings(&s, shots, 2024).unwrap();
        let chi2: f64 = s
            .probabilities()
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let expected = p * shots as f64;
                (hist.count(k) as f64 - expected).powi(2) / expected
            })
            .sum();
        assert!(chi2 < 24.32, "chi2 = {chi2}");
    }

    #[test]
    fn histogram_bitstrings_put_qubit_zero_first() {
        let h = Histogram::from_counts(3, [(1usize, 2u64), (4, 1)]);
        assert_eq!(h.bitstring(1), "100");
        assert_eq!(h.bitstring(4), "001");
        assert_eq!(h.to_string(), "{\"100\": 2, \"001\": 1}");
    }

    #[test]
    fn controlled_application_only_touches_branch() {
        // ancilla = qubit 1 in |+>, X on qubit 0 controlled on ancilla = 1
        let mut s = StateVec::zero(2);
        s.apply(&Gate::H(1)).unwrap();
        s.apply_controlled(&Gate::X(0), 1, true).unwrap();
        let h = FRAC_1_SQRT_2;
        assert_state(&s, &[c(h, 0.0), ZERO, ZERO, c(h, 0.0)]);
        assert!(s.apply_controlled(&Gate::X(1), 1, true).is_err());
    }

    fn arb_state(n: usize) -> impl Strategy<Value = StateVec> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n)
            .prop_map(|v| StateVec::from_amplitudes(v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap())
    }

    fn arb_gate(n: usize) -> impl Strategy<Value = Gate> {
        let q = 0..n;
        let angle = -7.0f64..7.0;
        prop_oneof![
            q.clone().prop_map(Gate::H),
            q.clone().prop_map(Gate::X),
            q.clone().prop_map(Gate::Y),
            q.clone().prop_map(Gate::Z),
            q.clone().prop_map(Gate::S),
            q.clone().prop_map(Gate::Sdg),
            (q.clone(), angle.clone()).prop_map(|(q, a)| Gate::Rx(q, a)),
            (q.clone(), angle.clone()).prop_map(|(q, a)| Gate::Ry(q, a)),
            (q.clone(), angle.clone()).prop_map(|(q, a)| Gate::Rz(q, a)),
            (q.clone(), 1..n).prop_map(move |(a, d)| Gate::Cz(a, (a + d) % n)),
            (q.clone(), 1..n).prop_map(move |(a, d)| Gate::Cnot { control: a, target: (a + d) % n }),
            (prop::collection::vec(0usize..4, n), angle).prop_map(|(ps, a)| Gate::PauliRotation {
                pauli: PauliString::new(ps.into_iter().map(|k| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][k]).collect()),
                angle: a,
            }),
        ]
    }

    proptest! {
        #[test]
        fn gate_then_inverse_is_identity(s in arb_state(3), g in arb_gate(3)) {
            let s = s.normalized();
            let mut t = s.clone();
            t.apply(&g).unwrap();
            prop_assert!((t.norm_sqr() - 1.0).abs() < 1e-10);
            t.apply(&g.inverse()).unwrap();
            for (a, b) in s.amplitudes().iter().zip(t.amplitudes()) {
                prop_assert!((a - b).norm() < 1e-10);
            }
        }

        #[test]
        fn gates_are_linear(a in arb_state(3), b in arb_state(3), g in arb_gate(3),
                            alpha in (-2.0f64..2.0, -2.0f64..2.0), beta in (-2.0f64..2.0, -2.0f64..2.0)) {
            let (alpha, beta) = (c(alpha.0, alpha.1), c(beta.0, beta.1));
            let lhs = apply_gate(&a.combine(alpha, &b, beta).unwrap(), &g).unwrap();
            let rhs = apply_gate(&a, &g).unwrap().combine(alpha, &apply_gate(&b, &g).unwrap(), beta).unwrap();
            for (x, y) in lhs.amplitudes().iter().zip(rhs.amplitudes()) {
                prop_assert!((x - y).norm() < 1e-10);
            }
        }

        #[test]
        fn single_pauli_expectation_bounded(s in arb_state(3), ps in prop::collection::vec(0usize..4, 3)) {
            let s = s.normalized();
            let p = PauliString::new(ps.into_iter().map(|k| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][k]).collect());
            let obs = PauliSum::new(3, vec![(1.0, p)]).unwrap();
            let e = expect_pauli(&s, &obs).unwrap();
            prop_assert!(e * e <= 1.0 + 1e-12);
        }
    }
}
