//! Pauli strings and weighted Pauli sums.
//!
//! A Pauli string is stored densely: character `k` acts on qubit `k`. The
//! text form follows the same order, so `"XZI"` is X on qubit 0, Z on qubit 1
//! and identity on qubit 2.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Whether the two single-qubit operators commute.
    pub fn commutes_with(self, other: Pauli) -> bool {
        self == Pauli::I || other == Pauli::I || self == other
    }
}

/// Bit masks describing the action of a Pauli string on computational basis
/// states: `P|b> = i^y_count * (-1)^{popcount(b & z)} |b ^ x>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct PauliMasks {
    pub x: usize,
    pub z: usize,
    pub y_count: u32,
}

impl PauliMasks {
    #[inline]
    pub fn phase(&self, basis: usize) -> Complex64 {
        let base = match self.y_count % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        if (basis & self.z).count_ones() % 2 == 1 {
            -base
        } else {
            base
        }
    }
}

/// Tensor product of single-qubit Paulis, one per qubit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn new(paulis: Vec<Pauli>) -> Self {
        PauliString(paulis)
    }

    pub fn identity(n: usize) -> Self {
        PauliString(vec![Pauli::I; n])
    }

    /// Identity on `n` qubits except for the listed `(qubit, pauli)` factors.
    pub fn from_sparse(n: usize, factors: &[(usize, Pauli)]) -> Result<Self> {
        let mut ops = vec![Pauli::I; n];
        for &(q, p) in factors {
            if q >= n {
                return Err(Error::QubitOutOfRange { index: q, n_qubits: n });
            }
            if ops[q] != Pauli::I {
                return Err(Error::DuplicateTarget(q));
            }
            ops[q] = p;
        }
        Ok(PauliString(ops))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, q: usize) -> Pauli {
        self.0.get(q).copied().unwrap_or(Pauli::I)
    }

    pub fn paulis(&self) -> &[Pauli] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&p| p == Pauli::I)
    }

    /// True when the string contains only I and Z factors.
    pub fn is_diagonal(&self) -> bool {
        self.0.iter().all(|&p| matches!(p, Pauli::I | Pauli::Z))
    }

    /// Qubits carrying a non-identity factor.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != Pauli::I)
            .map(|(q, _)| q)
            .collect()
    }

    /// Pauli strings commute iff they anticommute on an even number of sites.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let n = self.len().max(other.len());
        let anti = (0..n)
            .filter(|&q| !self.get(q).commutes_with(other.get(q)))
            .count();
        anti % 2 == 0
    }

    /// Same string padded with identities to `n` qubits.
    pub fn padded(&self, n: usize) -> PauliString {
        let mut ops = self.0.clone();
        if ops.len() < n {
            ops.resize(n, Pauli::I);
        }
        PauliString(ops)
    }

    pub(crate) fn masks(&self) -> PauliMasks {
        let mut x = 0usize;
        let mut z = 0usize;
        let mut y_count = 0u32;
        for (q, &p) in self.0.iter().enumerate() {
            match p {
                Pauli::I => {}
                Pauli::X => x |= 1 << q,
                Pauli::Z => z |= 1 << q,
                Pauli::Y => {
                    x |= 1 << q;
                    z |= 1 << q;
                    y_count += 1;
                }
            }
        }
        PauliMasks { x, z, y_count }
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let ops = s
            .trim()
            .chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| Error::InvalidPauli(s.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if ops.is_empty() {
            return Err(Error::InvalidPauli(s.to_string()));
        }
        Ok(PauliString(ops))
    }
}

/// Real-weighted sum of Pauli strings on a fixed number of qubits.
///
/// Construction merges duplicate strings and drops terms whose weight is
/// exactly zero, so every stored string is unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Self {
        PauliSum {
            n_qubits,
            terms: Vec::new(),
        }
    }

    pub fn new(n_qubits: usize, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        let mut sum = PauliSum::zero(n_qubits);
        for (c, p) in terms {
            sum.add_term(c, p)?;
        }
        Ok(sum)
    }

    /// Builds a sum from complex weights, rejecting any weight with a
    /// non-negligible imaginary part (the resulting operator would not be
    /// Hermitian).
    pub fn from_complex_terms(n_qubits: usize, terms: Vec<(Complex64, PauliString)>) -> Result<Self> {
        let mut sum = PauliSum::zero(n_qubits);
        for (c, p) in terms {
            if c.im.abs() > 1e-12 * c.re.abs().max(1.0) {
                return Err(Error::NonHermitian {
                    term: p.to_string(),
                    re: c.re,
                    im: c.im,
                });
            }
            sum.add_term(c.re, p)?;
        }
        Ok(sum)
    }

    pub fn add_term(&mut self, coeff: f64, pauli: PauliString) -> Result<()> {
        if pauli.len() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: pauli.len(),
            });
        }
        if let Some(pos) = self.terms.iter().position(|(_, p)| *p == pauli) {
            self.terms[pos].0 += coeff;
            if self.terms[pos].0 == 0.0 {
                self.terms.remove(pos);
            }
        } else if coeff != 0.0 {
            self.terms.push((coeff, pauli));
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Weight attached to `pauli`, zero when absent.
    pub fn coefficient(&self, pauli: &PauliString) -> f64 {
        self.terms
            .iter()
            .find(|(_, p)| p == pauli)
            .map_or(0.0, |(c, _)| *c)
    }

    pub fn scaled(&self, factor: f64) -> PauliSum {
        let mut out = PauliSum::zero(self.n_qubits);
        for (c, p) in &self.terms {
            // add_term drops exact zeros
            out.add_term(c * factor, p.clone()).expect("same width");
        }
        out
    }

    /// `a * self + b * other`, merged.
    pub fn linear_combination(a: f64, lhs: &PauliSum, b: f64, rhs: &PauliSum) -> Result<PauliSum> {
        if lhs.n_qubits != rhs.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: lhs.n_qubits,
                found: rhs.n_qubits,
            });
        }
        let mut out = PauliSum::zero(lhs.n_qubits);
        for (c, p) in &lhs.terms {
            out.add_term(a * c, p.clone())?;
        }
        for (c, p) in &rhs.terms {
            out.add_term(b * c, p.clone())?;
        }
        Ok(out)
    }

    /// Parses the line format `"<coeff> <pauli-string>"`. Blank lines and
    /// lines starting with `#` are ignored. Complex weights written as
    /// `a+bi` are accepted syntactically and rejected when `b != 0`.
    pub fn parse_text(text: &str) -> Result<PauliSum> {
        let mut terms: Vec<(Complex64, PauliString)> = Vec::new();
        let mut width: Option<usize> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(coeff), Some(pauli), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "expected \"<coeff> <pauli-string>\"".into(),
                });
            };
            let coeff = parse_weight(coeff).ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: format!("bad coefficient {coeff:?}"),
            })?;
            let pauli: PauliString = pauli.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("bad Pauli string {pauli:?}"),
            })?;
            match width {
                None => width = Some(pauli.len()),
                Some(w) if w != pauli.len() => {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: format!("string width {} differs from {}", pauli.len(), w),
                    })
                }
                _ => {}
            }
            terms.push((coeff, pauli));
        }
        let n = width.ok_or(Error::Parse {
            line: 0,
            message: "no terms".into(),
        })?;
        PauliSum::from_complex_terms(n, terms)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (c, p) in &self.terms {
            out.push_str(&format!("{c:?} {p}\n"));
        }
        out
    }
}

fn parse_weight(s: &str) -> Option<Complex64> {
    if let Ok(re) = s.parse::<f64>() {
        return Some(Complex64::new(re, 0.0));
    }
    s.parse::<Complex64>().ok()
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
