//! Parameterized circuits, analytic derivative branches, the reference
//! ansatze and a peephole compiler.
//!
//! # Text format
//!
//! One directive or gate per line; `#` starts a comment.
//!
//! ```text
//! qubits 2
//! params 2
//! H q0
//! RZ q0 theta:2
//! RX q0 theta:1
//! CNOT q0 q1
//! PR ZZ 0.25
//! ```
//!
//! `qubits` and `params` must precede the gates. Gate names are `H X Y Z S
//! SDG RX RY RZ CZ CNOT PR P`. Rotations take either a literal angle in
//! radians or `theta:k`, binding the gate to parameter slot `k` (1-based).
//! `PR` and `P` take a Pauli string in place of qubit operands.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};
use crate::statevector::{Gate, StateVec};

/// A gate optionally driven by a parameter slot (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundGate {
    pub gate: Gate,
    pub slot: Option<usize>,
}

/// Gate sequence acting on `|0...0>`, with parameter slots shared freely
/// between rotation gates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCircuit {
    n_qubits: usize,
    n_params: usize,
    gates: Vec<BoundGate>,
}

/// One branch of `dU/dtheta_i`: the circuit with `gate` inserted before
/// position `position`, weighted by `coefficient`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeTerm {
    pub param: usize,
    pub branch: usize,
    pub coefficient: Complex64,
    pub gate: Gate,
    pub position: usize,
}

impl ParamCircuit {
    pub fn new(n_qubits: usize, n_params: usize) -> Self {
        ParamCircuit {
            n_qubits,
            n_params,
            gates: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[BoundGate] {
        &self.gates
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        gate.validate(self.n_qubits)?;
        self.gates.push(BoundGate { gate, slot: None });
        Ok(self)
    }

    /// Appends a rotation whose angle is `theta[slot]`.
    pub fn push_param(&mut self, gate: Gate, slot: usize) -> Result<&mut Self> {
        gate.validate(self.n_qubits)?;
        if !gate.is_rotation() {
            return Err(Error::NotParameterizable(gate.to_string()));
        }
        if slot >= self.n_params {
            return Err(Error::ParameterCount {
                expected: self.n_params,
                found: slot + 1,
            });
        }
        self.gates.push(BoundGate {
            gate: gate.with_angle(0.0),
            slot: Some(slot),
        });
        Ok(self)
    }

    /// Checks that every slot drives at least one gate.
    pub fn validate(&self) -> Result<()> {
        for slot in 0..self.n_params {
            if !self.gates.iter().any(|g| g.slot == Some(slot)) {
                return Err(Error::UnusedParameter(slot));
            }
        }
        Ok(())
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params {
            return Err(Error::ParameterCount {
                expected: self.n_params,
                found: theta.len(),
            });
        }
        Ok(())
    }

    /// Gate list with every slot replaced by its value.
    pub fn concrete(&self, theta: &[f64]) -> Result<Vec<Gate>> {
        self.check_theta(theta)?;
        Ok(self
            .gates
            .iter()
            .map(|g| match g.slot {
                Some(s) => g.gate.with_angle(theta[s]),
                None => g.gate.clone(),
            })
            .collect())
    }

    /// `U(theta)|0...0>`
    pub fn evaluate(&self, theta: &[f64]) -> Result<StateVec> {
        let mut s = StateVec::zero(self.n_qubits);
        s.apply_all(&self.concrete(theta)?)?;
        Ok(s)
    }

    /// Derivative branches for slot `i`, one per gate bound to it.
    pub fn derivative_terms(&self, i: usize) -> Result<Vec<DerivativeTerm>> {
        if i >= self.n_params {
            return Err(Error::ParameterCount {
                expected: self.n_params,
                found: i + 1,
            });
        }
        let terms: Vec<DerivativeTerm> = self
            .gates
            .iter()
            .enumerate()
            .filter(|(_, g)| g.slot == Some(i))
            .enumerate()
            .map(|(branch, (position, g))| DerivativeTerm {
                param: i,
                branch,
                coefficient: Complex64::new(0.0, -0.5),
                gate: Gate::Pauli(g.gate.generator(self.n_qubits).expect("bound gates are rotations")),
                position,
            })
            .collect();
        if terms.is_empty() {
            return Err(Error::UnusedParameter(i));
        }
        Ok(terms)
    }

    /// Concrete gates of the branch circuit `U_{i,k}`.
    pub fn branch_gates(&self, theta: &[f64], term: &DerivativeTerm) -> Result<Vec<Gate>> {
        let mut gates = self.concrete(theta)?;
        gates.insert(term.position, term.gate.clone());
        Ok(gates)
    }

    pub fn branch_state(&self, theta: &[f64], term: &DerivativeTerm) -> Result<StateVec> {
        let mut s = StateVec::zero(self.n_qubits);
        s.apply_all(&self.branch_gates(theta, term)?)?;
        Ok(s)
    }

    /// `d|phi>/d theta_i` assembled from the derivative branches.
    pub fn tangent(&self, theta: &[f64], i: usize) -> Result<StateVec> {
        let mut acc = StateVec::from_amplitudes(vec![Complex64::new(0.0, 0.0); 1 << self.n_qubits])?;
        for term in self.derivative_terms(i)? {
            let b = self.branch_state(theta, &term)?;
            acc = acc.combine(Complex64::new(1.0, 0.0), &b, term.coefficient)?;
        }
        Ok(acc)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {}\nparams {}\n", self.n_qubits, self.n_params);
        for g in &self.gates {
            let line = match g.slot {
                None => g.gate.to_string(),
                Some(s) => {
                    let text = g.gate.to_string();
                    let head = text.rsplit_once(' ').map(|(h, _)| h).unwrap_or(&text);
                    format!("{head} theta:{}", s + 1)
                }
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<ParamCircuit> {
        let mut n_qubits = None;
        let mut n_params = None;
        let mut circuit: Option<ParamCircuit> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |message: String| Error::Parse { line: line_no, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let head = tokens[0].to_ascii_uppercase();
            match head.as_str() {
                "QUBITS" | "PARAMS" => {
                    if circuit.is_some() {
                        return Err(err(format!("{} must precede the gates", tokens[0])));
                    }
                    let value: usize = tokens
                        .get(1)
                        .and_then(|v| v.parse().ok())
                        .filter(|_| tokens.len() == 2)
                        .ok_or_else(|| err(format!("expected `{} <count>`", tokens[0])))?;
                    if head == "QUBITS" {
                        n_qubits = Some(value);
                    } else {
                        n_params = Some(value);
                    }
                }
                _ => {
                    let c = match circuit.as_mut() {
                        Some(c) => c,
                        None => {
                            let n = n_qubits.ok_or_else(|| err("missing `qubits` directive".into()))?;
                            circuit.insert(ParamCircuit::new(n, n_params.unwrap_or(0)))
                        }
                    };
                    let (gate, slot) = parse_gate(&head, &tokens[1..]).map_err(&err)?;
                    let pushed = match slot {
                        Some(s) if s == 0 || s > c.n_params => {
                            return Err(err(format!("parameter slot theta:{s} outside 1..={}", c.n_params)))
                        }
                        Some(s) => c.push_param(gate, s - 1).map(|_| ()),
                        None => c.push(gate).map(|_| ()),
                    };
                    pushed.map_err(|e| err(e.to_string()))?;
                }
            }
        }
        let c = match circuit {
            Some(c) => c,
            None => ParamCircuit::new(
                n_qubits.ok_or(Error::Parse {
                    line: 0,
                    message: "missing `qubits` directive".into(),
                })?,
                n_params.unwrap_or(0),
            ),
        };
        c.validate()?;
        Ok(c)
    }
}

fn parse_qubit(tok: &str) -> std::result::Result<usize, String> {
    tok.strip_prefix(['q', 'Q'])
        .unwrap_or(tok)
        .parse()
        .map_err(|_| format!("invalid qubit operand {tok:?}"))
}

enum AngleOperand {
    Literal(f64),
    Slot(usize),
}

fn parse_angle(tok: &str) -> std::result::Result<AngleOperand, String> {
    if let Some(k) = tok.strip_prefix("theta:") {
        return k.parse().map(AngleOperand::Slot).map_err(|_| format!("invalid slot {tok:?}"));
    }
    tok.parse()
        .map(AngleOperand::Literal)
        .map_err(|_| format!("invalid angle {tok:?}"))
}

fn parse_gate(head: &str, ops: &[&str]) -> std::result::Result<(Gate, Option<usize>), String> {
    let arity = |k: usize| {
        if ops.len() == k {
            Ok(())
        } else {
            Err(format!("{head} takes {k} operand(s), got {}", ops.len()))
        }
    };
    let single = |f: fn(usize) -> Gate| -> std::result::Result<(Gate, Option<usize>), String> {
        arity(1)?;
        Ok((f(parse_qubit(ops[0])?), None))
    };
    let rotation = |f: fn(usize, f64) -> Gate| -> std::result::Result<(Gate, Option<usize>), String> {
        arity(2)?;
        let q = parse_qubit(ops[0])?;
        Ok(match parse_angle(ops[1])? {
            AngleOperand::Literal(a) => (f(q, a), None),
            AngleOperand::Slot(s) => (f(q, 0.0), Some(s)),
        })
    };
    match head {
        "H" => single(Gate::H),
        "X" => single(Gate::X),
        "Y" => single(Gate::Y),
        "Z" => single(Gate::Z),
        "S" => single(Gate::S),
        "SDG" => single(Gate::Sdg),
        "RX" => rotation(Gate::Rx),
        "RY" => rotation(Gate::Ry),
        "RZ" => rotation(Gate::Rz),
        "CZ" => {
            arity(2)?;
            Ok((Gate::Cz(parse_qubit(ops[0])?, parse_qubit(ops[1])?), None))
        }
        "CNOT" => {
            arity(2)?;
            Ok((
                Gate::Cnot {
                    control: parse_qubit(ops[0])?,
                    target: parse_qubit(ops[1])?,
                },
                None,
            ))
        }
        "PR" => {
            arity(2)?;
            let pauli: PauliString = ops[0].parse().map_err(|e: Error| e.to_string())?;
            Ok(match parse_angle(ops[1])? {
                AngleOperand::Literal(angle) => (Gate::PauliRotation { pauli, angle }, None),
                AngleOperand::Slot(s) => (Gate::PauliRotation { pauli, angle: 0.0 }, Some(s)),
            })
        }
        "P" => {
            arity(1)?;
            Ok((Gate::Pauli(ops[0].parse().map_err(|e: Error| e.to_string())?), None))
        }
        other => Err(format!("unknown gate {other:?}")),
    }
}

/// Names of the built-in ansatz families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzName {
    Tfim2Even,
    Tfim2Odd,
    Tfim3Qaoa,
}

impl AnsatzName {
    pub const ALL: [AnsatzName; 3] = [AnsatzName::Tfim2Even, AnsatzName::Tfim2Odd, AnsatzName::Tfim3Qaoa];

    pub fn as_str(self) -> &'static str {
        match self {
            AnsatzName::Tfim2Even => "tfim2_even",
            AnsatzName::Tfim2Odd => "tfim2_odd",
            AnsatzName::Tfim3Qaoa => "tfim3_qaoa",
        }
    }

    pub fn n_qubits(self) -> usize {
        match self {
            AnsatzName::Tfim2Even | AnsatzName::Tfim2Odd => 2,
            AnsatzName::Tfim3Qaoa => 3,
        }
    }

    /// Eigenstate indices of `H0` (ascending energy) the family can start from.
    pub fn levels(self) -> &'static [usize] {
        match self {
            AnsatzName::Tfim2Even => &[0, 3],
            AnsatzName::Tfim2Odd => &[1, 2],
            AnsatzName::Tfim3Qaoa => &[0],
        }
    }
}

impl fmt::Display for AnsatzName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnsatzName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AnsatzName::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::UnknownAnsatz(s.to_string()))
    }
}

/// A ready-to-run ansatz: circuit plus the starting parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub name: AnsatzName,
    pub level: usize,
    pub circuit: ParamCircuit,
    pub theta0: Vec<f64>,
}

/// Builds a reference ansatz on `n` spins starting from eigenstate `level`
/// of `H0` (levels counted upward from the ground state).
///
/// * `tfim2_even` (levels 0, 3): a single-qubit rotation pair on qubit 0
///   lifted to the even-parity pair space by a fixed Clifford map. Starts in
///   `|++>` or `|-->` and reaches the ferromagnetic Bell states.
/// * `tfim2_odd` (levels 1, 2): Bell-state preparation followed by `RZ` and
///   `RX` on qubit 0.
/// * `tfim3_qaoa` (level 0): `|+++>`, then `ZZ` rotations on the open bonds
///   sharing `theta_2`, then `YZ`/`ZY` rotations sharing `theta_1`.
pub fn reference_ansatz(name: AnsatzName, n: usize, level: usize) -> Result<AnsatzSpec> {
    if n != name.n_qubits() || !name.levels().contains(&level) {
        return Err(Error::UnsupportedAnsatz {
            name: name.to_string(),
            n,
            level,
        });
    }
    let mut c = ParamCircuit::new(n, 2);
    match name {
        AnsatzName::Tfim2Even => {
            c.push(Gate::H(0))?;
            c.push(if level == 0 { Gate::S(0) } else { Gate::Sdg(0) })?;
            c.push_param(Gate::Rz(0, 0.0), 1)?;
            c.push_param(Gate::Rx(0, 0.0), 0)?;
            c.push(Gate::Sdg(0))?;
            c.push(Gate::H(0))?;
            c.push(Gate::Cnot { control: 0, target: 1 })?;
            c.push(Gate::H(0))?;
            c.push(Gate::H(1))?;
        }
        AnsatzName::Tfim2Odd => {
            c.push(Gate::X(0))?;
            c.push(Gate::H(0))?;
            c.push(Gate::Cnot { control: 0, target: 1 })?;
            if level == 2 {
                c.push(Gate::X(1))?;
            }
            c.push_param(Gate::Rz(0, 0.0), 1)?;
            c.push_param(Gate::Rx(0, 0.0), 0)?;
        }
        AnsatzName::Tfim3Qaoa => {
            for q in 0..3 {
                c.push(Gate::H(q))?;
            }
            let pr = |s: &str| -> Result<Gate> {
                Ok(Gate::PauliRotation {
                    pauli: s.parse()?,
                    angle: 0.0,
                })
            };
            c.push_param(pr("ZZI")?, 1)?;
            c.push_param(pr("IZZ")?, 1)?;
            c.push_param(pr("YZI")?, 0)?;
            c.push_param(pr("IZY")?, 0)?;
        }
    }
    c.validate()?;
    Ok(AnsatzSpec {
        name,
        level,
        circuit: c,
        theta0: vec![0.0; 2],
    })
}

/// Generators spanning an algebra that contains the gate, used as a
/// sufficient commutation test. `None` for gates with no simple description.
fn generators(gate: &Gate, n: usize) -> Option<Vec<PauliString>> {
    let one = |q: usize, p: Pauli| PauliString::from_sparse(n, &[(q, p)]).ok();
    let v = match gate {
        Gate::X(q) | Gate::Rx(q, _) => vec![one(*q, Pauli::X)?],
        Gate::Y(q) | Gate::Ry(q, _) => vec![one(*q, Pauli::Y)?],
        Gate::Z(q) | Gate::S(q) | Gate::Sdg(q) | Gate::Rz(q, _) => vec![one(*q, Pauli::Z)?],
        Gate::Cz(a, b) => vec![one(*a, Pauli::Z)?, one(*b, Pauli::Z)?],
        Gate::Cnot { control, target } => vec![one(*control, Pauli::Z)?, one(*target, Pauli::X)?],
        Gate::PauliRotation { pauli, .. } | Gate::Pauli(pauli) => vec![pauli.padded(n)],
        Gate::H(_) => return None,
    };
    Some(v)
}

fn gates_commute(a: &Gate, b: &Gate, n: usize) -> bool {
    let (ta, tb) = (a.targets(), b.targets());
    if ta.iter().all(|q| !tb.contains(q)) {
        return true;
    }
    if a.is_diagonal() && b.is_diagonal() {
        return true;
    }
    match (generators(a, n), generators(b, n)) {
        (Some(ga), Some(gb)) => ga.iter().all(|p| gb.iter().all(|r| p.commutes_with(r))),
        _ => false,
    }
}

/// Whether a gate is the identity, exactly when `period` is `4 pi` and up to
/// a sign when it is `2 pi`.
fn is_trivial(gate: &Gate, period: f64) -> bool {
    let vanishes = |a: f64| {
        let r = a.rem_euclid(period);
        r < 1e-14 || period - r < 1e-14
    };
    match gate {
        Gate::Pauli(p) => p.is_identity(),
        // exp(-i a I / 2) is a pure phase
        Gate::PauliRotation { pauli, angle } if pauli.is_identity() => period == TAU || vanishes(*angle),
        g => g.angle().is_some_and(vanishes),
    }
}

/// Outcome of trying to fuse `new` into an earlier gate `old`.
enum Fusion {
    Cancel,
    Merge(Gate),
    None,
}

fn fuse(old: &Gate, new: &Gate, n: usize) -> Fusion {
    use Gate::*;
    match (old, new) {
        (H(a), H(b)) | (X(a), X(b)) | (Y(a), Y(b)) | (Z(a), Z(b)) if a == b => Fusion::Cancel,
        (S(a), Sdg(b)) | (Sdg(a), S(b)) if a == b => Fusion::Cancel,
        (Cz(a, b), Cz(c, d)) if (a, b) == (c, d) || (a, b) == (d, c) => Fusion::Cancel,
        (Cnot { control: a, target: b }, Cnot { control: c, target: d }) if (a, b) == (c, d) => Fusion::Cancel,
        (Pauli(p), Pauli(r)) if p.padded(n) == r.padded(n) => Fusion::Cancel,
        (Rx(a, x), Rx(b, y)) if a == b => Fusion::Merge(Rx(*a, x + y)),
        (Ry(a, x), Ry(b, y)) if a == b => Fusion::Merge(Ry(*a, x + y)),
        (Rz(a, x), Rz(b, y)) if a == b => Fusion::Merge(Rz(*a, x + y)),
        (PauliRotation { pauli: p, angle: x }, PauliRotation { pauli: r, angle: y }) if p.padded(n) == r.padded(n) => {
            Fusion::Merge(PauliRotation {
                pauli: p.clone(),
                angle: x + y,
            })
        }
        _ => Fusion::None,
    }
}

/// One left-to-right sweep. Each incoming gate scans backward through the
/// output, passing gates it commutes with, until it finds a partner to
/// cancel or merge with or is blocked.
fn sweep(gates: &[Gate], n: usize, period: f64) -> Vec<Gate> {
    let mut out: Vec<Gate> = Vec::with_capacity(gates.len());
    for g in gates {
        if is_trivial(g, period) {
            continue;
        }
        let mut placed = false;
        for k in (0..out.len()).rev() {
            match fuse(&out[k], g, n) {
                Fusion::Cancel => {
                    out.remove(k);
                    placed = true;
                }
                Fusion::Merge(m) => {
                    if is_trivial(&m, period) {
                        out.remove(k);
                    } else {
                        out[k] = m;
                    }
                    placed = true;
                }
                Fusion::None => {
                    if gates_commute(&out[k], g, n) {
                        continue;
                    }
                }
            }
            break;
        }
        if !placed {
            out.push(g.clone());
        }
    }
    out
}

/// Peephole-optimizes a concrete gate list on `n_qubits` qubits. The result
/// implements the same unitary up to global phase and is never longer.
pub fn compile(gates: &[Gate], n_qubits: usize) -> Vec<Gate> {
    fixed_point(gates, n_qubits, TAU)
}

/// Like [`compile`] but keeps the global phase, for gate lists that run
/// under a control line.
pub fn compile_exact(gates: &[Gate], n_qubits: usize) -> Vec<Gate> {
    fixed_point(gates, n_qubits, 2.0 * TAU)
}

fn fixed_point(gates: &[Gate], n: usize, period: f64) -> Vec<Gate> {
    let mut current = gates.to_vec();
    loop {
        let next = sweep(&current, n, period);
        if next == current {
            return next;
        }
        current = next;
    }
}
