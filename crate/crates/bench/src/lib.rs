//! Shared fixtures for the benchmarks.

use vqdyn_core::circuit::{reference_ansatz, AnsatzName, ParamCircuit};
use vqdyn_core::estimator::{EstimatorConfig, EstimatorMode};
use vqdyn_core::hamiltonian::{build_tfim, Boundary};
use vqdyn_core::vqs::EvolutionProblem;
use vqdyn_core::{Gate, PauliString};

/// A brickwork layer of rotations and entanglers on `n` qubits.
pub fn layered_circuit(n: usize, layers: usize) -> Vec<Gate> {
    let mut gates = Vec::new();
    for l in 0..layers {
        let a = 0.1 + 0.37 * l as f64;
        for q in 0..n {
            gates.push(Gate::Ry(q, a + q as f64 * 0.11));
            gates.push(Gate::Rz(q, 0.5 * a));
        }
        for q in (l % 2..n.saturating_sub(1)).step_by(2) {
            gates.push(Gate::Cnot { control: q, target: q + 1 });
        }
        if n >= 2 {
            let zz: String = (0..n).map(|k| if k < 2 { 'Z' } else { 'I' }).collect();
            gates.push(Gate::PauliRotation {
                pauli: zz.parse::<PauliString>().expect("valid Pauli text"),
                angle: a,
            });
        }
    }
    gates
}

/// Gate list containing many cancelling and mergeable neighbours.
pub fn redundant_circuit(n: usize, blocks: usize) -> Vec<Gate> {
    let mut gates = Vec::new();
    for b in 0..blocks {
        let q = b % n;
        gates.extend([Gate::H(q), Gate::Rz(q, 0.3), Gate::Rz(q, -0.1), Gate::S(q), Gate::Sdg(q), Gate::H(q)]);
        if n > 1 {
            let t = (q + 1) % n;
            gates.extend([Gate::Cnot { control: q, target: t }, Gate::Cnot { control: q, target: t }]);
        }
    }
    gates
}

pub fn ansatz(name: AnsatzName) -> ParamCircuit {
    reference_ansatz(name, name.n_qubits(), name.levels()[0]).expect("reference ansatz").circuit
}

pub fn tfim_terms(n: usize) -> (vqdyn_core::PauliSum, vqdyn_core::PauliSum) {
    build_tfim(n, Boundary::Periodic).expect("valid chain")
}

/// Ground-state problem with the given estimator and sweep length.
pub fn problem(name: AnsatzName, mode: EstimatorMode, total_time: f64) -> EvolutionProblem {
    let mut p = EvolutionProblem::tfim(name, name.levels()[0]).expect("reference problem");
    p.schedule = vqdyn_core::Schedule::new(total_time).expect("positive time");
    p.estimator = EstimatorConfig::with_mode(mode);
    p
}
