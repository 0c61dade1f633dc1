//! Transverse-field Ising chains, the linear annealing schedule and the exact
//! oracle used to score variational trajectories.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliMasks, PauliString, PauliSum};
use crate::statevector::{apply_pauli_sum_into, expect_pauli, StateVec};

/// Largest register handled by the dense eigensolver.
pub const MAX_DENSE_QUBITS: usize = 12;

/// Tolerated norm drift of the Runge-Kutta oracle over a full run.
pub const NORM_DRIFT_TOL: f64 = 1e-8;

/// Default oracle step.
pub const ORACLE_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Open,
    #[default]
    Periodic,
}

/// How a periodic two-spin chain counts its bond. Both wraparound bonds of a
/// two-site ring connect the same pair; `Single` keeps one of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoSiteBonds {
    #[default]
    Single,
    Double,
}

/// Returns `(H0, HT)` with `H0 = -sum X_j` and `HT = -sum Z_j Z_{j+1}`.
pub fn build_tfim(n: usize, boundary: Boundary) -> Result<(PauliSum, PauliSum)> {
    build_tfim_with(n, boundary, TwoSiteBonds::Single)
}

pub fn build_tfim_with(n: usize, boundary: Boundary, two_site: TwoSiteBonds) -> Result<(PauliSum, PauliSum)> {
    if n < 2 {
        return Err(Error::ChainTooShort(n));
    }
    let h0 = PauliSum::new(
        n,
        (0..n)
            .map(|j| Ok((-1.0, PauliString::from_sparse(n, &[(j, Pauli::X)])?)))
            .collect::<Result<_>>()?,
    )?;
    let zz = |a: usize, b: usize| PauliString::from_sparse(n, &[(a, Pauli::Z), (b, Pauli::Z)]);
    let mut bonds = Vec::new();
    for j in 0..n - 1 {
        bonds.push((-1.0, zz(j, j + 1)?));
    }
    if boundary == Boundary::Periodic {
        if n >= 3 {
            bonds.push((-1.0, zz(n - 1, 0)?));
        } else if two_site == TwoSiteBonds::Double {
            bonds.push((-1.0, zz(1, 0)?));
        }
    }
    Ok((h0, PauliSum::new(n, bonds)?))
}

/// Linear schedule `B(t) = 1 - t/T`, `J(t) = t/T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    total_time: f64,
}

impl Schedule {
    pub fn new(total_time: f64) -> Result<Self> {
        if !(total_time.is_finite() && total_time > 0.0) {
            return Err(Error::InvalidProblem(format!("total time must be positive, got {total_time}")));
        }
        Ok(Schedule { total_time })
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    /// Validates `t` and clamps round-off just outside the window.
    pub fn check(&self, t: f64) -> Result<f64> {
        let slack = 1e-9 * self.total_time;
        if !(t >= -slack && t <= self.total_time + slack) {
            return Err(Error::TimeOutOfRange {
                t,
                total: self.total_time,
            });
        }
        Ok(t.clamp(0.0, self.total_time))
    }

    pub fn b(&self, t: f64) -> f64 {
        1.0 - t / self.total_time
    }

    pub fn j(&self, t: f64) -> f64 {
        t / self.total_time
    }

    /// `(B(t), J(t))` after validating `t`.
    pub fn coefficients(&self, t: f64) -> Result<(f64, f64)> {
        let t = self.check(t)?;
        Ok((self.b(t), self.j(t)))
    }
}

pub fn hamiltonian_at(h0: &PauliSum, ht: &PauliSum, schedule: &Schedule, t: f64) -> Result<PauliSum> {
    let (b, j) = schedule.coefficients(t)?;
    PauliSum::linear_combination(b, h0, j, ht)
}

/// Dense matrix of a Pauli sum in the computational basis.
pub fn to_dense(h: &PauliSum) -> DMatrix<Complex64> {
    let dim = 1usize << h.n_qubits();
    let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for (c, p) in h.terms() {
        let masks = p.masks();
        for b in 0..dim {
            m[(b ^ masks.x, b)] += *c * masks.phase(b);
        }
    }
    m
}

/// Sorted eigenpairs of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<StateVec>,
}

impl Spectrum {
    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn ground_state(&self) -> &StateVec {
        &self.eigenvectors[0]
    }
}

pub fn eigenspectrum(h: &PauliSum) -> Result<Spectrum> {
    let n = h.n_qubits();
    if n > MAX_DENSE_QUBITS {
        return Err(Error::TooLarge {
            n,
            max: MAX_DENSE_QUBITS,
        });
    }
    let dense = to_dense(h);
    let eig = SymmetricEigen::new(dense.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut eigenvalues = Vec::with_capacity(order.len());
    let mut eigenvectors = Vec::with_capacity(order.len());
    for k in order {
        let lambda = eig.eigenvalues[k];
        let v = eig.eigenvectors.column(k).into_owned();
        let residual = (&dense * &v - v.scale(lambda)).norm();
        if residual > 1e-8 {
            return Err(Error::EigenResidual { residual });
        }
        eigenvalues.push(lambda);
        eigenvectors.push(StateVec::from_amplitudes(v.iter().copied().collect())?);
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Pauli sum pre-lowered to bit masks for repeated application.
#[derive(Debug, Clone)]
pub(crate) struct CompiledSum {
    terms: Vec<(f64, PauliMasks)>,
}

impl CompiledSum {
    pub fn new(h: &PauliSum) -> Self {
        CompiledSum {
            terms: h.terms().iter().map(|(c, p)| (*c, p.masks())).collect(),
        }
    }

    pub fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        apply_pauli_sum_into(&self.terms, psi, out);
    }
}

/// Fixed-step RK4 integrator for `d psi/dt = -i H(t) psi` with
/// `H(t) = B(t) H0 + J(t) HT`.
#[derive(Debug, Clone)]
pub struct Propagator {
    h0: CompiledSum,
    ht: CompiledSum,
    schedule: Schedule,
    dt: f64,
    t: f64,
    steps: u64,
    t_origin: f64,
    psi: StateVec,
    initial_norm: f64,
    scratch: [Vec<Complex64>; 6],
}

impl Propagator {
    pub fn new(initial: &StateVec, schedule: &Schedule, h0: &PauliSum, ht: &PauliSum, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidProblem(format!("oracle step must be positive, got {dt}")));
        }
        for h in [h0, ht] {
            if h.n_qubits() != initial.n_qubits() {
                return Err(Error::DimensionMismatch {
                    expected: initial.n_qubits(),
                    found: h.n_qubits(),
                });
            }
        }
        let dim = initial.dim();
        let zeros = || vec![Complex64::new(0.0, 0.0); dim];
        Ok(Propagator {
            h0: CompiledSum::new(h0),
            ht: CompiledSum::new(ht),
            schedule: *schedule,
            dt,
            t: 0.0,
            steps: 0,
            t_origin: 0.0,
            psi: initial.clone(),
            initial_norm: initial.norm_sqr().sqrt(),
            scratch: [zeros(), zeros(), zeros(), zeros(), zeros(), zeros()],
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &StateVec {
        &self.psi
    }

    /// `out = -i H(t) psi`
    fn derivative(h0: &CompiledSum, ht: &CompiledSum, schedule: &Schedule, t: f64, psi: &[Complex64], tmp: &mut [Complex64], out: &mut [Complex64]) {
        let (b, j) = (schedule.b(t), schedule.j(t));
        h0.apply(psi, out);
        ht.apply(psi, tmp);
        let mi = Complex64::new(0.0, -1.0);
        for (o, x) in out.iter_mut().zip(tmp.iter()) {
            *o = mi * (b * *o + j * x);
        }
    }

    fn rk4_step(&mut self, h: f64) {
        let t = self.t;
        let [k1, k2, k3, k4, tmp, stage] = &mut self.scratch;
        let psi = self.psi.amplitudes_mut();
        Self::derivative(&self.h0, &self.ht, &self.schedule, t, psi, tmp, k1);
        for i in 0..stage.len() {
            stage[i] = psi[i] + 0.5 * h * k1[i];
        }
        Self::derivative(&self.h0, &self.ht, &self.schedule, t + 0.5 * h, stage, tmp, k2);
        for i in 0..stage.len() {
            stage[i] = psi[i] + 0.5 * h * k2[i];
        }
        Self::derivative(&self.h0, &self.ht, &self.schedule, t + 0.5 * h, stage, tmp, k3);
        for i in 0..stage.len() {
            stage[i] = psi[i] + h * k3[i];
        }
        Self::derivative(&self.h0, &self.ht, &self.schedule, t + h, stage, tmp, k4);
        for i in 0..psi.len() {
            psi[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    /// Integrates forward to `target` with full steps of `dt` and one
    /// shortened final step when `target` is not on the step lattice.
    pub fn advance_to(&mut self, target: f64) -> Result<&StateVec> {
        let target = self.schedule.check(target)?;
        if target < self.t - 1e-12 {
            return Err(Error::InvalidProblem(format!(
                "propagator cannot step backwards from {} to {target}",
                self.t
            )));
        }
        loop {
            let next = self.t_origin + (self.steps + 1) as f64 * self.dt;
            if next > target + 1e-9 * self.dt {
                break;
            }
            self.rk4_step(next - self.t);
            self.steps += 1;
            self.t = next;
        }
        let rest = target - self.t;
        if rest > 1e-9 * self.dt {
            self.rk4_step(rest);
            // restart the lattice at the off-grid point
            self.t = target;
            self.t_origin = target;
            self.steps = 0;
        }
        let drift = (self.psi.norm_sqr().sqrt() - self.initial_norm).abs();
        if drift > NORM_DRIFT_TOL || !drift.is_finite() {
            return Err(Error::IntegrationFailure { t: self.t, drift });
        }
        Ok(&self.psi)
    }
}

/// Exact trajectory sampled on the integrator lattice.
#[derive(Debug, Clone)]
pub struct ExactPath {
    dt: f64,
    schedule: Schedule,
    h0: PauliSum,
    ht: PauliSum,
    states: Vec<StateVec>,
}

impl ExactPath {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn final_state(&self) -> &StateVec {
        self.states.last().expect("path holds at least the initial state")
    }

    /// State at time `t`. Lattice points are returned as stored; other times
    /// take one shortened RK4 step from the preceding lattice point.
    pub fn state_at(&self, t: f64) -> Result<StateVec> {
        let t = self.schedule.check(t)?;
        let k = ((t / self.dt) + 1e-9).floor() as usize;
        let k = k.min(self.states.len() - 1);
        let base = k as f64 * self.dt;
        if (t - base).abs() <= 1e-9 * self.dt {
            return Ok(self.states[k].clone());
        }
        let mut p = Propagator::new(&self.states[k], &self.schedule, &self.h0, &self.ht, self.dt)?;
        p.t = base;
        p.t_origin = base;
        p.initial_norm = self.states[0].norm_sqr().sqrt();
        Ok(p.advance_to(t)?.clone())
    }
}

/// Integrates the full schedule with RK4 at step `dt` and keeps every
/// lattice state. `T / dt` must be an integer.
pub fn exact_evolve(initial: &StateVec, schedule: &Schedule, h0: &PauliSum, ht: &PauliSum, dt: f64) -> Result<ExactPath> {
    let steps = step_count(schedule.total_time(), dt)?;
    let mut p = Propagator::new(initial, schedule, h0, ht, dt)?;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(initial.clone());
    for k in 1..=steps {
        states.push(p.advance_to(k as f64 * dt)?.clone());
    }
    Ok(ExactPath {
        dt,
        schedule: *schedule,
        h0: h0.clone(),
        ht: ht.clone(),
        states,
    })
}

/// Number of steps of size `dt` covering `[0, total]`; errors unless it is an integer.
pub fn step_count(total: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidProblem(format!("time step must be positive, got {dt}")));
    }
    let ratio = total / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) || steps < 1.0 {
        return Err(Error::InvalidProblem(format!("T / dt = {ratio} is not a positive integer")));
    }
    Ok(steps as usize)
}

/// RK4 propagation under a constant Hamiltonian for duration `t`.
pub fn evolve_time_independent(initial: &StateVec, h: &PauliSum, t: f64, dt: f64) -> Result<StateVec> {
    if t == 0.0 {
        return Ok(initial.clone());
    }
    // a schedule pinned at B = 1 reproduces the constant Hamiltonian exactly
    let schedule = Schedule::new(f64::MAX)?;
    let zero = PauliSum::zero(h.n_qubits());
    let mut p = Propagator::new(initial, &schedule, h, &zero, dt)?;
    Ok(p.advance_to(t)?.clone())
}

/// `<H>` for a state, convenience wrapper used by trajectory recording.
pub fn energy(state: &StateVec, h: &PauliSum) -> Result<f64> {
    expect_pauli(state, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    use crate::statevector::{fidelity, Gate};

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn three_spin_periodic_bonds() {
        let (h0, ht) = build_tfim(3, Boundary::Periodic).unwrap();
        assert_eq!(h0.len(), 3);
        assert_eq!(ht.len(), 3);
        for s in ["ZZI", "IZZ", "ZIZ"] {
            assert_eq!(ht.coefficient(&ps(s)), -1.0);
        }
        let spec = eigenspectrum(&h0).unwrap();
        assert_abs_diff_eq!(spec.ground_energy(), -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(spec.ground_state(), &StateVec::plus(3)).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bond_counts() {
        assert_eq!(build_tfim(2, Boundary::Periodic).unwrap().1.coefficient(&ps("ZZ")), -1.0);
        let (_, double) = build_tfim_with(2, Boundary::Periodic, TwoSiteBonds::Double).unwrap();
        assert_eq!(double.coefficient(&ps("ZZ")), -2.0);
        assert_eq!(build_tfim(5, Boundary::Open).unwrap().1.len(), 4);
        assert_eq!(build_tfim(5, Boundary::Periodic).unwrap().1.len(), 5);
        assert_eq!(build_tfim(1, Boundary::Open), Err(Error::ChainTooShort(1)));
    }

    #[test]
    fn schedule_endpoints_and_window() {
        let s = Schedule::new(10.0).unwrap();
        assert_eq!((s.b(0.0), s.j(0.0)), (1.0, 0.0));
        assert_eq!((s.b(10.0), s.j(10.0)), (0.0, 1.0));
        let (h0, ht) = build_tfim(2, Boundary::Periodic).unwrap();
        assert_eq!(hamiltonian_at(&h0, &ht, &s, 0.0).unwrap(), h0);
        assert_eq!(hamiltonian_at(&h0, &ht, &s, 10.0).unwrap(), ht);
        let mid = hamiltonian_at(&h0, &ht, &s, 5.0).unwrap();
        assert_eq!(mid.coefficient(&ps("XI")), -0.5);
        assert_eq!(mid.coefficient(&ps("IX")), -0.5);
        assert_eq!(mid.coefficient(&ps("ZZ")), -0.5);
        assert!(hamiltonian_at(&h0, &ht, &s, 10.5).is_err());
        assert!(hamiltonian_at(&h0, &ht, &s, -0.1).is_err());
    }

    #[test]
    fn two_spin_spectra() {
        let (h0, ht) = build_tfim(2, Boundary::Periodic).unwrap();
        let e0 = eigenspectrum(&h0).unwrap().eigenvalues;
        for (a, b) in e0.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let et = eigenspectrum(&ht).unwrap().eigenvalues;
        for (a, b) in et.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn three_spin_ferromagnetic_ground() {
        let (_, ht) = build_tfim(3, Boundary::Periodic).unwrap();
        let spec = eigenspectrum(&ht).unwrap();
        assert_abs_diff_eq!(spec.eigenvalues[0], -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(spec.eigenvalues[1], -3.0, epsilon = 1e-12);
        assert!(spec.eigenvalues[2] > -3.0 + 1.0);
        for v in &spec.eigenvectors[..2] {
            let p = v.probabilities();
            assert_abs_diff_eq!(p[0] + p[7], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn eigenvectors_orthonormal() {
        let (h0, ht) = build_tfim(3, Boundary::Periodic).unwrap();
        let h = hamiltonian_at(&h0, &ht, &Schedule::new(10.0).unwrap(), 3.7).unwrap();
        let spec = eigenspectrum(&h).unwrap();
        for (a, u) in spec.eigenvectors.iter().enumerate() {
            for (b, v) in spec.eigenvectors.iter().enumerate() {
                let ip = crate::statevector::inner(u, v).unwrap();
                let want = if a == b { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(ip.norm(), want, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn dense_limit() {
        let big = PauliSum::zero(13);
        assert!(matches!(eigenspectrum(&big), Err(Error::TooLarge { n: 13, .. })));
    }

    #[test]
    fn constant_x_rotation() {
        let h = PauliSum::new(1, vec![(1.0, ps("X"))]).unwrap();
        let s = evolve_time_independent(&StateVec::zero(1), &h, PI / 2.0, ORACLE_DT).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0].norm(), 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(s.amplitudes()[1].re, 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(s.amplitudes()[1].im, -1.0, epsilon = 1e-8);
    }

    #[test]
    fn energy_conserved_for_constant_hamiltonian() {
        let (h0, ht) = build_tfim(3, Boundary::Periodic).unwrap();
        let h = PauliSum::linear_combination(0.3, &h0, 0.7, &ht).unwrap();
        let mut s = StateVec::zero(3);
        s.apply_all(&[Gate::Ry(0, 0.4), Gate::Rx(1, 1.1), Gate::Cnot { control: 1, target: 2 }]).unwrap();
        let e0 = energy(&s, &h).unwrap();
        for t in [0.5, 2.0, 5.0] {
            let st = evolve_time_independent(&s, &h, t, ORACLE_DT).unwrap();
            assert_abs_diff_eq!(energy(&st, &h).unwrap(), e0, epsilon = 1e-8);
        }
    }

    #[test]
    fn adiabatic_two_spin_ground() {
        let (h0, ht) = build_tfim(2, Boundary::Periodic).unwrap();
        let sched = Schedule::new(10.0).unwrap();
        let path = exact_evolve(&StateVec::plus(2), &sched, &h0, &ht, ORACLE_DT).unwrap();
        let h = FRAC_1_SQRT_2;
        let ghz = StateVec::from_amplitudes(vec![h.into(), 0.0.into(), 0.0.into(), h.into()]).unwrap();
        assert!(fidelity(&ghz, path.final_state()).unwrap() >= 0.99);
        // off-lattice lookup lies between neighbours
        let mid = path.state_at(5.0005).unwrap();
        assert_abs_diff_eq!(mid.norm_sqr(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn singlet_is_stationary() {
        let (h0, ht) = build_tfim(2, Boundary::Periodic).unwrap();
        let sched = Schedule::new(10.0).unwrap();
        let h = FRAC_1_SQRT_2;
        let singlet = StateVec::from_amplitudes(vec![0.0.into(), (-h).into(), h.into(), 0.0.into()]).unwrap();
        let path = exact_evolve(&singlet, &sched, &h0, &ht, ORACLE_DT).unwrap();
        for t in [0.0, 1.0, 3.3, 7.5, 10.0] {
            assert_abs_diff_eq!(fidelity(&singlet, &path.state_at(t).unwrap()).unwrap(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn oracle_step_convergence() {
        let (h0, ht) = build_tfim(2, Boundary::Periodic).unwrap();
        let sched = Schedule::new(10.0).unwrap();
        let run = |dt: f64| exact_evolve(&StateVec::plus(2), &sched, &h0, &ht, dt).unwrap();
        let (a, b) = (run(ORACLE_DT), run(ORACLE_DT / 2.0));
        let f = fidelity(a.final_state(), b.final_state()).unwrap();
        assert!(1.0 - f < 1e-9, "{f}");
    }

    #[test]
    fn step_count_requires_integer_ratio() {
        assert_eq!(step_count(10.0, 0.01).unwrap(), 1000);
        assert_eq!(step_count(10.0, 0.005).unwrap(), 2000);
        assert!(step_count(10.0, 0.03).is_err());
    }

    #[test]
    fn propagator_rejects_backwards() {
        let (h0, ht) = build_tfim(2, Boundary::Periodic).unwrap();
        let mut p = Propagator::new(&StateVec::plus(2), &Schedule::new(1.0).unwrap(), &h0, &ht, 0.01).unwrap();
        p.advance_to(0.5).unwrap();
        assert!(p.advance_to(0.2).is_err());
    }

    fn random_state(n: usize) -> impl Strategy<Value = StateVec> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n).prop_map(|v| {
            StateVec::from_amplitudes(v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
                .unwrap()
                .normalized()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn two_spin_spectrum_symmetric(t in 0.0f64..10.0) {
            let (h0, ht) = build_tfim(2, Boundary::Periodic).unwrap();
            let h = hamiltonian_at(&h0, &ht, &Schedule::new(10.0).unwrap(), t).unwrap();
            let e = eigenspectrum(&h).unwrap().eigenvalues;
            for k in 0..4 {
                prop_assert!((e[k] + e[3 - k]).abs() < 1e-9);
            }
        }

        #[test]
        fn schedule_is_linear(t in 0.0f64..10.0) {
            let s = Schedule::new(10.0).unwrap();
            let (b, j) = s.coefficients(t).unwrap();
            prop_assert!((b + j - 1.0).abs() < 1e-15);
            let (h0, ht) = build_tfim(3, Boundary::Periodic).unwrap();
            let h = hamiltonian_at(&h0, &ht, &s, t).unwrap();
            prop_assert_eq!(h.coefficient(&ps("XII")), -b);
            prop_assert_eq!(h.coefficient(&ps("ZIZ")), -j);
        }
    }

    #[test]
    fn variational_bound_on_random_states() {
        let (h0, ht) = build_tfim(3, Boundary::Periodic).unwrap();
        let h = hamiltonian_at(&h0, &ht, &Schedule::new(10.0).unwrap(), 4.0).unwrap();
        let ground = eigenspectrum(&h).unwrap().ground_energy();
        use proptest::strategy::ValueTree;
        let mut runner = proptest::test_runner::TestRunner::deterministic();
        let strategy = random_state(3);
        for _ in 0..1000 {
            let s = strategy.new_tree(&mut runner).unwrap().current();
            assert!(ground <= expect_pauli(&s, &h).unwrap() + 1e-12);
        }
    }
}
