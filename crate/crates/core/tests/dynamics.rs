use vqdyn_core::circuit::AnsatzName;
use vqdyn_core::estimator::{Convention, EstimatorConfig, EstimatorMode};
use vqdyn_core::hamiltonian::{eigenspectrum, hamiltonian_at, TwoSiteBonds};
use vqdyn_core::vqs::{eigenspectrum_experiment, run, EvolutionProblem, Solver, DEFAULT_TIKHONOV};

fn ground_two_spin() -> EvolutionProblem {
    EvolutionProblem::tfim(AnsatzName::Tfim2Even, 0).unwrap()
}

#[test]
fn expressive_ansatz_tracks_oracle_at_every_step() {
    let tr = run(&ground_two_spin()).unwrap();
    let worst = tr.records.iter().map(|r| r.fidelity).fold(1.0, f64::min);
    assert!(worst >= 0.999, "{worst}");
}

#[test]
fn halving_dt_barely_moves_final_fidelity() {
    let a = run(&ground_two_spin()).unwrap().final_record().fidelity;
    let mut p = ground_two_spin();
    p.dt = 0.005;
    let b = run(&p).unwrap().final_record().fidelity;
    assert!((a - b).abs() < 1e-4, "{a} {b}");
}

#[test]
fn ansatz_states_stay_normalized() {
    let p = EvolutionProblem::tfim(AnsatzName::Tfim3Qaoa, 0).unwrap();
    let tr = run(&p).unwrap();
    for r in tr.records.iter().step_by(37) {
        let s = p.ansatz.circuit.evaluate(&r.theta).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn shot_mode_close_to_exact() {
    let exact = run(&ground_two_spin()).unwrap().final_record().fidelity;
    let mut finals: Vec<f64> = (100..110)
        .map(|seed| {
            let mut p = ground_two_spin();
            p.estimator = EstimatorConfig::with_mode(EstimatorMode::HadamardShots);
            p.estimator.seed = seed;
            run(&p).unwrap().final_record().fidelity
        })
        .collect();
    finals.sort_by(f64::total_cmp);
    let median = 0.5 * (finals[4] + finals[5]);
    assert!((median - exact).abs() <= 0.02, "{median} {exact}");
}

#[test]
fn singlet_parameters_never_move() {
    for solver in [Solver::LeastSquares, Solver::Tikhonov { lambda: DEFAULT_TIKHONOV }] {
        let mut p = EvolutionProblem::tfim(AnsatzName::Tfim2Odd, 2).unwrap();
        p.solver = solver;
        let tr = run(&p).unwrap();
        for r in &tr.records {
            let d: f64 = r.theta.iter().zip(&p.ansatz.theta0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(d <= 1e-9);
            assert!((r.fidelity - 1.0).abs() <= 1e-6);
        }
    }
}

#[test]
fn three_spin_dip_in_middle_of_sweep() {
    let tr = run(&EvolutionProblem::tfim(AnsatzName::Tfim3Qaoa, 0).unwrap()).unwrap();
    let dips = tr.fidelity_local_minima();
    assert!(dips.iter().any(|(t, _)| (3.0..=7.0).contains(t)), "{dips:?}");
    assert!(tr.final_record().fidelity >= 0.98);
}

#[test]
fn final_two_spin_energies_match_target_spectrum() {
    let template = ground_two_spin();
    for bonds in [TwoSiteBonds::Single, TwoSiteBonds::Double] {
        let e = eigenspectrum_experiment(&template, bonds).unwrap();
        let last = e.exact.last().unwrap();
        let (h0, ht) = vqdyn_core::hamiltonian::build_tfim_with(2, Default::default(), bonds).unwrap();
        let target = eigenspectrum(&hamiltonian_at(&h0, &ht, &template.schedule, 10.0).unwrap()).unwrap().eigenvalues;
        for (level, tr) in e.trajectories.iter().enumerate() {
            assert!((tr.final_record().energy - target[level]).abs() <= 0.05);
            assert!((last[level] - target[level]).abs() < 1e-12);
        }
        assert!(e.max_energy_deviation() <= 0.05);
    }
}

#[test]
fn mclachlan_convention_agrees_on_ground_run() {
    let mut p = ground_two_spin();
    p.convention = Convention::McLachlan;
    let tr = run(&p).unwrap();
    assert!(tr.final_record().fidelity >= 0.999, "{}", tr.final_record().fidelity);
}

#[test]
fn seeded_shot_runs_are_reproducible() {
    let mut p = ground_two_spin();
    p.schedule = vqdyn_core::hamiltonian::Schedule::new(1.0).unwrap();
    p.estimator = EstimatorConfig::with_mode(EstimatorMode::HadamardShots);
    p.estimator.seed = 9;
    let a = run(&p).unwrap().to_csv().unwrap();
    let b = run(&p).unwrap().to_csv().unwrap();
    assert_eq!(a, b);
    p.estimator.seed = 10;
    assert_ne!(a, run(&p).unwrap().to_csv().unwrap());
}
