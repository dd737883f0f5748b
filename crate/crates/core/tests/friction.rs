mod common;

use common::stick::{random_case, stick_residual};
use fesbi::fault::FaultMode;
use fesbi::run::Simulation;
use fesbi::scenario::{stepover, tpv3};
use proptest::prelude::*;

#[test]
fn stick_traction_cancels_the_free_jump() {
    for mode in [FaultMode::TwoSided, FaultMode::Symmetric] {
        for seed in 0..20 {
            let mut case = random_case(mode, 1e3, seed);
            let (residual, sticking) = stick_residual(&mut case);
            assert_eq!(sticking, case.fault.len());
            assert!(residual < 1e-12, "{mode:?} seed {seed}: {residual:e}");
        }
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[test]
fn slipping_nodes_move_along_their_traction() {
    for mode in [FaultMode::TwoSided, FaultMode::Symmetric] {
        let mut slipping = 0;
        for seed in 0..10 {
            let mut case = random_case(mode, 0.55, seed);
            let mass = case.model.mass();
            case.fault.solve(&case.state, mass, &mut case.force).unwrap();
            for i in 0..case.fault.len() {
                let tau = case.fault.traction()[i];
                let strength = case.fault.normal_stress()[i] * case.fault.law(i).coefficient(case.fault.max_slip()[i]);
                assert!(tau[0].hypot(tau[1]) <= strength * (1.0 + 1e-12));
                if case.fault.sticking()[i] {
                    continue;
                }
                slipping += 1;
                let j = case.fault.free_jump(&case.state, mass, &case.force, i);
                let rate = [j[0], j[2]];
                let along = dot(rate, tau);
                let cross = rate[0] * tau[1] - rate[1] * tau[0];
                let scale = rate[0].hypot(rate[1]) * tau[0].hypot(tau[1]);
                assert!(along > 0.0, "{mode:?} node {i} slips against its traction");
                assert!(cross.abs() <= 1e-9 * scale, "{mode:?} node {i} slips off its traction direction");
            }
        }
        assert!(slipping > 0, "{mode:?}: no slipping nodes exercised");
    }
}

#[test]
fn fault_forces_balance_across_the_split() {
    for seed in 0..5 {
        let mut case = random_case(FaultMode::TwoSided, 0.55, seed);
        case.force.iter_mut().for_each(|f| *f = 0.0);
        case.fault.solve(&case.state, case.model.mass(), &mut case.force).unwrap();
        let mut loaded = 0;
        for i in 0..case.fault.len() {
            let (p, m) = (3 * case.fault.plus_nodes()[i], 3 * case.fault.minus_nodes()[i]);
            for c in 0..3 {
                assert_eq!(case.force[p + c] + case.force[m + c], 0.0);
                loaded += usize::from(case.force[p + c] != 0.0);
            }
        }
        assert!(loaded > 0);
    }
}

/// Steps `sim` and checks the friction invariants against each step's
/// resolved state: bounded traction, zero slip increment after a stick, and
/// slip increments aligned with the traction of slipping nodes.
fn check_friction_invariants(mut sim: Simulation, steps: usize) -> usize {
    let dx = sim.scenario().dx;
    let mut slipping_checked = 0;
    for _ in 0..steps {
        let before: Vec<_> = sim
            .solver()
            .faults()
            .iter()
            .map(|f| (f.slip().to_vec(), f.sticking().to_vec(), f.traction().to_vec()))
            .collect();
        sim.step().unwrap();
        for (f, (slip0, stick0, tau0)) in sim.solver().faults().iter().zip(&before) {
            for i in 0..f.len() {
                let tau = f.traction()[i];
                if !f.is_locked(i) {
                    let strength = f.normal_stress()[i].max(0.0) * f.law(i).coefficient(f.max_slip()[i]);
                    assert!(tau[0].hypot(tau[1]) <= strength * (1.0 + 1e-12) + 1e-6, "node {i} exceeds its strength");
                }
                if slip0.is_empty() || sim.solver().state().step < 2 {
                    continue;
                }
                let inc = [f.slip()[i][0] - slip0[i][0], f.slip()[i][1] - slip0[i][1]];
                if stick0[i] {
                    assert!(inc[0].hypot(inc[1]) <= 1e-10 * dx, "sticking node {i} slipped by {inc:?}");
                } else if inc[0].hypot(inc[1]) > 1e-12 * dx {
                    slipping_checked += 1;
                    assert!(dot(inc, tau0[i]) >= 0.0, "node {i} slipped against its traction");
                }
            }
        }
    }
    slipping_checked
}

#[test]
fn tpv3_run_respects_friction_invariants() {
    let mut s = tpv3(500.0, 2000.0).unwrap();
    s.duration = 1.5;
    let sim = Simulation::new(&s).unwrap();
    let steps = sim.total_steps() as usize;
    assert!(check_friction_invariants(sim, steps) > 100);
}

#[test]
fn two_sided_stepover_respects_friction_invariants() {
    let mut s = stepover(500.0).unwrap();
    s.duration = 1.0;
    let sim = Simulation::new(&s).unwrap();
    let steps = sim.total_steps() as usize;
    assert!(check_friction_invariants(sim, steps) > 100);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stick_is_self_consistent_on_random_states(seed in 0u64..u64::MAX, symmetric in any::<bool>()) {
        let mode = if symmetric { FaultMode::Symmetric } else { FaultMode::TwoSided };
        let mut case = random_case(mode, 1e3, seed);
        let (residual, _) = stick_residual(&mut case);
        prop_assert!(residual < 1e-12);
    }
}
