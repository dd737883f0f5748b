mod common;

use common::fe_oracle::{hex_stiffness, oracle_errors, oracle_models};
use common::host_rock;
use fesbi::coupler::HybridSolver;
use fesbi::error::Error;
use fesbi::fem::element::element_stiffness;
use fesbi::fem::{kinetic_energy, FeModel, LumpedMass, StiffnessOperator};
use fesbi::mesh::build_grid_at;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn element_template_matches_gauss_integration() {
    let m = host_rock();
    let oracle = hex_stiffness(m.lambda(), m.shear_modulus(), 250.0);
    let k = element_stiffness(&m, 250.0);
    let scale = oracle.amax();
    for a in 0..24 {
        for b in 0..24 {
            assert!((k[a * 24 + b] - oracle[(a, b)]).abs() < 1e-12 * scale, "entry ({a}, {b})");
        }
    }
}

#[test]
fn operators_and_step_match_dense_reference() {
    for seed in 0..3 {
        for model in oracle_models() {
            let e = oracle_errors(model, seed);
            assert!(e.mass < 1e-14, "mass {e:?}");
            assert!(e.force < 1e-10, "internal force {e:?}");
            assert!(e.step < 1e-10, "explicit step {e:?}");
        }
    }
}

fn periodic_block(n: [usize; 3]) -> FeModel {
    let dx = 100.0;
    let g = build_grid_at([n[0] as f64 * dx, n[1] as f64 * dx, n[2] as f64 * dx], dx, [0.0; 3]).unwrap();
    FeModel::new(g, &[host_rock()], &[]).unwrap()
}

fn random_start(solver: &mut HybridSolver, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = solver.model();
    let n = model.dof_count();
    let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
    let mut a = vec![0.0; n];
    model.stiffness().apply(&u, &mut a);
    for (x, inv) in a.chunks_exact_mut(3).zip(model.mass().inverse()) {
        x.iter_mut().for_each(|v| *v *= -inv);
    }
    let state = solver.state_mut();
    state.u = u;
    state.a = a;
}

/// Energy `v^T M v / 2 + u^T K u / 2` and the leapfrog invariant built from
/// the half-step velocity `(u1 - u0) / dt` and `u0^T K u1 / 2`.
fn energies(k: &StiffnessOperator, m: &LumpedMass, u0: &[f64], u1: &[f64], v: &[f64], dt: f64) -> (f64, f64) {
    let mut ku1 = vec![0.0; u1.len()];
    k.apply(u1, &mut ku1);
    let half: Vec<f64> = u1.iter().zip(u0).map(|(a, b)| (a - b) / dt).collect();
    let cross: f64 = u0.iter().zip(&ku1).map(|(a, b)| a * b).sum();
    let potential: f64 = u1.iter().zip(&ku1).map(|(a, b)| a * b).sum();
    (kinetic_energy(v, m) + 0.5 * potential, kinetic_energy(&half, m) + 0.5 * cross)
}

#[test]
fn free_vibration_conserves_energy() {
    let model = periodic_block([8, 4, 8]);
    let dt = fesbi::fem::cfl_timestep(100.0, &[host_rock()], 0.4).unwrap();
    let mut solver = HybridSolver::new(model, Vec::new(), Vec::new(), dt).unwrap();
    random_start(&mut solver, 3);
    let mut standard = Vec::new();
    let mut leapfrog = Vec::new();
    for _ in 0..1000 {
        let u0 = solver.state().u.clone();
        solver.step().unwrap();
        let s = solver.state();
        let (e, l) = energies(solver.model().stiffness(), solver.model().mass(), &u0, &s.u, &s.v, dt);
        standard.push(e);
        leapfrog.push(l);
    }
    let drift = (leapfrog[999] - leapfrog[0]).abs() / leapfrog[0];
    assert!(drift < 1e-6, "leapfrog energy drift {drift:e}");
    let lo = standard.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = standard.iter().cloned().fold(0.0, f64::max);
    assert!((hi - lo) / hi < 0.1, "energy oscillation {}", (hi - lo) / hi);
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let secular = (mean(&standard[900..]) - mean(&standard[..100])).abs() / mean(&standard[..100]);
    assert!(secular < 1e-3, "mean energy moved by {secular:e}");
}

fn run_until_unstable(safety: f64, steps: usize) -> Option<usize> {
    let model = periodic_block([4, 4, 4]);
    let dt = safety * 100.0 / host_rock().cp();
    let mut solver = HybridSolver::new(model, Vec::new(), Vec::new(), dt).unwrap();
    random_start(&mut solver, 5);
    for n in 0..steps {
        match solver.step() {
            Ok(()) => {}
            Err(Error::Unstable { .. }) => return Some(n),
            Err(e) => panic!("unexpected error {e}"),
        }
    }
    None
}

#[test]
fn time_step_above_the_stability_limit_diverges() {
    assert!(run_until_unstable(0.4, 3000).is_none());
    assert!(run_until_unstable(0.95, 3000).is_none());
    assert!(run_until_unstable(1.05, 3000).is_some());
    assert!(run_until_unstable(1.5, 3000).is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn internal_force_matches_dense_product(seed in 0u64..1_000_000) {
        for model in oracle_models() {
            let e = oracle_errors(model, seed);
            prop_assert!(e.force < 1e-10);
            prop_assert!(e.step < 1e-10);
        }
    }
}
