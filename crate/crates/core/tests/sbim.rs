mod common;

use approx::assert_relative_eq;
use common::host_rock;
use fesbi::error::Error;
use fesbi::fault::{FaultPatch, FaultSpec, Nucleation, NucleationMechanism, SlipWeakening};
use fesbi::material::ElasticMaterial;
use fesbi::record::Station;
use fesbi::sbi::boundary::SbiSettings;
use fesbi::sbi::fault_solver::{sbim_fault_solver, FaultPlane, SbimSolver};

fn plane() -> FaultPlane {
    FaultPlane {
        n1: 32,
        n3: 16,
        dx: 250.0,
        origin: [-4000.0, -2000.0],
    }
}

fn spec(tau0: f64, nucleation: Option<Nucleation>) -> FaultSpec {
    FaultSpec {
        x2: 0.0,
        rupture: FaultPatch::centered(0.0, 0.0, 1e6, 1e6),
        friction: SlipWeakening::new(0.677, 0.525, 0.4).unwrap(),
        tau0,
        tau0_dip: 0.0,
        sigma0: 120e6,
        friction_patches: Vec::new(),
        nucleation,
    }
}

#[test]
fn heterogeneous_medium_rejected() {
    let soft = ElasticMaterial::from_wave_speeds(2500.0, 4000.0, 2300.0).unwrap();
    let err = SbimSolver::new(&spec(70e6, None), &[host_rock(), soft], plane(), 0.01, &SbiSettings::default(), 10);
    assert!(matches!(err, Err(Error::Unsupported(_))));
}

#[test]
fn subcritical_fault_stays_locked() {
    let h = sbim_fault_solver(
        &spec(70e6, None),
        &[host_rock()],
        plane(),
        0.0167,
        0.5,
        &[Station::new("center", 0.0, 0.0)],
        &SbiSettings::default(),
    )
    .unwrap();
    assert_eq!(h.rupture.ruptured_count(), 0);
    let st = h.station("center").unwrap();
    assert!(st.slip_rate.iter().all(|v| v == &[0.0, 0.0]));
    assert!(st.traction.iter().all(|t| t == &[70e6, 0.0]));
}

#[test]
fn uniform_weakening_radiates_at_the_impedance_rate() {
    let whole = Nucleation {
        patch: FaultPatch::centered(0.0, 0.0, 1e6, 1e6),
        mechanism: NucleationMechanism::StrengthDrop,
        onset: 0.0,
    };
    let material = host_rock();
    let mut solver =
        SbimSolver::new(&spec(70e6, Some(whole)), &[material], plane(), 0.0167, &SbiSettings::default(), 20)
            .unwrap();
    for _ in 0..20 {
        solver.step().unwrap();
    }
    let expected = 2.0 * material.cs() * (70e6 - 0.525 * 120e6) / material.shear_modulus();
    for v in solver.slip_rate() {
        assert_relative_eq!(v[0], expected, max_relative = 1e-9);
        assert!(v[1].abs() < 1e-9 * expected);
    }
    for t in solver.traction() {
        assert_relative_eq!(t[0], 0.525 * 120e6, max_relative = 1e-12);
    }
}

#[test]
fn nucleated_rupture_spreads_symmetrically() {
    let nuc = Nucleation {
        patch: FaultPatch::centered(0.0, 0.0, 1500.0, 1500.0),
        mechanism: NucleationMechanism::StressStep { shear: 81.6e6 },
        onset: 0.0,
    };
    let stations = [
        Station::new("east", 1500.0, 0.0),
        Station::new("west", -1500.0, 0.0),
        Station::new("north", 0.0, 1000.0),
        Station::new("south", 0.0, -1000.0),
    ];
    let h = sbim_fault_solver(
        &spec(70e6, Some(nuc)),
        &[host_rock()],
        plane(),
        0.0167,
        1.0,
        &stations,
        &SbiSettings::default(),
    )
    .unwrap();
    let east = h.station("east").unwrap().slip_rate_strike();
    let west = h.station("west").unwrap().slip_rate_strike();
    let north = h.station("north").unwrap().slip_rate_strike();
    let south = h.station("south").unwrap().slip_rate_strike();
    let peak = east.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    assert!(peak > 0.1, "rupture did not reach the station: {peak}");
    for n in 0..east.len() {
        assert!((east[n] - west[n]).abs() <= 1e-6 * peak);
        assert!((north[n] - south[n]).abs() <= 1e-6 * peak);
    }
    assert!(h.rupture.ruptured_count() > 36);
}
