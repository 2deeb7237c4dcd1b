use nls_jitter::dynamics::{evolve, soliton_profile, ControlSpec, EvolveOptions, SolitonParams};
use nls_jitter::ldp::controls::ControlKind;
use nls_jitter::ldp::{energy_inequality_check, velocity_control, AmplitudePath, ControlPath};
use nls_jitter::noise::{operator_norms, NoiseKind, NoiseModel, NoiseTarget};
use nls_jitter::observables::{arrival_time, mass};
use nls_jitter::{Field, Grid};

fn every_step() -> EvolveOptions {
    EvolveOptions {
        stride: 1,
        ..Default::default()
    }
}

fn identity_norms(g: &Grid) -> nls_jitter::noise::OperatorNorms {
    let id = NoiseModel::new(g, NoiseKind::IdentityOnGrid, NoiseTarget::Complex).unwrap();
    operator_norms(&id)
}

#[test]
fn amplitude_control_builds_target_mass_from_zero() {
    let g = Grid::new(256.0, 4096).unwrap();
    let c = ControlPath::amplitude(AmplitudePath::zero_datum(1.0, 1.0).unwrap()).unwrap();
    let spec = c.forcing_spec(&g, None).unwrap();
    let traj = evolve(&Field::zeros(&g), 1.0, 1e-3, &spec, &g, &every_step()).unwrap();
    let n_t = mass(traj.states.last().unwrap());
    assert!((n_t - 1.0).abs() < 1e-4, "N(T) = {n_t}");

    let v = energy_inequality_check(&traj, &c, &g, None, &identity_norms(&g)).unwrap();
    assert!(v.mass_identity_error < 1e-4, "{v:?}");
    assert!(v.l2_bound_margin > 0.0, "{v:?}");
    assert!(v.mass_bound_margin > 0.0, "{v:?}");
    assert!(v.pass, "{v:?}");
}

#[test]
fn amplitude_control_drops_soliton_mass() {
    let g = Grid::new(64.0, 2048).unwrap();
    let c = ControlPath::amplitude(AmplitudePath::soliton_datum(1.0, 1.0).unwrap()).unwrap();
    let spec = c.forcing_spec(&g, None).unwrap();
    let u0 = soliton_profile(SolitonParams::at_rest(1.0), 0.0, &g).unwrap();
    let traj = evolve(&u0, 1.0, 1e-3, &spec, &g, &EvolveOptions::default()).unwrap();
    let n_t = mass(traj.states.last().unwrap());
    assert!((n_t - 3.0).abs() < 1e-3 * 3.0, "N(T) = {n_t}");
}

#[test]
fn velocity_control_as_forcing_reaches_arrival_target() {
    let g = Grid::new(20.0, 1024).unwrap();
    let c = velocity_control(1.0, 1.0, 1.0).unwrap();
    let spec = c.forcing_spec(&g, None).unwrap();
    let u0 = soliton_profile(SolitonParams::at_rest(1.0), 0.0, &g).unwrap();
    let traj = evolve(&u0, 1.0, 1e-3, &spec, &g, &every_step()).unwrap();
    let y = arrival_time(traj.states.last().unwrap(), &g).unwrap();
    assert!((y - 1.0).abs() < 1e-4, "Y(T) = {y}");

    let v = energy_inequality_check(&traj, &c, &g, None, &identity_norms(&g)).unwrap();
    assert!(v.arrival_identity_error < 1e-4, "{v:?}");
    assert!(v.arrival_chain_margin > 0.0, "{v:?}");
    assert!(v.pass, "{v:?}");
}

#[test]
fn velocity_control_as_potential_matches_closed_form() {
    let g = Grid::new(20.0, 1024).unwrap();
    let c = velocity_control(1.0, 1.0, 1.0).unwrap();
    let ControlKind::Velocity { rate, .. } = &c.kind else {
        panic!()
    };
    let spec = c.potential_spec(&g).unwrap();
    let u0 = soliton_profile(SolitonParams::at_rest(1.0), 0.0, &g).unwrap();
    let traj = evolve(&u0, 1.0, 1e-3, &spec, &g, &EvolveOptions::default()).unwrap();
    let exact = nls_jitter::dynamics::modulated_soliton(1.0, rate, 1.0, &g, true).unwrap();
    assert!(traj.states.last().unwrap().relative_error(&exact) < 1e-5);
}

#[test]
fn zero_control_reduces_to_mass_conservation() {
    let g = Grid::new(20.0, 512).unwrap();
    let c = ControlPath::amplitude(AmplitudePath::custom(vec![1.0; 21], 0.2).unwrap()).unwrap();
    let u0 = soliton_profile(SolitonParams::at_rest(1.0), 0.0, &g).unwrap();
    let traj = evolve(&u0, 0.2, 1e-3, &ControlSpec::None, &g, &every_step()).unwrap();
    let v = energy_inequality_check(&traj, &c, &g, None, &identity_norms(&g)).unwrap();
    assert!(v.mass_identity_error < 1e-12, "{v:?}");
    assert!(v.mass_bound_margin.abs() < 1e-10, "{v:?}");
    assert!(v.pass, "{v:?}");
}
