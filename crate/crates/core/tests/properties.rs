use num_complex::Complex64;
use proptest::prelude::*;

use nls_jitter::dynamics::{soliton_profile, SolitonParams};
use nls_jitter::ldp::{evaluate_bounds, velocity_constraint, velocity_control, ControlKind, PhiNorms, Scenario};
use nls_jitter::noise::{NoiseKind, NoiseModel, NoiseTarget};
use nls_jitter::observables::{arrival_time, mass};
use nls_jitter::stochastic::{sample_path, Recording, SdeModel, SdeRun};
use nls_jitter::{Field, Grid};

fn field(g: &Grid, coeffs: &[(f64, f64)]) -> Field {
    Field::from_fn(g, |x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(m, &(a, b))| Complex64::new(a, b) * (-(x - m as f64).powi(2) / (1.0 + m as f64)).exp())
            .sum()
    })
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval(c in coeffs()) {
        let g = Grid::new(12.0, 128).unwrap();
        let f = field(&g, &c);
        let s = g.to_spectrum(&f).unwrap();
        let lhs: f64 = f.values.iter().map(|z| z.norm_sqr()).sum();
        let rhs: f64 = s.values.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1.0));
        let back = g.to_field(&s).unwrap();
        prop_assert!(back.relative_error(&f) < 1e-13);
    }

    #[test]
    fn translation_moves_arrival_time(shift in -3.0..3.0f64) {
        let g = Grid::new(20.0, 256).unwrap();
        let u = soliton_profile(SolitonParams::at_rest(1.0), 0.0, &g).unwrap();
        let v = g.translate(&u, shift).unwrap();
        prop_assert!((mass(&v) - mass(&u)).abs() < 1e-10);
        let dy = arrival_time(&v, &g).unwrap() - arrival_time(&u, &g).unwrap();
        prop_assert!((dy - shift * mass(&u)).abs() < 1e-8);
    }

    #[test]
    fn noise_filter_is_self_adjoint(a in coeffs(), b in coeffs(), order in 0.5..3.0f64, strength in 0.1..2.0f64) {
        let g = Grid::new(10.0, 64).unwrap();
        let m = NoiseModel::new(&g, NoiseKind::Smoothing { order, strength }, NoiseTarget::Complex).unwrap();
        let f = field(&g, &a);
        let h = field(&g, &b);
        let lhs = m.apply(&f).unwrap().inner_re(&h);
        let rhs = f.inner_re(&m.apply(&h).unwrap());
        prop_assert!((lhs - rhs).abs() < 1e-12 * (f.norm() * h.norm()).max(1.0));
        prop_assert!(m.apply(&f).unwrap().norm() <= f.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn bounds_sandwich(r in 0.01..3.99f64, t in 0.05..8.0f64, a in 0.05..1.0f64) {
        for sc in [Scenario::MassUpFromZero, Scenario::MassDownFromSoliton, Scenario::ArrivalAdditive, Scenario::ArrivalMultiplicative] {
            let rep = evaluate_bounds(sc, r, t, a, &PhiNorms::unit()).unwrap();
            prop_assert!(rep.lower_rate < 0.0 && rep.upper_rate < 0.0);
            prop_assert!(rep.consistent, "{:?}", rep);
        }
    }

    #[test]
    fn optimal_velocity_control_meets_constraint(r in 0.1..5.0f64, a in 0.2..3.0f64, t in 0.2..4.0f64) {
        let c = velocity_control(r, a, t).unwrap();
        let ControlKind::Velocity { rate, .. } = &c.kind else { unreachable!() };
        prop_assert!((velocity_constraint(rate, t) - r / (8.0 * a)).abs() < 1e-10 * (r / a).max(1.0));
        let expect = std::f64::consts::PI.powi(2) * r * r / (64.0 * a.powi(3) * t.powi(3));
        prop_assert!((c.norm_sq() - expect).abs() < 1e-10 * expect.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn multiplicative_mass_is_exact(seed in any::<u64>(), eps in 1e-3..0.5f64) {
        let g = Grid::new(16.0, 64).unwrap();
        let noise = NoiseModel::smoothing(&g, NoiseTarget::Real).unwrap();
        let run = SdeRun::new(SdeModel::Multiplicative, eps, noise, 0.2, 1e-2, seed).unwrap();
        let u0 = soliton_profile(SolitonParams::at_rest(1.0), 0.0, &g).unwrap();
        let p = sample_path(&u0, &run, 0, Recording::Stride).unwrap();
        for u in &p.trajectory.states {
            prop_assert!((mass(u) - mass(&u0)).abs() < 1e-12 * mass(&u0));
        }
    }
}
