//! Explicit control families, their costs and their realisation on a grid.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::dynamics::{modulated_soliton_from, sech, ControlSpec, FieldPath, ScalarPath, BOUNDARY_TOLERANCE};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::noise::NoiseModel;
use crate::quad::simpson;
use crate::stochastic::DriftShift;

use super::paths::{amplitude_cost, AmplitudePath, COST_PANELS};

#[derive(Clone)]
pub enum ControlKind {
    /// Forcing that moves the soliton along `A(t)`.
    Amplitude(AmplitudePath),
    /// `h = λ(t)(x - 2∫∫λ) Ψ̃_{A,λ}` around a soliton of fixed amplitude.
    Velocity { amplitude: f64, rate: ScalarPath },
    /// `(h₁, h₂)` for the extended model: space-time part and scalar part
    /// driving the potential `x h₂(t)`.
    ScalarPair { field: Option<FieldPath>, beta: ScalarPath },
}

impl fmt::Debug for ControlKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlKind::Amplitude(p) => write!(f, "Amplitude({p:?})"),
            ControlKind::Velocity { amplitude, rate } => {
                write!(f, "Velocity {{ amplitude: {amplitude}, rate: {rate:?} }}")
            }
            ControlKind::ScalarPair { field, beta } => write!(
                f,
                "ScalarPair {{ field: {}, beta: {beta:?} }}",
                if field.is_some() { "Some(..)" } else { "None" }
            ),
        }
    }
}

/// A control on `[0, T]` with its rate-function cost `½‖h‖²`.
#[derive(Debug, Clone)]
pub struct ControlPath {
    pub kind: ControlKind,
    pub total_time: f64,
    pub cost: f64,
}

/// `∫₀ᵀ∫₀ᵗ λ = ∫₀ᵀ (T - s) λ(s) ds`.
pub fn velocity_constraint(rate: &ScalarPath, total_time: f64) -> f64 {
    simpson(|s| (total_time - s) * rate.value(s), 0.0, total_time, COST_PANELS)
}

/// `∫₀ᵀ λ²`.
pub fn rate_energy(rate: &ScalarPath, total_time: f64) -> f64 {
    simpson(|s| rate.value(s).powi(2), 0.0, total_time, COST_PANELS)
}

/// `λ*(t) = 3R̃(T - t)/(8AT³)`.
pub fn optimal_rate(target: f64, amplitude: f64, total_time: f64) -> ScalarPath {
    let k = 3.0 * target / (8.0 * amplitude * total_time.powi(3));
    ScalarPath::Affine {
        intercept: k * total_time,
        slope: -k,
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl ControlPath {
    pub fn amplitude(path: AmplitudePath) -> Result<Self> {
        let cost = 0.5 * amplitude_cost(&path)?;
        Ok(Self {
            total_time: path.total_time,
            kind: ControlKind::Amplitude(path),
            cost,
        })
    }

    /// Velocity control with cost `½ (π²/3A) ∫λ²`.
    pub fn velocity(amplitude: f64, rate: ScalarPath, total_time: f64) -> Result<Self> {
        positive("amplitude", amplitude)?;
        positive("T", total_time)?;
        let cost = 0.5 * PI * PI / (3.0 * amplitude) * rate_energy(&rate, total_time);
        Ok(Self {
            kind: ControlKind::Velocity { amplitude, rate },
            total_time,
            cost,
        })
    }

    /// Pair `(h₁, h₂)` with cost `½(‖h₁‖² + ∫h₂²)`.
    pub fn scalar_pair(field: Option<FieldPath>, beta: ScalarPath, total_time: f64) -> Result<Self> {
        positive("T", total_time)?;
        let mut energy = rate_energy(&beta, total_time);
        if let Some(h) = &field {
            energy += simpson(|t| h(t).norm_sq(), 0.0, total_time, COST_PANELS.min(200));
        }
        Ok(Self {
            kind: ControlKind::ScalarPair { field, beta },
            total_time,
            cost: 0.5 * energy,
        })
    }

    /// Squared norm `‖h‖²_{L²(0,T;L²)} = 2 · cost`.
    pub fn norm_sq(&self) -> f64 {
        2.0 * self.cost
    }

    fn check_domain(&self, grid: &Grid) -> Result<()> {
        let l = grid.half_length();
        match &self.kind {
            ControlKind::Amplitude(path) => {
                let a = path.final_amplitude();
                if sech(a * l) >= BOUNDARY_TOLERANCE {
                    return Err(Error::Domain(format!(
                        "terminal soliton of amplitude {a} is not contained in [-{l}, {l})"
                    )));
                }
            }
            ControlKind::Velocity { amplitude, rate } => {
                for i in 0..=50 {
                    let t = self.total_time * i as f64 / 50.0;
                    let c = rate.integrals(t).center();
                    if c.abs() >= l || sech(amplitude * (l - c.abs())) >= BOUNDARY_TOLERANCE {
                        return Err(Error::Domain(format!(
                            "controlled soliton centre {c:.4} leaves [-{l}, {l}) at t = {t}"
                        )));
                    }
                }
            }
            ControlKind::ScalarPair { .. } => {}
        }
        Ok(())
    }

    fn field_unchecked(&self, grid: &Grid, t: f64) -> Field {
        match &self.kind {
            ControlKind::Amplitude(path) => {
                let (a, da, _) = path.jet(t);
                let rot = Complex64::from_polar(SQRT_2 * da, -path.phase_integral(t)) * Complex64::i();
                Field::from_fn(grid, |x| {
                    let y = a * x;
                    let s = sech(y);
                    rot * (s - y * s * y.tanh())
                })
            }
            ControlKind::Velocity { amplitude, rate } => {
                let ints = rate.integrals(t);
                let lam = rate.value(t);
                let c = ints.center();
                let mut f =
                    modulated_soliton_from(*amplitude, &ints, t, grid, true).unwrap_or_else(|_| Field::zeros(grid));
                for (z, &x) in f.values.iter_mut().zip(grid.nodes()) {
                    *z *= lam * (x - c);
                }
                f
            }
            ControlKind::ScalarPair { field, .. } => match field {
                Some(h) => h(t),
                None => Field::zeros(grid),
            },
        }
    }

    /// The space-time control `h(t, ·)` sampled on `grid`.
    pub fn field_path(&self, grid: &Grid) -> Result<FieldPath> {
        self.check_domain(grid)?;
        let this = self.clone();
        let grid = grid.clone();
        Ok(Arc::new(move |t| this.field_unchecked(&grid, t)))
    }

    /// Deterministic control equation driven by `Φh` as an additive forcing
    /// (`phi = None` is the identity).
    pub fn forcing_spec(&self, grid: &Grid, phi: Option<&NoiseModel>) -> Result<ControlSpec> {
        let h = self.field_path(grid)?;
        Ok(match phi {
            None => ControlSpec::AdditiveForcing(h),
            Some(m) => {
                let m = m.clone();
                ControlSpec::AdditiveForcing(Arc::new(move |t| m.apply(&h(t)).expect("control on the noise grid")))
            }
        })
    }

    /// Potential form of the control: the translated potential for velocity
    /// controls, the linear potential `x h₂` for scalar pairs.
    pub fn potential_spec(&self, grid: &Grid) -> Result<ControlSpec> {
        self.check_domain(grid)?;
        match &self.kind {
            ControlKind::Velocity { rate, .. } => Ok(ControlSpec::TranslatedPotential(rate.clone())),
            ControlKind::ScalarPair { field: None, beta } => Ok(ControlSpec::LinearPotential(beta.clone())),
            _ => Err(Error::Contract("control has no potential form".into())),
        }
    }

    /// Importance-sampling drift realising this control under the matching
    /// stochastic model.
    pub fn drift_shift(&self, grid: &Grid) -> Result<DriftShift> {
        match &self.kind {
            ControlKind::ScalarPair { field, beta } => Ok(DriftShift {
                field: field.clone(),
                beta: Some(beta.clone()),
            }),
            _ => Ok(DriftShift::field(self.field_path(grid)?)),
        }
    }

    /// `½ ∫₀ᵀ ‖h(t)‖²_Σ` on the realised field, with
    /// `‖f‖²_Σ = ‖f‖² + ‖∂ₓf‖² + ‖x f‖²`.
    pub fn sigma_cost(&self, grid: &Grid, panels: usize) -> Result<f64> {
        let h = self.field_path(grid)?;
        let density = |t: f64| {
            let f = h(t);
            let df = grid.derivative(&f).expect("same grid");
            let xf: f64 = f
                .values
                .iter()
                .zip(grid.nodes())
                .map(|(z, x)| x * x * z.norm_sqr())
                .sum::<f64>()
                * grid.spacing();
            f.norm_sq() + df.norm_sq() + xf
        };
        Ok(0.5 * simpson(density, 0.0, self.total_time, panels.max(2)))
    }

    /// `½ ∫₀ᵀ ‖h(t)‖²` on the realised field.
    pub fn grid_cost(&self, grid: &Grid, panels: usize) -> Result<f64> {
        let h = self.field_path(grid)?;
        let mut energy = simpson(|t| h(t).norm_sq(), 0.0, self.total_time, panels.max(2));
        if let ControlKind::ScalarPair { beta, .. } = &self.kind {
            energy += rate_energy(beta, self.total_time);
        }
        Ok(0.5 * energy)
    }
}

/// `λ*` for target `R̃`, amplitude `A` and horizon `T`, with the constraint
/// `∫₀ᵀ∫₀ᵗ λ* = R̃/(8A)` verified by quadrature.
pub fn velocity_control(target: f64, amplitude: f64, total_time: f64) -> Result<ControlPath> {
    positive("target", target)?;
    positive("amplitude", amplitude)?;
    positive("T", total_time)?;
    let rate = optimal_rate(target, amplitude, total_time);
    let reached = velocity_constraint(&rate, total_time);
    let want = target / (8.0 * amplitude);
    if (reached - want).abs() > 1e-10 * want.max(1.0) {
        return Err(Error::Contract(format!("velocity constraint {reached} != {want}")));
    }
    ControlPath::velocity(amplitude, rate, total_time)
}

/// `(0, λ*)` for the extended model; the controlled equation
/// `i ũ_t = ũ_xx + |ũ|²ũ + x λ*(t) ũ` moves `Y` to `R̃` at cost
/// `3R̃²/(128A²T³)`.
pub fn extended_velocity_control(target: f64, amplitude: f64, total_time: f64) -> Result<ControlPath> {
    positive("target", target)?;
    positive("amplitude", amplitude)?;
    let rate = optimal_rate(target, amplitude, total_time);
    ControlPath::scalar_pair(None, rate, total_time)
}

/// Convenience wrapper: `h(t, ·)` on the grid, with the domain checks.
pub fn realize_control_field(c: &ControlPath, grid: &Grid, t: f64) -> Result<Field> {
    c.check_domain(grid)?;
    Ok(c.field_unchecked(grid, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::modulated_soliton;
    use crate::observables::arrival_time;

    #[test]
    fn optimal_velocity_control_values() {
        let c = velocity_control(1.0, 1.0, 1.0).unwrap();
        assert!((c.norm_sq() - PI * PI / 64.0).abs() < 1e-10);
        assert!((c.cost - 0.077106).abs() < 1e-6);
        let ControlKind::Velocity { rate, .. } = &c.kind else {
            panic!()
        };
        assert!((velocity_constraint(rate, 1.0) - 0.125).abs() < 1e-10);
        assert_eq!(rate.value(1.0), 0.0);
    }

    #[test]
    fn closed_form_reaches_target() {
        let g = Grid::new(20.0, 1024).unwrap();
        for (r, a, t) in [(1.0, 1.0, 1.0), (0.5, 1.5, 2.0), (2.0, 0.8, 1.5)] {
            let c = velocity_control(r, a, t).unwrap();
            let ControlKind::Velocity { rate, .. } = &c.kind else {
                panic!()
            };
            let psi = modulated_soliton(a, rate, t, &g, true).unwrap();
            assert!((arrival_time(&psi, &g).unwrap() - r).abs() < 1e-6);
            let expect = PI * PI * r * r / (64.0 * a.powi(3) * t.powi(3));
            assert!((c.norm_sq() - expect).abs() < 1e-10 * expect.max(1.0));
        }
    }

    #[test]
    fn realized_velocity_field_norm() {
        let g = Grid::new(20.0, 1024).unwrap();
        let c = velocity_control(1.0, 1.0, 1.0).unwrap();
        let ControlKind::Velocity { rate, .. } = &c.kind else {
            panic!()
        };
        for t in [0.0, 0.3, 0.7] {
            let f = realize_control_field(&c, &g, t).unwrap();
            let expect = rate.value(t).powi(2) * PI * PI / 3.0;
            assert!((f.norm_sq() - expect).abs() < 1e-5 * expect.max(1e-3));
        }
        let end = realize_control_field(&c, &g, 1.0).unwrap();
        assert!(end.norm() == 0.0);
        assert!((c.grid_cost(&g, 200).unwrap() - c.cost).abs() < 1e-5);
    }

    #[test]
    fn realized_amplitude_field_norm() {
        let g = Grid::new(256.0, 4096).unwrap();
        let c = ControlPath::amplitude(AmplitudePath::zero_datum(1.0, 1.0).unwrap()).unwrap();
        let f = realize_control_field(&c, &g, 0.5).unwrap();
        // A(1/2) = 1/16, A' = 1/4, so A'^2/A = 1.
        let expect = super::super::paths::cost_prefactor();
        assert!((f.norm_sq() - expect).abs() < 1e-5, "{}", f.norm_sq());
        let flat = ControlPath::amplitude(AmplitudePath::custom(vec![1.0; 11], 1.0).unwrap()).unwrap();
        assert_eq!(realize_control_field(&flat, &g, 0.4).unwrap().norm(), 0.0);
    }

    #[test]
    fn extended_control_cost() {
        let g = Grid::new(20.0, 256).unwrap();
        let c = extended_velocity_control(1.0, 1.0, 1.0).unwrap();
        assert!((c.cost - 3.0 / 128.0).abs() < 1e-12);
        assert!(matches!(c.potential_spec(&g), Ok(ControlSpec::LinearPotential(_))));
    }

    #[test]
    fn domain_errors() {
        let g = Grid::new(5.0, 256).unwrap();
        let c = ControlPath::amplitude(AmplitudePath::zero_datum(1.0, 1.0).unwrap()).unwrap();
        assert!(matches!(realize_control_field(&c, &g, 0.5), Err(Error::Domain(_))));
        let v = velocity_control(40.0, 1.0, 1.0).unwrap();
        assert!(matches!(v.field_path(&g), Err(Error::Domain(_))));
    }
}
