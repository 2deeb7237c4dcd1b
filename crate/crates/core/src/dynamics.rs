//! Deterministic and controlled evolution of `i u_t = u_xx + |u|² u (+ control)`
//! by Strang splitting, together with the closed-form soliton solutions used
//! as oracles.
//!
//! Sign convention: the linear flow is `û ← exp(+i k² dt) û` and the
//! pointwise flow of `i u_t = (|u|² + V(t, x)) u` is the exact phase rotation
//! `u ← exp(-i dt (|u|² + V)) u`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Parameters of the travelling soliton
/// `√2 A sech(A(x - x₀) + 2AVt) exp(-i(A² - V²)t + iV(x - x₀) + iθ₀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonParams {
    pub amplitude: f64,
    pub center: f64,
    pub velocity: f64,
    pub phase: f64,
}

impl SolitonParams {
    pub fn at_rest(amplitude: f64) -> Self {
        Self {
            amplitude,
            center: 0.0,
            velocity: 0.0,
            phase: 0.0,
        }
    }
}

/// Relative sech magnitude allowed at the domain boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-4;

pub(crate) fn sech(z: f64) -> f64 {
    let e = (-z.abs()).exp();
    2.0 * e / (1.0 + e * e)
}

pub fn soliton_profile(p: SolitonParams, t: f64, grid: &Grid) -> Result<Field> {
    let a = p.amplitude;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Config(format!("soliton amplitude must be positive, got {a}")));
    }
    let l = grid.half_length();
    // The pulse is centred where A(x - x₀) + 2AVt = 0.
    let peak = p.center - 2.0 * p.velocity * t;
    let edge = sech(a * (l - peak.abs()));
    if edge >= BOUNDARY_TOLERANCE || peak.abs() >= l {
        return Err(Error::Domain(format!(
            "soliton (A = {a}, centre {peak:.3}) reaches the boundary of [-{l}, {l}) with relative magnitude {edge:.2e}"
        )));
    }
    let amp = std::f64::consts::SQRT_2 * a;
    let omega = a * a - p.velocity * p.velocity;
    Ok(Field::from_fn(grid, |x| {
        let env = amp * sech(a * (x - p.center) + 2.0 * a * p.velocity * t);
        let phase = -omega * t + p.velocity * (x - p.center) + p.phase;
        Complex64::from_polar(env, phase)
    }))
}

/// Time integrals of a control rate `λ` that appear in the modulated
/// soliton formulas.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathIntegrals {
    /// `V(t) = ∫₀ᵗ λ`
    pub velocity: f64,
    /// `∫₀ᵗ ∫₀ˢ λ`; the pulse centre is twice this value.
    pub drift: f64,
    /// `∫₀ᵗ V²`
    pub kinetic: f64,
    /// `∫₀ᵗ λ(s) ∫₀ˢ∫₀^τ λ`
    pub coupling: f64,
}

impl PathIntegrals {
    pub fn center(&self) -> f64 {
        2.0 * self.drift
    }
}

/// Minimum number of subdivisions of `[0, t]` for the nested integrals.
pub const PATH_SUBDIVISIONS: usize = 400;

/// A real control rate `λ(t)`.
#[derive(Clone)]
pub enum ScalarPath {
    Zero,
    Constant(f64),
    /// `λ(t) = intercept + slope · t`
    Affine {
        intercept: f64,
        slope: f64,
    },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ScalarPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarPath::Zero => write!(f, "Zero"),
            ScalarPath::Constant(c) => write!(f, "Constant({c})"),
            ScalarPath::Affine { intercept, slope } => {
                write!(f, "Affine {{ intercept: {intercept}, slope: {slope} }}")
            }
            ScalarPath::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl ScalarPath {
    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        ScalarPath::Custom(Arc::new(f))
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            ScalarPath::Zero => 0.0,
            ScalarPath::Constant(c) => *c,
            ScalarPath::Affine { intercept, slope } => intercept + slope * t,
            ScalarPath::Custom(f) => f(t),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ScalarPath::Zero)
    }

    /// Nested integrals on `[0, t]`. The system `(V, C, Q, K)' = (λ, V, V², λC)`
    /// is advanced with classical RK4, which reduces to composite Simpson for
    /// each pure quadrature component.
    pub fn integrals(&self, t: f64) -> PathIntegrals {
        self.integrals_with(t, PATH_SUBDIVISIONS)
    }

    pub fn integrals_with(&self, t: f64, subdivisions: usize) -> PathIntegrals {
        if self.is_zero() || t == 0.0 {
            return PathIntegrals::default();
        }
        let m = subdivisions.max(1);
        let h = t / m as f64;
        let rhs = |s: f64, y: [f64; 4]| {
            let l = self.value(s);
            [l, y[0], y[0] * y[0], l * y[1]]
        };
        let mut y = [0.0; 4];
        for i in 0..m {
            let s = i as f64 * h;
            let k1 = rhs(s, y);
            let k2 = rhs(s + 0.5 * h, axpy(y, 0.5 * h, k1));
            let k3 = rhs(s + 0.5 * h, axpy(y, 0.5 * h, k2));
            let k4 = rhs(s + h, axpy(y, h, k3));
            for j in 0..4 {
                y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        PathIntegrals {
            velocity: y[0],
            drift: y[1],
            kinetic: y[2],
            coupling: y[3],
        }
    }
}

fn axpy(y: [f64; 4], a: f64, k: [f64; 4]) -> [f64; 4] {
    [y[0] + a * k[0], y[1] + a * k[1], y[2] + a * k[2], y[3] + a * k[3]]
}

/// Closed-form solution of `i u_t = u_xx + |u|²u + λ(t) x u` from `Ψ_A⁰`
/// (or, with `translated`, of the equation with potential
/// `λ(t)(x - 2∫∫λ)`):
///
/// `√2A sech(A(x - c)) exp(-iA²t + i∫V² - ixV)`, `c = 2∫∫λ`, `V = ∫λ`,
/// times `exp(2i∫λ∫∫λ)` for the translated variant.
pub fn modulated_soliton(amplitude: f64, rate: &ScalarPath, t: f64, grid: &Grid, translated: bool) -> Result<Field> {
    let ints = rate.integrals(t);
    modulated_soliton_from(amplitude, &ints, t, grid, translated)
}

pub(crate) fn modulated_soliton_from(
    amplitude: f64,
    ints: &PathIntegrals,
    t: f64,
    grid: &Grid,
    translated: bool,
) -> Result<Field> {
    let a = amplitude;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Config(format!("soliton amplitude must be positive, got {a}")));
    }
    let c = ints.center();
    let l = grid.half_length();
    let edge = sech(a * (l - c.abs()));
    if c.abs() >= l || edge >= BOUNDARY_TOLERANCE {
        return Err(Error::Domain(format!(
            "modulated soliton centre {c:.4} leaves the interior of [-{l}, {l}) at t = {t}"
        )));
    }
    let mut global = -a * a * t + ints.kinetic;
    if translated {
        global += 2.0 * ints.coupling;
    }
    let amp = std::f64::consts::SQRT_2 * a;
    let v = ints.velocity;
    Ok(Field::from_fn(grid, |x| {
        Complex64::from_polar(amp * sech(a * (x - c)), global - x * v)
    }))
}

/// Time-dependent source field.
pub type FieldPath = Arc<dyn Fn(f64) -> Field + Send + Sync>;

/// Control entering the deterministic equation.
#[derive(Clone, Default)]
pub enum ControlSpec {
    #[default]
    None,
    /// Real potential `λ(t) x`.
    LinearPotential(ScalarPath),
    /// Real potential `λ(t)(x - 2∫₀ᵗ∫₀ˢλ)`.
    TranslatedPotential(ScalarPath),
    /// Additive forcing `g(t, x)` on the right-hand side.
    AdditiveForcing(FieldPath),
}

impl fmt::Debug for ControlSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlSpec::None => write!(f, "None"),
            ControlSpec::LinearPotential(p) => write!(f, "LinearPotential({p:?})"),
            ControlSpec::TranslatedPotential(p) => write!(f, "TranslatedPotential({p:?})"),
            ControlSpec::AdditiveForcing(_) => write!(f, "AdditiveForcing(..)"),
        }
    }
}

impl ControlSpec {
    /// Potential `V(τ, x_j)` frozen at time `τ`, if the control is a potential.
    fn potential_at(&self, grid: &Grid, tau: f64, out: &mut Vec<f64>) -> bool {
        let (rate, shift) = match self {
            ControlSpec::LinearPotential(p) => (p.value(tau), 0.0),
            ControlSpec::TranslatedPotential(p) => {
                let r = p.value(tau);
                let c = if r == 0.0 { 0.0 } else { p.integrals(tau).center() };
                (r, c)
            }
            _ => return false,
        };
        out.clear();
        out.extend(grid.nodes().iter().map(|&x| rate * (x - shift)));
        true
    }
}

/// Sampled trajectory `(t_i, u(t_i))`.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
}

impl Trajectory {
    pub fn push(&mut self, t: f64, u: Field) {
        self.times.push(t);
        self.states.push(u);
    }

    pub fn last(&self) -> Option<(f64, &Field)> {
        self.times.last().copied().zip(self.states.last())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Steps between stored snapshots.
    pub stride: usize,
    /// Coefficient of `|u|²u`; 0 gives the linear Schrödinger equation.
    pub nonlinearity: f64,
    /// Apply the 2/3-rule mask after each linear substep.
    pub dealias: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            stride: 100,
            nonlinearity: 1.0,
            dealias: false,
        }
    }
}

/// Number of steps of size `dt` covering `[0, T]`.
pub fn step_count(total: f64, dt: f64) -> Result<usize> {
    if !(total > 0.0 && dt > 0.0 && total.is_finite() && dt.is_finite()) {
        return Err(Error::Config(format!(
            "T and dt must be positive, got T = {total}, dt = {dt}"
        )));
    }
    if dt > total {
        return Err(Error::Config(format!("dt = {dt} exceeds T = {total}")));
    }
    let n = (total / dt).round();
    if (n * dt - total).abs() > 1e-9 * total.max(1.0) {
        return Err(Error::Config(format!("dt = {dt} does not divide T = {total}")));
    }
    Ok(n as usize)
}

/// Reusable Strang-splitting stepper for a fixed grid and step size.
pub struct Propagator {
    grid: Grid,
    dt: f64,
    linear: Vec<Complex64>,
    mask: Option<Vec<f64>>,
    nonlinearity: f64,
    scratch: Vec<Complex64>,
    potential: Vec<f64>,
}

impl Propagator {
    pub fn new(grid: &Grid, dt: f64, options: &EvolveOptions) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        let linear = grid
            .wavenumbers()
            .iter()
            .map(|k| Complex64::from_polar(1.0, k * k * dt))
            .collect();
        Ok(Self {
            grid: grid.clone(),
            dt,
            linear,
            mask: options.dealias.then(|| grid.dealias_mask()),
            nonlinearity: options.nonlinearity,
            scratch: grid.scratch(),
            potential: Vec::with_capacity(grid.n_points()),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Half-step phase flow `u ← exp(-i(g|u|² dt/2 + θ_j)) u`, where
    /// `θ_j` is an already integrated phase (potential times dt/2 plus noise).
    pub fn phase_half_step(&self, u: &mut [Complex64], extra: Option<&[f64]>) {
        let h = 0.5 * self.dt * self.nonlinearity;
        match extra {
            Some(theta) => {
                for (z, th) in u.iter_mut().zip(theta) {
                    *z *= Complex64::from_polar(1.0, -(h * z.norm_sqr() + th));
                }
            }
            None if h != 0.0 => {
                for z in u.iter_mut() {
                    *z *= Complex64::from_polar(1.0, -h * z.norm_sqr());
                }
            }
            None => {}
        }
    }

    /// Exact linear flow over one full step.
    pub fn linear_step(&mut self, u: &mut [Complex64]) {
        self.grid.forward_in_place(u, &mut self.scratch);
        for (z, p) in u.iter_mut().zip(&self.linear) {
            *z *= p;
        }
        if let Some(mask) = &self.mask {
            for (z, m) in u.iter_mut().zip(mask) {
                *z *= m;
            }
        }
        self.grid.inverse_in_place(u, &mut self.scratch);
    }

    /// One symmetric step `N(dt/2) L(dt) N(dt/2)` with optional integrated
    /// phases for the two half steps.
    pub fn strang(&mut self, u: &mut [Complex64], first: Option<&[f64]>, second: Option<&[f64]>) {
        self.phase_half_step(u, first);
        self.linear_step(u);
        self.phase_half_step(u, second);
    }

    /// Advances `u` from `t` to `t + dt` under `control`.
    ///
    /// Time-dependent controls are frozen at `t` for the first half of the
    /// palindrome and at `t + dt` for the second, which keeps the
    /// composition symmetric and second order.
    pub fn step(&mut self, u: &mut Field, t: f64, control: &ControlSpec) -> Result<()> {
        self.grid.check(u)?;
        let dt = self.dt;
        match control {
            ControlSpec::None => self.strang(&mut u.values, None, None),
            ControlSpec::LinearPotential(_) | ControlSpec::TranslatedPotential(_) => {
                let mut pot = std::mem::take(&mut self.potential);
                control.potential_at(&self.grid, t, &mut pot);
                pot.iter_mut().for_each(|p| *p *= 0.5 * dt);
                let mut pot2 = Vec::with_capacity(pot.len());
                control.potential_at(&self.grid, t + dt, &mut pot2);
                pot2.iter_mut().for_each(|p| *p *= 0.5 * dt);
                self.strang(&mut u.values, Some(&pot), Some(&pot2));
                self.potential = pot;
            }
            ControlSpec::AdditiveForcing(g) => {
                let g0 = g(t);
                self.grid.check(&g0)?;
                add_forcing(&mut u.values, &g0.values, 0.5 * dt);
                self.strang(&mut u.values, None, None);
                let g1 = g(t + dt);
                add_forcing(&mut u.values, &g1.values, 0.5 * dt);
            }
        }
        if !u.is_finite() {
            return Err(Error::Instability { t: t + dt });
        }
        Ok(())
    }
}

/// `u ← u - i τ g`, the exact flow of `i u_t = g` with `g` frozen.
pub fn add_forcing(u: &mut [Complex64], g: &[Complex64], tau: f64) {
    for (z, f) in u.iter_mut().zip(g) {
        *z += Complex64::new(f.im * tau, -f.re * tau);
    }
}

pub fn strang_step(u: &Field, dt: f64, control: &ControlSpec, t: f64, grid: &Grid) -> Result<Field> {
    let mut p = Propagator::new(grid, dt, &EvolveOptions::default())?;
    let mut out = u.clone();
    p.step(&mut out, t, control)?;
    Ok(out)
}

pub fn evolve(
    u0: &Field,
    total: f64,
    dt: f64,
    control: &ControlSpec,
    grid: &Grid,
    options: &EvolveOptions,
) -> Result<Trajectory> {
    grid.check(u0)?;
    let steps = step_count(total, dt)?;
    let stride = options.stride.max(1);
    let mut prop = Propagator::new(grid, dt, options)?;
    let mut u = u0.clone();
    let mut traj = Trajectory::default();
    traj.push(0.0, u.clone());
    for i in 0..steps {
        let t = i as f64 * dt;
        prop.step(&mut u, t, control)?;
        if (i + 1) % stride == 0 || i + 1 == steps {
            traj.push((i + 1) as f64 * dt, u.clone());
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::simpson;

    fn grid() -> Grid {
        Grid::new(20.0, 512).unwrap()
    }

    #[test]
    fn soliton_peak_and_mass() {
        let g = grid();
        let u = soliton_profile(SolitonParams::at_rest(1.0), 0.0, &g).unwrap();
        let mid = g.n_points() / 2;
        assert_eq!(g.nodes()[mid], 0.0);
        assert!((u.values[mid].re - 2f64.sqrt()).abs() < 1e-15);
        for t in [0.0, 0.7, 3.0] {
            let u = soliton_profile(SolitonParams::at_rest(1.0), t, &g).unwrap();
            assert!((u.norm_sq() - 4.0).abs() < 1e-8);
        }
    }

    #[test]
    fn soliton_mass_scales_with_amplitude() {
        let g = grid();
        let oracle = simpson(|x| 2.0 * 4.0 * sech(2.0 * x).powi(2), -20.0, 20.0, 20_000);
        let u = soliton_profile(SolitonParams::at_rest(2.0), 0.0, &g).unwrap();
        assert!((oracle - 8.0).abs() < 1e-8);
        assert!((u.norm_sq() - oracle).abs() < 1e-8);
    }

    #[test]
    fn soliton_that_touches_boundary_is_rejected() {
        let g = Grid::new(5.0, 64).unwrap();
        assert!(matches!(
            soliton_profile(SolitonParams::at_rest(1.0), 0.0, &g),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn zero_rate_modulated_soliton_is_the_standing_soliton() {
        let g = grid();
        for t in [0.0, 0.4, 1.3] {
            let m = modulated_soliton(1.0, &ScalarPath::Zero, t, &g, false).unwrap();
            let s = soliton_profile(SolitonParams::at_rest(1.0), t, &g).unwrap();
            assert!(m.relative_error(&s) < 1e-14);
        }
    }

    #[test]
    fn constant_rate_centre_is_quadratic() {
        for c in [0.05, -0.3, 1.0] {
            for t in [0.5, 1.0, 2.0] {
                let ints = ScalarPath::Constant(c).integrals(t);
                assert!((ints.center() - c * t * t).abs() < 1e-12);
                let custom = ScalarPath::custom(move |_| c).integrals(t);
                assert!((custom.center() - c * t * t).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn path_integrals_match_closed_forms_for_affine_rate() {
        // λ = a + b t: V = at + bt²/2, C = at²/2 + bt³/6.
        let (a, b, t) = (0.3, -0.2, 1.7);
        let p = ScalarPath::Affine { intercept: a, slope: b };
        let i = p.integrals(t);
        assert!((i.velocity - (a * t + b * t * t / 2.0)).abs() < 1e-13);
        assert!((i.drift - (a * t * t / 2.0 + b * t.powi(3) / 6.0)).abs() < 1e-13);
        let q = simpson(|s| (a * s + b * s * s / 2.0).powi(2), 0.0, t, 2000);
        assert!((i.kinetic - q).abs() < 1e-12);
        let k = simpson(|s| (a + b * s) * (a * s * s / 2.0 + b * s.powi(3) / 6.0), 0.0, t, 2000);
        assert!((i.coupling - k).abs() < 1e-12);
    }

    #[test]
    fn zero_datum_stays_zero() {
        let g = Grid::new(10.0, 64).unwrap();
        let tr = evolve(
            &Field::zeros(&g),
            0.1,
            1e-3,
            &ControlSpec::None,
            &g,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(tr.times.first(), Some(&0.0));
        assert!((tr.times.last().unwrap() - 0.1).abs() < 1e-12);
        assert!(tr.states.iter().all(|u| u.norm_sq() == 0.0));
    }

    #[test]
    fn step_count_validation() {
        assert_eq!(step_count(1.0, 1e-3).unwrap(), 1000);
        assert!(step_count(1.0, 0.3).is_err());
        assert!(step_count(1.0, 2.0).is_err());
        assert!(step_count(-1.0, 0.1).is_err());
    }

    #[test]
    fn nan_input_is_reported_with_time() {
        let g = Grid::new(10.0, 64).unwrap();
        let mut u = Field::zeros(&g);
        u.values[3] = Complex64::new(f64::NAN, 0.0);
        let err = strang_step(&u, 1e-3, &ControlSpec::None, 0.5, &g).unwrap_err();
        assert!(matches!(err, Error::Instability { t } if (t - 0.501).abs() < 1e-12));
    }
}
