//! Trajectory sampling for the additive, multiplicative (Stratonovich) and
//! extended stochastic NLS models.
//!
//! Every model shares the Strang skeleton of [`Propagator`]. One noise
//! increment is drawn per step: additive noise is added after the step,
//! real multiplicative noise enters the two phase half steps as the exact
//! rotation `exp(-i √ε ΔW / 2)`, and the extended model is obtained from the
//! multiplicative one through the gauge/translation transform.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::dynamics::{step_count, EvolveOptions, FieldPath, Propagator, ScalarPath, Trajectory};
use crate::ensemble::trajectory_rng;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::noise::{ito_correction, NoiseModel, NoiseTarget};
use crate::quad::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SdeModel {
    Additive,
    Multiplicative,
    Extended,
}

/// Importance-sampling drift: the raw space-time noise is shifted by
/// `dt·h₁(t)/√ε` and the scalar Brownian motion of the extended model by
/// `dt·h₂(t)/√ε`.
#[derive(Clone, Default)]
pub struct DriftShift {
    pub field: Option<FieldPath>,
    pub beta: Option<ScalarPath>,
}

impl std::fmt::Debug for DriftShift {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DriftShift")
            .field("field", &self.field.as_ref().map(|_| ".."))
            .field("beta", &self.beta)
            .finish()
    }
}

impl DriftShift {
    pub fn field(h: FieldPath) -> Self {
        Self {
            field: Some(h),
            beta: None,
        }
    }

    pub fn beta(h: ScalarPath) -> Self {
        Self {
            field: None,
            beta: Some(h),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.field.is_none() && self.beta.as_ref().is_none_or(ScalarPath::is_zero)
    }
}

/// Complete description of a stochastic run.
#[derive(Debug, Clone)]
pub struct SdeRun {
    pub model: SdeModel,
    /// Noise intensity; 0 switches the noise off.
    pub epsilon: f64,
    pub noise: NoiseModel,
    pub total_time: f64,
    pub dt: f64,
    /// Master seed; trajectory `i` uses stream `i`.
    pub seed: u64,
    pub drift_shift: Option<DriftShift>,
    pub options: EvolveOptions,
}

impl SdeRun {
    pub fn new(model: SdeModel, epsilon: f64, noise: NoiseModel, total_time: f64, dt: f64, seed: u64) -> Result<Self> {
        let run = Self {
            model,
            epsilon,
            noise,
            total_time,
            dt,
            seed,
            drift_shift: None,
            options: EvolveOptions::default(),
        };
        run.validate()?;
        Ok(run)
    }

    pub fn with_drift_shift(mut self, shift: DriftShift) -> Self {
        self.drift_shift = (!shift.is_zero()).then_some(shift);
        self
    }

    pub fn with_options(mut self, options: EvolveOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn steps(&self) -> Result<usize> {
        step_count(self.total_time, self.dt)
    }

    pub fn grid(&self) -> &Grid {
        self.noise.grid()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        self.steps()?;
        let want = match self.model {
            SdeModel::Additive => NoiseTarget::Complex,
            SdeModel::Multiplicative | SdeModel::Extended => NoiseTarget::Real,
        };
        if self.noise.target != want {
            return Err(Error::Config(format!(
                "{:?} model needs {:?} noise, got {:?}",
                self.model, want, self.noise.target
            )));
        }
        if let Some(shift) = &self.drift_shift {
            if self.epsilon == 0.0 {
                return Err(Error::Contract("a drift shift needs epsilon > 0".into()));
            }
            if shift.beta.is_some() && self.model != SdeModel::Extended {
                return Err(Error::Contract("a scalar drift shift needs the extended model".into()));
            }
        }
        Ok(())
    }

    fn expect(&self, model: SdeModel) -> Result<()> {
        self.validate()?;
        if self.model != model {
            return Err(Error::Contract(format!(
                "expected a {model:?} run, got {:?}",
                self.model
            )));
        }
        Ok(())
    }
}

/// Scalar Brownian path with its running integrals on the step mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BetaPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `∫₀ᵗ β`, trapezoid rule.
    pub integral: Vec<f64>,
    /// `∫₀ᵗ β²`, trapezoid rule.
    pub square_integral: Vec<f64>,
}

impl BetaPath {
    fn start() -> Self {
        Self {
            times: vec![0.0],
            values: vec![0.0],
            integral: vec![0.0],
            square_integral: vec![0.0],
        }
    }

    fn push(&mut self, t: f64, increment: f64) {
        let dt = t - self.times.last().unwrap();
        let b0 = *self.values.last().unwrap();
        let b1 = b0 + increment;
        self.times.push(t);
        self.values.push(b1);
        self.integral.push(self.integral.last().unwrap() + 0.5 * dt * (b0 + b1));
        self.square_integral
            .push(self.square_integral.last().unwrap() + 0.5 * dt * (b0 * b0 + b1 * b1));
    }

    /// `∫₀ᵀ β`.
    pub fn total_integral(&self) -> f64 {
        *self.integral.last().unwrap()
    }
}

/// Samples a standard Brownian path on `T / dt` steps.
pub fn sample_beta<R: Rng + ?Sized>(total_time: f64, dt: f64, rng: &mut R) -> Result<BetaPath> {
    let steps = step_count(total_time, dt)?;
    let sd = dt.sqrt();
    let mut path = BetaPath::start();
    for i in 0..steps {
        let z: f64 = rng.sample(StandardNormal);
        path.push((i + 1) as f64 * dt, sd * z);
    }
    Ok(path)
}

/// Gauge/translation map from the multiplicative solution `u` to the
/// extended one: `ũ(x) = exp(-i x √ε β + i ε ∫β²) u(x - 2√ε ∫β)`.
pub fn extended_transform(
    u: &Field,
    grid: &Grid,
    epsilon: f64,
    beta: f64,
    beta_integral: f64,
    beta_square_integral: f64,
) -> Result<Field> {
    let se = epsilon.sqrt();
    let shift = 2.0 * se * beta_integral;
    if shift.abs() > 0.5 * grid.half_length() {
        return Err(Error::Domain(format!(
            "translation {shift} exceeds half the domain half-length {}",
            grid.half_length()
        )));
    }
    let mut out = if shift == 0.0 {
        u.clone()
    } else {
        grid.translate(u, shift)?
    };
    let q = epsilon * beta_square_integral;
    for (z, &x) in out.values.iter_mut().zip(grid.nodes()) {
        *z *= Complex64::from_polar(1.0, -x * se * beta + q);
    }
    Ok(out)
}

/// Which snapshots a sampled path keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Recording {
    /// `t = 0`, every `options.stride` steps, and `t = T`.
    #[default]
    Stride,
    /// Only the state at `t = T`.
    FinalOnly,
}

/// One sampled path with its Girsanov log-likelihood ratio (0 without tilt).
#[derive(Debug, Clone)]
pub struct SamplePath {
    pub trajectory: Trajectory,
    /// Extended model only: the multiplicative solution `u` before the
    /// transform, at the same times as `trajectory`.
    pub base: Option<Trajectory>,
    pub beta: Option<BetaPath>,
    pub log_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scheme {
    /// Exact phase rotation for real noise; extended model by transform.
    Exact,
    /// Extended model with the potential `√ε x Δβ` stepped directly.
    ExtendedDirect,
    /// Itô–Euler multiplicative update, with or without `F_Φ`.
    Ito { correction: bool },
}

/// Samples path `index` of `run` with the exact schemes.
pub fn sample_path(u0: &Field, run: &SdeRun, index: u64, recording: Recording) -> Result<SamplePath> {
    run.validate()?;
    let mut rng = trajectory_rng(run.seed, index);
    simulate(u0, run, &mut rng, recording, Scheme::Exact)
}

pub fn evolve_additive(u0: &Field, run: &SdeRun) -> Result<Trajectory> {
    run.expect(SdeModel::Additive)?;
    Ok(sample_path(u0, run, 0, Recording::Stride)?.trajectory)
}

pub fn evolve_multiplicative(u0: &Field, run: &SdeRun) -> Result<Trajectory> {
    run.expect(SdeModel::Multiplicative)?;
    Ok(sample_path(u0, run, 0, Recording::Stride)?.trajectory)
}

/// Itô form with the explicit `-(ε/2) F_Φ u dt` drift (or without it, to
/// expose the bias the correction removes). Mass is conserved only in mean.
pub fn evolve_multiplicative_ito(u0: &Field, run: &SdeRun, correction: bool) -> Result<Trajectory> {
    run.expect(SdeModel::Multiplicative)?;
    let mut rng = trajectory_rng(run.seed, 0);
    Ok(simulate(u0, run, &mut rng, Recording::Stride, Scheme::Ito { correction })?.trajectory)
}

/// Extended model through the transform of the multiplicative path.
pub fn evolve_extended(u0: &Field, run: &SdeRun) -> Result<(Trajectory, BetaPath)> {
    run.expect(SdeModel::Extended)?;
    let p = sample_path(u0, run, 0, Recording::Stride)?;
    Ok((p.trajectory, p.beta.unwrap_or_default()))
}

/// Extended model stepped directly, for cross-checking the transform. Uses
/// the same random stream as [`evolve_extended`].
pub fn evolve_extended_direct(u0: &Field, run: &SdeRun) -> Result<(Trajectory, BetaPath)> {
    run.expect(SdeModel::Extended)?;
    let mut rng = trajectory_rng(run.seed, 0);
    let p = simulate(u0, run, &mut rng, Recording::Stride, Scheme::ExtendedDirect)?;
    Ok((p.trajectory, p.beta.unwrap_or_default()))
}

fn simulate<R: Rng + ?Sized>(
    u0: &Field,
    run: &SdeRun,
    rng: &mut R,
    recording: Recording,
    scheme: Scheme,
) -> Result<SamplePath> {
    let grid = run.grid().clone();
    grid.check(u0)?;
    let steps = run.steps()?;
    let dt = run.dt;
    let n = grid.n_points();
    let dx = grid.spacing();
    let eps = run.epsilon;
    let se = eps.sqrt();
    let noisy = eps > 0.0;
    let real_noise = run.noise.target == NoiseTarget::Real;
    let extended = run.model == SdeModel::Extended;
    let transform = extended && scheme == Scheme::Exact;
    let stride = run.options.stride.max(1);

    let mut prop = Propagator::new(&grid, dt, &run.options)?;
    let mut sampler = run.noise.sampler();
    let mut raw = vec![Complex64::default(); n];
    let mut filtered = vec![Complex64::default(); n];
    let mut theta = vec![0.0; n];
    let ito_field: Option<Vec<f64>> = match scheme {
        Scheme::Ito { correction: true } => Some(ito_correction(&run.noise)?.values.iter().map(|z| z.re).collect()),
        _ => None,
    };
    let field_shift = run.drift_shift.as_ref().and_then(|s| s.field.clone());
    let beta_shift = run.drift_shift.as_ref().and_then(|s| s.beta.clone());

    let mut beta = extended.then(BetaPath::start);
    let mut log_w = NeumaierSum::default();
    let mut u = u0.clone();
    let mut traj = Trajectory::default();
    let mut base = transform.then(Trajectory::default);

    let snapshot = |u: &Field, beta: &Option<BetaPath>| -> Result<Field> {
        match (transform, beta) {
            (true, Some(b)) => extended_transform(
                u,
                &grid,
                eps,
                *b.values.last().unwrap(),
                b.total_integral(),
                *b.square_integral.last().unwrap(),
            ),
            _ => Ok(u.clone()),
        }
    };
    if recording == Recording::Stride {
        traj.push(0.0, snapshot(&u, &beta)?);
        if let Some(b) = base.as_mut() {
            b.push(0.0, u.clone());
        }
    }

    for i in 0..steps {
        let t = i as f64 * dt;
        let mut d_beta = 0.0;
        if noisy {
            sampler.draw_raw(rng, dt, &mut raw);
            if let Some(h) = &field_shift {
                let hf = h(t);
                grid.check(&hf)?;
                let c = dt / se;
                let mut pair = 0.0;
                let mut energy = 0.0;
                for (z, hv) in raw.iter_mut().zip(&hf.values) {
                    let hv = if real_noise { Complex64::new(hv.re, 0.0) } else { *hv };
                    pair += hv.re * z.re + hv.im * z.im;
                    energy += hv.norm_sqr();
                    *z += hv * c;
                }
                log_w.add(-dx * pair / se);
                log_w.add(-dt * dx * energy / (2.0 * eps));
            }
            sampler.filter(&raw, &mut filtered);
            if extended {
                let z: f64 = rng.sample(StandardNormal);
                d_beta = dt.sqrt() * z;
                if let Some(h2) = &beta_shift {
                    let h = h2.value(t);
                    log_w.add(-h * d_beta / se - dt * h * h / (2.0 * eps));
                    d_beta += dt * h / se;
                }
            }
        }

        match (run.model, scheme) {
            (SdeModel::Additive, _) => {
                prop.strang(&mut u.values, None, None);
                if noisy {
                    for (z, w) in u.values.iter_mut().zip(&filtered) {
                        *z += Complex64::new(se * w.im, -se * w.re);
                    }
                }
            }
            (_, Scheme::Ito { .. }) => {
                prop.strang(&mut u.values, None, None);
                if noisy {
                    for (j, z) in u.values.iter_mut().enumerate() {
                        let drift = ito_field.as_ref().map_or(0.0, |f| 0.5 * eps * f[j] * dt);
                        *z *= Complex64::new(1.0 - drift, -se * filtered[j].re);
                    }
                }
            }
            (_, scheme) => {
                if noisy {
                    let direct = scheme == Scheme::ExtendedDirect;
                    for ((th, w), &x) in theta.iter_mut().zip(&filtered).zip(grid.nodes()) {
                        let pot = if direct { w.re + x * d_beta } else { w.re };
                        *th = 0.5 * se * pot;
                    }
                    prop.strang(&mut u.values, Some(&theta), Some(&theta));
                } else {
                    prop.strang(&mut u.values, None, None);
                }
            }
        }
        if let Some(b) = beta.as_mut() {
            b.push((i + 1) as f64 * dt, d_beta);
        }
        if !u.is_finite() {
            return Err(Error::Instability { t: t + dt });
        }
        let last = i + 1 == steps;
        let keep = match recording {
            Recording::Stride => (i + 1) % stride == 0 || last,
            Recording::FinalOnly => last,
        };
        if keep {
            let t1 = (i + 1) as f64 * dt;
            traj.push(t1, snapshot(&u, &beta)?);
            if let Some(b) = base.as_mut() {
                b.push(t1, u.clone());
            }
        }
    }
    Ok(SamplePath {
        trajectory: traj,
        base,
        beta,
        log_weight: log_w.value(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, soliton_profile, ControlSpec, SolitonParams};
    use crate::noise::NoiseKind;
    use crate::observables::{arrival_time, mass};

    fn grid() -> Grid {
        Grid::new(16.0, 256).unwrap()
    }

    fn run(model: SdeModel, eps: f64, seed: u64) -> SdeRun {
        let target = match model {
            SdeModel::Additive => NoiseTarget::Complex,
            _ => NoiseTarget::Real,
        };
        let noise = NoiseModel::smoothing(&grid(), target).unwrap();
        SdeRun::new(model, eps, noise, 0.5, 1e-3, seed).unwrap()
    }

    #[test]
    fn zero_epsilon_is_deterministic_evolution() {
        let g = grid();
        let u0 = soliton_profile(SolitonParams::at_rest(1.0), 0.0, &g).unwrap();
        let det = evolve(&u0, 0.5, 1e-3, &ControlSpec::None, &g, &EvolveOptions::default()).unwrap();
        for model in [SdeModel::Additive, SdeModel::Multiplicative, SdeModel::Extended] {
            let r = run(model, 0.0, 1);
            let traj = sample_path(&u0, &r, 0, Recording::Stride).unwrap().trajectory;
            assert_eq!(traj.times, det.times);
            for (a, b) in traj.states.iter().zip(&det.states) {
                assert_eq!(a, b, "{model:?}");
            }
        }
    }

    #[test]
    fn same_seed_same_path() {
        let g = grid();
        let u0 = soliton_profile(SolitonParams::at_rest(1.0), 0.0, &g).unwrap();
        let r = run(SdeModel::Additive, 1e-2, 5);
        let a = evolve_additive(&u0, &r).unwrap();
        let b = evolve_additive(&u0, &r).unwrap();
        assert_eq!(a.states, b.states);
        let c = evolve_additive(&u0, &r.clone().with_seed(6)).unwrap();
        assert_ne!(a.states.last(), c.states.last());
    }

    #[test]
    fn multiplicative_conserves_mass_per_step() {
        let g = grid();
        let u0 = soliton_profile(SolitonParams::at_rest(1.0), 0.0, &g).unwrap();
        let r = run(SdeModel::Multiplicative, 5e-2, 2).with_options(EvolveOptions {
            stride: 1,
            ..Default::default()
        });
        let traj = evolve_multiplicative(&u0, &r).unwrap();
        let n0 = mass(&u0);
        for u in &traj.states {
            assert!((mass(u) - n0).abs() / n0 < 1e-12);
        }
    }

    #[test]
    fn model_target_mismatch_is_rejected() {
        let noise = NoiseModel::smoothing(&grid(), NoiseTarget::Complex).unwrap();
        assert!(matches!(
            SdeRun::new(SdeModel::Multiplicative, 0.1, noise, 1.0, 1e-3, 0),
            Err(Error::Config(_))
        ));
        let r = run(SdeModel::Additive, 0.1, 0);
        let u0 = Field::zeros(&grid());
        assert!(matches!(evolve_multiplicative(&u0, &r), Err(Error::Contract(_))));
    }

    #[test]
    fn transform_shifts_arrival_time_by_beta_integral() {
        let g = grid();
        let u0 = soliton_profile(SolitonParams::at_rest(1.0), 0.0, &g).unwrap();
        let r = run(SdeModel::Extended, 1e-2, 9);
        let p = sample_path(&u0, &r, 0, Recording::FinalOnly).unwrap();
        let y_t = arrival_time(p.trajectory.states.last().unwrap(), &g).unwrap();
        let y_u = arrival_time(p.base.unwrap().states.last().unwrap(), &g).unwrap();
        let beta = p.beta.unwrap();
        let expect = 2.0 * r.epsilon.sqrt() * mass(&u0) * beta.total_integral();
        assert!((y_t - y_u - expect).abs() < 1e-7, "{} vs {expect}", y_t - y_u);
    }

    #[test]
    fn transform_agrees_with_direct_extended_stepping() {
        // Spatially constant W is translation invariant pathwise, so the two
        // constructions see the same noise.
        let g = grid();
        let u0 = soliton_profile(SolitonParams::at_rest(1.0), 0.0, &g).unwrap();
        let noise = NoiseModel::new(&g, NoiseKind::SpectralCutoff { k_max: 0.0 }, NoiseTarget::Real).unwrap();
        let base = SdeRun::new(SdeModel::Extended, 1e-2, noise, 0.5, 5e-4, 4).unwrap();
        let (a, beta_a) = evolve_extended(&u0, &base).unwrap();
        let (b, beta_b) = evolve_extended_direct(&u0, &base).unwrap();
        assert_eq!(beta_a, beta_b);
        let err = a.states.last().unwrap().relative_error(b.states.last().unwrap());
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn beta_integral_variance() {
        let mut rng = trajectory_rng(1, 0);
        let n = 4000;
        let total = 1.0;
        let s2: f64 = (0..n)
            .map(|_| sample_beta(total, 1e-2, &mut rng).unwrap().total_integral().powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((s2 * 3.0 - 1.0).abs() < 0.08, "{s2}");
    }

    #[test]
    fn transform_rejects_large_shift() {
        let g = grid();
        let u = Field::zeros(&g);
        assert!(matches!(
            extended_transform(&u, &g, 1.0, 0.0, 5.0, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn drift_shift_requires_noise() {
        let r = run(SdeModel::Extended, 0.0, 0);
        let mut bad = r.clone();
        bad.drift_shift = Some(DriftShift::beta(ScalarPath::Constant(1.0)));
        assert!(matches!(bad.validate(), Err(Error::Contract(_))));
        let zero = r.with_drift_shift(DriftShift::beta(ScalarPath::Zero));
        assert!(zero.drift_shift.is_none());
    }

    #[test]
    fn nan_reports_step_time() {
        let g = grid();
        let mut u0 = Field::zeros(&g);
        u0.values[3] = Complex64::new(f64::NAN, 0.0);
        let r = run(SdeModel::Additive, 1e-2, 0);
        assert!(matches!(evolve_additive(&u0, &r), Err(Error::Instability { t }) if (t - 1e-3).abs() < 1e-15));
    }
}
