//! Amplitude paths `A(t)` for the mass-fluctuation controls and their cost
//! `‖h_A‖² = (12 + π²)/9 ∫₀ᵀ A′²/A`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::quad::{simpson, simpson_samples};

/// `(12 + π²)/9`, from `∫sech² = 2` and `∫y² tanh² sech² = (12 + π²)/18`.
pub fn cost_prefactor() -> f64 {
    (12.0 + std::f64::consts::PI.powi(2)) / 9.0
}

/// Panels for time integrals of costs and constraints.
pub const COST_PANELS: usize = 1000;

/// Offset of the representative `R̃ = R(1 + δ)` of the dense target sets.
pub const DEFAULT_DENSE_OFFSET: f64 = 1e-3;

pub fn representative(r: f64, offset: f64) -> f64 {
    r * (1.0 + offset)
}

#[derive(Debug, Clone, PartialEq)]
pub enum AmplitudeKind {
    /// `A(t) = R̃ (t/2T)²`, from the zero datum.
    ZeroDatum { target: f64 },
    /// `A(t) = (1 - c t/2T)²` with `c = 2 - √(4 - R̃)`, from the unit soliton.
    SolitonDatum { drop: f64 },
    /// Samples on the uniform mesh `t_j = j T / (len - 1)`.
    Custom { samples: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudePath {
    pub kind: AmplitudeKind,
    pub total_time: f64,
}

fn check_time(total_time: f64) -> Result<()> {
    if !(total_time > 0.0 && total_time.is_finite()) {
        return Err(Error::Config(format!("T must be positive, got {total_time}")));
    }
    Ok(())
}

impl AmplitudePath {
    pub fn zero_datum(target: f64, total_time: f64) -> Result<Self> {
        check_time(total_time)?;
        if !(target > 0.0 && target.is_finite()) {
            return Err(Error::OutOfRange(format!("target mass must be positive, got {target}")));
        }
        Ok(Self {
            kind: AmplitudeKind::ZeroDatum { target },
            total_time,
        })
    }

    pub fn soliton_datum(drop: f64, total_time: f64) -> Result<Self> {
        check_time(total_time)?;
        if !(drop > 0.0 && drop < 4.0) {
            return Err(Error::OutOfRange(format!("mass drop must lie in (0, 4), got {drop}")));
        }
        Ok(Self {
            kind: AmplitudeKind::SolitonDatum { drop },
            total_time,
        })
    }

    pub fn custom(samples: Vec<f64>, total_time: f64) -> Result<Self> {
        check_time(total_time)?;
        if samples.len() < 5 {
            return Err(Error::Config("custom amplitude path needs at least 5 samples".into()));
        }
        if samples.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::Config(
                "custom amplitude samples must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            kind: AmplitudeKind::Custom { samples },
            total_time,
        })
    }

    /// Quadratic coefficients `(a, b, c)` of `A = a s² + b s + c`, `s = t/2T`.
    pub fn quadratic(&self) -> Option<(f64, f64, f64)> {
        match &self.kind {
            AmplitudeKind::ZeroDatum { target } => Some((*target, 0.0, 0.0)),
            AmplitudeKind::SolitonDatum { drop } => {
                let r = (4.0 - drop).sqrt();
                Some((8.0 - drop - 4.0 * r, -4.0 + 2.0 * r, 1.0))
            }
            AmplitudeKind::Custom { .. } => None,
        }
    }

    fn mesh_step(samples: &[f64], total_time: f64) -> f64 {
        total_time / (samples.len() - 1) as f64
    }

    /// `(A, A′, A″)` at `t`.
    pub fn jet(&self, t: f64) -> (f64, f64, f64) {
        let t2 = 2.0 * self.total_time;
        if let Some((a, b, c)) = self.quadratic() {
            let s = t / t2;
            return (a * s * s + b * s + c, (2.0 * a * s + b) / t2, 2.0 * a / (t2 * t2));
        }
        let AmplitudeKind::Custom { samples } = &self.kind else {
            unreachable!()
        };
        let h = Self::mesh_step(samples, self.total_time);
        let m = samples.len() - 1;
        let x = (t / h).clamp(0.0, m as f64);
        let j = (x.floor() as usize).min(m - 1);
        let w = x - j as f64;
        let value = samples[j] * (1.0 - w) + samples[j + 1] * w;
        let d = |i: usize| finite_first(samples, i, h);
        let dd = |i: usize| finite_second(samples, i, h);
        (
            value,
            d(j) * (1.0 - w) + d(j + 1) * w,
            dd(j) * (1.0 - w) + dd(j + 1) * w,
        )
    }

    pub fn value(&self, t: f64) -> f64 {
        self.jet(t).0
    }

    pub fn final_amplitude(&self) -> f64 {
        self.value(self.total_time)
    }

    /// `∫₀ᵗ A²`.
    pub fn phase_integral(&self, t: f64) -> f64 {
        if let Some((a, b, c)) = self.quadratic() {
            // ∫₀ˢ (aσ² + bσ + c)² dσ scaled by 2T.
            let s = t / (2.0 * self.total_time);
            let p = a * a * s.powi(5) / 5.0
                + a * b * s.powi(4) / 2.0
                + (b * b + 2.0 * a * c) * s.powi(3) / 3.0
                + b * c * s * s
                + c * c * s;
            return 2.0 * self.total_time * p;
        }
        simpson(|s| self.value(s).powi(2), 0.0, t, COST_PANELS)
    }
}

fn finite_first(y: &[f64], i: usize, h: f64) -> f64 {
    let m = y.len() - 1;
    match i {
        0 => (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h),
        i if i == m => (3.0 * y[m] - 4.0 * y[m - 1] + y[m - 2]) / (2.0 * h),
        i => (y[i + 1] - y[i - 1]) / (2.0 * h),
    }
}

fn finite_second(y: &[f64], i: usize, h: f64) -> f64 {
    let m = y.len() - 1;
    let i = i.clamp(1, m - 1);
    (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h)
}

/// `A′²/A`, with the limit `2A″` where `A = A′ = 0`.
fn cost_density(a: f64, da: f64, dda: f64) -> f64 {
    if a > 0.0 {
        da * da / a
    } else if da == 0.0 {
        2.0 * dda
    } else {
        f64::INFINITY
    }
}

/// `∫₀ᵀ A′²/A`.
pub fn action(path: &AmplitudePath) -> Result<f64> {
    let total = path.total_time;
    match &path.kind {
        AmplitudeKind::ZeroDatum { target } => Ok(target / total),
        AmplitudeKind::SolitonDatum { drop } => Ok((8.0 - drop - 4.0 * (4.0 - drop).sqrt()) / total),
        AmplitudeKind::Custom { samples } => {
            let h = AmplitudePath::mesh_step(samples, total);
            if let Some(j) = samples.iter().skip(1).position(|&a| a <= 0.0) {
                return Err(Error::SingularCost { t: (j + 1) as f64 * h });
            }
            let density: Vec<f64> = (0..samples.len())
                .map(|i| cost_density(samples[i], finite_first(samples, i, h), finite_second(samples, i, h)))
                .collect();
            if !density[0].is_finite() {
                return Err(Error::SingularCost { t: 0.0 });
            }
            Ok(simpson_samples(&density, h))
        }
    }
}

/// `‖h_A‖²_{L²(0,T;L²)}`.
pub fn amplitude_cost(path: &AmplitudePath) -> Result<f64> {
    Ok(cost_prefactor() * action(path)?)
}

/// `∫₀ᵀ A′²/A` for an analytic jet, by Simpson quadrature.
pub fn action_of<F: Fn(f64) -> (f64, f64, f64)>(jet: F, total_time: f64) -> f64 {
    simpson(
        |t| {
            let (a, da, dda) = jet(t);
            cost_density(a, da, dda)
        },
        0.0,
        total_time,
        COST_PANELS,
    )
}

/// Largest pointwise `|2A″A - A′²| / max(A², 1e-12)` on the interior mesh
/// (1000 panels for the named families, the sample mesh otherwise).
pub fn euler_lagrange_residual(path: &AmplitudePath) -> f64 {
    let total = path.total_time;
    let (m, h) = match &path.kind {
        AmplitudeKind::Custom { samples } => (samples.len() - 1, AmplitudePath::mesh_step(samples, total)),
        _ => (COST_PANELS, total / COST_PANELS as f64),
    };
    (1..m)
        .map(|i| {
            let t = i as f64 * h;
            let (a, da, dda) = match &path.kind {
                AmplitudeKind::Custom { samples } => {
                    (samples[i], finite_first(samples, i, h), finite_second(samples, i, h))
                }
                _ => path.jet(t),
            };
            (2.0 * dda * a - da * da).abs() / (a * a).max(1e-12)
        })
        .fold(0.0, f64::max)
}

/// Outcome of random admissible perturbations of a named path.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub trials: usize,
    /// Trials whose action did not drop below the base action minus `slack`.
    pub not_lowered: usize,
    pub base_action: f64,
    /// Smallest `action(A + δ) - action(A)` seen.
    pub min_increase: f64,
}

/// Perturbs `A` by `δ(t) = (t/T)² Σ_m c_m sin(mπt/T)`, which keeps `δ(0) =
/// δ′(0) = 0` and `δ(T) = 0`, and compares `∫A′²/A` by quadrature.
pub fn perturbation_probe<R: Rng + ?Sized>(
    path: &AmplitudePath,
    trials: usize,
    modes: usize,
    slack: f64,
    rng: &mut R,
) -> ProbeReport {
    use std::f64::consts::PI;
    let total = path.total_time;
    let base = action_of(|t| path.jet(t), total);
    let mut not_lowered = 0;
    let mut min_increase = f64::INFINITY;
    for _ in 0..trials {
        let coeffs: Vec<f64> = (0..modes).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut scale = rng.random_range(0.05..0.5) * path.final_amplitude().max(1e-3);
        let perturbed = loop {
            let c = coeffs.clone();
            let jet = move |t: f64| {
                let (a, da, dda) = path.jet(t);
                let u = t / total;
                let (mut s, mut ds, mut dds) = (0.0, 0.0, 0.0);
                for (m, cm) in c.iter().enumerate() {
                    let w = (m + 1) as f64 * PI / total;
                    s += cm * (w * t).sin();
                    ds += cm * w * (w * t).cos();
                    dds -= cm * w * w * (w * t).sin();
                }
                let p = u * u;
                let dp = 2.0 * u / total;
                let ddp = 2.0 / (total * total);
                let d = scale * p * s;
                let dd = scale * (dp * s + p * ds);
                let ddd = scale * (ddp * s + 2.0 * dp * ds + p * dds);
                (a + d, da + dd, dda + ddd)
            };
            let positive = (1..=COST_PANELS).all(|i| jet(i as f64 * total / COST_PANELS as f64).0 > 0.0);
            if positive {
                break action_of(jet, total);
            }
            scale *= 0.5;
        };
        let inc = perturbed - base;
        min_increase = min_increase.min(inc);
        if inc >= -slack {
            not_lowered += 1;
        }
    }
    ProbeReport {
        trials,
        not_lowered,
        base_action: base,
        min_increase,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::trajectory_rng;
    use std::f64::consts::PI;

    #[test]
    fn zero_datum_costs() {
        let p = AmplitudePath::zero_datum(1.0, 1.0).unwrap();
        assert!((amplitude_cost(&p).unwrap() - (12.0 + PI * PI) / 9.0).abs() < 1e-14);
        let p = AmplitudePath::zero_datum(2.0, 4.0).unwrap();
        assert!((amplitude_cost(&p).unwrap() - (12.0 + PI * PI) / 18.0).abs() < 1e-14);
        assert_eq!(p.value(0.0), 0.0);
        assert!((p.final_amplitude() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn soliton_datum_path_shape() {
        for drop in [0.5, 1.0, 2.0, 3.5] {
            let p = AmplitudePath::soliton_datum(drop, 2.0).unwrap();
            assert!((p.value(0.0) - 1.0).abs() < 1e-15);
            assert!((p.final_amplitude() - (1.0 - drop / 4.0)).abs() < 1e-12);
            for i in 0..=100 {
                assert!(p.value(0.02 * i as f64) > 0.0);
            }
        }
        assert!(AmplitudePath::soliton_datum(4.0, 1.0).is_err());
    }

    #[test]
    fn closed_form_actions_match_quadrature() {
        for p in [
            AmplitudePath::zero_datum(1.0, 1.0).unwrap(),
            AmplitudePath::zero_datum(0.7, 3.0).unwrap(),
            AmplitudePath::soliton_datum(1.0, 1.0).unwrap(),
            AmplitudePath::soliton_datum(3.0, 2.5).unwrap(),
        ] {
            let q = action_of(|t| p.jet(t), p.total_time);
            assert!((q - action(&p).unwrap()).abs() < 1e-10, "{p:?}");
        }
        // Halved cost of the soliton family against the closed-form lower rate.
        let p = AmplitudePath::soliton_datum(1.0, 1.0).unwrap();
        let c = 8.0 - 1.0 - 4.0 * 3f64.sqrt();
        let rate = 2.0 * c * (12.0 + PI * PI) / 36.0;
        assert!((0.5 * amplitude_cost(&p).unwrap() - rate).abs() < 1e-12);
    }

    #[test]
    fn phase_integral_matches_quadrature() {
        let p = AmplitudePath::soliton_datum(2.0, 1.5).unwrap();
        let q = simpson(|s| p.value(s).powi(2), 0.0, 1.1, 2000);
        assert!((p.phase_integral(1.1) - q).abs() < 1e-12);
    }

    #[test]
    fn custom_paths() {
        let total = 1.0;
        let m = 400;
        let samples: Vec<f64> = (0..=m).map(|i| 0.3 * (i as f64 / m as f64 / 2.0).powi(2)).collect();
        let p = AmplitudePath::custom(samples, total).unwrap();
        assert!((action(&p).unwrap() - 0.3).abs() < 1e-6);
        assert!(euler_lagrange_residual(&p) < 1e-6);

        let mut dip: Vec<f64> = (0..=m).map(|i| 1.0 + i as f64 / m as f64).collect();
        dip[200] = 0.0;
        let p = AmplitudePath::custom(dip, total).unwrap();
        assert!(matches!(action(&p), Err(Error::SingularCost { t }) if (t - 0.5).abs() < 1e-12));
    }

    #[test]
    fn residuals() {
        for p in [
            AmplitudePath::zero_datum(1.0, 1.0).unwrap(),
            AmplitudePath::soliton_datum(2.0, 3.0).unwrap(),
        ] {
            assert!(euler_lagrange_residual(&p) < 1e-6);
        }
        let line: Vec<f64> = (0..=100).map(|i| 1.0 + i as f64 / 100.0).collect();
        let p = AmplitudePath::custom(line, 1.0).unwrap();
        assert!(euler_lagrange_residual(&p) > 0.2);
    }

    #[test]
    fn probe_never_lowers_the_minimiser() {
        let mut rng = trajectory_rng(17, 0);
        let p = AmplitudePath::zero_datum(1.0, 1.0).unwrap();
        let r = perturbation_probe(&p, 40, 4, 1e-10, &mut rng);
        assert_eq!(r.not_lowered, r.trials);
        assert!(r.min_increase > 0.0);
    }
}
