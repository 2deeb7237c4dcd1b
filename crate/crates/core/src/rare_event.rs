//! Plain and importance-sampled Monte Carlo estimates of `ε log P(event)`
//! and their comparison with the closed-form bounds.

use serde::{Serialize, Serializer};

use crate::ensemble::{try_map_indexed, Execution};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::ldp::{BoundReport, ControlPath, Scenario};
use crate::observables::{arrival_time_with, mass, DEFAULT_BOUNDARY_THRESHOLD};
use crate::quad::NeumaierSum;
use crate::stochastic::{sample_path, Recording, SdeModel, SdeRun};

/// Tail events evaluated on the state at `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "R", rename_all = "snake_case")]
pub enum TailEvent {
    /// `Y ≥ R`
    ArrivalGe(f64),
    /// `Y ≤ -R`
    ArrivalLe(f64),
    /// `N ≥ R`
    MassGe(f64),
    /// `N(u₀) - N ≥ R`
    MassDropGe(f64),
}

impl TailEvent {
    pub fn threshold(&self) -> f64 {
        match *self {
            TailEvent::ArrivalGe(r) | TailEvent::ArrivalLe(r) | TailEvent::MassGe(r) | TailEvent::MassDropGe(r) => r,
        }
    }

    fn validate(&self, u0: &Field) -> Result<()> {
        let r = self.threshold();
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Config(format!("event threshold must be positive, got {r}")));
        }
        if matches!(self, TailEvent::MassDropGe(_)) && mass(u0) == 0.0 {
            return Err(Error::Contract(
                "a mass-drop event needs a nonzero (soliton) datum".into(),
            ));
        }
        Ok(())
    }

    /// Whether `u` (the state at `T`) lies in the event.
    pub fn occurs(&self, u: &Field, u0_mass: f64, grid: &Grid, threshold: f64) -> Result<bool> {
        Ok(match *self {
            TailEvent::ArrivalGe(r) => arrival_time_with(u, grid, threshold)? >= r,
            TailEvent::ArrivalLe(r) => arrival_time_with(u, grid, threshold)? <= -r,
            TailEvent::MassGe(r) => mass(u) >= r,
            TailEvent::MassDropGe(r) => u0_mass - mass(u) >= r,
        })
    }

    fn matches(&self, scenario: Scenario, model: SdeModel) -> bool {
        match self {
            TailEvent::ArrivalGe(_) | TailEvent::ArrivalLe(_) => match model {
                SdeModel::Additive => scenario == Scenario::ArrivalAdditive,
                _ => scenario == Scenario::ArrivalMultiplicative,
            },
            TailEvent::MassGe(_) => scenario == Scenario::MassUpFromZero,
            TailEvent::MassDropGe(_) => scenario == Scenario::MassDownFromSoliton,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Plain,
    Tilted,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Plain => "plain",
            Method::Tilted => "tilted",
        }
    }
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub event: TailEvent,
    pub model: SdeModel,
    pub epsilon: f64,
    pub n_samples: usize,
    /// Trajectories inside the event.
    pub hits: usize,
    pub p_hat: f64,
    /// `ε log p̂`; `-∞` (null) without hits.
    #[serde(serialize_with = "finite_or_null")]
    pub log_rate: f64,
    /// Delta-method standard error of `log_rate`.
    #[serde(serialize_with = "finite_or_null")]
    pub std_error: f64,
    pub method: Method,
    /// `(Σf)²/Σf²` over `f = 1_event · w`; tilted runs only.
    pub effective_sample_size: Option<f64>,
    pub notes: Vec<String>,
}

impl TailEstimate {
    pub const CSV_HEADER: &'static str = "epsilon,n,p_hat,log_rate,std_error,method,ess";

    pub fn csv_row(&self) -> String {
        let ess = self
            .effective_sample_size
            .map_or_else(|| "nan".to_string(), |e| format!("{e:.6e}"));
        format!(
            "{:.6e},{},{:.6e},{:.6e},{:.6e},{},{}",
            self.epsilon,
            self.n_samples,
            self.p_hat,
            self.log_rate,
            self.std_error,
            self.method.name(),
            ess
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions {
    pub execution: Execution,
    /// Boundary-mass fraction above which `Y` is refused.
    pub boundary_threshold: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            execution: Execution::default(),
            boundary_threshold: DEFAULT_BOUNDARY_THRESHOLD,
        }
    }
}

/// Indicator and log-weight of every trajectory, in index order.
fn outcomes(
    event: &TailEvent,
    run: &SdeRun,
    u0: &Field,
    n: usize,
    opts: &EstimatorOptions,
) -> Result<Vec<(bool, f64)>> {
    event.validate(u0)?;
    if n == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    run.validate()?;
    let n0 = mass(u0);
    let grid = run.grid().clone();
    try_map_indexed(n, opts.execution, |i| {
        let p = sample_path(u0, run, i as u64, Recording::FinalOnly)?;
        let (_, u) = p.trajectory.last().expect("final state");
        Ok((event.occurs(u, n0, &grid, opts.boundary_threshold)?, p.log_weight))
    })
}

pub fn estimate_plain(
    event: &TailEvent,
    run: &SdeRun,
    u0: &Field,
    n: usize,
    opts: &EstimatorOptions,
) -> Result<TailEstimate> {
    let mut plain = run.clone();
    plain.drift_shift = None;
    let out = outcomes(event, &plain, u0, n, opts)?;
    Ok(summarise(event, run, out, Method::Plain))
}

/// Simulates under the noise shifted by `tilt` and reweights each hit by
/// its likelihood ratio.
pub fn estimate_tilted(
    event: &TailEvent,
    run: &SdeRun,
    u0: &Field,
    tilt: &ControlPath,
    n: usize,
    opts: &EstimatorOptions,
) -> Result<TailEstimate> {
    let shift = tilt.drift_shift(run.grid())?;
    let tilted = run.clone().with_drift_shift(shift);
    let out = outcomes(event, &tilted, u0, n, opts)?;
    Ok(summarise(event, run, out, Method::Tilted))
}

fn summarise(event: &TailEvent, run: &SdeRun, out: Vec<(bool, f64)>, method: Method) -> TailEstimate {
    let n = out.len();
    let eps = run.epsilon;
    let hits = out.iter().filter(|o| o.0).count();
    let mut notes = Vec::new();
    let (p_hat, se_p, ess) = match method {
        Method::Plain => {
            let p = hits as f64 / n as f64;
            (p, (p * (1.0 - p) / n as f64).sqrt(), None)
        }
        Method::Tilted => {
            // Rescale by the largest log-weight among hits before exponentiating.
            let logs: Vec<f64> = out.iter().filter(|o| o.0).map(|o| o.1).collect();
            if logs.is_empty() {
                (0.0, 0.0, Some(0.0))
            } else {
                let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let s1: f64 = logs.iter().map(|l| (l - m).exp()).collect::<NeumaierSum>().value();
                let s2: f64 = logs
                    .iter()
                    .map(|l| (2.0 * (l - m)).exp())
                    .collect::<NeumaierSum>()
                    .value();
                let nf = n as f64;
                let mean_scaled = s1 / nf;
                let var_scaled = (s2 / nf - mean_scaled * mean_scaled).max(0.0);
                let scale = m.exp();
                let p = scale * mean_scaled;
                let se = scale * (var_scaled / nf).sqrt();
                let ess = s1 * s1 / s2;
                if ess < 10.0 {
                    notes.push(format!("effective sample size {ess:.1} < 10: estimate unreliable"));
                }
                (p, se, Some(ess))
            }
        }
    };
    let (log_rate, std_error) = if p_hat > 0.0 {
        (eps * p_hat.ln(), eps * se_p / p_hat)
    } else {
        let upper = 1.0 - 0.05f64.powf(1.0 / n as f64);
        notes.push(format!(
            "no hits in {n} samples: one-sided 95% upper bound p <= {upper:.3e}, eps*log <= {:.4e}",
            eps * upper.ln()
        ));
        (f64::NEG_INFINITY, f64::INFINITY)
    };
    TailEstimate {
        event: *event,
        model: run.model,
        epsilon: eps,
        n_samples: n,
        hits,
        p_hat,
        log_rate,
        std_error,
        method,
        effective_sample_size: ess,
        notes,
    }
}

/// One estimate per `ε` in `eps_list` (positive, decreasing), all with the
/// template's master seed.
pub fn rate_curve(
    event: &TailEvent,
    template: &SdeRun,
    u0: &Field,
    eps_list: &[f64],
    n: usize,
    tilt: Option<&ControlPath>,
    opts: &EstimatorOptions,
) -> Result<Vec<TailEstimate>> {
    if eps_list.is_empty()
        || eps_list.iter().any(|e| e.is_nan() || *e <= 0.0)
        || eps_list.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::Config(
            "eps_list must be positive and strictly decreasing".into(),
        ));
    }
    eps_list
        .iter()
        .map(|&eps| {
            let run = template.clone().with_epsilon(eps);
            match tilt {
                Some(c) => estimate_tilted(event, &run, u0, c, n, opts),
                None => estimate_plain(event, &run, u0, n, opts),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Inside the widened band.
    Pass,
    /// Outside the widened band but inside the band widened twice as much.
    Marginal,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginPolicy {
    /// Multiple of the standard error.
    pub sigmas: f64,
    /// Fraction of the bound gap allowed for solver and finite-ε bias.
    pub gap_fraction: f64,
}

impl Default for MarginPolicy {
    fn default() -> Self {
        Self {
            sigmas: 3.0,
            gap_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCheck {
    pub epsilon: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub log_rate: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub std_error: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub margin: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub lower_limit: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub upper_limit: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub scenario: Scenario,
    pub lower_rate: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub upper_rate: f64,
    pub sigmas: f64,
    pub gap_fraction: f64,
    /// One entry per `ε`, in curve order.
    pub checks: Vec<RateCheck>,
    /// Outcome at the smallest `ε`.
    pub outcome: Outcome,
    pub diagnostics: Vec<String>,
}

/// Checks `lower - margin ≤ ε log p̂ ≤ upper + margin` with
/// `margin = sigmas·σ + gap_fraction·|upper - lower|`.
pub fn compare_with_bounds(curve: &[TailEstimate], report: &BoundReport, policy: &MarginPolicy) -> Result<Verdict> {
    let Some(smallest) = curve
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.epsilon.total_cmp(&b.1.epsilon))
        .map(|(i, _)| i)
    else {
        return Err(Error::Config("empty rate curve".into()));
    };
    for e in curve {
        if !e.event.matches(report.scenario, e.model) {
            return Err(Error::ScenarioMismatch(format!(
                "{:?} under the {:?} model does not match {}",
                e.event,
                e.model,
                report.scenario.name()
            )));
        }
    }
    let gap = if report.upper_rate.is_finite() {
        (report.upper_rate - report.lower_rate).abs()
    } else {
        0.0
    };
    let mut diagnostics = report.notes.clone();
    if !report.consistent {
        diagnostics.push("bound report is not a consistent sandwich".into());
    }
    let checks: Vec<RateCheck> = curve
        .iter()
        .map(|e| {
            let margin = policy.sigmas * e.std_error + policy.gap_fraction * gap;
            let lo = report.lower_rate - margin;
            let hi = report.upper_rate + margin;
            let outcome = if e.log_rate >= lo && e.log_rate <= hi {
                Outcome::Pass
            } else if e.log_rate >= lo - margin && e.log_rate <= hi + margin {
                Outcome::Marginal
            } else {
                Outcome::Fail
            };
            RateCheck {
                epsilon: e.epsilon,
                log_rate: e.log_rate,
                std_error: e.std_error,
                margin,
                lower_limit: lo,
                upper_limit: hi,
                outcome,
            }
        })
        .collect();
    for (e, c) in curve.iter().zip(&checks) {
        diagnostics.extend(e.notes.iter().map(|n| format!("eps = {:.3e}: {n}", e.epsilon)));
        if c.outcome != Outcome::Pass {
            let side = if c.log_rate < c.lower_limit {
                "below the lower"
            } else {
                "above the upper"
            };
            diagnostics.push(format!(
                "eps = {:.3e}: log-rate {:.5e} lies {side} limit of [{:.5e}, {:.5e}]",
                c.epsilon, c.log_rate, c.lower_limit, c.upper_limit
            ));
        }
    }
    Ok(Verdict {
        scenario: report.scenario,
        lower_rate: report.lower_rate,
        upper_rate: report.upper_rate,
        sigmas: policy.sigmas,
        gap_fraction: policy.gap_fraction,
        outcome: checks[smallest].outcome,
        checks,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{soliton_profile, SolitonParams};
    use crate::ldp::{evaluate_bounds, PhiNorms};
    use crate::noise::{NoiseModel, NoiseTarget};

    fn setup(model: SdeModel, eps: f64) -> (SdeRun, Field) {
        let g = Grid::new(16.0, 128).unwrap();
        let target = if model == SdeModel::Additive {
            NoiseTarget::Complex
        } else {
            NoiseTarget::Real
        };
        let noise = NoiseModel::smoothing(&g, target).unwrap();
        let run = SdeRun::new(model, eps, noise, 0.2, 1e-2, 11).unwrap();
        let u0 = soliton_profile(SolitonParams::at_rest(1.0), 0.0, &g).unwrap();
        (run, u0)
    }

    #[test]
    fn conserved_mass_makes_mass_event_impossible() {
        let (run, u0) = setup(SdeModel::Multiplicative, 1.0);
        let e = estimate_plain(&TailEvent::MassGe(4.5), &run, &u0, 50, &EstimatorOptions::default()).unwrap();
        assert_eq!(e.p_hat, 0.0);
        assert_eq!(e.log_rate, f64::NEG_INFINITY);
        assert!(e.notes[0].contains("upper bound"));
    }

    #[test]
    fn lenient_event_at_large_noise() {
        let (run, u0) = setup(SdeModel::Additive, 1.0);
        let e = estimate_plain(&TailEvent::MassGe(0.1), &run, &u0, 40, &EstimatorOptions::default()).unwrap();
        assert_eq!(e.p_hat, 1.0);
        assert_eq!(e.log_rate, 0.0);
    }

    #[test]
    fn plain_estimates_are_reproducible_across_execution_modes() {
        let (run, u0) = setup(SdeModel::Additive, 0.5);
        let ev = TailEvent::MassGe(4.2);
        let seq = EstimatorOptions {
            execution: Execution::Sequential,
            ..Default::default()
        };
        let a = estimate_plain(&ev, &run, &u0, 60, &seq).unwrap();
        let b = estimate_plain(&ev, &run, &u0, 60, &EstimatorOptions::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.hits > 0 && a.hits < 60);
    }

    #[test]
    fn zero_tilt_is_plain() {
        let (run, u0) = setup(SdeModel::Extended, 0.5);
        let ev = TailEvent::ArrivalGe(0.3);
        let zero = ControlPath::scalar_pair(None, crate::dynamics::ScalarPath::Zero, 0.2).unwrap();
        let opts = EstimatorOptions::default();
        let p = estimate_plain(&ev, &run, &u0, 40, &opts).unwrap();
        let t = estimate_tilted(&ev, &run, &u0, &zero, 40, &opts).unwrap();
        assert_eq!(p.p_hat, t.p_hat);
        assert_eq!(p.hits, t.hits);
        assert_eq!(t.effective_sample_size, Some(t.hits as f64));
    }

    #[test]
    fn csv_row_layout() {
        let (run, u0) = setup(SdeModel::Additive, 1.0);
        let e = estimate_plain(&TailEvent::MassGe(0.1), &run, &u0, 4, &EstimatorOptions::default()).unwrap();
        let row = e.csv_row();
        assert_eq!(row.split(',').count(), TailEstimate::CSV_HEADER.split(',').count());
        assert!(row.ends_with(",plain,nan"));
    }

    #[test]
    fn comparison_policies() {
        let report = evaluate_bounds(Scenario::ArrivalMultiplicative, 1.0, 1.0, 1.0, &PhiNorms::unit()).unwrap();
        let mk = |log_rate: f64| TailEstimate {
            event: TailEvent::ArrivalGe(1.0),
            model: SdeModel::Extended,
            epsilon: 0.01,
            n_samples: 100,
            hits: 10,
            p_hat: 0.1,
            log_rate,
            std_error: 1e-4,
            method: Method::Tilted,
            effective_sample_size: Some(50.0),
            notes: vec![],
        };
        let strict = MarginPolicy::default();
        let v = compare_with_bounds(&[mk(-0.02)], &report, &strict).unwrap();
        assert_eq!(v.outcome, Outcome::Pass);
        let v = compare_with_bounds(&[mk(-0.05)], &report, &strict).unwrap();
        assert_eq!(v.outcome, Outcome::Fail);
        let huge = MarginPolicy {
            sigmas: 1e9,
            gap_fraction: 0.0,
        };
        assert_eq!(
            compare_with_bounds(&[mk(-0.05)], &report, &huge).unwrap().outcome,
            Outcome::Pass
        );
        let mass = evaluate_bounds(Scenario::MassUpFromZero, 1.0, 1.0, 1.0, &PhiNorms::unit()).unwrap();
        assert!(matches!(
            compare_with_bounds(&[mk(-0.02)], &mass, &strict),
            Err(Error::ScenarioMismatch(_))
        ));
    }

    #[test]
    fn eps_list_must_decrease() {
        let (run, u0) = setup(SdeModel::Additive, 1.0);
        let opts = EstimatorOptions::default();
        let ev = TailEvent::MassGe(0.1);
        assert!(rate_curve(&ev, &run, &u0, &[0.1, 0.2], 2, None, &opts).is_err());
        assert_eq!(rate_curve(&ev, &run, &u0, &[0.1], 2, None, &opts).unwrap().len(), 1);
    }
}
