//! Closed-form upper and lower rate bounds for the four tail scenarios.

use std::f64::consts::PI;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::noise::OperatorNorms;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    MassUpFromZero,
    MassDownFromSoliton,
    ArrivalAdditive,
    ArrivalMultiplicative,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::MassUpFromZero => "mass_up_from_zero",
            Scenario::MassDownFromSoliton => "mass_down_from_soliton",
            Scenario::ArrivalAdditive => "arrival_additive",
            Scenario::ArrivalMultiplicative => "arrival_multiplicative",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Scenario::MassUpFromZero,
            Scenario::MassDownFromSoliton,
            Scenario::ArrivalAdditive,
            Scenario::ArrivalMultiplicative,
        ]
        .into_iter()
        .find(|sc| sc.name() == s)
    }
}

/// Norms of `Φ` entering the upper bounds; absent entries are reported as
/// missing when a scenario needs them.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PhiNorms {
    pub l2_l2: Option<f64>,
    pub l2_sigma: Option<f64>,
    pub l2_w1inf: Option<f64>,
}

impl PhiNorms {
    pub fn unit() -> Self {
        Self {
            l2_l2: Some(1.0),
            l2_sigma: Some(1.0),
            l2_w1inf: Some(1.0),
        }
    }
}

impl From<&OperatorNorms> for PhiNorms {
    fn from(n: &OperatorNorms) -> Self {
        Self {
            l2_l2: Some(n.l2_l2),
            l2_sigma: Some(n.l2_sigma),
            l2_w1inf: Some(n.l2_w1inf),
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
pub struct BoundReport {
    pub scenario: Scenario,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub phi_norms: PhiNorms,
    /// `-∞` when the relevant norm vanishes; serialised as `null`.
    #[serde(serialize_with = "finite_or_null")]
    pub upper_rate: f64,
    pub lower_rate: f64,
    /// `lower_rate <= upper_rate`.
    pub consistent: bool,
    pub notes: Vec<String>,
}

fn need(v: Option<f64>, name: &'static str) -> Result<f64> {
    match v {
        Some(x) if x >= 0.0 && x.is_finite() => Ok(x),
        _ => Err(Error::MissingNorm(name)),
    }
}

/// `-num / (den · ‖Φ‖²)`, `-∞` for a vanishing norm.
fn upper(num: f64, den: f64, norm: f64) -> f64 {
    if norm == 0.0 {
        f64::NEG_INFINITY
    } else {
        -num / (den * norm * norm)
    }
}

pub fn evaluate_bounds(scenario: Scenario, r: f64, t: f64, a: f64, norms: &PhiNorms) -> Result<BoundReport> {
    for (name, v) in [("R", r), ("T", t), ("A", a)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::OutOfRange(format!("{name} must be positive, got {v}")));
        }
    }
    let mut notes = Vec::new();
    let pi2 = PI * PI;
    let (upper_rate, lower_rate) = match scenario {
        Scenario::MassUpFromZero => {
            let n = need(norms.l2_l2, "l2_l2")?;
            (upper(r, 8.0 * t, n), -r * (12.0 + pi2) / (18.0 * t))
        }
        Scenario::MassDownFromSoliton => {
            if r >= 4.0 {
                return Err(Error::OutOfRange(format!("mass drop R must lie in (0, 4), got {r}")));
            }
            let n = need(norms.l2_l2, "l2_l2")?;
            if a != 1.0 {
                notes.push(format!(
                    "mass-drop bounds are for the unit soliton (mass 4); A = {a} is ignored"
                ));
            }
            let c = 8.0 - r - 4.0 * (4.0 - r).sqrt();
            (
                upper(r * r, 8.0 * t * (4.0 + r), n),
                -2.0 * c * (12.0 + pi2) / (36.0 * t),
            )
        }
        Scenario::ArrivalAdditive => {
            let n = need(norms.l2_sigma, "l2_sigma")?;
            let k = 2.0 * t + 1.0;
            let up = upper(r * r, 8.0 * t * k * k * (4.0 * a + r / k), n);
            if n > 0.0 {
                let approx = -r * r / (128.0 * t.powi(3) * a * n * n);
                notes.push(format!(
                    "large-T regime: upper rate is of order -R^2/(128 T^3 A |Phi|^2) = {approx:.6e}"
                ));
            }
            if a > 1.0 {
                notes.push("A > 1: the upper and lower bounds scale differently in A and may cross".into());
            }
            (up, -pi2 * r * r / (128.0 * t.powi(3) * a.powi(3)))
        }
        Scenario::ArrivalMultiplicative => {
            let n = need(norms.l2_w1inf, "l2_w1inf")?;
            let up = upper((3.0f64 / 16.0).powi(2) * r * r, 2.0 * a * a * t.powi(3), n);
            if n * n < 0.75 {
                notes.push(format!(
                    "|Phi|^2 = {:.4} < 3/4: the upper bound lies below the lower bound",
                    n * n
                ));
            }
            (up, -3.0 * r * r / (128.0 * a * a * t.powi(3)))
        }
    };
    if upper_rate == f64::NEG_INFINITY {
        notes.push("Phi vanishes: the event has probability zero, upper rate is -inf (null)".into());
    }
    Ok(BoundReport {
        scenario,
        r,
        t,
        a,
        phi_norms: *norms,
        upper_rate,
        lower_rate,
        consistent: lower_rate <= upper_rate,
        notes,
    })
}
