//! Experiment configuration: a TOML subset of sections holding
//! `key = value` pairs. Every validation error names the offending field as
//! `section.key`.

use std::fmt;

use toml::{Table, Value};

use nls_jitter::dynamics::{EvolveOptions, SolitonParams};
use nls_jitter::ldp::Scenario;
use nls_jitter::noise::{NoiseKind, NoiseTarget};
use nls_jitter::observables::DEFAULT_BOUNDARY_THRESHOLD;
use nls_jitter::stochastic::SdeModel;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

type Res<T> = Result<T, ConfigError>;

fn err<T>(path: impl Into<String>, message: impl Into<String>) -> Res<T> {
    Err(ConfigError {
        path: path.into(),
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub half_length: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialDatum {
    Zero,
    Soliton(SolitonParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsConfig {
    pub total_time: f64,
    pub dt: f64,
    pub initial: InitialDatum,
    pub options: EvolveOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub model: SdeModel,
    pub kind: NoiseKind,
    pub target: NoiseTarget,
    pub epsilon: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservablesConfig {
    pub window: f64,
    pub boundary_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Plain,
    Tilted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub r: f64,
    pub amplitude: f64,
    /// Overrides every operator norm of `Φ` in the bound report.
    pub phi_norm: Option<f64>,
    /// Defaults to `[noise.epsilon]` when that is positive, else empty.
    pub eps_list: Vec<f64>,
    pub n_samples: usize,
    pub method: Method,
    pub sigmas: f64,
    pub gap_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlForm {
    Forcing,
    Potential,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlConfig {
    /// Optimal velocity control to arrival time `target`.
    Velocity { target: f64, form: ControlForm },
    /// Amplitude path building mass `target` from zero.
    AmplitudeZero { target: f64 },
    /// Amplitude path removing mass `drop` from the unit soliton.
    AmplitudeSoliton { drop: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: Option<String>,
    pub prefix: String,
    pub snapshots: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub dynamics: DynamicsConfig,
    pub noise: NoiseConfig,
    pub observables: ObservablesConfig,
    pub scenario: Option<ScenarioConfig>,
    pub control: Option<ControlConfig>,
    pub output: OutputConfig,
}

struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
}

impl<'a> Section<'a> {
    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn raw(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn f64_opt(&self, key: &str) -> Res<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Float(v)) => Ok(Some(*v)),
            Some(Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(other) => err(self.path(key), format!("expected a number, found {}", other.type_str())),
        }
    }

    fn f64(&self, key: &str) -> Res<f64> {
        self.f64_opt(key)?
            .map_or_else(|| err(self.path(key), "missing required field"), Ok)
    }

    fn positive(&self, key: &str) -> Res<f64> {
        let v = self.f64(key)?;
        self.check_positive(key, v)
    }

    fn positive_or(&self, key: &str, default: f64) -> Res<f64> {
        let v = self.f64_opt(key)?.unwrap_or(default);
        self.check_positive(key, v)
    }

    fn check_positive(&self, key: &str, v: f64) -> Res<f64> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            err(self.path(key), format!("must be positive, got {v}"))
        }
    }

    fn u64_opt(&self, key: &str) -> Res<Option<u64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Integer(v)) if *v >= 0 => Ok(Some(*v as u64)),
            Some(other) => err(self.path(key), format!("expected a nonnegative integer, found {other}")),
        }
    }

    fn usize(&self, key: &str) -> Res<usize> {
        self.u64_opt(key)?
            .map_or_else(|| err(self.path(key), "missing required field"), |v| Ok(v as usize))
    }

    fn str_opt(&self, key: &str) -> Res<Option<&'a str>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(other) => err(self.path(key), format!("expected a string, found {}", other.type_str())),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Res<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(other) => err(
                self.path(key),
                format!("expected true or false, found {}", other.type_str()),
            ),
        }
    }

    fn f64_list(&self, key: &str) -> Res<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .enumerate()
                .map(|(i, v)| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(x) => Ok(*x as f64),
                    _ => err(format!("{}[{i}]", self.path(key)), "expected a number"),
                })
                .collect::<Res<Vec<_>>>()
                .map(Some),
            Some(other) => err(self.path(key), format!("expected an array, found {}", other.type_str())),
        }
    }

    fn reject_unknown(&self, known: &[&str]) -> Res<()> {
        if let Some(t) = self.table {
            if let Some(k) = t.keys().find(|k| !known.contains(&k.as_str())) {
                return err(self.path(k), "unknown field");
            }
        }
        Ok(())
    }
}

fn section<'a>(root: &'a Table, name: &'static str, required: bool) -> Res<Section<'a>> {
    match root.get(name) {
        None if required => err(name, "missing required section"),
        None => Ok(Section { name, table: None }),
        Some(Value::Table(t)) => Ok(Section { name, table: Some(t) }),
        Some(_) => err(name, "expected a section"),
    }
}

const SECTIONS: &[&str] = &[
    "grid",
    "dynamics",
    "noise",
    "observables",
    "scenario",
    "control",
    "output",
];

impl ExperimentConfig {
    pub fn parse(text: &str) -> Res<Self> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| ConfigError {
            path: String::new(),
            message: format!("syntax error: {}", e.message()),
        })?;
        if let Some(k) = root.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return err(k.as_str(), "unknown section");
        }

        let s = section(&root, "grid", true)?;
        s.reject_unknown(&["half_length", "n_points"])?;
        let grid = GridConfig {
            half_length: s.positive("half_length")?,
            n_points: s.usize("n_points")?,
        };

        let s = section(&root, "dynamics", true)?;
        s.reject_unknown(&[
            "T",
            "dt",
            "initial_datum",
            "amplitude",
            "center",
            "velocity",
            "phase",
            "stride",
            "nonlinearity",
            "dealias",
        ])?;
        let total_time = s.positive("T")?;
        let dt = s.positive("dt")?;
        let initial = match s.str_opt("initial_datum")?.unwrap_or("soliton") {
            "zero" => InitialDatum::Zero,
            "soliton" => InitialDatum::Soliton(SolitonParams {
                amplitude: s.positive_or("amplitude", 1.0)?,
                center: s.f64_opt("center")?.unwrap_or(0.0),
                velocity: s.f64_opt("velocity")?.unwrap_or(0.0),
                phase: s.f64_opt("phase")?.unwrap_or(0.0),
            }),
            other => {
                return err(
                    s.path("initial_datum"),
                    format!("expected \"zero\" or \"soliton\", got {other:?}"),
                )
            }
        };
        let defaults = EvolveOptions::default();
        let options = EvolveOptions {
            stride: s.u64_opt("stride")?.map_or(defaults.stride, |v| v.max(1) as usize),
            nonlinearity: s.f64_opt("nonlinearity")?.unwrap_or(defaults.nonlinearity),
            dealias: s.bool_or("dealias", defaults.dealias)?,
        };
        let dynamics = DynamicsConfig {
            total_time,
            dt,
            initial,
            options,
        };

        let s = section(&root, "noise", false)?;
        s.reject_unknown(&[
            "model", "kind", "epsilon", "seed", "order", "strength", "k_max", "n", "power",
        ])?;
        let model = match s.str_opt("model")?.unwrap_or("multiplicative") {
            "additive" => SdeModel::Additive,
            "multiplicative" => SdeModel::Multiplicative,
            "extended" => SdeModel::Extended,
            other => {
                return err(
                    s.path("model"),
                    format!("expected additive, multiplicative or extended, got {other:?}"),
                )
            }
        };
        let kind = match s.str_opt("kind")?.unwrap_or("smoothing") {
            "smoothing" => NoiseKind::Smoothing {
                order: s.positive_or("order", nls_jitter::noise::DEFAULT_SMOOTHING_ORDER)?,
                strength: s.positive_or("strength", 1.0)?,
            },
            "identity" => NoiseKind::IdentityOnGrid,
            "cutoff" => {
                let k = s.f64("k_max")?;
                if k.is_nan() || k < 0.0 {
                    return err(s.path("k_max"), format!("must be nonnegative, got {k}"));
                }
                NoiseKind::SpectralCutoff { k_max: k }
            }
            "resolvent" => NoiseKind::Resolvent {
                n: s.usize("n")?,
                power: s.u64_opt("power")?.unwrap_or(1) as u32,
            },
            other => {
                return err(
                    s.path("kind"),
                    format!("expected smoothing, identity, cutoff or resolvent, got {other:?}"),
                )
            }
        };
        let epsilon = s.f64_opt("epsilon")?.unwrap_or(0.0);
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return err(s.path("epsilon"), format!("must be >= 0, got {epsilon}"));
        }
        let noise = NoiseConfig {
            model,
            kind,
            target: if model == SdeModel::Additive {
                NoiseTarget::Complex
            } else {
                NoiseTarget::Real
            },
            epsilon,
            seed: s.u64_opt("seed")?.unwrap_or(0),
        };

        let s = section(&root, "observables", false)?;
        s.reject_unknown(&["window", "boundary_threshold"])?;
        let observables = ObservablesConfig {
            window: s.positive_or("window", 4.0)?,
            boundary_threshold: s.positive_or("boundary_threshold", DEFAULT_BOUNDARY_THRESHOLD)?,
        };

        let s = section(&root, "scenario", false)?;
        s.reject_unknown(&[
            "name",
            "R",
            "A",
            "phi_norm",
            "eps_list",
            "n_samples",
            "method",
            "sigmas",
            "gap_fraction",
        ])?;
        let scenario = match s.table {
            None => None,
            Some(_) => {
                let name = s
                    .str_opt("name")?
                    .map_or_else(|| err(s.path("name"), "missing required field"), Ok)?;
                let Some(sc) = Scenario::parse(name) else {
                    return err(s.path("name"), format!("unknown scenario {name:?}"));
                };
                let r = s.positive("R")?;
                if sc == Scenario::MassDownFromSoliton && r >= 4.0 {
                    return err(s.path("R"), format!("mass drop must lie in (0, 4), got {r}"));
                }
                let amplitude = match s.f64_opt("A")? {
                    Some(_) => s.positive("A")?,
                    None => match dynamics.initial {
                        InitialDatum::Soliton(p) => p.amplitude,
                        InitialDatum::Zero => 1.0,
                    },
                };
                let phi_norm = match s.f64_opt("phi_norm")? {
                    Some(v) if v >= 0.0 && v.is_finite() => Some(v),
                    Some(v) => return err(s.path("phi_norm"), format!("must be >= 0, got {v}")),
                    None => None,
                };
                let eps_list = s.f64_list("eps_list")?.unwrap_or_else(|| {
                    if noise.epsilon > 0.0 {
                        vec![noise.epsilon]
                    } else {
                        Vec::new()
                    }
                });
                if eps_list.iter().any(|e| e.is_nan() || *e <= 0.0) {
                    return err(s.path("eps_list"), "values must be positive");
                }
                if eps_list.windows(2).any(|w| w[1] >= w[0]) {
                    return err(s.path("eps_list"), "must be strictly decreasing");
                }
                let method = match s.str_opt("method")?.unwrap_or("tilted") {
                    "plain" => Method::Plain,
                    "tilted" => Method::Tilted,
                    other => return err(s.path("method"), format!("expected plain or tilted, got {other:?}")),
                };
                Some(ScenarioConfig {
                    scenario: sc,
                    r,
                    amplitude,
                    phi_norm,
                    eps_list,
                    n_samples: s.u64_opt("n_samples")?.unwrap_or(1000).max(1) as usize,
                    method,
                    sigmas: s.positive_or("sigmas", 3.0)?,
                    gap_fraction: s.f64_opt("gap_fraction")?.unwrap_or(0.2).max(0.0),
                })
            }
        };

        let s = section(&root, "control", false)?;
        s.reject_unknown(&["kind", "target", "drop", "form"])?;
        let control = match s.table {
            None => None,
            Some(_) => Some(match s.str_opt("kind")?.unwrap_or("velocity") {
                "velocity" => ControlConfig::Velocity {
                    target: s.positive("target")?,
                    form: match s.str_opt("form")?.unwrap_or("forcing") {
                        "forcing" => ControlForm::Forcing,
                        "potential" => ControlForm::Potential,
                        other => return err(s.path("form"), format!("expected forcing or potential, got {other:?}")),
                    },
                },
                "amplitude_zero" => ControlConfig::AmplitudeZero {
                    target: s.positive("target")?,
                },
                "amplitude_soliton" => {
                    let drop = s.positive("drop")?;
                    if drop >= 4.0 {
                        return err(s.path("drop"), format!("must lie in (0, 4), got {drop}"));
                    }
                    ControlConfig::AmplitudeSoliton { drop }
                }
                other => {
                    return err(
                        s.path("kind"),
                        format!("expected velocity, amplitude_zero or amplitude_soliton, got {other:?}"),
                    )
                }
            }),
        };

        let s = section(&root, "output", false)?;
        s.reject_unknown(&["dir", "prefix", "snapshots"])?;
        let output = OutputConfig {
            dir: s.str_opt("dir")?.map(str::to_string),
            prefix: s.str_opt("prefix")?.unwrap_or("run").to_string(),
            snapshots: s.bool_or("snapshots", false)?,
        };

        Ok(Self {
            grid,
            dynamics,
            noise,
            observables,
            scenario,
            control,
            output,
        })
    }

    pub fn require_scenario(&self) -> Res<&ScenarioConfig> {
        self.scenario
            .as_ref()
            .map_or_else(|| err("scenario", "missing required section"), Ok)
    }

    pub fn require_control(&self) -> Res<&ControlConfig> {
        self.control
            .as_ref()
            .map_or_else(|| err("control", "missing required section"), Ok)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[grid]\nhalf_length = 20\nn_points = 256\n[dynamics]\nT = 1.0\ndt = 1e-3\n";

    #[test]
    fn minimal_config_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.grid.n_points, 256);
        assert_eq!(c.noise.epsilon, 0.0);
        assert_eq!(c.noise.model, SdeModel::Multiplicative);
        assert_eq!(c.dynamics.initial, InitialDatum::Soliton(SolitonParams::at_rest(1.0)));
        assert!(c.scenario.is_none() && c.control.is_none());
    }

    #[test]
    fn errors_name_the_field() {
        let e =
            ExperimentConfig::parse("[grid]\nhalf_length = 20\nn_points = 256\n[dynamics]\ndt = 1e-3\n").unwrap_err();
        assert_eq!(e.path, "dynamics.T");
        let e = ExperimentConfig::parse(&format!("{MINIMAL}[noise]\nepsilon = -1\n")).unwrap_err();
        assert_eq!(e.path, "noise.epsilon");
        let e = ExperimentConfig::parse(&format!(
            "{MINIMAL}[scenario]\nname = \"arrival_multiplicative\"\nR = 1\neps_list = [1e-2, 3e-2]\n"
        ))
        .unwrap_err();
        assert_eq!(e.path, "scenario.eps_list");
        let e = ExperimentConfig::parse(&format!("{MINIMAL}[dynamics2]\n")).unwrap_err();
        assert_eq!(e.path, "dynamics2");
        let e = ExperimentConfig::parse("[grid]\nhalf_length = \"big\"\n").unwrap_err();
        assert_eq!(e.path, "grid.half_length");
        let e = ExperimentConfig::parse(MINIMAL).unwrap().require_control().unwrap_err();
        assert_eq!(e.path, "control");
    }

    #[test]
    fn scenario_amplitude_defaults_to_datum() {
        let text = format!("{MINIMAL}amplitude = 1.5\n[scenario]\nname = \"arrival_additive\"\nR = 1\n");
        let c = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(c.require_scenario().unwrap().amplitude, 1.5);
    }
}
