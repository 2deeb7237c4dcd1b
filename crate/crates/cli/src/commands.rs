use serde::Serialize;

use nls_jitter::dynamics::{evolve, modulated_soliton, soliton_profile, ControlSpec, EvolveOptions, Trajectory};
use nls_jitter::ensemble::Execution;
use nls_jitter::io::{observe_trajectory, write_snapshots};
use nls_jitter::ldp::{
    energy_inequality_check, evaluate_bounds, extended_velocity_control, velocity_control, AmplitudePath, ControlKind,
    ControlPath, PhiNorms, Scenario,
};
use nls_jitter::noise::{operator_norms, NoiseModel};
use nls_jitter::observables::{arrival_time, mass, ObservableRecord, CSV_HEADER};
use nls_jitter::rare_event::{
    compare_with_bounds, rate_curve, EstimatorOptions, MarginPolicy, Outcome, TailEstimate, TailEvent,
};
use nls_jitter::stochastic::{sample_path, Recording, SdeModel, SdeRun};
use nls_jitter::{Field, Grid};

use crate::config::{ControlConfig, ControlForm, ExperimentConfig, InitialDatum, Method};
use crate::output::Sink;
use crate::{Common, Failure};

pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub sink: &'a Sink,
    pub common: &'a Common,
}

impl Context<'_> {
    fn grid(&self) -> Result<Grid, Failure> {
        Ok(Grid::new(self.cfg.grid.half_length, self.cfg.grid.n_points)?)
    }

    fn noise(&self, grid: &Grid) -> Result<NoiseModel, Failure> {
        Ok(NoiseModel::new(grid, self.cfg.noise.kind, self.cfg.noise.target)?)
    }

    fn initial(&self, grid: &Grid) -> Result<Field, Failure> {
        Ok(match self.cfg.dynamics.initial {
            InitialDatum::Zero => Field::zeros(grid),
            InitialDatum::Soliton(p) => soliton_profile(p, 0.0, grid)?,
        })
    }

    fn run(&self, grid: &Grid, epsilon: f64) -> Result<SdeRun, Failure> {
        let d = &self.cfg.dynamics;
        let n = &self.cfg.noise;
        Ok(SdeRun::new(n.model, epsilon, self.noise(grid)?, d.total_time, d.dt, n.seed)?.with_options(d.options))
    }

    fn execution(&self) -> Execution {
        if self.common.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }

    fn observe(&self, traj: &Trajectory, grid: &Grid) -> Result<Vec<ObservableRecord>, Failure> {
        let o = &self.cfg.observables;
        Ok(observe_trajectory(traj, grid, o.window, o.boundary_threshold)?)
    }

    fn observable_csv(&self, suffix: &str, comments: &[String], rows: &[ObservableRecord]) -> Result<(), Failure> {
        let lines: Vec<String> = rows.iter().map(ObservableRecord::csv_row).collect();
        let p = self.sink.csv(suffix, comments, CSV_HEADER, &lines)?;
        println!("wrote {}", p.display());
        if self.common.gnuplot_script {
            let gp = self.sink.gnuplot(
                &suffix.replace(".csv", ".gp"),
                &p,
                "observables",
                "t",
                &[(2, "mass"), (3, "arrival_time")],
            )?;
            println!("wrote {}", gp.display());
        }
        Ok(())
    }

    fn soliton_amplitude(&self, what: &str) -> Result<f64, Failure> {
        match self.cfg.dynamics.initial {
            InitialDatum::Soliton(p) if p.center == 0.0 && p.velocity == 0.0 => Ok(p.amplitude),
            _ => Err(Failure::Validation(format!(
                "dynamics.initial_datum: {what} needs a soliton at rest at the origin"
            ))),
        }
    }
}

fn subsample(traj: &Trajectory, stride: usize) -> Trajectory {
    let last = traj.len().saturating_sub(1);
    let mut out = Trajectory::default();
    for (i, (t, u)) in traj.times.iter().zip(&traj.states).enumerate() {
        if i % stride.max(1) == 0 || i == last {
            out.push(*t, u.clone());
        }
    }
    out
}

pub fn simulate(ctx: &Context) -> Result<bool, Failure> {
    let grid = ctx.grid()?;
    let run = ctx.run(&grid, ctx.cfg.noise.epsilon)?;
    let u0 = ctx.initial(&grid)?;
    let path = sample_path(&u0, &run, 0, Recording::Stride)?;
    let rows = ctx.observe(&path.trajectory, &grid)?;
    let mut comments = vec![format!(
        "model={:?} epsilon={} T={} dt={} L={} n={}",
        run.model,
        run.epsilon,
        run.total_time,
        run.dt,
        grid.half_length(),
        grid.n_points()
    )];
    if let Some(b) = &path.beta {
        comments.push(format!(
            "beta(T)={:.12e} int_beta={:.12e}",
            b.values.last().unwrap(),
            b.total_integral()
        ));
    }
    ctx.observable_csv("observables.csv", &comments, &rows)?;
    if ctx.cfg.output.snapshots {
        let (p, mut w) = ctx.sink.create("snapshots.bin")?;
        write_snapshots(&mut w, &grid, run.total_time, run.dt, &path.trajectory)?;
        std::io::Write::flush(&mut w)?;
        println!("wrote {}", p.display());
    }
    let last = rows.last().unwrap();
    println!(
        "t = {}: mass {:.10}, arrival time {}",
        last.t,
        last.mass,
        last.arrival_time.map_or("undefined".into(), |y| format!("{y:.10}"))
    );
    let clean = rows.iter().all(|r| r.arrival_time.is_some() || r.mass == 0.0);
    if !clean {
        eprintln!("warning: boundary mass exceeded the threshold; some arrival times are undefined");
    }
    Ok(clean)
}

#[derive(Serialize)]
struct OracleSummary {
    oracle: &'static str,
    final_relative_error: f64,
    max_relative_error: f64,
    tolerance: f64,
    pass: bool,
}

pub fn oracle(ctx: &Context) -> Result<bool, Failure> {
    let grid = ctx.grid()?;
    let d = &ctx.cfg.dynamics;
    let InitialDatum::Soliton(params) = d.initial else {
        return Err(Failure::Validation(
            "dynamics.initial_datum: the oracle needs a soliton".into(),
        ));
    };
    let u0 = soliton_profile(params, 0.0, &grid)?;
    let (spec, rate, name) = match &ctx.cfg.control {
        Some(ControlConfig::Velocity {
            target,
            form: ControlForm::Potential,
        }) => {
            let a = ctx.soliton_amplitude("the controlled oracle")?;
            let c = velocity_control(*target, a, d.total_time)?;
            let ControlKind::Velocity { rate, .. } = &c.kind else {
                unreachable!()
            };
            (c.potential_spec(&grid)?, Some((a, rate.clone())), "modulated_soliton")
        }
        None => (ControlSpec::None, None, "soliton"),
        Some(_) => {
            return Err(Failure::Validation(
                "control: the oracle supports only kind = \"velocity\" with form = \"potential\"".into(),
            ))
        }
    };
    let exact_at = |t: f64| -> Result<Field, Failure> {
        Ok(match &rate {
            Some((a, r)) => modulated_soliton(*a, r, t, &grid, true)?,
            None => soliton_profile(params, t, &grid)?,
        })
    };
    let traj = evolve(&u0, d.total_time, d.dt, &spec, &grid, &d.options)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (t, u) in traj.times.iter().zip(&traj.states) {
        let ex = exact_at(*t)?;
        let e = u.relative_error(&ex);
        worst = worst.max(e);
        rows.push(format!(
            "{t:.12e},{e:.6e},{:.12e},{:.12e},{:.12e}",
            mass(u),
            arrival_time(u, &grid)?,
            arrival_time(&ex, &grid)?
        ));
    }
    let p = ctx.sink.csv(
        "oracle_errors.csv",
        &[format!("oracle={name} dt={}", d.dt)],
        "t,relative_l2_error,mass,arrival_time,arrival_time_exact",
        &rows,
    )?;
    println!("wrote {}", p.display());
    let (t_end, u_end) = traj.last().unwrap();
    let ex = exact_at(t_end)?;
    let fields: Vec<String> = grid
        .nodes()
        .iter()
        .zip(&ex.values)
        .zip(&u_end.values)
        .map(|((x, e), u)| format!("{x:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", e.re, e.im, u.re, u.im))
        .collect();
    let p = ctx.sink.csv(
        "oracle_fields.csv",
        &[format!("t={t_end}")],
        "x,re_exact,im_exact,re_solver,im_solver",
        &fields,
    )?;
    println!("wrote {}", p.display());
    if ctx.common.gnuplot_script {
        let gp = ctx.sink.gnuplot(
            "oracle_errors.gp",
            &ctx.sink.path("oracle_errors.csv"),
            "oracle error",
            "t",
            &[(2, "relative_l2_error")],
        )?;
        println!("wrote {}", gp.display());
    }
    let tolerance = if rate.is_some() { 1e-5 } else { 1e-6 };
    let summary = OracleSummary {
        oracle: name,
        final_relative_error: u_end.relative_error(&ex),
        max_relative_error: worst,
        tolerance,
        pass: worst < tolerance,
    };
    let (p, _) = ctx.sink.json("oracle.json", "summary", &summary)?;
    println!("wrote {}", p.display());
    println!("max relative L2 error {worst:.3e} (tolerance {tolerance:e})");
    Ok(summary.pass)
}

fn phi_norms(ctx: &Context, grid: &Grid) -> Result<PhiNorms, Failure> {
    let sc = ctx.cfg.require_scenario()?;
    Ok(match sc.phi_norm {
        Some(v) => PhiNorms {
            l2_l2: Some(v),
            l2_sigma: Some(v),
            l2_w1inf: Some(v),
        },
        None => PhiNorms::from(&operator_norms(&ctx.noise(grid)?)),
    })
}

pub fn bounds(ctx: &Context) -> Result<bool, Failure> {
    let sc = ctx.cfg.require_scenario()?;
    let grid = ctx.grid()?;
    let norms = phi_norms(ctx, &grid)?;
    let report = evaluate_bounds(sc.scenario, sc.r, ctx.cfg.dynamics.total_time, sc.amplitude, &norms)?;
    let (p, text) = ctx.sink.json("bounds.json", "report", &report)?;
    println!("{text}");
    eprintln!("wrote {}", p.display());
    Ok(report.consistent)
}

fn build_control(ctx: &Context) -> Result<ControlPath, Failure> {
    let t = ctx.cfg.dynamics.total_time;
    Ok(match ctx.cfg.require_control()? {
        ControlConfig::Velocity { target, .. } => {
            velocity_control(*target, ctx.soliton_amplitude("a velocity control")?, t)?
        }
        ControlConfig::AmplitudeZero { target } => {
            if ctx.cfg.dynamics.initial != InitialDatum::Zero {
                return Err(Failure::Validation(
                    "dynamics.initial_datum: kind = \"amplitude_zero\" needs initial_datum = \"zero\"".into(),
                ));
            }
            ControlPath::amplitude(AmplitudePath::zero_datum(*target, t)?)?
        }
        ControlConfig::AmplitudeSoliton { drop } => {
            if ctx.soliton_amplitude("an amplitude control")? != 1.0 {
                return Err(Failure::Validation(
                    "dynamics.amplitude: kind = \"amplitude_soliton\" needs the unit soliton".into(),
                ));
            }
            ControlPath::amplitude(AmplitudePath::soliton_datum(*drop, t)?)?
        }
    })
}

#[derive(Serialize)]
struct ControlSummary {
    kind: String,
    form: &'static str,
    cost: f64,
    final_mass: f64,
    final_arrival_time: Option<f64>,
    closed_form_error: Option<f64>,
    energy: Option<nls_jitter::ldp::EnergyVerdict>,
    pass: bool,
}

pub fn controls(ctx: &Context) -> Result<bool, Failure> {
    let grid = ctx.grid()?;
    let d = &ctx.cfg.dynamics;
    let c = build_control(ctx)?;
    let u0 = ctx.initial(&grid)?;
    let potential = matches!(
        ctx.cfg.control,
        Some(ControlConfig::Velocity {
            form: ControlForm::Potential,
            ..
        })
    );
    let (traj, energy, closed) = if potential {
        let traj = evolve(&u0, d.total_time, d.dt, &c.potential_spec(&grid)?, &grid, &d.options)?;
        let ControlKind::Velocity { amplitude, rate } = &c.kind else {
            unreachable!()
        };
        let exact = modulated_soliton(*amplitude, rate, d.total_time, &grid, true)?;
        let err = traj.last().unwrap().1.relative_error(&exact);
        (traj, None, Some(err))
    } else {
        let every = EvolveOptions { stride: 1, ..d.options };
        let traj = evolve(&u0, d.total_time, d.dt, &c.forcing_spec(&grid, None)?, &grid, &every)?;
        let norms = operator_norms(&NoiseModel::new(
            &grid,
            nls_jitter::noise::NoiseKind::IdentityOnGrid,
            nls_jitter::noise::NoiseTarget::Complex,
        )?);
        let v = energy_inequality_check(&traj, &c, &grid, None, &norms)?;
        (subsample(&traj, d.options.stride), Some(v), None)
    };
    let rows = ctx.observe(&traj, &grid)?;
    ctx.observable_csv("controls.csv", &[format!("control cost {:.12e}", c.cost)], &rows)?;
    let last = rows.last().unwrap();
    let pass = energy.as_ref().is_none_or(|v| v.pass) && closed.is_none_or(|e| e < 1e-5);
    let summary = ControlSummary {
        kind: match &c.kind {
            ControlKind::Amplitude(_) => "amplitude".into(),
            ControlKind::Velocity { .. } => "velocity".into(),
            ControlKind::ScalarPair { .. } => "scalar_pair".into(),
        },
        form: if potential { "potential" } else { "forcing" },
        cost: c.cost,
        final_mass: last.mass,
        final_arrival_time: last.arrival_time,
        closed_form_error: closed,
        energy,
        pass,
    };
    let (p, text) = ctx.sink.json("controls.json", "summary", &summary)?;
    println!("{text}");
    eprintln!("wrote {}", p.display());
    Ok(pass)
}

fn tail_event(sc: Scenario, r: f64) -> TailEvent {
    match sc {
        Scenario::MassUpFromZero => TailEvent::MassGe(r),
        Scenario::MassDownFromSoliton => TailEvent::MassDropGe(r),
        Scenario::ArrivalAdditive | Scenario::ArrivalMultiplicative => TailEvent::ArrivalGe(r),
    }
}

fn tilt_for(ctx: &Context, sc: Scenario, r: f64, a: f64) -> Result<ControlPath, Failure> {
    let t = ctx.cfg.dynamics.total_time;
    let model = ctx.cfg.noise.model;
    Ok(match (sc, model) {
        (Scenario::ArrivalMultiplicative, SdeModel::Extended) => extended_velocity_control(r, a, t)?,
        (Scenario::ArrivalAdditive, SdeModel::Additive) => velocity_control(r, a, t)?,
        (Scenario::MassUpFromZero, SdeModel::Additive) => ControlPath::amplitude(AmplitudePath::zero_datum(r, t)?)?,
        (Scenario::MassDownFromSoliton, SdeModel::Additive) => {
            ControlPath::amplitude(AmplitudePath::soliton_datum(r, t)?)?
        }
        (_, SdeModel::Multiplicative) => {
            return Err(Failure::Validation(
                "scenario.method: tilting under multiplicative noise needs noise.model = \"extended\"".into(),
            ))
        }
        _ => {
            return Err(Failure::Validation(format!(
                "noise.model: {model:?} does not match scenario {}",
                sc.name()
            )))
        }
    })
}

#[derive(Serialize)]
struct TailReport<'a> {
    estimates: &'a [TailEstimate],
    verdict: nls_jitter::rare_event::Verdict,
}

pub fn tails(ctx: &Context) -> Result<bool, Failure> {
    let sc = ctx.cfg.require_scenario()?;
    if sc.eps_list.is_empty() {
        return Err(Failure::Validation(
            "scenario.eps_list: missing (or set a positive noise.epsilon)".into(),
        ));
    }
    let grid = ctx.grid()?;
    let u0 = ctx.initial(&grid)?;
    let template = ctx.run(&grid, sc.eps_list[0])?;
    let event = tail_event(sc.scenario, sc.r);
    let tilt = match sc.method {
        Method::Tilted => Some(tilt_for(ctx, sc.scenario, sc.r, sc.amplitude)?),
        Method::Plain => None,
    };
    let opts = EstimatorOptions {
        execution: ctx.execution(),
        boundary_threshold: ctx.cfg.observables.boundary_threshold,
    };
    let curve = rate_curve(&event, &template, &u0, &sc.eps_list, sc.n_samples, tilt.as_ref(), &opts)?;
    let norms = phi_norms(ctx, &grid)?;
    let report = evaluate_bounds(sc.scenario, sc.r, ctx.cfg.dynamics.total_time, sc.amplitude, &norms)?;
    let policy = MarginPolicy {
        sigmas: sc.sigmas,
        gap_fraction: sc.gap_fraction,
    };
    let verdict = compare_with_bounds(&curve, &report, &policy)?;
    let rows: Vec<String> = curve.iter().map(TailEstimate::csv_row).collect();
    let p = ctx.sink.csv(
        "tails.csv",
        &[format!("scenario={} R={} event={event:?}", sc.scenario.name(), sc.r)],
        TailEstimate::CSV_HEADER,
        &rows,
    )?;
    println!("wrote {}", p.display());
    if ctx.common.gnuplot_script {
        let gp = ctx
            .sink
            .gnuplot("tails.gp", &p, "epsilon log P", "epsilon", &[(4, "log_rate")])?;
        println!("wrote {}", gp.display());
    }
    let pass = verdict.outcome == Outcome::Pass;
    let (p, text) = ctx.sink.json(
        "verdict.json",
        "tails",
        &TailReport {
            estimates: &curve,
            verdict,
        },
    )?;
    println!("{text}");
    eprintln!("wrote {}", p.display());
    Ok(pass)
}
