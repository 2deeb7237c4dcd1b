//! Energy identities and inequalities along a numerically controlled
//! trajectory `i u_t = u_xx + |u|²u + Φh`.

use serde::Serialize;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::noise::{NoiseModel, OperatorNorms};
use crate::observables::{first_moment, mass, momentum};

use super::controls::ControlPath;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyVerdict {
    /// `max_t |ΔN(t) - 2Re(-i∫∫Φh ū)| / scale`.
    pub mass_identity_error: f64,
    /// `min_t` of right minus left side of the pointwise mass bound.
    pub mass_bound_margin: f64,
    /// Right minus left side of the `L²(0,T;L²)` bound.
    pub l2_bound_margin: f64,
    /// `max_t |Y(t) - Y₀ - ∫P - ∫(-2Re(i∫xūΦh))| / scale`, with
    /// `P(s) = P₀ + 4Re∫₀ˢ∫ū∂ₓΦh` and `scale` the largest of `|Y(t) - Y₀|`
    /// and `max_t N · dx`.
    pub arrival_identity_error: f64,
    /// `4T‖Φ‖_{H¹}‖h‖‖u‖ + 2‖Φ‖_Σ‖h‖‖u‖ - |Y(T) - Y₀ - P₀T|`.
    pub arrival_chain_margin: f64,
    /// `T‖Φ‖‖h‖(1 + √(1 + N₀/(T‖Φ‖²‖h‖²))) - ‖u‖_{L²(0,T;L²)}`.
    pub trajectory_norm_margin: f64,
    pub pass: bool,
}

/// Identity tolerance (relative).
pub const IDENTITY_TOLERANCE: f64 = 1e-4;

fn cumulative_trapezoid(y: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in y.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Checks the energy relations along `traj`, which must be stored at every
/// step (stride 1) of the evolution forced by `Φh` with `h` from `control`.
pub fn energy_inequality_check(
    traj: &Trajectory,
    control: &ControlPath,
    grid: &Grid,
    phi: Option<&NoiseModel>,
    norms: &OperatorNorms,
) -> Result<EnergyVerdict> {
    if traj.len() < 3 {
        return Err(Error::Contract("energy check needs at least three snapshots".into()));
    }
    let h = (traj.times[1] - traj.times[0]).abs();
    if traj
        .times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1e-300))
    {
        return Err(Error::Contract("energy check needs uniformly spaced snapshots".into()));
    }
    let total = traj.times[traj.len() - 1] - traj.times[0];
    let field = control.field_path(grid)?;
    let dx = grid.spacing();

    let mut mass_rate = Vec::with_capacity(traj.len());
    let mut momentum_rate = Vec::with_capacity(traj.len());
    let mut arrival_forcing = Vec::with_capacity(traj.len());
    let mut h_sq = Vec::with_capacity(traj.len());
    let mut u_sq = Vec::with_capacity(traj.len());
    for (&t, u) in traj.times.iter().zip(&traj.states) {
        let hf = field(t);
        let g = match phi {
            Some(m) => m.apply(&hf)?,
            None => hf.clone(),
        };
        let dg = grid.derivative(&g)?;
        let (mut m_rate, mut p_rate, mut y_rate) = (0.0, 0.0, 0.0);
        for (((z, gv), dgv), &x) in u.values.iter().zip(&g.values).zip(&dg.values).zip(grid.nodes()) {
            let zc = z.conj();
            // 2Re(-i ū g), 4Re(ū ∂ₓg), -2Re(i x ū g)
            m_rate += 2.0 * (zc * gv).im;
            p_rate += 4.0 * (zc * dgv).re;
            y_rate += 2.0 * x * (zc * gv).im;
        }
        mass_rate.push(dx * m_rate);
        momentum_rate.push(dx * p_rate);
        arrival_forcing.push(dx * y_rate);
        h_sq.push(hf.norm_sq());
        u_sq.push(mass(u));
    }

    let u0 = &traj.states[0];
    let n0 = mass(u0);
    let y0 = first_moment(u0, grid);
    let p0 = momentum(u0, grid)?;

    let mass_input = cumulative_trapezoid(&mass_rate, h);
    let h_norm = cumulative_trapezoid(&h_sq, h).last().copied().unwrap_or(0.0).sqrt();
    let u_norm = cumulative_trapezoid(&u_sq, h).last().copied().unwrap_or(0.0).sqrt();
    let phi_l2 = norms.l2_l2;

    let mut mass_scale = n0;
    let mut mass_err: f64 = 0.0;
    let mut mass_margin = f64::INFINITY;
    for (i, u) in traj.states.iter().enumerate() {
        let delta = mass(u) - n0;
        mass_scale = mass_scale.max(delta.abs());
        mass_err = mass_err.max((delta - mass_input[i]).abs());
        mass_margin = mass_margin.min(2.0 * phi_l2 * h_norm * u_norm - delta);
    }
    let mass_identity_error = if mass_scale > 0.0 {
        mass_err / mass_scale
    } else {
        mass_err
    };
    let l2_bound_margin = 2.0 * total * phi_l2 * h_norm * u_norm - (u_norm * u_norm - total * n0);

    let p_path: Vec<f64> = cumulative_trapezoid(&momentum_rate, h).iter().map(|v| p0 + v).collect();
    let drift = cumulative_trapezoid(&p_path, h);
    let forcing = cumulative_trapezoid(&arrival_forcing, h);
    // Floor: the whole mass displaced by one grid cell.
    let mut y_scale: f64 = u_sq.iter().copied().fold(0.0, f64::max) * dx;
    let mut y_err: f64 = 0.0;
    for (i, u) in traj.states.iter().enumerate() {
        let dy = first_moment(u, grid) - y0;
        y_scale = y_scale.max(dy.abs());
        y_err = y_err.max((dy - drift[i] - forcing[i]).abs());
    }
    let arrival_identity_error = if y_scale > 0.0 { y_err / y_scale } else { y_err };
    let y_end = first_moment(traj.states.last().unwrap(), grid) - y0 - p0 * total;
    let arrival_chain_margin = (4.0 * total * norms.l2_h1 + 2.0 * norms.l2_sigma) * h_norm * u_norm - y_end.abs();
    let hb = total * phi_l2 * h_norm;
    let trajectory_norm_margin = if hb > 0.0 {
        hb * (1.0 + (1.0 + n0 / (total * phi_l2 * phi_l2 * h_norm * h_norm)).sqrt()) - u_norm
    } else {
        (total * n0).sqrt() - u_norm
    };

    let slack = 1e-8 * (n0 * total).max(1.0);
    let pass = mass_identity_error <= IDENTITY_TOLERANCE
        && arrival_identity_error <= IDENTITY_TOLERANCE
        && mass_margin >= -slack
        && l2_bound_margin >= -slack
        && arrival_chain_margin >= -slack
        && trajectory_norm_margin >= -slack;
    Ok(EnergyVerdict {
        mass_identity_error,
        mass_bound_margin: mass_margin,
        l2_bound_margin,
        arrival_identity_error,
        arrival_chain_margin,
        trajectory_norm_margin,
        pass,
    })
}
