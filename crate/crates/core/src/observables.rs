//! Functionals of a field: mass, arrival time, momentum, variance and the
//! receiver's detection-window statistic.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Outer fraction of the half-domain treated as the boundary layer.
pub const BOUNDARY_LAYER: f64 = 0.9;
/// Default limit on the boundary mass fraction for arrival times.
pub const DEFAULT_BOUNDARY_THRESHOLD: f64 = 1e-6;

pub const CSV_HEADER: &str = "t,mass,arrival_time,momentum,variance,window_mass,boundary_mass_fraction";

pub fn mass(u: &Field) -> f64 {
    u.norm_sq()
}

/// Fraction of the mass located in `|x| >= 0.9 L`.
pub fn boundary_mass_fraction(u: &Field, grid: &Grid) -> f64 {
    let edge = BOUNDARY_LAYER * grid.half_length();
    let (mut outer, mut total) = (0.0, 0.0);
    for (z, &x) in u.values.iter().zip(grid.nodes()) {
        let m = z.norm_sqr();
        total += m;
        if x.abs() >= edge {
            outer += m;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        outer / total
    }
}

/// `Y(u) = ∫ x |u|² dx` with the signed grid coordinate.
pub fn arrival_time(u: &Field, grid: &Grid) -> Result<f64> {
    arrival_time_with(u, grid, DEFAULT_BOUNDARY_THRESHOLD)
}

pub fn arrival_time_with(u: &Field, grid: &Grid, threshold: f64) -> Result<f64> {
    grid.check(u)?;
    let fraction = boundary_mass_fraction(u, grid);
    if fraction > threshold {
        return Err(Error::AmbiguousPosition { fraction, threshold });
    }
    Ok(first_moment(u, grid))
}

pub(crate) fn first_moment(u: &Field, grid: &Grid) -> f64 {
    grid.spacing()
        * u.values
            .iter()
            .zip(grid.nodes())
            .map(|(z, x)| x * z.norm_sqr())
            .sum::<f64>()
}

/// `P(u) = 2 Re(i ∫ ū ∂ₓu)` with a spectral derivative.
pub fn momentum(u: &Field, grid: &Grid) -> Result<f64> {
    let du = grid.derivative(u)?;
    let s: f64 = u.values.iter().zip(&du.values).map(|(a, b)| (a.conj() * b).im).sum();
    Ok(-2.0 * grid.spacing() * s)
}

/// `V(u) = ∫ x² |u|² dx`.
pub fn variance(u: &Field, grid: &Grid) -> f64 {
    grid.spacing()
        * u.values
            .iter()
            .zip(grid.nodes())
            .map(|(z, x)| x * x * z.norm_sqr())
            .sum::<f64>()
}

/// Raw window mass `∫_{-l/2}^{l/2} |u|²`. Each node carries the part of its
/// cell `[x - dx/2, x + dx/2]` that lies inside the window.
pub fn window_mass(u: &Field, grid: &Grid, window: f64) -> Result<f64> {
    grid.check(u)?;
    if !(window > 0.0 && window <= 2.0 * grid.half_length() + 1e-12) {
        return Err(Error::OutOfRange(format!(
            "window length {window} must lie in (0, {}]",
            2.0 * grid.half_length()
        )));
    }
    let dx = grid.spacing();
    let half = 0.5 * window;
    let s: f64 = u
        .values
        .iter()
        .zip(grid.nodes())
        .map(|(z, &x)| {
            let lo = (x - 0.5 * dx).max(-half);
            let hi = (x + 0.5 * dx).min(half);
            (hi - lo).max(0.0) * z.norm_sqr()
        })
        .sum();
    Ok(s)
}

/// The receiver statistic `(1/l) ∫_{-l/2}^{l/2} |u|²`.
pub fn window_statistic(u: &Field, grid: &Grid, window: f64) -> Result<f64> {
    Ok(window_mass(u, grid, window)? / window)
}

/// Bit decision: `true` (a "1") iff the window statistic reaches `threshold`.
pub fn detect(u: &Field, grid: &Grid, window: f64, threshold: f64) -> Result<bool> {
    Ok(window_statistic(u, grid, window)? >= threshold)
}

/// One row of the observable CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub mass: f64,
    /// `None` when the boundary mass makes the periodic position ambiguous.
    pub arrival_time: Option<f64>,
    pub momentum: f64,
    pub variance: f64,
    pub window_mass: f64,
    pub boundary_mass_fraction: f64,
}

impl ObservableRecord {
    pub fn observe(t: f64, u: &Field, grid: &Grid, window: f64, threshold: f64) -> Result<Self> {
        grid.check(u)?;
        let fraction = boundary_mass_fraction(u, grid);
        Ok(Self {
            t,
            mass: mass(u),
            arrival_time: (fraction <= threshold).then(|| first_moment(u, grid)),
            momentum: momentum(u, grid)?,
            variance: variance(u, grid),
            window_mass: window_mass(u, grid, window)?,
            boundary_mass_fraction: fraction,
        })
    }

    pub fn csv_row(&self) -> String {
        let y = self
            .arrival_time
            .map_or_else(|| "nan".to_string(), |y| format!("{y:.12e}"));
        format!(
            "{:.12e},{:.12e},{},{:.12e},{:.12e},{:.12e},{:.6e}",
            self.t, self.mass, y, self.momentum, self.variance, self.window_mass, self.boundary_mass_fraction
        )
    }
}
