//! Periodic grid on `[-L, L)`, unitary discrete Fourier transform and
//! spectral differential operators.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Identifies the grid a [`Field`] was sampled on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridTag {
    pub n_points: usize,
    pub half_length: f64,
}

impl GridTag {
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n_points as f64
    }
}

/// Uniform periodic grid. Immutable after construction; cloning shares the
/// FFT plans.
#[derive(Clone)]
pub struct Grid {
    half_length: f64,
    n_points: usize,
    spacing: f64,
    nodes: Arc<[f64]>,
    wavenumbers: Arc<[f64]>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_length", &self.half_length)
            .field("n_points", &self.n_points)
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.tag() == other.tag()
    }
}

impl Grid {
    pub fn new(half_length: f64, n_points: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::Config(format!(
                "grid half_length must be positive, got {half_length}"
            )));
        }
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid n_points must be a power of two >= 8, got {n_points}"
            )));
        }
        let spacing = 2.0 * half_length / n_points as f64;
        let nodes: Arc<[f64]> = (0..n_points).map(|j| -half_length + j as f64 * spacing).collect();
        let dk = PI / half_length;
        let half = n_points / 2;
        let wavenumbers: Arc<[f64]> = (0..n_points)
            .map(|j| {
                if j < half {
                    j as f64 * dk
                } else {
                    (j as f64 - n_points as f64) * dk
                }
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            half_length,
            n_points,
            spacing,
            nodes,
            wavenumbers,
            forward: planner.plan_fft_forward(n_points),
            inverse: planner.plan_fft_inverse(n_points),
            scale: 1.0 / (n_points as f64).sqrt(),
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Signed node coordinates `x_j = -L + j dx`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Wavenumbers in transform order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn tag(&self) -> GridTag {
        GridTag {
            n_points: self.n_points,
            half_length: self.half_length,
        }
    }

    pub fn check(&self, f: &Field) -> Result<()> {
        if f.tag != self.tag() || f.values.len() != self.n_points {
            return Err(Error::Contract(format!(
                "field sampled on {:?} used with grid {:?}",
                f.tag,
                self.tag()
            )));
        }
        Ok(())
    }

    pub fn scratch(&self) -> Vec<Complex64> {
        vec![
            Complex64::default();
            self.forward
                .get_inplace_scratch_len()
                .max(self.inverse.get_inplace_scratch_len())
        ]
    }

    /// Unitary forward transform in place.
    pub fn forward_in_place(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, scratch);
        for z in buf.iter_mut() {
            *z *= self.scale;
        }
    }

    /// Unitary inverse transform in place.
    pub fn inverse_in_place(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, scratch);
        for z in buf.iter_mut() {
            *z *= self.scale;
        }
    }

    pub fn to_spectrum(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let mut out = f.clone();
        self.forward_in_place(&mut out.values, &mut self.scratch());
        Ok(out)
    }

    pub fn to_field(&self, s: &Field) -> Result<Field> {
        self.check(s)?;
        let mut out = s.clone();
        self.inverse_in_place(&mut out.values, &mut self.scratch());
        Ok(out)
    }

    /// Applies the Fourier multiplier `symbol(k)` to `f`.
    pub fn apply_multiplier<S>(&self, f: &Field, symbol: S) -> Result<Field>
    where
        S: Fn(f64) -> Complex64,
    {
        let mut s = self.to_spectrum(f)?;
        for (z, &k) in s.values.iter_mut().zip(self.wavenumbers.iter()) {
            *z *= symbol(k);
        }
        self.to_field(&s)
    }

    pub fn laplacian(&self, f: &Field) -> Result<Field> {
        self.apply_multiplier(f, |k| Complex64::new(-k * k, 0.0))
    }

    pub fn derivative(&self, f: &Field) -> Result<Field> {
        self.apply_multiplier(f, |k| Complex64::new(0.0, k))
    }

    /// Returns `x -> f(x - shift)` using the spectral interpolant.
    pub fn translate(&self, f: &Field, shift: f64) -> Result<Field> {
        self.apply_multiplier(f, |k| Complex64::from_polar(1.0, -k * shift))
    }

    /// 2/3-rule mask: 1 for `|k| <= (2/3) k_max`, 0 otherwise.
    pub fn dealias_mask(&self) -> Vec<f64> {
        let cutoff = 2.0 / 3.0 * PI / self.spacing;
        self.wavenumbers
            .iter()
            .map(|k| if k.abs() <= cutoff + 1e-12 { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Complex samples of a wavefunction (or its spectrum) on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<Complex64>,
    pub tag: GridTag,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            values: vec![Complex64::default(); grid.n_points()],
            tag: grid.tag(),
        }
    }

    pub fn from_fn<F: FnMut(f64) -> Complex64>(grid: &Grid, mut f: F) -> Self {
        Self {
            values: grid.nodes().iter().map(|&x| f(x)).collect(),
            tag: grid.tag(),
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::Contract(format!(
                "expected {} samples, got {}",
                grid.n_points(),
                values.len()
            )));
        }
        Ok(Self {
            values,
            tag: grid.tag(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.tag.spacing()
    }

    /// Discrete squared L² norm, `dx Σ |f_j|²`.
    pub fn norm_sq(&self) -> f64 {
        self.spacing() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Real L² pairing `Re ∫ f ḡ`.
    pub fn inner_re(&self, other: &Field) -> f64 {
        self.spacing()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a * b.conj()).re)
                .sum::<f64>()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `‖self - other‖ / ‖other‖` in the discrete L² norm.
    pub fn relative_error(&self, reference: &Field) -> f64 {
        let diff: f64 = self
            .values
            .iter()
            .zip(&reference.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let base: f64 = reference.values.iter().map(|z| z.norm_sqr()).sum();
        (diff / base).sqrt()
    }

    pub fn scale(&mut self, c: Complex64) {
        for z in &mut self.values {
            *z *= c;
        }
    }
}
