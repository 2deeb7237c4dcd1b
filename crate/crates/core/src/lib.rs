//! Simulation and verification toolkit for noise-induced mass fluctuation
//! and timing jitter of solitons in the stochastic cubic focusing NLS
//! equation `i du = (u_xx + |u|²u) dt + noise`.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: periodic grid, unitary DFT and spectral operators.
//! * [`dynamics`]: Strang-split evolution and closed-form (modulated) solitons.
//! * [`noise`]: Fourier-multiplier covariance operators and increments.
//! * [`stochastic`]: additive, multiplicative and extended SPDE trajectories.
//! * [`observables`]: mass, arrival time, momentum, detection window.
//! * [`ldp`]: explicit controls, their costs and the closed-form tail bounds.
//! * [`rare_event`]: plain and importance-sampled tail estimators.
//! * [`ensemble`]: deterministic seeding and the (optionally parallel) runner.

pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod io;
pub mod ldp;
pub mod noise;
pub mod observables;
pub mod quad;
pub mod rare_event;
pub mod stochastic;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use num_complex::Complex64;
