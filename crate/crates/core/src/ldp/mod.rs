//! Explicit controls, their costs, and the closed-form tail-rate bounds.

pub mod bounds;
pub mod controls;
pub mod energy;
pub mod paths;

pub use bounds::{evaluate_bounds, BoundReport, PhiNorms, Scenario};
pub use controls::{
    extended_velocity_control, optimal_rate, realize_control_field, velocity_constraint, velocity_control, ControlKind,
    ControlPath,
};
pub use energy::{energy_inequality_check, EnergyVerdict};
pub use paths::{
    action, amplitude_cost, cost_prefactor, euler_lagrange_residual, perturbation_probe, representative, AmplitudeKind,
    AmplitudePath, ProbeReport,
};
