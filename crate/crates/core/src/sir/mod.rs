//! Controlled SIR dynamics, integration and closed-form orbit results.

pub mod closed_form;
pub mod cost;
pub mod dynamics;
pub mod integrate;
pub mod params;

pub use closed_form::{
    final_size, final_size_residual, infected_squared_to_final_size, integral_infected_squared_uncontrolled,
    uncontrolled_peak, FinalSize,
};
pub use cost::{cumulative_cost, trajectory_cost, uncontrolled_tail_cost, CostBreakdown};
pub use dynamics::{conserved_quantity, derivative, reproduction_numbers, Rates, ReproductionNumbers};
pub use integrate::{
    integrate, integrate_with, ConstantLockdown, ControlSignal, IntegratorOptions, NoLockdown, PiecewiseConstant,
    Sample, Trajectory,
};
pub use params::{reference, CostParams, EpidemicParams, State};
