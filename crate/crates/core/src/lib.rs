//! Ground states of the dimensionless Gross–Pitaevskii equation by
//! imaginary-time split-step evolution, and datasets built from them.

pub mod dataset;
pub mod error;
pub mod gpe;
pub mod grid;
pub mod potential;
pub mod spectral;

pub use error::{Error, Result};
pub use gpe::{
    energy_single, energy_two, ite_step_single, ite_step_two, solve_ground_single, solve_ground_two,
    EvolutionConfig, GroundState, SingleProblem, TwoComponentGroundState, TwoComponentProblem,
};
pub use grid::{make_grid, Axis, Field, Grid, TwoComponentField};
pub use potential::{evaluate_potential, PotentialKind, PotentialSpec};
