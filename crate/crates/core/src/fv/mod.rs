//! Finite-volume engine: monotone hyperbolic step, well-balanced stiff
//! source, exact pathwise noise step and optional explicit viscosity,
//! composed by Lie splitting on dyadic time grids.

pub mod grid;
pub mod numflux;
pub mod operator;
pub mod run;

pub use grid::{Grid, GridField};
pub use numflux::{numerical_flux, FluxKind, UnknownKind};
pub use operator::{Dynamics, Forcing, Operator, SchemeConfig};
pub use run::{
    advance, det_step_p1, det_step_p2, noise_step, solve_effective, solve_family_p1, solve_problem,
    viscous_step, FamilySolution, Snapshot, StepRecord, Stepper, Trajectory,
};
