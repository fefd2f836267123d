//! Problem descriptions: fluxes, noise flows, oscillatory data and the exact
//! special solutions.

pub mod flow;
pub mod flux;
pub mod potential;
pub mod problem;
pub mod smooth;

pub use flow::{
    noise_flow, noise_from_flux, ExplicitFlow, FlowPrimitive, FluxInverseFlow, StochasticFlowModel,
    TabulatedFlow,
};
pub use flux::{FluxComponent, ScalarFlux};
pub use potential::{Mode, OscillatoryPotential, PotentialKind, VelocityField};
pub use problem::{
    special_solution_p1, special_solution_p2, validate_problem, BoundaryMode, Check, Domain,
    PointFn, ProblemSpec, TwoScaleFn, ValidationReport, Variant,
};
pub use smooth::{RealFn, SmoothFn};
