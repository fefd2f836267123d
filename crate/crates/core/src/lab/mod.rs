//! Epsilon sweeps, two-scale Young measure histograms and Monte Carlo
//! ensembles.

pub mod ensemble;
pub mod sweep;
pub mod testfn;
pub mod young;

pub use ensemble::{
    mean_half_width, monte_carlo, EnsemblePlan, EnsembleStats, EnsembleTime, MomentStat,
    WeightFunction,
};
pub use sweep::{
    corrector_error, corrector_field, eps_sweep, midpoint_nodes, ConvergenceTable, ExactFn,
    RatioRow, Reference, SweepPlan, SweepRow,
};
pub use testfn::{default_test_functions, weak_star_error, TestFunction, WindowKind};
pub use young::{young_measure_estimate, YoungMeasureHistogram};
