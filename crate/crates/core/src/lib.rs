//! Li–Yau type estimates for the semilinear heat equation `u_t = Δu + u^p`:
//! admissible parameter regions, model geometries with nonnegative Ricci
//! curvature, a blow-up aware method-of-lines solver, and numerical checks
//! of the resulting inequalities.

// `!(x > 0.0)` rejects NaN; stencil loops index several arrays at offsets.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod admissibility;
pub mod blowup;
pub mod checks;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod persist;
pub mod solver;
pub mod statics;

pub use admissibility::{
    check_admissible, convexity_coefficient, convexity_region_nonempty, epsilon, p_bar_closed, p_bar_sweep,
    special_case_p_le_1, threshold_report, AdmissibilityResult, ConvexityCoefficient, ConvexityPoint, ParamPair,
    Problem, SweepGrid, ThresholdReport,
};
pub use blowup::{
    check_lower_bound, fit_blowup_time, rescale, BlowupFit, LowerBoundReport, RescaleWindow, RescaledSlice,
};
pub use checks::{
    decay_bound_check, harnack_check, liyau_check, monotone_convex_check, random_paths, HarnackReport, LiYauReport,
    MonotoneConvexReport, PathSpec,
};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentReport, RunConfig};
pub use geometry::{Geometry, GeometryKind, GeometrySpec};
pub use solver::{evolve, Snapshot, Solution, SolverConfig};
pub use statics::{static_residual, RadialProfile, Talenti};
