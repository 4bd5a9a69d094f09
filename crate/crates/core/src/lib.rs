//! Gain-PDF portfolio optimization.
//!
//! Portfolios are weight vectors on the simplex, scored through the
//! distribution of a gain function over a finite scenario set. The crate
//! covers conventional risk/return optimization, kernel estimates of the gain
//! density, matching a user target density under linear constraints, and
//! pricing any deviation from the optimum as an equivalent budget change.
//!
//! Every numerical type is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiation.

pub mod conventional;
pub mod density;
pub mod error;
pub mod gain;
pub mod io;
pub mod marginal;
pub mod measures;
pub mod model;
pub mod parallel;
pub mod scalar;
pub mod solver;
pub mod synth;
pub mod target;
pub mod workflow;

pub use conventional::{
    frontier, solve_conventional, ConventionalOptions, ConventionalSolution, Frontier, FrontierPoint,
};
pub use density::{
    auto_grid, default_bandwidth, estimate_pdf, mixture_check, GainPdf, Grid, GridChoice, Kernel,
    KernelKind,
};
pub use error::{Error, ErrorClass, Result};
pub use gain::{evaluate_gain, gain_samples, GainFunction, GainSamples};
pub use marginal::{
    iso_objective_line, landscape, marginal_cost_budget, marginal_cost_generic,
    marginal_cost_risk_aversion_fd, LandscapeGrid, MarginalCostResult, SweepOptions,
};
pub use measures::{
    cvar, cvar_deviation, kl_divergence, l2_discrepancy, markowitz_variance, mean_gain, objective_fa,
    theta, ObjectiveSpec, RiskSpec, Tail, ThetaDirection, ThetaWeight,
};
pub use model::{
    Budget, ConstraintSet, FeatureSchema, PConstraints, Portfolio, ScenarioMatrix, ScenarioSet,
};
pub use scalar::Scalar;
pub use solver::{
    fd_gradient, projected_ascent, projected_descent, ActiveSet, SolveReport, SolverOptions,
    Termination,
};
pub use target::{match_target, perturb_target, MatchOptions, MatchResult, PerturbParams, TargetSpec};

pub type ScenarioSet64 = ScenarioSet<f64>;
pub type ScenarioSet32 = ScenarioSet<f32>;
pub type ConstraintSet64 = ConstraintSet<f64>;
pub type Portfolio64 = Portfolio<f64>;
pub type Portfolio32 = Portfolio<f32>;
pub type GainPdf64 = GainPdf<f64>;
pub type GainPdf32 = GainPdf<f32>;
pub type TargetSpec64 = TargetSpec<f64>;
pub type LandscapeGrid64 = LandscapeGrid<f64>;
pub type MarginalCostResult64 = MarginalCostResult<f64>;
