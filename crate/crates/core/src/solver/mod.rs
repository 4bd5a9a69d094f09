//! Projected-gradient engine over the simplex and linear inequalities.

pub mod active_set;
pub mod descent;
pub mod fd;
pub mod feasible;

pub use active_set::{build_projector, detect_violations, ActiveSet};
pub use descent::{projected_ascent, projected_descent, SolveReport, SolverOptions, Termination};
pub use fd::fd_gradient;
pub use feasible::{feasible_point, project_capped_simplex};
