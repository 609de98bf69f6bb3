//! Saddle-point search by iterative proximal minimization.
//!
//! The search alternates two sub-problems: the lowest Hessian mode(s) at the
//! current point, and a few gradient steps on a reflected auxiliary function
//! augmented by a quartic proximal penalty. Fixed points of the iteration are
//! exactly the index-k saddles of the energy.

pub mod driver;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod minmode;
pub mod model;
pub mod objective;
pub mod problems;

pub use driver::{
    convergence_order, convergence_order_to, fit_order, fixed_point_residual, inner_minimize, ipm_run,
    metric_grad_norm, nash_check, GameProfile, InnerResult, NashReport,
};
pub use error::{IpmError, Result};
pub use minmode::{index_region_membership, min_mode, min_modes_k, IndexRegion, ModeSet, SpectralPair};
pub use model::{
    gradient_consistency, hess_vec_fd, IpmConfig, IterationRecord, IterationTrace, Matrix, Metric, MetricKind,
    PotentialSurface, TraceStatus, Vector,
};
pub use objective::{
    aux_hessian_center, aux_hessian_center_matrix, penalty_grad_y, penalty_value, rho_bar_estimate, w_tilde_grad,
    w_tilde_value, w_value, PenaltyKind, PenaltySpec, ReflectionFrame,
};
