//! Eigenpair continuation: the real split system `M(y) y' = h(y)`, FEM and
//! RK4 predictors, the Newton corrector, step adaptation, and the handling of
//! folds, real-to-complex transitions, re-initialization and jumps.

mod config;
mod state;
mod system;
mod track;
mod trajectory;

pub use config::{adapt_step, BranchRule, Corrector, Integrator, ReinitPolicy, StepControl, TrackerConfig};
pub use state::{init_from_eigenpair, perturb_epsilon, residual, TrackerState, INIT_RESIDUAL_MAX};
pub use system::{
    assemble_system, correct_newton, predict_fem, predict_rk4, tangent, Corrected, Tangent, NORM_TOL,
};
pub use track::{detect_fold, reinitialize, track, TrackingAborted, REINIT_MAC_MIN};
pub use trajectory::{StepFlags, Trajectory, TrajectoryRecord, CSV_HEADER};
