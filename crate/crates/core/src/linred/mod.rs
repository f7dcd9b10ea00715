//! Reduction of the kernelized problem to a linear one: a greedy Newton
//! basis gives a finite-dimensional embedding in which the reward is linear
//! up to a uniform error, and a robust phased-elimination learner runs on
//! the embedded actions.

mod design;
mod newton;
mod rpe;

pub use design::{approx_design, span_basis, Design, DESIGN_MAX_ITERS, DESIGN_PRUNE_WEIGHT};
pub use newton::{newton_basis, NewtonBasis, NewtonStep};
pub use rpe::{
    design_plays, elimination_threshold, initial_epoch_len, rpe_eliminate, rpe_estimate,
    run_rpe_linear, run_rpe_linear_with, DeltaMode, RpeEpochReport, RpeHooks, RpeLinearConfig,
    RpeRun,
};
