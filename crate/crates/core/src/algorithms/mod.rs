//! Learners on finite domains: robust GP phased elimination and the
//! GP-UCB / RGP-UCB baselines.

mod config;
mod gamma;
mod rgp_pe;
mod ucb;

pub use config::{BetaSchedule, ConfidenceConfig, PsiChoice, RgpPeConfig, UcbConfig, WidthMode};
pub use gamma::{gamma_surrogate, theoretical_psi};
pub use rgp_pe::{
    allocate_plays, eliminate, elimination_width, run_rgp_pe, run_rgp_pe_with, select_batch,
    EpochReport, EpochState, NoHooks, RgpPeHooks, SelectionRound,
};
pub use ucb::{run_gp_ucb, run_rgp_ucb, run_ucb_with, ucb_coefficient, UcbHooks};
