//! Runtime checks of the structural guarantees of the learners.
//!
//! Each check produces one [`AuditRow`] per epoch (or per run) with the two
//! sides of an inequality `lhs ≤ rhs`. Posterior quantities are recomputed
//! here from scratch with the batch formulas, independently of the running
//! state the learners keep.

use crate::algorithms::{allocate_plays, EpochReport, EpochState, RgpPeHooks, SelectionRound, UcbHooks};
use crate::error::Result;
use crate::kernel::{Domain, KernelSpec};
use crate::linred::{RpeEpochReport, RpeHooks};
use crate::posterior::{info_gain, AggregatedDataset};
use crate::scalar::Scalar;

/// Number of epochs started is at most `⌈log₂ T⌉`.
pub const EPOCH_COUNT: &str = "epoch_count";
/// Epoch length `u_h ≤ l_h(2 + ψ|S_h|)`.
pub const EPOCH_LENGTH: &str = "epoch_length";
/// Between refreshes, `σ_{t′}(x) ≤ √η·σ_t(x) + 10⁻⁸` on the active set;
/// reported as `max (σ_{t′} − √η·σ_t)` against `10⁻⁸`.
pub const SWITCH_VARIANCE: &str = "switch_variance";
/// `max σ^{(h)} ≤ √(η(2λ+1)γ̂/l_h)` after a completed epoch.
pub const MAX_VARIANCE: &str = "max_variance";
/// `|S_h| ≤ (2/ln η)·γ̂`.
pub const SUPPORT_SIZE: &str = "support_size";
/// `Σ_t σ_{t−1}(x_t) ≤ √((2λ+1)·n·γ̂)` over a sequence of `n` picks.
pub const VARIANCE_SUM: &str = "variance_sum";
/// Design norm `max ‖x‖²_{Γ⁻¹} ≤ 2D`.
pub const DESIGN_NORM: &str = "design_norm";
/// Design support size at most the initial epoch length.
pub const DESIGN_SUPPORT: &str = "design_support";

/// Absolute slack of the switch-variance check.
pub const SWITCH_SLACK: f64 = 1e-8;

/// Relative rounding slack applied to every other check.
const ROUNDING: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub h: usize,
    pub lemma_id: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl AuditRow {
    fn new(h: usize, lemma_id: &'static str, lhs: f64, rhs: f64) -> Self {
        let pass = lhs <= rhs + ROUNDING * rhs.abs().max(1.0);
        Self {
            h,
            lemma_id,
            lhs,
            rhs,
            pass,
        }
    }

    fn absolute(h: usize, lemma_id: &'static str, lhs: f64, rhs: f64) -> Self {
        Self {
            h,
            lemma_id,
            lhs,
            rhs,
            pass: lhs <= rhs,
        }
    }
}

pub fn all_pass(rows: &[AuditRow]) -> bool {
    rows.iter().all(|r| r.pass)
}

pub fn first_violation(rows: &[AuditRow]) -> Option<&AuditRow> {
    rows.iter().find(|r| !r.pass)
}

type Allocator<'a, T> = Box<dyn FnMut(&EpochState<T>, T) -> Vec<(usize, u64)> + Send + 'a>;

/// Audit hooks for the phased-elimination learner.
pub struct RgpPeAudit<'a, T: Scalar> {
    kernel: KernelSpec<T>,
    domain: &'a Domain<T>,
    lambda: T,
    eta: T,
    psi: T,
    horizon: u64,
    allocator: Option<Allocator<'a, T>>,
    rows: Vec<AuditRow>,
    epochs: usize,
    error: Option<crate::Error>,
    picked: Option<AggregatedDataset<T>>,
    prev_sd: Vec<T>,
    sd_sum: f64,
    worst_switch: f64,
}

impl<'a, T: Scalar> RgpPeAudit<'a, T> {
    pub fn new(kernel: KernelSpec<T>, domain: &'a Domain<T>, lambda: T, eta: T, psi: T, horizon: u64) -> Self {
        Self {
            kernel,
            domain,
            lambda,
            eta,
            psi,
            horizon,
            allocator: None,
            rows: Vec::new(),
            epochs: 0,
            error: None,
            picked: None,
            prev_sd: Vec::new(),
            sd_sum: 0.0,
            worst_switch: f64::NEG_INFINITY,
        }
    }

    /// Replaces the play allocation, for testing the checks themselves.
    pub fn with_allocator(mut self, f: impl FnMut(&EpochState<T>, T) -> Vec<(usize, u64)> + Send + 'a) -> Self {
        self.allocator = Some(Box::new(f));
        self
    }

    /// Closes the audit: adds the epoch-count row and returns all rows.
    pub fn finish(mut self) -> Result<Vec<AuditRow>> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        let bound = (self.horizon.max(1) as f64).log2().ceil();
        self.rows.push(AuditRow::new(
            self.epochs.saturating_sub(1),
            EPOCH_COUNT,
            self.epochs as f64,
            bound,
        ));
        Ok(self.rows)
    }

    fn batch_sd(&self, data: &AggregatedDataset<T>, active: &[usize]) -> Result<Vec<T>> {
        let fitted = data.fit()?;
        Ok(active
            .iter()
            .map(|&i| fitted.query_unchecked(self.domain.point(i)).std_dev())
            .collect())
    }

    fn selection_round(&mut self, r: &SelectionRound<'_, T>) -> Result<()> {
        if r.t == 1 {
            self.picked = Some(AggregatedDataset::new(self.kernel, self.lambda)?);
            self.prev_sd = r.active.iter().map(|&i| self.kernel.diag(self.domain.point(i)).sqrt()).collect();
            self.sd_sum = 0.0;
            self.worst_switch = f64::NEG_INFINITY;
        }
        let pos = r.active.binary_search(&r.action).expect("pick in active set");
        self.sd_sum += self.prev_sd[pos].to_f64_lossy();
        let mut data = self.picked.take().expect("selection started");
        data.push(self.domain.point(r.action), T::zero());
        let sd = self.batch_sd(&data, r.active)?;
        self.picked = Some(data);
        if !r.switched {
            let root_eta = self.eta.sqrt();
            for (cached, now) in r.sigma_cache.iter().zip(&sd) {
                let gap = (*cached - root_eta * *now).to_f64_lossy();
                self.worst_switch = self.worst_switch.max(gap);
            }
        }
        self.prev_sd = sd;
        Ok(())
    }

    fn epoch_end(&mut self, rep: &EpochReport<'_, T>) -> Result<()> {
        let state = rep.state;
        let h = state.h;
        self.epochs += 1;
        let data = self.picked.take().expect("selection ran");
        let gamma = info_gain(&data)?.to_f64_lossy();
        let l = state.l_h as f64;
        let lambda = self.lambda.to_f64_lossy();
        let eta = self.eta.to_f64_lossy();
        let support = rep.plays.len() as f64;
        self.rows.push(AuditRow::new(
            h,
            EPOCH_LENGTH,
            rep.epoch_len as f64,
            l * (2.0 + self.psi.to_f64_lossy() * support),
        ));
        let worst = if self.worst_switch.is_finite() { self.worst_switch } else { 0.0 };
        self.rows.push(AuditRow::absolute(h, SWITCH_VARIANCE, worst, SWITCH_SLACK));
        self.rows.push(AuditRow::new(h, SUPPORT_SIZE, support, 2.0 / eta.ln() * gamma));
        self.rows.push(AuditRow::new(
            h,
            VARIANCE_SUM,
            self.sd_sum,
            ((2.0 * lambda + 1.0) * l * gamma).sqrt(),
        ));
        if !rep.truncated {
            let max_sd = rep.sd.iter().map(|s| s.to_f64_lossy()).fold(0.0, f64::max);
            self.rows.push(AuditRow::new(
                h,
                MAX_VARIANCE,
                max_sd,
                (eta * (2.0 * lambda + 1.0) * gamma / l).sqrt(),
            ));
        }
        Ok(())
    }
}

impl<T: Scalar> RgpPeHooks<T> for RgpPeAudit<'_, T> {
    fn on_selection_round(&mut self, round: &SelectionRound<'_, T>) {
        if self.error.is_none() {
            if let Err(e) = self.selection_round(round) {
                self.error = Some(e);
            }
        }
    }

    fn allocate(&mut self, state: &EpochState<T>, psi: T) -> Vec<(usize, u64)> {
        match &mut self.allocator {
            Some(f) => f(state, psi),
            None => allocate_plays(state, psi),
        }
    }

    fn on_epoch_end(&mut self, report: &EpochReport<'_, T>) {
        if self.error.is_none() {
            if let Err(e) = self.epoch_end(report) {
                self.error = Some(e);
            }
        }
    }
}

/// Audit hooks for the sequential learners: one variance-sum row for the
/// whole run.
pub struct UcbAudit<'a, T: Scalar> {
    domain: &'a Domain<T>,
    played: AggregatedDataset<T>,
    sd_sum: f64,
    rounds: u64,
}

impl<'a, T: Scalar> UcbAudit<'a, T> {
    pub fn new(kernel: KernelSpec<T>, domain: &'a Domain<T>, lambda: T) -> Result<Self> {
        Ok(Self {
            domain,
            played: AggregatedDataset::new(kernel, lambda)?,
            sd_sum: 0.0,
            rounds: 0,
        })
    }

    pub fn finish(self) -> Result<Vec<AuditRow>> {
        let gamma = info_gain(&self.played)?.to_f64_lossy();
        let lambda = self.played.lambda().to_f64_lossy();
        Ok(vec![AuditRow::new(
            0,
            VARIANCE_SUM,
            self.sd_sum,
            ((2.0 * lambda + 1.0) * self.rounds as f64 * gamma).sqrt(),
        )])
    }
}

impl<T: Scalar> UcbHooks<T> for UcbAudit<'_, T> {
    fn on_round(&mut self, _t: u64, action: usize, sd_before: T) {
        self.sd_sum += sd_before.to_f64_lossy();
        self.rounds += 1;
        self.played.push(self.domain.point(action), T::zero());
    }
}

/// Audit hooks for the linear-reduction learner: design validity per epoch.
#[derive(Debug, Default)]
pub struct RpeAudit {
    rows: Vec<AuditRow>,
}

impl RpeAudit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn finish(self) -> Vec<AuditRow> {
        self.rows
    }
}

impl<T: Scalar> RpeHooks<T> for RpeAudit {
    fn on_epoch_end(&mut self, r: &RpeEpochReport<'_, T>) {
        self.rows.push(AuditRow::new(
            r.h,
            DESIGN_NORM,
            r.design.max_norm.to_f64_lossy(),
            2.0 * r.dim as f64,
        ));
        self.rows.push(AuditRow::new(
            r.h,
            DESIGN_SUPPORT,
            r.design.support().len() as f64,
            r.m0 as f64,
        ));
    }
}
