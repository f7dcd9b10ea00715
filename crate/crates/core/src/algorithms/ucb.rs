//! Fully sequential GP-UCB and its corruption-robust variant, which only
//! enlarges the coefficient of the posterior standard deviation.

use crate::adversary::{AlgorithmView, AttackLedger, LearnerKind, Trigger, TriggerEvent};
use crate::environment::{Environment, RegretTrace};
use crate::error::{Error, Result};
use crate::kernel::{Domain, KernelSpec};
use crate::posterior::{AggregatedDataset, SequentialPosterior};
use crate::scalar::{argmax_first, Scalar};

use super::config::{ConfidenceConfig, UcbConfig, WidthMode};

/// Rounds between exact batch recomputations of the running posterior.
const RESYNC_EVERY: u64 = 256;

/// Coefficient of `σ_{t−1}` at round `t`: `β_t` for GP-UCB, `β_t + C/√λ`
/// (theoretical) or `β_t + b·C/√λ` (practical) for RGP-UCB.
pub fn ucb_coefficient<T: Scalar>(conf: &ConfidenceConfig<T>, t: u64, lambda: T, robust: bool) -> T {
    let beta = conf.beta.at(t, lambda);
    if !robust {
        return beta;
    }
    let scale = match conf.width {
        WidthMode::Theoretical => T::one(),
        WidthMode::Practical { b } => b,
    };
    beta + scale * conf.c_known / lambda.sqrt()
}

/// Per-round observer for the sequential learners.
pub trait UcbHooks<T: Scalar> {
    /// Called before playing `action` at round `t`; `sd_before` is
    /// `σ_{t−1}(x_t)`.
    fn on_round(&mut self, _t: u64, _action: usize, _sd_before: T) {}
}

impl<T: Scalar> UcbHooks<T> for super::NoHooks {}

pub fn run_gp_ucb<T: Scalar>(
    cfg: &UcbConfig<T>,
    kernel: &KernelSpec<T>,
    domain: &Domain<T>,
    env: &mut Environment<T>,
    ledger: &mut AttackLedger<T>,
) -> Result<RegretTrace<T>> {
    run_ucb_with(cfg, kernel, domain, env, ledger, false, &mut super::NoHooks)
}

pub fn run_rgp_ucb<T: Scalar>(
    cfg: &UcbConfig<T>,
    kernel: &KernelSpec<T>,
    domain: &Domain<T>,
    env: &mut Environment<T>,
    ledger: &mut AttackLedger<T>,
) -> Result<RegretTrace<T>> {
    run_ucb_with(cfg, kernel, domain, env, ledger, true, &mut super::NoHooks)
}

/// Shared loop; `robust` selects RGP-UCB.
pub fn run_ucb_with<T: Scalar>(
    cfg: &UcbConfig<T>,
    kernel: &KernelSpec<T>,
    domain: &Domain<T>,
    env: &mut Environment<T>,
    ledger: &mut AttackLedger<T>,
    robust: bool,
    hooks: &mut dyn UcbHooks<T>,
) -> Result<RegretTrace<T>> {
    cfg.validate()?;
    domain.validate_for(kernel)?;
    if env.truth().len() != domain.len() {
        return Err(Error::DimensionMismatch {
            left: domain.len(),
            right: env.truth().len(),
        });
    }
    let learner = if robust { LearnerKind::RgpUcb } else { LearnerKind::GpUcb };
    let pts = domain.points().to_vec();
    let n = pts.len();
    let mut post = SequentialPosterior::new(kernel, &pts, cfg.lambda)?;
    let mut data = AggregatedDataset::new(*kernel, cfg.lambda)?;
    let mut trace = RegretTrace::with_capacity(cfg.horizon.min(1 << 24) as usize);
    let mut sd = vec![T::zero(); n];

    for t in 1..=cfg.horizon {
        let coef = ucb_coefficient(&cfg.confidence, t, cfg.lambda, robust);
        for (j, s) in sd.iter_mut().enumerate() {
            *s = post.std_dev(j);
        }
        let i = argmax_first((0..n).map(|j| post.mean(j) + coef * sd[j]))
            .ok_or(Error::Empty("domain"))?;
        hooks.on_round(t, i, sd[i]);
        let obs = env.observe(t, i, ledger, &AlgorithmView::new(learner));
        trace.record(i, &obs, env.truth());
        post.observe(i, obs.observed);
        data.push(&pts[i], obs.observed);
        if t % RESYNC_EVERY == 0 {
            post.resync(&data, &pts)?;
        }
        if robust && !ledger.is_active() && ledger.config().trigger == Trigger::Later {
            let next = ucb_coefficient(&cfg.confidence, t + 1, cfg.lambda, robust);
            let bounds: Vec<(T, T)> = (0..n)
                .map(|j| {
                    let (m, s) = (post.mean(j), post.std_dev(j));
                    (m + next * s, m - next * s)
                })
                .collect();
            let max_lcb = bounds.iter().map(|b| b.1).fold(T::neg_infinity(), T::max);
            if bounds.iter().any(|b| b.0 < max_lcb) {
                ledger.later_trigger_check(learner, TriggerEvent::UcbBelowMaxLcb);
            }
        }
    }
    Ok(trace)
}
