//! Robust GP phased elimination with rare switching.
//!
//! Each epoch runs a virtual selection loop of `l_h` maximum-variance picks
//! (variances are only refreshed when the information determinant has grown
//! by a factor `η` since the last refresh), turns the pick frequencies into
//! play counts `u_h(x) = ⌈l_h·max{ξ_h(x), ψ}⌉`, plays them, and eliminates
//! actions using a posterior built from that epoch's plays alone.

use crate::adversary::{AlgorithmView, AttackLedger, LearnerKind, TriggerEvent};
use crate::environment::{EpochMark, Environment, RegretTrace};
use crate::error::{Error, Result};
use crate::kernel::{Domain, KernelSpec};
use crate::posterior::{switch_condition, AggregatedDataset, SequentialPosterior};
use crate::scalar::{argmax_first, Scalar};

use super::config::{ConfidenceConfig, RgpPeConfig, WidthMode};

/// State of one epoch's selection loop.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochState<T = f64> {
    pub h: usize,
    pub l_h: u64,
    /// Active domain indices, ascending.
    pub active: Vec<usize>,
    /// Domain index picked at each selection round.
    pub selection_seq: Vec<usize>,
    /// `σ_{t−1}(x_t)` under the posterior of the first `t − 1` picks.
    pub selection_sd: Vec<T>,
    /// Round of the last variance refresh (0 before any).
    pub anchor_t: u64,
    pub anchor_logdet: T,
    /// Running `ln det(I + λ⁻¹K)` of the picks so far.
    pub logdet: T,
    /// Variances used for picking, as standard deviations parallel to
    /// `active`.
    pub sigma_cache: Vec<T>,
    /// Rounds at which the refresh condition fired.
    pub switches: Vec<u64>,
}

impl<T: Scalar> EpochState<T> {
    pub fn new(h: usize, l_h: u64, active: Vec<usize>) -> Self {
        let n = active.len();
        Self {
            h,
            l_h,
            active,
            selection_seq: Vec::with_capacity(l_h as usize),
            selection_sd: Vec::with_capacity(l_h as usize),
            anchor_t: 0,
            anchor_logdet: T::zero(),
            logdet: T::zero(),
            sigma_cache: vec![T::one(); n],
            switches: Vec::new(),
        }
    }

    /// Distinct picked indices with their pick counts, ascending by index.
    pub fn selection_counts(&self) -> Vec<(usize, u64)> {
        let mut seq = self.selection_seq.clone();
        seq.sort_unstable();
        let mut out: Vec<(usize, u64)> = Vec::new();
        for x in seq {
            match out.last_mut() {
                Some((y, c)) if *y == x => *c += 1,
                _ => out.push((x, 1)),
            }
        }
        out
    }

    /// Distinct picked indices, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.selection_counts().into_iter().map(|(x, _)| x).collect()
    }

    /// Pick frequencies `ξ_h(x)`.
    pub fn xi(&self) -> Vec<(usize, T)> {
        let l = T::from_u64(self.l_h).unwrap();
        self.selection_counts()
            .into_iter()
            .map(|(x, c)| (x, T::from_u64(c).unwrap() / l))
            .collect()
    }

    /// Realized information gain of the selection sequence.
    pub fn selection_info_gain(&self) -> T {
        self.logdet / T::lit(2.0)
    }
}

/// What a selection-round observer sees.
#[derive(Debug, Clone, Copy)]
pub struct SelectionRound<'a, T> {
    pub t: u64,
    pub action: usize,
    /// Whether the refresh condition fired after this pick.
    pub switched: bool,
    /// Standard deviations the pick was made from (parallel to `active`).
    pub sigma_cache: &'a [T],
    pub active: &'a [usize],
    /// Picks so far, including this one.
    pub selection: &'a [usize],
}

/// Runs the `l_h` selection rounds of an epoch, resetting any previous
/// selection stored in `state`.
pub fn select_batch<T: Scalar>(
    kernel: &KernelSpec<T>,
    domain: &Domain<T>,
    lambda: T,
    eta: T,
    state: &mut EpochState<T>,
    mut on_round: impl FnMut(&SelectionRound<'_, T>),
) -> Result<()> {
    if state.active.is_empty() {
        return Err(Error::Empty("active set"));
    }
    let pts: Vec<Vec<T>> = state.active.iter().map(|&i| domain.point(i).to_vec()).collect();
    let n = pts.len();
    let mut seq = SequentialPosterior::new(kernel, &pts, lambda)?;
    let mut picked = AggregatedDataset::new(*kernel, lambda)?;
    state.selection_seq.clear();
    state.selection_sd.clear();
    state.switches.clear();
    state.anchor_t = 0;
    state.anchor_logdet = T::zero();
    state.logdet = T::zero();
    state.sigma_cache = vec![T::one(); n];

    for t in 1..=state.l_h {
        let j = argmax_first(state.sigma_cache.iter().copied())
            .ok_or(Error::Empty("active set"))?;
        let var = seq.variance(j);
        state.selection_sd.push(var.sqrt());
        state.logdet = state.logdet + (T::one() + var / lambda).ln();
        seq.observe(j, T::zero());
        picked.push(&pts[j], T::zero());
        state.selection_seq.push(state.active[j]);
        let switched = switch_condition(state.logdet, state.anchor_logdet, eta);
        on_round(&SelectionRound {
            t,
            action: state.active[j],
            switched,
            sigma_cache: &state.sigma_cache,
            active: &state.active,
            selection: &state.selection_seq,
        });
        if switched {
            state.anchor_t = t;
            state.anchor_logdet = state.logdet;
            seq.resync(&picked, &pts)?;
            state.sigma_cache = (0..n).map(|i| seq.std_dev(i)).collect();
            state.switches.push(t);
        }
    }
    Ok(())
}

/// Play counts `u_h(x) = ⌈l_h·max{ξ_h(x), ψ}⌉ = max{count(x), ⌈l_h ψ⌉}` for
/// every picked action, ascending by index.
pub fn allocate_plays<T: Scalar>(state: &EpochState<T>, psi: T) -> Vec<(usize, u64)> {
    let floor = (T::from_u64(state.l_h).unwrap() * psi.max(T::zero()))
        .ceil()
        .to_u64()
        .unwrap_or(u64::MAX);
    state
        .selection_counts()
        .into_iter()
        .map(|(x, c)| (x, c.max(floor)))
        .collect()
}

/// Confidence width used for elimination in epoch `h` with `u_h` plays.
pub fn elimination_width<T: Scalar>(
    conf: &ConfidenceConfig<T>,
    h: usize,
    u_h: u64,
    l_h: u64,
    psi: T,
    lambda: T,
) -> T {
    let beta = conf.beta.at(h as u64 + 1, lambda);
    let u = T::from_u64(u_h.max(1)).unwrap();
    let c = conf.c_known;
    match conf.width {
        WidthMode::Theoretical => beta + c * u.sqrt() / (T::from_u64(l_h).unwrap() * psi * lambda),
        WidthMode::Practical { b } => beta + b * c / u.sqrt(),
    }
}

/// Keeps the actions whose upper bound reaches the largest lower bound.
/// `mean` and `sd` are parallel to `active`.
pub fn eliminate<T: Scalar>(active: &[usize], mean: &[T], sd: &[T], width: T) -> Vec<usize> {
    assert_eq!(active.len(), mean.len(), "mean length");
    assert_eq!(active.len(), sd.len(), "sd length");
    if !width.is_finite() {
        return active.to_vec();
    }
    let best_lcb = mean
        .iter()
        .zip(sd)
        .map(|(&m, &s)| m - width * s)
        .fold(T::neg_infinity(), T::max);
    active
        .iter()
        .zip(mean.iter().zip(sd))
        .filter(|(_, (&m, &s))| m + width * s >= best_lcb)
        .map(|(&x, _)| x)
        .collect()
}

/// End-of-epoch information passed to [`RgpPeHooks::on_epoch_end`].
#[derive(Debug, Clone, Copy)]
pub struct EpochReport<'a, T> {
    pub state: &'a EpochState<T>,
    pub plays: &'a [(usize, u64)],
    /// Allocated epoch length `u_h`.
    pub epoch_len: u64,
    /// Plays actually made (smaller than `epoch_len` only when truncated).
    pub played: u64,
    pub truncated: bool,
    /// Elimination width, posterior means and standard deviations over
    /// `state.active`; absent for a truncated epoch.
    pub width: Option<T>,
    pub mean: &'a [T],
    pub sd: &'a [T],
    pub next_active: &'a [usize],
}

/// Observation and override points of [`run_rgp_pe_with`].
pub trait RgpPeHooks<T: Scalar> {
    fn on_selection_round(&mut self, _round: &SelectionRound<'_, T>) {}

    fn allocate(&mut self, state: &EpochState<T>, psi: T) -> Vec<(usize, u64)> {
        allocate_plays(state, psi)
    }

    fn on_epoch_end(&mut self, _report: &EpochReport<'_, T>) {}
}

/// Hooks that change nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoHooks;

impl<T: Scalar> RgpPeHooks<T> for NoHooks {}

pub fn run_rgp_pe<T: Scalar>(
    cfg: &RgpPeConfig<T>,
    kernel: &KernelSpec<T>,
    domain: &Domain<T>,
    env: &mut Environment<T>,
    ledger: &mut AttackLedger<T>,
) -> Result<RegretTrace<T>> {
    run_rgp_pe_with(cfg, kernel, domain, env, ledger, &mut NoHooks)
}

pub fn run_rgp_pe_with<T: Scalar>(
    cfg: &RgpPeConfig<T>,
    kernel: &KernelSpec<T>,
    domain: &Domain<T>,
    env: &mut Environment<T>,
    ledger: &mut AttackLedger<T>,
    hooks: &mut dyn RgpPeHooks<T>,
) -> Result<RegretTrace<T>> {
    cfg.validate()?;
    domain.validate_for(kernel)?;
    if env.truth().len() != domain.len() {
        return Err(Error::DimensionMismatch {
            left: domain.len(),
            right: env.truth().len(),
        });
    }
    let horizon = cfg.horizon;
    let mut trace = RegretTrace::with_capacity(horizon.min(1 << 24) as usize);
    let mut active: Vec<usize> = (0..domain.len()).collect();
    let mut l_h: u64 = 2;
    let mut h = 0usize;
    let mut t: u64 = 0;

    while t < horizon {
        let mut state = EpochState::new(h, l_h, active.clone());
        select_batch(kernel, domain, cfg.lambda, cfg.eta, &mut state, |r| {
            hooks.on_selection_round(r)
        })?;
        let plays = hooks.allocate(&state, cfg.psi);
        let epoch_len: u64 = plays.iter().map(|&(_, u)| u).sum();
        trace.mark_epoch(EpochMark {
            h,
            t_start: t + 1,
            active_size: active.len(),
            support_size: plays.len(),
            epoch_len,
        });

        let mut data = AggregatedDataset::new(*kernel, cfg.lambda)?;
        let mut played = 0u64;
        let mut truncated = false;
        'play: for &(x, u) in &plays {
            for _ in 0..u {
                if t == horizon {
                    truncated = true;
                    break 'play;
                }
                t += 1;
                let view = AlgorithmView::with_remaining(LearnerKind::RgpPe, &active);
                let obs = env.observe(t, x, ledger, &view);
                trace.record(x, &obs, env.truth());
                data.push(domain.point(x), obs.observed);
                played += 1;
            }
        }

        if truncated {
            hooks.on_epoch_end(&EpochReport {
                state: &state,
                plays: &plays,
                epoch_len,
                played,
                truncated,
                width: None,
                mean: &[],
                sd: &[],
                next_active: &active,
            });
            break;
        }

        let fitted = data.fit()?;
        let (mean, sd): (Vec<T>, Vec<T>) = active
            .iter()
            .map(|&i| {
                let q = fitted.query_unchecked(domain.point(i));
                (q.mean, q.std_dev())
            })
            .unzip();
        let width = elimination_width(&cfg.confidence, h, epoch_len, l_h, cfg.psi, cfg.lambda);
        let next = eliminate(&active, &mean, &sd, width);
        hooks.on_epoch_end(&EpochReport {
            state: &state,
            plays: &plays,
            epoch_len,
            played,
            truncated,
            width: Some(width),
            mean: &mean,
            sd: &sd,
            next_active: &next,
        });
        ledger.later_trigger_check(
            LearnerKind::RgpPe,
            TriggerEvent::Eliminated {
                before: active.len(),
                after: next.len(),
            },
        );
        active = next;
        l_h = l_h.saturating_mul(2);
        h += 1;
    }
    trace.set_final_active(active);
    Ok(trace)
}
