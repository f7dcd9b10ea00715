//! Robust phased elimination on the Newton-basis embedding of a finite
//! domain.

use crate::adversary::{AlgorithmView, AttackLedger, LearnerKind, TriggerEvent};
use crate::environment::{EpochMark, Environment, RegretTrace};
use crate::error::{Error, Result};
use crate::kernel::{Domain, KernelSpec};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::scalar::Scalar;

use super::design::{approx_design, span_basis, Design};
use super::newton::{newton_basis, NewtonBasis};

/// Initial epoch length `⌈4D(max{ln ln D, 0} + 18)⌉`.
pub fn initial_epoch_len(d: usize) -> u64 {
    let d = d.max(1) as f64;
    let lnln = if d > 1.0 { d.ln().ln().max(0.0) } else { 0.0 };
    (4.0 * d * (lnln + 18.0)).ceil() as u64
}

/// How the approximation level `Δ` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaMode<T = f64> {
    /// `Δ = 1/√T`.
    InvSqrtHorizon,
    /// `Δ = T^{−ν/(d+ν)}` for a Matérn-`ν` kernel on a `d`-dimensional domain.
    MaternRate { nu: T },
    Fixed(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpeLinearConfig<T = f64> {
    pub horizon: u64,
    /// Truncation parameter `α ∈ (0, 1)`.
    pub alpha: T,
    /// Confidence `δ ∈ (0, 1)`.
    pub delta: T,
    /// RKHS norm bound `B`.
    pub b_norm: T,
    pub delta_mode: DeltaMode<T>,
    /// Corruption budget as known to the learner.
    pub c_known: T,
}

impl<T: Scalar> RpeLinearConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: T| v > T::zero() && v < T::one();
        if !unit(self.alpha) {
            return Err(Error::invalid("linear.alpha", "must lie in (0, 1)"));
        }
        if !unit(self.delta) {
            return Err(Error::invalid("linear.delta", "must lie in (0, 1)"));
        }
        if !(self.b_norm > T::zero()) || !self.b_norm.is_finite() {
            return Err(Error::invalid("linear.B", "must be positive"));
        }
        if !(self.c_known >= T::zero()) || !self.c_known.is_finite() {
            return Err(Error::invalid("C_known", "must be finite and nonnegative"));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("T", "must be positive"));
        }
        match self.delta_mode {
            DeltaMode::MaternRate { nu } if !(nu > T::zero()) => {
                Err(Error::invalid("kernel.nu", "must be positive"))
            }
            DeltaMode::Fixed(v) if !(v > T::zero()) || !v.is_finite() => {
                Err(Error::invalid("linear.Delta", "must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// Approximation level `Δ` for a domain of dimension `d`.
    pub fn approximation_level(&self, d: usize) -> T {
        let t = T::from_u64(self.horizon).unwrap();
        match self.delta_mode {
            DeltaMode::InvSqrtHorizon => T::one() / t.sqrt(),
            DeltaMode::MaternRate { nu } => {
                let d = T::from_usize(d).unwrap();
                t.powf(-nu / (d + nu))
            }
            DeltaMode::Fixed(v) => v,
        }
    }

    /// Admissible error `e = Δ/B` for the basis construction.
    pub fn admissible_error(&self, d: usize) -> T {
        self.approximation_level(d) / self.b_norm
    }
}

/// Elimination threshold
/// `4Δ√(D(1+αm₀)) + 4√((D/m_h) ln(1/δ)) + 4C/(αm_h)·√(D(1+αm₀))`.
pub fn elimination_threshold<T: Scalar>(
    cfg: &RpeLinearConfig<T>,
    approx: T,
    dim: usize,
    m0: u64,
    m_h: u64,
) -> T {
    let four = T::lit(4.0);
    let d = T::from_usize(dim).unwrap();
    let m0 = T::from_u64(m0).unwrap();
    let mh = T::from_u64(m_h).unwrap();
    let spread = (d * (T::one() + cfg.alpha * m0)).sqrt();
    four * approx * spread
        + four * (d / mh * (T::one() / cfg.delta).ln()).sqrt()
        + four * cfg.c_known / (cfg.alpha * mh) * spread
}

/// Play counts `⌈m_h·max{ζ(x), α}⌉` on the design support (positions into
/// the design's action list), ascending by position.
pub fn design_plays<T: Scalar>(design: &Design<T>, m_h: u64, alpha: T) -> Vec<(usize, u64)> {
    let m = T::from_u64(m_h).unwrap();
    design
        .support()
        .into_iter()
        .map(|i| {
            let u = (m * design.weights[i].max(alpha)).ceil().to_u64().unwrap_or(u64::MAX);
            (i, u.max(1))
        })
        .collect()
}

/// Averaged least-squares estimate `Γ⁻¹ Σ_x x·S(x)` with `Γ = Σ_x u(x) x xᵀ`,
/// where `S(x)` is the reward sum over the `u(x)` plays of `x`. Solved on the
/// span of the played vectors; errors when `Γ` is singular there.
pub fn rpe_estimate<T: Scalar>(vectors: &[Vec<T>], counts: &[u64], sums: &[T]) -> Result<Vec<T>> {
    if vectors.len() != counts.len() || vectors.len() != sums.len() {
        return Err(Error::DimensionMismatch {
            left: vectors.len(),
            right: counts.len().min(sums.len()),
        });
    }
    let dim = vectors.first().map_or(0, Vec::len);
    let basis = span_basis(vectors);
    let r = basis.len();
    if r == 0 {
        return Err(Error::SingularDesign("estimate"));
    }
    let z: Vec<Vec<T>> = vectors
        .iter()
        .map(|v| basis.iter().map(|q| dot(q, v)).collect())
        .collect();
    let mut gamma = Matrix::zeros(r, r);
    let mut rhs = vec![T::zero(); r];
    for ((zi, &u), &s) in z.iter().zip(counts).zip(sums) {
        let u = T::from_u64(u).unwrap();
        for a in 0..r {
            rhs[a] = rhs[a] + zi[a] * s;
            for b in 0..r {
                gamma[(a, b)] = gamma[(a, b)] + u * zi[a] * zi[b];
            }
        }
    }
    let chol = Cholesky::strict(&gamma).ok_or(Error::SingularDesign("estimate"))?;
    let coords = chol.solve(&rhs);
    let mut theta = vec![T::zero(); dim];
    for (q, &c) in basis.iter().zip(&coords) {
        theta.iter_mut().zip(q).for_each(|(t, &qi)| *t = *t + c * qi);
    }
    Ok(theta)
}

/// Keeps positions `i` with `max_j ⟨θ, x_j⟩ − ⟨θ, x_i⟩ ≤ threshold`.
pub fn rpe_eliminate<T: Scalar>(vectors: &[Vec<T>], theta: &[T], threshold: T) -> Vec<usize> {
    let scores: Vec<T> = vectors.iter().map(|v| dot(theta, v)).collect();
    let best = scores.iter().copied().fold(T::neg_infinity(), T::max);
    (0..vectors.len())
        .filter(|&i| best - scores[i] <= threshold)
        .collect()
}

/// End-of-epoch information for [`RpeHooks`].
#[derive(Debug, Clone, Copy)]
pub struct RpeEpochReport<'a, T> {
    pub h: usize,
    /// Embedding dimension `D`.
    pub dim: usize,
    pub m0: u64,
    pub m_h: u64,
    /// Active domain indices at the start of the epoch.
    pub active: &'a [usize],
    pub design: &'a Design<T>,
    /// `(domain index, plays)` on the design support.
    pub plays: &'a [(usize, u64)],
    pub truncated: bool,
    pub theta: Option<&'a [T]>,
    pub threshold: Option<T>,
    pub next_active: &'a [usize],
}

pub trait RpeHooks<T: Scalar> {
    fn on_epoch_end(&mut self, _report: &RpeEpochReport<'_, T>) {}
}

impl<T: Scalar> RpeHooks<T> for crate::algorithms::NoHooks {}

/// Result of a linear-reduction run: the trace and the basis it used.
#[derive(Debug, Clone)]
pub struct RpeRun<T = f64> {
    pub trace: RegretTrace<T>,
    pub basis: NewtonBasis<T>,
}

pub fn run_rpe_linear<T: Scalar>(
    cfg: &RpeLinearConfig<T>,
    kernel: &KernelSpec<T>,
    domain: &Domain<T>,
    env: &mut Environment<T>,
    ledger: &mut AttackLedger<T>,
) -> Result<RpeRun<T>> {
    run_rpe_linear_with(cfg, kernel, domain, env, ledger, &mut crate::algorithms::NoHooks)
}

pub fn run_rpe_linear_with<T: Scalar>(
    cfg: &RpeLinearConfig<T>,
    kernel: &KernelSpec<T>,
    domain: &Domain<T>,
    env: &mut Environment<T>,
    ledger: &mut AttackLedger<T>,
    hooks: &mut dyn RpeHooks<T>,
) -> Result<RpeRun<T>> {
    cfg.validate()?;
    if env.truth().len() != domain.len() {
        return Err(Error::DimensionMismatch {
            left: domain.len(),
            right: env.truth().len(),
        });
    }
    let approx = cfg.approximation_level(domain.dim());
    let basis = newton_basis(kernel, domain, approx / cfg.b_norm)?;
    let dim = basis.dim();
    let m0 = initial_epoch_len(dim);
    let mut trace = RegretTrace::with_capacity(cfg.horizon.min(1 << 24) as usize);
    let mut active: Vec<usize> = (0..domain.len()).collect();
    let mut m_h = m0;
    let mut h = 0usize;
    let mut t = 0u64;

    while t < cfg.horizon {
        let vectors: Vec<Vec<T>> = active.iter().map(|&i| basis.embedded(i).to_vec()).collect();
        let design = approx_design(&vectors, dim, m0 as usize)?;
        let plays: Vec<(usize, u64)> = design_plays(&design, m_h, cfg.alpha)
            .into_iter()
            .map(|(p, u)| (active[p], u))
            .collect();
        let epoch_len: u64 = plays.iter().map(|p| p.1).sum();
        trace.mark_epoch(EpochMark {
            h,
            t_start: t + 1,
            active_size: active.len(),
            support_size: plays.len(),
            epoch_len,
        });
        let mut sums = vec![T::zero(); plays.len()];
        let mut truncated = false;
        'play: for (k, &(x, u)) in plays.iter().enumerate() {
            for _ in 0..u {
                if t == cfg.horizon {
                    truncated = true;
                    break 'play;
                }
                t += 1;
                let view = AlgorithmView::with_remaining(LearnerKind::RpeLinear, &active);
                let obs = env.observe(t, x, ledger, &view);
                trace.record(x, &obs, env.truth());
                sums[k] = sums[k] + obs.observed;
            }
        }
        if truncated {
            hooks.on_epoch_end(&RpeEpochReport {
                h,
                dim,
                m0,
                m_h,
                active: &active,
                design: &design,
                plays: &plays,
                truncated,
                theta: None,
                threshold: None,
                next_active: &active,
            });
            break;
        }
        let support_vecs: Vec<Vec<T>> = plays.iter().map(|&(x, _)| basis.embedded(x).to_vec()).collect();
        let counts: Vec<u64> = plays.iter().map(|p| p.1).collect();
        let theta = rpe_estimate(&support_vecs, &counts, &sums)?;
        let threshold = elimination_threshold(cfg, approx, dim, m0, m_h);
        let next: Vec<usize> = rpe_eliminate(&vectors, &theta, threshold)
            .into_iter()
            .map(|p| active[p])
            .collect();
        hooks.on_epoch_end(&RpeEpochReport {
            h,
            dim,
            m0,
            m_h,
            active: &active,
            design: &design,
            plays: &plays,
            truncated,
            theta: Some(&theta),
            threshold: Some(threshold),
            next_active: &next,
        });
        ledger.later_trigger_check(
            LearnerKind::RpeLinear,
            TriggerEvent::Eliminated {
                before: active.len(),
                after: next.len(),
            },
        );
        active = next;
        m_h = m_h.saturating_mul(2);
        h += 1;
    }
    trace.set_final_active(active);
    Ok(RpeRun { trace, basis })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_epoch_len_values() {
        assert_eq!(initial_epoch_len(4), 294);
        assert_eq!(initial_epoch_len(3), 218);
        assert_eq!(initial_epoch_len(1), 72);
        assert_eq!(initial_epoch_len(2), 144);
    }

    fn cfg() -> RpeLinearConfig<f64> {
        RpeLinearConfig {
            horizon: 100,
            alpha: 0.1,
            delta: 0.1,
            b_norm: 1.0,
            delta_mode: DeltaMode::Fixed(0.0),
            c_known: 0.0,
        }
    }

    #[test]
    fn threshold_without_approximation_or_corruption() {
        let m0 = initial_epoch_len(1);
        let th = elimination_threshold(&cfg(), 0.0, 1, m0, m0);
        let want = 4.0 * ((1.0 / m0 as f64) * 10f64.ln()).sqrt();
        assert!((th - want).abs() < 1e-14);
        let mut c = cfg();
        c.c_known = 1.0;
        c.alpha = 1e-300;
        assert!(elimination_threshold(&c, 0.0, 1, m0, m0) > 1e200);
    }

    #[test]
    fn estimate_single_direction() {
        let theta = rpe_estimate(&[vec![1.0f64, 0.0, 0.0]], &[4], &[6.0]).unwrap();
        assert_eq!(theta.len(), 3);
        assert!((theta[0] - 1.5).abs() < 1e-15);
        assert_eq!(&theta[1..], &[0.0, 0.0]);
    }

    #[test]
    fn eliminate_keeps_empirical_best() {
        let v = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]];
        assert_eq!(rpe_eliminate(&v, &[1.0, 0.0], 0.4), vec![0]);
        assert_eq!(rpe_eliminate(&v, &[1.0, 0.0], 0.5), vec![0, 2]);
        assert_eq!(rpe_eliminate(&v, &[0.0, 0.0], 0.0), vec![0, 1, 2]);
    }

    #[test]
    fn plays_follow_truncated_weights() {
        let d = Design {
            weights: vec![0.5, 0.0, 0.02, 0.48],
            max_norm: 1.0,
            rank: 2,
            iterations: 0,
        };
        assert_eq!(design_plays(&d, 100, 0.1), vec![(0, 50), (2, 10), (3, 48)]);
    }
}
