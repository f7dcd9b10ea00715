use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Confidence multiplier schedule. Epoch-based learners evaluate it at
/// `h + 1` for epoch `h`; sequential learners at round `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSchedule<T = f64> {
    Constant(T),
    /// `B + (σ/√λ)·√(2 ln(|X|/δ_i))` with `δ_i = 6δ/(i²π²)`.
    FiniteDomain {
        b_norm: T,
        noise_sd: T,
        delta: T,
        n_actions: usize,
    },
    /// `B + σ·√(2(γ + 1 + ln(1/δ_i)))` with `δ_i = 6δ/(i²π²)` and `γ` an
    /// information-gain upper bound. Conservative.
    Adaptive {
        b_norm: T,
        noise_sd: T,
        delta: T,
        gamma: T,
    },
    /// `scale·√(ln i)`, with `i` floored at 2 so the first round is not zero.
    SqrtLog { scale: T },
}

impl<T: Scalar> BetaSchedule<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| Err(Error::invalid(name, reason));
        match *self {
            BetaSchedule::Constant(v) => {
                if !(v >= T::zero()) || !v.is_finite() {
                    return bad("beta.value", "must be finite and nonnegative");
                }
            }
            BetaSchedule::FiniteDomain {
                b_norm,
                noise_sd,
                delta,
                n_actions,
            } => {
                check_common(b_norm, noise_sd, delta)?;
                if n_actions == 0 {
                    return bad("domain", "must be nonempty");
                }
            }
            BetaSchedule::Adaptive {
                b_norm,
                noise_sd,
                delta,
                gamma,
            } => {
                check_common(b_norm, noise_sd, delta)?;
                if !(gamma >= T::zero()) || !gamma.is_finite() {
                    return bad("beta.gamma", "must be finite and nonnegative");
                }
            }
            BetaSchedule::SqrtLog { scale } => {
                if !(scale >= T::zero()) || !scale.is_finite() {
                    return bad("beta.value", "must be finite and nonnegative");
                }
            }
        }
        Ok(())
    }

    /// Multiplier at index `i ≥ 1`.
    pub fn at(&self, i: u64, lambda: T) -> T {
        let i = i.max(1);
        let delta_i = |delta: T| {
            let i = T::from_u64(i).unwrap();
            T::lit(6.0) * delta / (i * i * T::lit(std::f64::consts::PI.powi(2)))
        };
        match *self {
            BetaSchedule::Constant(v) => v,
            BetaSchedule::FiniteDomain {
                b_norm,
                noise_sd,
                delta,
                n_actions,
            } => {
                let n = T::from_usize(n_actions).unwrap();
                b_norm + noise_sd / lambda.sqrt() * (T::lit(2.0) * (n / delta_i(delta)).ln()).sqrt()
            }
            BetaSchedule::Adaptive {
                b_norm,
                noise_sd,
                delta,
                gamma,
            } => {
                let inner = gamma + T::one() + (T::one() / delta_i(delta)).ln();
                b_norm + noise_sd * (T::lit(2.0) * inner).sqrt()
            }
            BetaSchedule::SqrtLog { scale } => {
                scale * T::from_u64(i.max(2)).unwrap().ln().sqrt()
            }
        }
    }
}

fn check_common<T: Scalar>(b_norm: T, noise_sd: T, delta: T) -> Result<()> {
    if !(b_norm >= T::zero()) || !b_norm.is_finite() {
        return Err(Error::invalid("beta.B", "must be finite and nonnegative"));
    }
    if !(noise_sd >= T::zero()) || !noise_sd.is_finite() {
        return Err(Error::invalid("noise.sigma", "must be finite and nonnegative"));
    }
    if !(delta > T::zero() && delta < T::one()) {
        return Err(Error::invalid("beta.delta", "must lie in (0, 1)"));
    }
    Ok(())
}

/// How the known corruption budget enlarges the confidence width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WidthMode<T = f64> {
    /// Width enlargement as required by the regret analysis.
    Theoretical,
    /// Scaled-down enlargement `b·C/√u` (or `b·C/√λ` for RGP-UCB).
    Practical { b: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceConfig<T = f64> {
    pub beta: BetaSchedule<T>,
    pub width: WidthMode<T>,
    /// Corruption budget as known to the learner.
    pub c_known: T,
}

impl<T: Scalar> ConfidenceConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.beta.validate()?;
        if let WidthMode::Practical { b } = self.width {
            if !(b > T::zero() && b <= T::one()) {
                return Err(Error::invalid("b", format!("must lie in (0, 1], got {b}")));
            }
        }
        if !(self.c_known >= T::zero()) || !self.c_known.is_finite() {
            return Err(Error::invalid("C_known", "must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Truncation parameter: either given, or `ln η / (2γ)` with `γ` from
/// [`gamma_surrogate`](super::gamma_surrogate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsiChoice<T = f64> {
    Auto,
    Fixed(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RgpPeConfig<T = f64> {
    pub horizon: u64,
    pub lambda: T,
    pub eta: T,
    pub psi: T,
    pub confidence: ConfidenceConfig<T>,
}

impl<T: Scalar> RgpPeConfig<T> {
    pub fn validate(&self) -> Result<()> {
        validate_lambda(self.lambda)?;
        if !(self.eta > T::one()) || !self.eta.is_finite() {
            return Err(Error::invalid("eta", format!("eta must exceed 1, got {}", self.eta)));
        }
        if !(self.psi > T::zero()) || !self.psi.is_finite() {
            return Err(Error::invalid("psi", format!("must be positive, got {}", self.psi)));
        }
        self.confidence.validate()
    }
}

/// Configuration shared by GP-UCB and RGP-UCB. `confidence.width` and
/// `confidence.c_known` are ignored by plain GP-UCB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcbConfig<T = f64> {
    pub horizon: u64,
    pub lambda: T,
    pub confidence: ConfidenceConfig<T>,
}

impl<T: Scalar> UcbConfig<T> {
    pub fn validate(&self) -> Result<()> {
        validate_lambda(self.lambda)?;
        self.confidence.validate()
    }
}

pub(crate) fn validate_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::invalid("lambda", format!("must be positive, got {lambda}")));
    }
    Ok(())
}
