use crate::error::{Error, Result};
use crate::kernel::{Domain, KernelSpec};
use crate::posterior::SequentialPosterior;
use crate::scalar::{argmax_first, Scalar};

use super::config::validate_lambda;

/// Stand-in for the maximum information gain `γ_T`: the realized
/// information gain of the greedy maximum-variance sequence (repeats
/// allowed) of length `min(T, 5·|domain|)`. By submodularity of the
/// log-determinant this is within a factor `1 − 1/e` of the best sequence of
/// that length.
pub fn gamma_surrogate<T: Scalar>(
    kernel: &KernelSpec<T>,
    domain: &Domain<T>,
    lambda: T,
    horizon: u64,
) -> Result<T> {
    validate_lambda(lambda)?;
    if domain.is_empty() {
        return Err(Error::Empty("domain"));
    }
    let len = horizon.min(5 * domain.len() as u64);
    let mut post = SequentialPosterior::new(kernel, domain.points(), lambda)?;
    let mut logdet = T::zero();
    for _ in 0..len {
        let j = argmax_first((0..post.len()).map(|i| post.variance(i))).unwrap();
        logdet = logdet + (T::one() + post.variance(j) / lambda).ln();
        post.observe(j, T::zero());
    }
    Ok(logdet / T::lit(2.0))
}

/// `ψ = ln η / (2γ)` with the surrogate `γ`.
pub fn theoretical_psi<T: Scalar>(
    kernel: &KernelSpec<T>,
    domain: &Domain<T>,
    lambda: T,
    eta: T,
    horizon: u64,
) -> Result<T> {
    let gamma = gamma_surrogate(kernel, domain, lambda, horizon)?;
    if !(gamma > T::zero()) {
        return Err(Error::invalid("psi", "information-gain surrogate is zero"));
    }
    Ok(eta.ln() / (T::lit(2.0) * gamma))
}
