use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::scalar::{argmax_first, Scalar};

/// Frank–Wolfe iteration cap.
pub const DESIGN_MAX_ITERS: usize = 10_000;

/// Weights below this are dropped from the design support.
pub const DESIGN_PRUNE_WEIGHT: f64 = 1e-6;

/// Relative tolerance for a direction to count towards the span.
const SPAN_TOL: f64 = 1e-8;

/// Orthonormal basis (as rows) of the span of `vectors`, by twice-repeated
/// modified Gram–Schmidt. Directions whose residual norm falls below
/// `1e-8 × (largest norm)` are treated as dependent.
pub fn span_basis<T: Scalar>(vectors: &[Vec<T>]) -> Vec<Vec<T>> {
    let scale = vectors
        .iter()
        .map(|v| dot(v, v).sqrt())
        .fold(T::zero(), T::max);
    let tol = T::lit(SPAN_TOL) * scale;
    let mut basis: Vec<Vec<T>> = Vec::new();
    for v in vectors {
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &r);
                r.iter_mut().zip(q).for_each(|(ri, &qi)| *ri = *ri - c * qi);
            }
        }
        let norm = dot(&r, &r).sqrt();
        if norm > tol && norm > T::zero() {
            r.iter_mut().for_each(|ri| *ri = *ri / norm);
            basis.push(r);
        }
    }
    basis
}

fn coordinates<T: Scalar>(basis: &[Vec<T>], v: &[T]) -> Vec<T> {
    basis.iter().map(|q| dot(q, v)).collect()
}

/// Approximate optimal design over a finite action set.
#[derive(Debug, Clone, PartialEq)]
pub struct Design<T = f64> {
    /// Weight per action (parallel to the input); zero off the support.
    pub weights: Vec<T>,
    /// `max_x ‖x‖²_{Γ(ζ)⁻¹}`, with the inverse taken on the span of the
    /// actions.
    pub max_norm: T,
    /// Dimension of the span of the actions.
    pub rank: usize,
    pub iterations: usize,
}

impl<T: Scalar> Design<T> {
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&i| self.weights[i] > T::zero()).collect()
    }
}

/// `Γ(ζ) = Σ ζ_i z_i z_iᵀ` and the squared norms `‖z_i‖²_{Γ⁻¹}`; `None` if
/// `Γ` is singular.
fn design_norms<T: Scalar>(z: &[Vec<T>], w: &[T], r: usize) -> Option<Vec<T>> {
    let mut gamma = Matrix::zeros(r, r);
    for (zi, &wi) in z.iter().zip(w) {
        if wi == T::zero() {
            continue;
        }
        for a in 0..r {
            for b in 0..=a {
                gamma[(a, b)] = gamma[(a, b)] + wi * zi[a] * zi[b];
            }
        }
    }
    for a in 0..r {
        for b in 0..a {
            gamma[(b, a)] = gamma[(a, b)];
        }
    }
    let chol = Cholesky::strict(&gamma)?;
    Some(
        z.iter()
            .map(|zi| {
                let v = chol.forward(zi);
                dot(&v, &v)
            })
            .collect(),
    )
}

/// Frank–Wolfe on the log-determinant objective, from the uniform design,
/// with exact line search; stops once `max ‖x‖²_{Γ⁻¹} ≤ 2·dim`. The support
/// is then pruned (weights below [`DESIGN_PRUNE_WEIGHT`], then smallest-first
/// down to `max_support`), renormalized and re-verified.
///
/// Works in coordinates of the span of the actions, so an action set that
/// does not span `R^dim` gets the design of its own span.
pub fn approx_design<T: Scalar>(actions: &[Vec<T>], dim: usize, max_support: usize) -> Result<Design<T>> {
    if actions.is_empty() {
        return Err(Error::Empty("design actions"));
    }
    if let Some(bad) = actions.iter().find(|a| a.len() != dim) {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: bad.len(),
        });
    }
    if max_support == 0 {
        return Err(Error::invalid("design support", "must allow at least one action"));
    }
    let basis = span_basis(actions);
    let r = basis.len();
    if r == 0 {
        return Err(Error::SingularDesign("actions are all zero"));
    }
    let z: Vec<Vec<T>> = actions.iter().map(|a| coordinates(&basis, a)).collect();
    let n = z.len();
    let bound = T::from_usize(2 * dim).unwrap();
    let rr = T::from_usize(r).unwrap();
    let mut w = vec![T::one() / T::from_usize(n).unwrap(); n];
    let mut iterations = 0;
    loop {
        let g = design_norms(&z, &w, r).ok_or(Error::SingularDesign("design matrix"))?;
        let j = argmax_first(g.iter().copied()).unwrap();
        let gmax = g[j];
        if gmax <= bound {
            break;
        }
        if iterations == DESIGN_MAX_ITERS {
            return Err(Error::DesignFailed {
                achieved: gmax.to_f64_lossy(),
                bound: bound.to_f64_lossy(),
                iterations,
            });
        }
        let step = (gmax / rr - T::one()) / (gmax - T::one());
        w.iter_mut().for_each(|wi| *wi = *wi * (T::one() - step));
        w[j] = w[j] + step;
        iterations += 1;
    }

    let cut = T::lit(DESIGN_PRUNE_WEIGHT);
    w.iter_mut().filter(|wi| **wi < cut).for_each(|wi| *wi = T::zero());
    let mut support: Vec<usize> = (0..n).filter(|&i| w[i] > T::zero()).collect();
    if support.len() > max_support {
        support.sort_by(|&a, &b| w[a].partial_cmp(&w[b]).unwrap().then(b.cmp(&a)));
        for &i in &support[..support.len() - max_support] {
            w[i] = T::zero();
        }
    }
    let total: T = w.iter().copied().sum();
    w.iter_mut().for_each(|wi| *wi = *wi / total);
    let g = design_norms(&z, &w, r).ok_or(Error::SingularDesign("pruned design matrix"))?;
    let max_norm = g.iter().copied().fold(T::zero(), T::max);
    if !(max_norm <= bound) {
        return Err(Error::DesignFailed {
            achieved: max_norm.to_f64_lossy(),
            bound: bound.to_f64_lossy(),
            iterations,
        });
    }
    Ok(Design {
        weights: w,
        max_norm,
        rank: r,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_action() {
        let d = approx_design(&[vec![0.3f64, 0.4]], 2, 10).unwrap();
        assert_eq!(d.weights, vec![1.0]);
        assert!((d.max_norm - 1.0).abs() < 1e-12);
        assert_eq!(d.rank, 1);
    }

    #[test]
    fn standard_basis_is_uniform() {
        let e: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let d = approx_design(&e, 4, 100).unwrap();
        for w in &d.weights {
            assert!((w - 0.25).abs() < 1e-15);
        }
        assert!((d.max_norm - 4.0).abs() < 1e-12);
    }

    #[test]
    fn skewed_set_needs_iterations() {
        // many near-duplicates of one direction plus one orthogonal action
        let mut a: Vec<Vec<f64>> = (0..50).map(|i| vec![1.0, 1e-3 * i as f64]).collect();
        a.push(vec![0.0, 1.0]);
        let d = approx_design(&a, 2, 100).unwrap();
        assert!(d.iterations > 0);
        assert!(d.max_norm <= 4.0);
    }

    #[test]
    fn span_basis_drops_dependent_vectors() {
        let b = span_basis(&[vec![1.0f64, 1.0, 0.0], vec![2.0, 2.0, 0.0], vec![0.0, 0.0, 3.0]]);
        assert_eq!(b.len(), 2);
        assert!((dot(&b[0], &b[1])).abs() < 1e-15);
    }
}
