use crate::error::{Error, Result};
use crate::kernel::{Domain, KernelSpec};
use crate::linalg::{dot, Matrix};
use crate::scalar::{argmax_first, Scalar};

/// One greedy step of the basis construction: the center chosen at step
/// `iter` (1-based) and the largest power function after adding it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonStep<T = f64> {
    pub iter: usize,
    pub center_index: usize,
    pub p2max: T,
}

/// Newton basis of the span of `k(·, s_1), …, k(·, s_D)`, the Gram–Schmidt
/// orthonormalization of the kernel sections at greedily chosen centers.
///
/// Stored as the lower-triangular coefficient matrix `L` with
/// `N_i = Σ_{j≤i} L[i][j]·k(·, s_j)`, together with the basis values at every
/// domain point.
#[derive(Debug, Clone)]
pub struct NewtonBasis<T = f64> {
    kernel: KernelSpec<T>,
    centers: Vec<usize>,
    center_points: Vec<Vec<T>>,
    coeffs: Vec<Vec<T>>,
    values: Vec<Vec<T>>,
    power: Vec<T>,
    error: T,
    log: Vec<NewtonStep<T>>,
}

impl<T: Scalar> NewtonBasis<T> {
    pub fn kernel(&self) -> &KernelSpec<T> {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.centers.len()
    }

    /// Domain indices of `s_1, …, s_D`.
    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    pub fn center_points(&self) -> &[Vec<T>] {
        &self.center_points
    }

    /// Row `i` holds the coefficients of `N_{i+1}` over the kernel sections
    /// at the centers; zero above the diagonal.
    pub fn coeff_matrix(&self) -> Matrix<T> {
        let d = self.dim();
        Matrix::from_fn(d, d, |i, j| if j <= i { self.coeffs[i][j] } else { T::zero() })
    }

    pub fn admissible_error(&self) -> T {
        self.error
    }

    /// Power function `P²_D` at every domain point.
    pub fn power(&self) -> &[T] {
        &self.power
    }

    pub fn max_power(&self) -> T {
        self.power.iter().copied().fold(T::zero(), T::max)
    }

    pub fn log(&self) -> &[NewtonStep<T>] {
        &self.log
    }

    /// Embedding `(N_1(x_i), …, N_D(x_i))` of domain point `i`.
    pub fn embedded(&self, i: usize) -> &[T] {
        &self.values[i]
    }

    /// Embeddings of every domain point.
    pub fn embedded_domain(&self) -> &[Vec<T>] {
        &self.values
    }

    /// Embedding of an arbitrary point through the coefficient matrix.
    pub fn embed(&self, x: &[T]) -> Result<Vec<T>> {
        let kx: Vec<T> = self
            .center_points
            .iter()
            .map(|s| self.kernel.eval(x, s))
            .collect::<Result<_>>()?;
        Ok(self
            .coeffs
            .iter()
            .map(|row| dot(row, &kx[..row.len()]))
            .collect())
    }

    /// Basis coordinates `θ_i = ⟨f, N_i⟩` of `f = Σ_j a_j k(·, z_j)`, by the
    /// reproducing property `θ_i = Σ_j a_j N_i(z_j)`.
    pub fn rkhs_coordinates(&self, points: &[Vec<T>], weights: &[T]) -> Result<Vec<T>> {
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                left: points.len(),
                right: weights.len(),
            });
        }
        let mut theta = vec![T::zero(); self.dim()];
        for (z, &a) in points.iter().zip(weights) {
            for (t, n) in theta.iter_mut().zip(self.embed(z)?) {
                *t = *t + a * n;
            }
        }
        Ok(theta)
    }
}

/// Greedy Newton basis construction with admissible error `e`: the first
/// center maximizes `k(x,x)`, each later one maximizes the current power
/// function, and the loop stops once `max P²_D < e²` (or every domain point
/// is a center, or the power function vanishes). Ties go to the lowest index.
pub fn newton_basis<T: Scalar>(kernel: &KernelSpec<T>, domain: &Domain<T>, e: T) -> Result<NewtonBasis<T>> {
    if !(e > T::zero()) || !e.is_finite() {
        return Err(Error::invalid("newton.e", format!("must be positive, got {e}")));
    }
    domain.validate_for(kernel)?;
    let n = domain.len();
    let e2 = e * e;
    let mut power: Vec<T> = domain.points().iter().map(|x| kernel.diag(x)).collect();
    let mut values: Vec<Vec<T>> = vec![Vec::new(); n];
    let mut centers = Vec::new();
    let mut center_points: Vec<Vec<T>> = Vec::new();
    let mut coeffs: Vec<Vec<T>> = Vec::new();
    let mut log = Vec::new();

    loop {
        let s = argmax_first(power.iter().copied()).ok_or(Error::Empty("domain"))?;
        let p2 = power[s];
        if !(p2 > T::zero()) {
            break;
        }
        let root = p2.sqrt();
        let sp = domain.point(s).to_vec();
        let ns: Vec<T> = values[s].clone();
        let d = centers.len();

        // N_{d+1} = (k(·, s) − Σ_i N_i(s) N_i) / √P²_d(s)
        let mut row = vec![T::zero(); d + 1];
        for (i, c) in coeffs.iter().enumerate() {
            for (j, &cij) in c.iter().enumerate() {
                row[j] = row[j] - ns[i] * cij;
            }
        }
        row[d] = T::one();
        row.iter_mut().for_each(|v| *v = *v / root);

        for (x, vals) in values.iter_mut().enumerate() {
            let u = kernel.eval_unchecked(domain.point(x), &sp) - dot(&ns, vals);
            let nx = if x == s { root } else { u / root };
            vals.push(nx);
            power[x] = (power[x] - nx * nx).max(T::zero());
        }
        power[s] = T::zero();

        centers.push(s);
        center_points.push(sp);
        coeffs.push(row);
        let p2max = power.iter().copied().fold(T::zero(), T::max);
        log.push(NewtonStep {
            iter: centers.len(),
            center_index: s,
            p2max,
        });
        if p2max < e2 || centers.len() == n {
            break;
        }
    }
    Ok(NewtonBasis {
        kernel: *kernel,
        centers,
        center_points,
        coeffs,
        values,
        power,
        error: e,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_hand_values() {
        let k = KernelSpec::squared_exponential(1.0).unwrap();
        let d = Domain::new(vec![vec![0.0], vec![1.0]]).unwrap();
        let b = newton_basis(&k, &d, 0.5).unwrap();
        assert_eq!(b.dim(), 2);
        assert_eq!(b.centers(), &[0, 1]);
        assert_eq!(b.embedded(0)[0], 1.0);
        let k12 = (-0.5f64).exp();
        let p2 = 1.0 - k12 * k12;
        assert!((b.embedded(1)[1] - p2.sqrt()).abs() < 1e-14);
        assert_eq!(b.max_power(), 0.0);
        assert_eq!(b.log().len(), 2);
        assert!((b.log()[0].p2max - p2).abs() < 1e-14);
    }

    #[test]
    fn large_error_keeps_single_center() {
        let k = KernelSpec::squared_exponential(1.0).unwrap();
        let d = Domain::grid(0.0, 1.0, 5, 1).unwrap();
        let b = newton_basis(&k, &d, 2.0).unwrap();
        assert_eq!(b.dim(), 1);
        assert_eq!(b.centers(), &[0]);
    }

    #[test]
    fn embed_matches_table() {
        let k = KernelSpec::squared_exponential(0.4).unwrap();
        let d = Domain::grid(0.0, 1.0, 9, 1).unwrap();
        let b = newton_basis::<f64>(&k, &d, 0.05).unwrap();
        for i in 0..d.len() {
            let v = b.embed(d.point(i)).unwrap();
            for (a, c) in v.iter().zip(b.embedded(i)) {
                assert!(f64::abs(a - c) < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_nonpositive_error() {
        let k = KernelSpec::squared_exponential(0.4).unwrap();
        let d = Domain::grid(0.0, 1.0, 3, 1).unwrap();
        assert!(newton_basis(&k, &d, 0.0).is_err());
    }
}
