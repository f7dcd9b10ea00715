//! Kernel functions and finite action domains.
//!
//! Every kernel here is normalized so that `|k(x, x')| <= 1`: the stationary
//! families satisfy `k(x, x) = 1`, and the linear kernel requires inputs in
//! the closed unit ball (checked, never rescaled).

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Half-integer Matérn smoothness values with closed-form kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaternSmoothness {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl MaternSmoothness {
    pub fn from_nu(nu: f64) -> Result<Self> {
        match nu {
            v if v == 0.5 => Ok(Self::Half),
            v if v == 1.5 => Ok(Self::ThreeHalves),
            v if v == 2.5 => Ok(Self::FiveHalves),
            v => Err(Error::UnsupportedSmoothness(v)),
        }
    }

    pub fn nu(self) -> f64 {
        match self {
            Self::Half => 0.5,
            Self::ThreeHalves => 1.5,
            Self::FiveHalves => 2.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Linear,
    SquaredExponential,
    Matern(MaternSmoothness),
}

/// Kernel family plus hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec<T = f64> {
    family: KernelFamily,
    lengthscale: T,
}

impl<T: Scalar> KernelSpec<T> {
    pub fn linear() -> Self {
        Self {
            family: KernelFamily::Linear,
            lengthscale: T::one(),
        }
    }

    pub fn squared_exponential(lengthscale: T) -> Result<Self> {
        Self::check_lengthscale(lengthscale)?;
        Ok(Self {
            family: KernelFamily::SquaredExponential,
            lengthscale,
        })
    }

    pub fn matern(nu: f64, lengthscale: T) -> Result<Self> {
        let smoothness = MaternSmoothness::from_nu(nu)?;
        Self::check_lengthscale(lengthscale)?;
        Ok(Self {
            family: KernelFamily::Matern(smoothness),
            lengthscale,
        })
    }

    fn check_lengthscale(l: T) -> Result<()> {
        if l > T::zero() && l.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("lengthscale", format!("must be positive, got {l}")))
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    /// Lengthscale; meaningless (1) for the linear kernel.
    pub fn lengthscale(&self) -> T {
        self.lengthscale
    }

    /// Matérn smoothness ν, if any.
    pub fn nu(&self) -> Option<f64> {
        match self.family {
            KernelFamily::Matern(s) => Some(s.nu()),
            _ => None,
        }
    }

    /// `k(x, y)`.
    pub fn eval(&self, x: &[T], y: &[T]) -> Result<T> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        if self.family == KernelFamily::Linear {
            for p in [x, y] {
                let n = norm_sq(p);
                if n > T::one() + T::lit(1e-12) {
                    return Err(Error::OutsideUnitBall(n.sqrt().to_f64_lossy()));
                }
            }
        }
        Ok(self.eval_unchecked(x, y))
    }

    /// `k(x, y)` without dimension or unit-ball checks.
    #[inline]
    pub fn eval_unchecked(&self, x: &[T], y: &[T]) -> T {
        match self.family {
            KernelFamily::Linear => crate::linalg::dot(x, y),
            KernelFamily::SquaredExponential => {
                let d2 = dist_sq(x, y);
                let l = self.lengthscale;
                (-d2 / (T::lit(2.0) * l * l)).exp()
            }
            KernelFamily::Matern(s) => {
                let r = dist_sq(x, y).sqrt() / self.lengthscale;
                matern_closed_form(s, r)
            }
        }
    }

    /// `k(x, x)`.
    #[inline]
    pub fn diag(&self, x: &[T]) -> T {
        match self.family {
            KernelFamily::Linear => norm_sq(x),
            _ => T::one(),
        }
    }
}

/// Matérn kernel at scaled distance `r = ‖x − y‖ / ℓ`.
pub fn matern_closed_form<T: Scalar>(s: MaternSmoothness, r: T) -> T {
    match s {
        MaternSmoothness::Half => (-r).exp(),
        MaternSmoothness::ThreeHalves => {
            let a = T::lit(3.0).sqrt() * r;
            (T::one() + a) * (-a).exp()
        }
        MaternSmoothness::FiveHalves => {
            let a = T::lit(5.0).sqrt() * r;
            (T::one() + a + a * a / T::lit(3.0)) * (-a).exp()
        }
    }
}

#[inline]
fn dist_sq<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| {
        let d = a - b;
        acc + d * d
    })
}

#[inline]
fn norm_sq<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |acc, &a| acc + a * a)
}

/// Convenience wrapper for [`KernelSpec::eval`].
pub fn kernel_eval<T: Scalar>(spec: &KernelSpec<T>, x: &[T], y: &[T]) -> Result<T> {
    spec.eval(x, y)
}

/// Gram matrix `[k(p_i, p_j)]`, symmetric by construction.
pub fn gram_matrix<T: Scalar>(spec: &KernelSpec<T>, pts: &[Vec<T>]) -> Result<Matrix<T>> {
    let first = pts.first().ok_or(Error::Empty("gram_matrix points"))?;
    let n = pts.len();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        if pts[i].len() != first.len() {
            return Err(Error::DimensionMismatch {
                left: first.len(),
                right: pts[i].len(),
            });
        }
        for j in 0..=i {
            let v = spec.eval(&pts[i], &pts[j])?;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Finite, ordered set of distinct points. Position in the list is the
/// point's stable index, and all tie-breaking goes by that index.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain<T = f64> {
    points: Vec<Vec<T>>,
    dim: usize,
}

impl<T: Scalar> Domain<T> {
    pub fn new(points: Vec<Vec<T>>) -> Result<Self> {
        let dim = points.first().ok_or(Error::Empty("domain"))?.len();
        if dim == 0 {
            return Err(Error::Empty("domain point coordinates"));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: p.len(),
                });
            }
        }
        for i in 0..points.len() {
            for j in 0..i {
                if points[i] == points[j] {
                    return Err(Error::DuplicatePoint(j, i));
                }
            }
        }
        Ok(Self { points, dim })
    }

    /// Regular grid with `per_dim` evenly spaced points per axis over
    /// `[lo, hi]^dim`. The first coordinate varies slowest.
    pub fn grid(lo: T, hi: T, per_dim: usize, dim: usize) -> Result<Self> {
        if per_dim == 0 || dim == 0 {
            return Err(Error::Empty("grid"));
        }
        if !(hi > lo) && per_dim > 1 {
            return Err(Error::invalid("grid bounds", "hi must exceed lo"));
        }
        let axis: Vec<T> = if per_dim == 1 {
            vec![lo]
        } else {
            let step = (hi - lo) / T::from_usize(per_dim - 1).unwrap();
            (0..per_dim)
                .map(|i| lo + step * T::from_usize(i).unwrap())
                .collect()
        };
        let total = per_dim.pow(dim as u32);
        let mut points = Vec::with_capacity(total);
        for mut code in 0..total {
            let mut p = vec![T::zero(); dim];
            for c in (0..dim).rev() {
                p[c] = axis[code % per_dim];
                code /= per_dim;
            }
            points.push(p);
        }
        Self::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    /// Index of an exactly matching point.
    pub fn index_of(&self, x: &[T]) -> Option<usize> {
        self.points.iter().position(|p| p.as_slice() == x)
    }

    /// Checks that the kernel can be evaluated on every point (dimension
    /// and, for the linear kernel, the unit-ball requirement).
    pub fn validate_for(&self, kernel: &KernelSpec<T>) -> Result<()> {
        for p in &self.points {
            kernel.eval(p, p)?;
        }
        Ok(())
    }

    pub fn gram(&self, kernel: &KernelSpec<T>) -> Result<Matrix<T>> {
        gram_matrix(kernel, &self.points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Cholesky;
    use proptest::prelude::*;

    fn se(l: f64) -> KernelSpec<f64> {
        KernelSpec::squared_exponential(l).unwrap()
    }

    #[test]
    fn se_identity_and_reference_value() {
        let k = se(2.0);
        assert_eq!(k.eval(&[0.3, -1.0], &[0.3, -1.0]).unwrap(), 1.0);
        let v = k.eval(&[0.0, 0.0], &[2.0, 0.0]).unwrap();
        assert!((v - 0.606_530_659_712_633_4).abs() < 1e-12);
    }

    #[test]
    fn matern_half_reference_value() {
        let k = KernelSpec::matern(0.5, 1.0).unwrap();
        let v = k.eval(&[1.0], &[0.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn unsupported_nu_and_bad_lengthscale_are_errors() {
        assert_eq!(
            KernelSpec::<f64>::matern(1.0, 1.0).unwrap_err(),
            Error::UnsupportedSmoothness(1.0)
        );
        assert!(KernelSpec::<f64>::squared_exponential(0.0).is_err());
        assert!(KernelSpec::<f64>::matern(2.5, -1.0).is_err());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let err = se(1.0).eval(&[0.0], &[0.0, 1.0]).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { left: 1, right: 2 });
        assert!(gram_matrix(&se(1.0), &[vec![0.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn linear_kernel_rejects_points_outside_unit_ball() {
        let k = KernelSpec::<f64>::linear();
        assert!((k.eval(&[0.6, 0.8], &[0.6, 0.8]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            k.eval(&[1.0, 1.0], &[0.0, 0.0]),
            Err(Error::OutsideUnitBall(_))
        ));
    }

    #[test]
    fn gram_examples() {
        assert_eq!(gram_matrix(&se(1.0), &[vec![0.4]]).unwrap()[(0, 0)], 1.0);
        let g = gram_matrix(&se(1.0), &[vec![0.4], vec![0.4]]).unwrap();
        assert!((0..2).all(|i| (0..2).all(|j| g[(i, j)] == 1.0)));
        let g = gram_matrix(&se(2.0), &[vec![0.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert!((g[(0, 1)] - 0.606_531).abs() < 1e-6);
        assert_eq!(g[(0, 1)], g[(1, 0)]);
        assert!(gram_matrix::<f64>(&se(1.0), &[]).is_err());
    }

    #[test]
    fn grid_layout_and_duplicates() {
        let d = Domain::grid(-5.0, 5.0, 10, 2).unwrap();
        assert_eq!(d.len(), 100);
        assert_eq!(d.point(0), &[-5.0, -5.0]);
        assert_eq!(d.point(1), &[-5.0, -5.0 + 10.0 / 9.0]);
        assert_eq!(d.point(99), &[5.0, 5.0]);
        assert_eq!(
            Domain::new(vec![vec![1.0], vec![2.0], vec![1.0]]).unwrap_err(),
            Error::DuplicatePoint(0, 2)
        );
    }

    // K_ν(z) = ∫_0^∞ exp(−z cosh t) cosh(νt) dt, trapezoid rule; the integrand
    // is analytic and decays doubly exponentially so the rule converges fast.
    fn bessel_k_quadrature(nu: f64, z: f64) -> f64 {
        let h = 1e-3;
        let mut s = 0.5 * (-z).exp();
        let mut t: f64 = h;
        loop {
            let v = (-z * t.cosh()).exp() * (nu * t).cosh();
            s += v;
            if v < 1e-300 || t > 50.0 {
                break;
            }
            t += h;
        }
        s * h
    }

    fn gamma_half_integer(nu: f64) -> f64 {
        let sqrt_pi = std::f64::consts::PI.sqrt();
        match nu {
            v if v == 0.5 => sqrt_pi,
            v if v == 1.5 => sqrt_pi / 2.0,
            v if v == 2.5 => 3.0 * sqrt_pi / 4.0,
            _ => unreachable!(),
        }
    }

    fn matern_bessel_form(nu: f64, r: f64) -> f64 {
        let z = (2.0 * nu).sqrt() * r;
        2f64.powf(1.0 - nu) / gamma_half_integer(nu) * z.powf(nu) * bessel_k_quadrature(nu, z)
    }

    #[test]
    fn matern_closed_forms_match_bessel_quadrature() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for s in [
            MaternSmoothness::Half,
            MaternSmoothness::ThreeHalves,
            MaternSmoothness::FiveHalves,
        ] {
            for _ in 0..20 {
                let r: f64 = rng.random_range(0.02..4.0);
                let closed = matern_closed_form(s, r);
                let oracle = matern_bessel_form(s.nu(), r);
                assert!(
                    (closed - oracle).abs() < 1e-8,
                    "nu={} r={r}: {closed} vs {oracle}",
                    s.nu()
                );
            }
        }
    }

    fn kernels() -> impl Strategy<Value = KernelSpec<f64>> {
        prop_oneof![
            (0.1f64..3.0).prop_map(|l| KernelSpec::squared_exponential(l).unwrap()),
            (0.1f64..3.0, 0usize..3)
                .prop_map(|(l, i)| KernelSpec::matern([0.5, 1.5, 2.5][i], l).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(k in kernels(), x in prop::collection::vec(-3.0f64..3.0, 2),
                                 y in prop::collection::vec(-3.0f64..3.0, 2)) {
            let a = k.eval(&x, &y).unwrap();
            let b = k.eval(&y, &x).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a.abs() <= 1.0);
            prop_assert_eq!(k.eval(&x, &x).unwrap(), 1.0);
        }

        #[test]
        fn linear_kernel_normalized_on_unit_ball(v in prop::collection::vec(-1.0f64..1.0, 3)) {
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1.0);
            let x: Vec<f64> = v.iter().map(|a| a / n).collect();
            let k = KernelSpec::<f64>::linear();
            prop_assert!(k.eval(&x, &x).unwrap() <= 1.0 + 1e-12);
        }

        #[test]
        fn gram_is_psd(k in kernels(),
                       pts in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 2), 1..50)) {
            let mut g = gram_matrix(&k, &pts).unwrap();
            prop_assert!(g.is_symmetric());
            g.add_diagonal(1e-10);
            // duplicates make the Gram matrix singular; the 1e-10 shift keeps it definite
            prop_assert!(Cholesky::strict(&g).is_some());
        }
    }
}
