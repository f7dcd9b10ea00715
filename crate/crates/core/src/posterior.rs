//! GP posterior computations on count-aggregated data.
//!
//! A dataset with `u(x)` repeated plays of `x` and reward sum `S(x)` is
//! equivalent to one observation of the average `S(x)/u(x)` with noise
//! `λ/u(x)`. With the distinct-point Gram matrix `K_d` and `U = diag(u)`:
//!
//! ```text
//! μ(q)  = k_d(q)ᵀ (K_d + λU⁻¹)⁻¹ ȳ
//! σ²(q) = k(q,q) − k_d(q)ᵀ (K_d + λU⁻¹)⁻¹ k_d(q)
//! ½ ln det(I + λ⁻¹K) = ½ ln det(I + λ⁻¹ U^{1/2} K_d U^{1/2})
//! ```
//!
//! so matrix sizes are bounded by the number of distinct actions rather than
//! the number of plays.

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::linalg::{dot, Cholesky, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedEntry<T> {
    pub point: Vec<T>,
    pub count: u64,
    pub reward_sum: T,
}

impl<T: Scalar> AggregatedEntry<T> {
    pub fn mean_reward(&self) -> T {
        self.reward_sum / T::from_u64(self.count).unwrap()
    }
}

/// Distinct actions with play counts and per-action reward sums.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedDataset<T = f64> {
    kernel: KernelSpec<T>,
    lambda: T,
    entries: Vec<AggregatedEntry<T>>,
}

impl<T: Scalar> AggregatedDataset<T> {
    pub fn new(kernel: KernelSpec<T>, lambda: T) -> Result<Self> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::invalid("lambda", format!("must be positive, got {lambda}")));
        }
        Ok(Self {
            kernel,
            lambda,
            entries: Vec::new(),
        })
    }

    /// Builds the aggregate of a raw `(point, reward)` sequence.
    pub fn from_observations<'a>(
        kernel: KernelSpec<T>,
        lambda: T,
        obs: impl IntoIterator<Item = (&'a [T], T)>,
    ) -> Result<Self> {
        let mut d = Self::new(kernel, lambda)?;
        for (x, y) in obs {
            d.push(x, y);
        }
        Ok(d)
    }

    pub fn kernel(&self) -> &KernelSpec<T> {
        &self.kernel
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn entries(&self) -> &[AggregatedEntry<T>] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    /// Total number of raw observations summarized.
    pub fn total_count(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }

    /// Records one observation.
    pub fn push(&mut self, x: &[T], y: T) {
        self.push_many(x, 1, y);
    }

    /// Records `count` observations at `x` whose rewards sum to `reward_sum`.
    pub fn push_many(&mut self, x: &[T], count: u64, reward_sum: T) {
        if count == 0 {
            return;
        }
        match self.entries.iter_mut().find(|e| e.point.as_slice() == x) {
            Some(e) => {
                e.count += count;
                e.reward_sum = e.reward_sum + reward_sum;
            }
            None => self.entries.push(AggregatedEntry {
                point: x.to_vec(),
                count,
                reward_sum,
            }),
        }
    }

    /// Factors the aggregated system once so that many queries are cheap.
    pub fn fit(&self) -> Result<FittedPosterior<T>> {
        FittedPosterior::new(self)
    }

    fn check_query(&self, q: &[T]) -> Result<()> {
        if let Some(e) = self.entries.first() {
            if e.point.len() != q.len() {
                return Err(Error::DimensionMismatch {
                    left: e.point.len(),
                    right: q.len(),
                });
            }
        }
        Ok(())
    }
}

/// Posterior mean and variance at one query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorQueryResult<T = f64> {
    pub mean: T,
    pub variance: T,
}

impl<T: Scalar> PosteriorQueryResult<T> {
    pub fn std_dev(&self) -> T {
        self.variance.sqrt()
    }
}

/// Factored posterior for one dataset.
#[derive(Debug, Clone)]
pub struct FittedPosterior<T = f64> {
    kernel: KernelSpec<T>,
    points: Vec<Vec<T>>,
    chol: Option<Cholesky<T>>,
    weights: Vec<T>,
}

impl<T: Scalar> FittedPosterior<T> {
    fn new(data: &AggregatedDataset<T>) -> Result<Self> {
        let points: Vec<Vec<T>> = data.entries.iter().map(|e| e.point.clone()).collect();
        if points.is_empty() {
            return Ok(Self {
                kernel: data.kernel,
                points,
                chol: None,
                weights: Vec::new(),
            });
        }
        let mut a = crate::kernel::gram_matrix(&data.kernel, &points)?;
        for (i, e) in data.entries.iter().enumerate() {
            a[(i, i)] = a[(i, i)] + data.lambda / T::from_u64(e.count).unwrap();
        }
        let chol = Cholesky::factor(&a, "posterior system")?;
        let ybar: Vec<T> = data.entries.iter().map(AggregatedEntry::mean_reward).collect();
        let weights = chol.solve(&ybar);
        Ok(Self {
            kernel: data.kernel,
            points,
            chol: Some(chol),
            weights,
        })
    }

    pub fn query(&self, q: &[T]) -> Result<PosteriorQueryResult<T>> {
        if let Some(p) = self.points.first() {
            if p.len() != q.len() {
                return Err(Error::DimensionMismatch {
                    left: p.len(),
                    right: q.len(),
                });
            }
        }
        Ok(self.query_unchecked(q))
    }

    pub fn query_unchecked(&self, q: &[T]) -> PosteriorQueryResult<T> {
        let prior = self.kernel.diag(q);
        let Some(chol) = &self.chol else {
            return PosteriorQueryResult {
                mean: T::zero(),
                variance: prior,
            };
        };
        let kq: Vec<T> = self
            .points
            .iter()
            .map(|p| self.kernel.eval_unchecked(p, q))
            .collect();
        let mean = dot(&kq, &self.weights);
        let v = chol.forward(&kq);
        let variance = (prior - dot(&v, &v)).max(T::zero()).min(prior);
        PosteriorQueryResult { mean, variance }
    }
}

/// Posterior mean and variance at `query`.
pub fn posterior_mean_var<T: Scalar>(
    data: &AggregatedDataset<T>,
    query: &[T],
) -> Result<PosteriorQueryResult<T>> {
    data.check_query(query)?;
    data.fit()?.query(query)
}

/// Mean estimate that averages the rewards of identical actions before
/// regressing. On aggregated data the averaging is already done, so this
/// coincides with the posterior mean on averaged rewards.
pub fn robust_mean<T: Scalar>(data: &AggregatedDataset<T>, query: &[T]) -> Result<T> {
    posterior_mean_var(data, query).map(|r| r.mean)
}

/// `ln det(I_d + λ⁻¹ U^{1/2} K_d U^{1/2})`, which equals `ln det(I_t + λ⁻¹K_t)`
/// of the expanded multiset.
pub fn log_det_information<T: Scalar>(data: &AggregatedDataset<T>) -> Result<T> {
    let n = data.entries.len();
    if n == 0 {
        return Ok(T::zero());
    }
    let sqrt_u: Vec<T> = data
        .entries
        .iter()
        .map(|e| T::from_u64(e.count).unwrap().sqrt())
        .collect();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let k = data
                .kernel
                .eval_unchecked(&data.entries[i].point, &data.entries[j].point);
            let v = sqrt_u[i] * k * sqrt_u[j] / data.lambda;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m[(i, i)] = m[(i, i)] + T::one();
    }
    let chol = Cholesky::factor(&m, "information gain")?;
    Ok(chol.log_det().max(T::zero()))
}

/// Realized information gain `½ ln det(I_t + λ⁻¹K_t)` of the raw multiset.
pub fn info_gain<T: Scalar>(data: &AggregatedDataset<T>) -> Result<T> {
    Ok(log_det_information(data)? / T::lit(2.0))
}

/// Rare-switching condition: `ln det(current) > ln η + anchor_logdet`
/// (strict), evaluated in log space.
pub fn switch_test<T: Scalar>(current: &AggregatedDataset<T>, anchor_logdet: T, eta: T) -> Result<bool> {
    Ok(switch_condition(log_det_information(current)?, anchor_logdet, eta))
}

#[inline]
pub fn switch_condition<T: Scalar>(logdet: T, anchor_logdet: T, eta: T) -> bool {
    logdet > eta.ln() + anchor_logdet
}

/// Exact GP posterior over a fixed finite set of points, updated one
/// observation at a time with rank-one covariance updates (`O(n²)` per
/// observation). Used by the fully sequential loops, where the batch form
/// would refactor every round.
#[derive(Debug, Clone)]
pub struct SequentialPosterior<T = f64> {
    lambda: T,
    mean: Vec<T>,
    cov: Matrix<T>,
    log_det: T,
    observations: u64,
}

impl<T: Scalar> SequentialPosterior<T> {
    /// Prior `N(0, K)` over `points`.
    pub fn new(kernel: &KernelSpec<T>, points: &[Vec<T>], lambda: T) -> Result<Self> {
        if !(lambda > T::zero()) {
            return Err(Error::invalid("lambda", format!("must be positive, got {lambda}")));
        }
        let cov = if points.is_empty() {
            Matrix::zeros(0, 0)
        } else {
            crate::kernel::gram_matrix(kernel, points)?
        };
        Ok(Self {
            lambda,
            mean: vec![T::zero(); points.len()],
            cov,
            log_det: T::zero(),
            observations: 0,
        })
    }

    /// Posterior over `points` conditioned on `data` (batch form).
    pub fn from_dataset(data: &AggregatedDataset<T>, points: &[Vec<T>]) -> Result<Self> {
        let mut s = Self::new(&data.kernel, points, data.lambda)?;
        s.resync(data, points)?;
        Ok(s)
    }

    /// Replaces the running state with the batch posterior for `data`.
    pub fn resync(&mut self, data: &AggregatedDataset<T>, points: &[Vec<T>]) -> Result<()> {
        let kernel = data.kernel;
        let n = points.len();
        let mut cov = crate::kernel::gram_matrix(&kernel, points)?;
        let fitted = data.fit()?;
        let mut mean = vec![T::zero(); n];
        if let Some(chol) = &fitted.chol {
            let cross: Vec<Vec<T>> = points
                .iter()
                .map(|q| {
                    fitted
                        .points
                        .iter()
                        .map(|p| kernel.eval_unchecked(p, q))
                        .collect()
                })
                .collect();
            let whitened: Vec<Vec<T>> = cross.iter().map(|k| chol.forward(k)).collect();
            for i in 0..n {
                mean[i] = dot(&cross[i], &fitted.weights);
                for j in 0..=i {
                    let v = cov[(i, j)] - dot(&whitened[i], &whitened[j]);
                    cov[(i, j)] = v;
                    cov[(j, i)] = v;
                }
            }
        }
        self.mean = mean;
        self.cov = cov;
        self.log_det = log_det_information(data)?;
        self.observations = data.total_count();
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn mean(&self, i: usize) -> T {
        self.mean[i]
    }

    pub fn variance(&self, i: usize) -> T {
        self.cov[(i, i)].max(T::zero())
    }

    pub fn std_dev(&self, i: usize) -> T {
        self.variance(i).sqrt()
    }

    /// Running `ln det(I + λ⁻¹K)` of everything observed so far.
    pub fn log_det(&self) -> T {
        self.log_det
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }

    /// Conditions on one observation `y` at point `i`.
    pub fn observe(&mut self, i: usize, y: T) {
        let n = self.len();
        let s: Vec<T> = self.cov.row(i).to_vec();
        let prior_var = s[i].max(T::zero());
        let denom = prior_var + self.lambda;
        let gain = (y - self.mean[i]) / denom;
        for j in 0..n {
            self.mean[j] = self.mean[j] + s[j] * gain;
        }
        for r in 0..n {
            let f = s[r] / denom;
            if f == T::zero() {
                continue;
            }
            let row = self.cov.row_mut(r);
            for (c, v) in row.iter_mut().enumerate() {
                *v = *v - f * s[c];
            }
        }
        self.log_det = self.log_det + (T::one() + prior_var / self.lambda).ln();
        self.observations += 1;
    }
}
