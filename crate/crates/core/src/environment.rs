//! Ground-truth reward functions, noisy/corrupted observations, regret
//! accounting and seeded random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::adversary::{AlgorithmView, AttackLedger};
use crate::error::{Error, Result};
use crate::kernel::{Domain, KernelSpec};
use crate::linalg::Cholesky;
use crate::scalar::{argmax_first, Scalar};

/// Random-stream generator used throughout: ChaCha with 8 rounds, a
/// counter-based generator with 64-bit seeding. Trial `i` of a run with base
/// seed `s` uses trial seed `s + i`; each of its streams is seeded from
/// `(trial_seed, role)` by [`stream_seed`].
pub type StreamRng = ChaCha8Rng;

/// Purpose of a random stream; each gets an independent seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    Noise,
    GpSample,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            StreamRole::Noise => 0x6e6f_6973_65,
            StreamRole::GpSample => 0x6770_7361_6d70,
        }
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `role` stream for a trial seed.
pub fn stream_seed(trial_seed: u64, role: StreamRole) -> u64 {
    mix64(mix64(trial_seed) ^ role.tag())
}

pub fn stream_rng(trial_seed: u64, role: StreamRole) -> StreamRng {
    StreamRng::seed_from_u64(stream_seed(trial_seed, role))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroundTruthKind {
    GpSample,
    Analytic,
}

/// Reward function tabulated over a finite domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth<T = f64> {
    kind: GroundTruthKind,
    values: Vec<T>,
    argmax: usize,
    f_max: T,
}

impl<T: Scalar> GroundTruth<T> {
    pub fn from_values(kind: GroundTruthKind, values: Vec<T>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("ground truth", "values must be finite"));
        }
        let argmax = argmax_first(values.iter().copied()).ok_or(Error::Empty("ground truth"))?;
        let f_max = values[argmax];
        Ok(Self {
            kind,
            values,
            argmax,
            f_max,
        })
    }

    /// Tabulates an analytic function over the domain.
    pub fn analytic(domain: &Domain<T>, f: impl Fn(&[T]) -> T) -> Result<Self> {
        let values = domain.points().iter().map(|p| f(p)).collect();
        Self::from_values(GroundTruthKind::Analytic, values)
    }

    pub fn kind(&self) -> GroundTruthKind {
        self.kind
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn value(&self, i: usize) -> T {
        self.values[i]
    }

    pub fn argmax(&self) -> usize {
        self.argmax
    }

    pub fn f_max(&self) -> T {
        self.f_max
    }

    /// `f_max − f(x_i)`.
    pub fn gap(&self, i: usize) -> T {
        self.f_max - self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One draw from the zero-mean GP prior with covariance
/// `gram(domain) + 1e-10·I`, deterministic per seed.
pub fn sample_gp_function<T: Scalar>(
    kernel: &KernelSpec<T>,
    domain: &Domain<T>,
    seed: u64,
) -> Result<GroundTruth<T>> {
    if domain.len() > 10_000 {
        return Err(Error::invalid("domain", "GP sampling supports at most 10^4 points"));
    }
    let mut cov = domain.gram(kernel)?;
    cov.add_diagonal(T::lit(1e-10));
    let chol = Cholesky::factor(&cov, "GP sample covariance")?;
    let mut rng = stream_rng(seed, StreamRole::GpSample);
    let z: Vec<T> = (0..domain.len())
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            T::lit(v)
        })
        .collect();
    let l = chol.factor_matrix();
    let values = (0..domain.len())
        .map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum())
        .collect();
    GroundTruth::from_values(GroundTruthKind::GpSample, values)
}

/// Sum of squared-exponential bumps with explicit centres, heights and
/// widths; a smooth analytic test function with a known shape.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpFunction<T = f64> {
    pub centres: Vec<Vec<T>>,
    pub heights: Vec<T>,
    pub widths: Vec<T>,
}

impl<T: Scalar> BumpFunction<T> {
    pub fn eval(&self, x: &[T]) -> T {
        self.centres
            .iter()
            .zip(&self.heights)
            .zip(&self.widths)
            .map(|((c, &h), &w)| {
                let d2 = c
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |a, (&ci, &xi)| a + (ci - xi) * (ci - xi));
                h * (-d2 / (T::lit(2.0) * w * w)).exp()
            })
            .sum()
    }

    pub fn tabulate(&self, domain: &Domain<T>) -> Result<GroundTruth<T>> {
        GroundTruth::analytic(domain, |x| self.eval(x))
    }
}

/// One round's reward: noiseless value, noisy reward, corruption and the
/// corrupted value the learner sees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<T = f64> {
    pub f: T,
    pub y: T,
    pub c: T,
    pub observed: T,
}

/// Reward oracle: ground truth plus Gaussian noise of standard deviation
/// `noise_sd`.
#[derive(Debug, Clone)]
pub struct Environment<T = f64> {
    truth: GroundTruth<T>,
    noise_sd: T,
    rng: StreamRng,
}

impl<T: Scalar> Environment<T> {
    pub fn new(truth: GroundTruth<T>, noise_sd: T, rng: StreamRng) -> Result<Self> {
        if noise_sd < T::zero() || !noise_sd.is_finite() {
            return Err(Error::invalid("noise.sigma", "must be finite and nonnegative"));
        }
        Ok(Self { truth, noise_sd, rng })
    }

    pub fn truth(&self) -> &GroundTruth<T> {
        &self.truth
    }

    pub fn noise_sd(&self) -> T {
        self.noise_sd
    }

    /// Plays action `i` at round `t`: `ỹ = f(x) + ε + c`.
    pub fn observe(
        &mut self,
        t: u64,
        i: usize,
        ledger: &mut AttackLedger<T>,
        view: &AlgorithmView<'_>,
    ) -> Observation<T> {
        let f = self.truth.value(i);
        let eps: f64 = StandardNormal.sample(&mut self.rng);
        let y = f + self.noise_sd * T::lit(eps);
        let c = ledger.corrupt(t, i, &self.truth, y, view);
        Observation {
            f,
            y,
            c,
            observed: y + c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow<T = f64> {
    pub t: u64,
    pub action: usize,
    pub y: T,
    pub c: T,
    pub instant_regret: T,
    pub cum_regret: T,
}

/// Per-epoch summary for the epoch-structured algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochMark {
    pub h: usize,
    /// First round (1-based) played in this epoch.
    pub t_start: u64,
    pub active_size: usize,
    pub support_size: usize,
    /// Number of plays allocated to the epoch (before any horizon truncation).
    pub epoch_len: u64,
}

/// Round-by-round record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace<T = f64> {
    rows: Vec<TraceRow<T>>,
    epochs: Vec<EpochMark>,
    final_active: Option<Vec<usize>>,
}

impl<T: Scalar> Default for RegretTrace<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> RegretTrace<T> {
    pub fn new() -> Self {
        Self {
            rows: Vec::new(),
            epochs: Vec::new(),
            final_active: None,
        }
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            rows: Vec::with_capacity(n),
            ..Self::new()
        }
    }

    /// Appends a round; `t` is assigned as `len + 1`.
    pub fn record(&mut self, action: usize, obs: &Observation<T>, truth: &GroundTruth<T>) -> u64 {
        let t = self.rows.len() as u64 + 1;
        let instant = truth.gap(action);
        let cum = self.cum_regret() + instant;
        self.rows.push(TraceRow {
            t,
            action,
            y: obs.observed,
            c: obs.c,
            instant_regret: instant,
            cum_regret: cum,
        });
        t
    }

    pub fn mark_epoch(&mut self, mark: EpochMark) {
        self.epochs.push(mark);
    }

    pub fn set_final_active(&mut self, active: Vec<usize>) {
        self.final_active = Some(active);
    }

    pub fn rows(&self) -> &[TraceRow<T>] {
        &self.rows
    }

    pub fn epochs(&self) -> &[EpochMark] {
        &self.epochs
    }

    /// Active set after the last completed elimination, for the
    /// epoch-structured algorithms.
    pub fn final_active(&self) -> Option<&[usize]> {
        self.final_active.as_deref()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn cum_regret(&self) -> T {
        self.rows.last().map_or(T::zero(), |r| r.cum_regret)
    }

    pub fn cum_regret_series(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.cum_regret).collect()
    }

    /// Sum of `|c_t|` in round order.
    pub fn total_corruption(&self) -> T {
        self.rows.iter().fold(T::zero(), |a, r| a + r.c.abs())
    }
}

/// Mean and standard deviation of cumulative regret across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretAggregate<T = f64> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Scalar> RegretAggregate<T> {
    /// Pointwise mean and sample standard deviation (zero for one trial).
    /// Traces shorter than the longest are ignored past their end.
    pub fn from_traces<'a>(traces: impl IntoIterator<Item = &'a RegretTrace<T>>) -> Self {
        let traces: Vec<&RegretTrace<T>> = traces.into_iter().collect();
        let horizon = traces.iter().map(|tr| tr.len()).max().unwrap_or(0);
        let mut mean = Vec::with_capacity(horizon);
        let mut std = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let vals: Vec<T> = traces
                .iter()
                .filter_map(|tr| tr.rows.get(t).map(|r| r.cum_regret))
                .collect();
            let n = T::from_usize(vals.len()).unwrap();
            let m = vals.iter().copied().sum::<T>() / n;
            let s = if vals.len() > 1 {
                let ss = vals.iter().map(|&v| (v - m) * (v - m)).sum::<T>();
                (ss / (n - T::one())).sqrt()
            } else {
                T::zero()
            };
            mean.push(m);
            std.push(s);
        }
        Self { mean, std }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Average per-round regret over the last quarter of a cumulative-regret
/// series.
pub fn last_quarter_slope<T: Scalar>(series: &[T]) -> T {
    let n = series.len();
    if n < 4 {
        return T::zero();
    }
    let start = n - n / 4;
    let run = T::from_usize(n - 1 - start).unwrap();
    if run == T::zero() {
        return T::zero();
    }
    (series[n - 1] - series[start]) / run
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{AttackConfig, LearnerKind};

    #[test]
    fn stream_seeds_differ_by_role_and_seed() {
        let a = stream_seed(1, StreamRole::Noise);
        assert_ne!(a, stream_seed(1, StreamRole::GpSample));
        assert_ne!(a, stream_seed(2, StreamRole::Noise));
        assert_eq!(a, stream_seed(1, StreamRole::Noise));
    }

    #[test]
    fn gp_sample_is_deterministic() {
        let k = KernelSpec::squared_exponential(0.5).unwrap();
        let d = Domain::grid(-5.0, 5.0, 10, 2).unwrap();
        let a = sample_gp_function(&k, &d, 11).unwrap();
        let b = sample_gp_function(&k, &d, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_gp_function(&k, &d, 12).unwrap());
        assert_eq!(a.len(), 100);
        assert_eq!(a.f_max(), a.value(a.argmax()));
    }

    #[test]
    fn single_point_gp_sample_is_scalar_draw() {
        let k = KernelSpec::squared_exponential(0.5).unwrap();
        let d = Domain::new(vec![vec![0.0]]).unwrap();
        let g = sample_gp_function(&k, &d, 3).unwrap();
        let mut rng = stream_rng(3, StreamRole::GpSample);
        let z: f64 = StandardNormal.sample(&mut rng);
        assert!((g.value(0) - z * (1.0f64 + 1e-10).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn noiseless_unattacked_observation_is_exact() {
        let truth = GroundTruth::from_values(GroundTruthKind::Analytic, vec![0.1, 0.7]).unwrap();
        let mut env = Environment::new(truth, 0.0, stream_rng(0, StreamRole::Noise)).unwrap();
        let mut ledger = AttackLedger::new(AttackConfig::none()).unwrap();
        let o = env.observe(1, 1, &mut ledger, &AlgorithmView::new(LearnerKind::GpUcb));
        assert_eq!(o.observed, 0.7);
        assert_eq!(o.c, 0.0);
    }

    #[test]
    fn argmax_ties_go_to_lowest_index() {
        let g = GroundTruth::from_values(GroundTruthKind::Analytic, vec![0.2, 0.9, 0.9]).unwrap();
        assert_eq!(g.argmax(), 1);
        assert!(GroundTruth::<f64>::from_values(GroundTruthKind::Analytic, vec![]).is_err());
    }

    #[test]
    fn aggregate_of_identical_traces_has_zero_spread() {
        let truth = GroundTruth::from_values(GroundTruthKind::Analytic, vec![0.0, 1.0]).unwrap();
        let obs = Observation { f: 0.0, y: 0.0, c: 0.0, observed: 0.0 };
        let mut tr = RegretTrace::new();
        tr.record(0, &obs, &truth);
        tr.record(0, &obs, &truth);
        let agg = RegretAggregate::from_traces(&[tr.clone(), tr]);
        assert_eq!(agg.mean, vec![1.0, 2.0]);
        assert_eq!(agg.std, vec![0.0, 0.0]);
    }

    #[test]
    fn slope_of_linear_series() {
        let s: Vec<f64> = (0..100).map(|t| 0.5 * t as f64).collect();
        assert!((last_quarter_slope(&s) - 0.5).abs() < 1e-12);
    }
}
