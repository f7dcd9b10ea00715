//! Seeded multi-trial experiments. Trial `i` uses seed `base + i` for its
//! noise stream; trials share nothing else, so they run in parallel and the
//! result does not depend on scheduling.

use rayon::prelude::*;

use crate::adversary::{AttackConfig, AttackLedger, CorruptionRecord};
use crate::algorithms::{
    run_rgp_pe, run_rgp_pe_with, run_gp_ucb, run_rgp_ucb, run_ucb_with, RgpPeConfig, UcbConfig,
};
use crate::audit::{AuditRow, RgpPeAudit, RpeAudit, UcbAudit};
use crate::environment::{stream_rng, Environment, GroundTruth, RegretAggregate, RegretTrace, StreamRole};
use crate::error::{Error, Result};
use crate::kernel::{Domain, KernelSpec};
use crate::linred::{run_rpe_linear, run_rpe_linear_with, RpeLinearConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlgorithmConfig<T = f64> {
    RgpPe(RgpPeConfig<T>),
    GpUcb(UcbConfig<T>),
    RgpUcb(UcbConfig<T>),
    RpeLinear(RpeLinearConfig<T>),
}

impl<T: Scalar> AlgorithmConfig<T> {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmConfig::RgpPe(_) => "rgp_pe",
            AlgorithmConfig::GpUcb(_) => "gp_ucb",
            AlgorithmConfig::RgpUcb(_) => "rgp_ucb",
            AlgorithmConfig::RpeLinear(_) => "rpe_linear",
        }
    }

    pub fn horizon(&self) -> u64 {
        match self {
            AlgorithmConfig::RgpPe(c) => c.horizon,
            AlgorithmConfig::GpUcb(c) | AlgorithmConfig::RgpUcb(c) => c.horizon,
            AlgorithmConfig::RpeLinear(c) => c.horizon,
        }
    }

    /// Whether the learner runs in epochs (and so records epoch marks).
    pub fn is_epoch_based(&self) -> bool {
        matches!(self, AlgorithmConfig::RgpPe(_) | AlgorithmConfig::RpeLinear(_))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AlgorithmConfig::RgpPe(c) => c.validate(),
            AlgorithmConfig::GpUcb(c) | AlgorithmConfig::RgpUcb(c) => c.validate(),
            AlgorithmConfig::RpeLinear(c) => c.validate(),
        }
    }
}

/// Everything needed to run a batch of trials.
#[derive(Debug, Clone)]
pub struct Experiment<T = f64> {
    pub kernel: KernelSpec<T>,
    pub domain: Domain<T>,
    pub truth: GroundTruth<T>,
    pub noise_sd: T,
    pub algorithm: AlgorithmConfig<T>,
    pub attack: AttackConfig<T>,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; `None` means one per trial.
    pub threads: Option<usize>,
    /// Run with the invariant checks enabled.
    pub audit: bool,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome<T = f64> {
    pub trial: usize,
    pub seed: u64,
    pub trace: RegretTrace<T>,
    pub corruption_spent: T,
    pub corruption_demand: T,
    pub corruption_log: Vec<CorruptionRecord<T>>,
    pub audit: Option<Vec<AuditRow>>,
}

#[derive(Debug, Clone)]
pub struct TrialsOutcome<T = f64> {
    pub trials: Vec<TrialOutcome<T>>,
    pub aggregate: RegretAggregate<T>,
}

impl<T: Scalar> Experiment<T> {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads", "must be at least 1"));
        }
        if self.truth.len() != self.domain.len() {
            return Err(Error::DimensionMismatch {
                left: self.domain.len(),
                right: self.truth.len(),
            });
        }
        self.domain.validate_for(&self.kernel)?;
        self.algorithm.validate()?;
        self.attack.validate()
    }

    /// Seed of trial `index`.
    pub fn trial_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(index as u64)
    }

    /// Runs one trial.
    pub fn run_trial(&self, index: usize) -> Result<TrialOutcome<T>> {
        let seed = self.trial_seed(index);
        let mut env = Environment::new(self.truth.clone(), self.noise_sd, stream_rng(seed, StreamRole::Noise))?;
        let mut ledger = AttackLedger::new(self.attack.clone())?;
        let (k, d) = (&self.kernel, &self.domain);
        let (trace, audit) = match (&self.algorithm, self.audit) {
            (AlgorithmConfig::RgpPe(c), false) => (run_rgp_pe(c, k, d, &mut env, &mut ledger)?, None),
            (AlgorithmConfig::RgpPe(c), true) => {
                let mut hooks = RgpPeAudit::new(*k, d, c.lambda, c.eta, c.psi, c.horizon);
                let trace = run_rgp_pe_with(c, k, d, &mut env, &mut ledger, &mut hooks)?;
                (trace, Some(hooks.finish()?))
            }
            (AlgorithmConfig::GpUcb(c), false) => (run_gp_ucb(c, k, d, &mut env, &mut ledger)?, None),
            (AlgorithmConfig::RgpUcb(c), false) => (run_rgp_ucb(c, k, d, &mut env, &mut ledger)?, None),
            (AlgorithmConfig::GpUcb(c) | AlgorithmConfig::RgpUcb(c), true) => {
                let robust = matches!(self.algorithm, AlgorithmConfig::RgpUcb(_));
                let mut hooks = UcbAudit::new(*k, d, c.lambda)?;
                let trace = run_ucb_with(c, k, d, &mut env, &mut ledger, robust, &mut hooks)?;
                (trace, Some(hooks.finish()?))
            }
            (AlgorithmConfig::RpeLinear(c), false) => (run_rpe_linear(c, k, d, &mut env, &mut ledger)?.trace, None),
            (AlgorithmConfig::RpeLinear(c), true) => {
                let mut hooks = RpeAudit::new();
                let run = run_rpe_linear_with(c, k, d, &mut env, &mut ledger, &mut hooks)?;
                (run.trace, Some(hooks.finish()))
            }
        };
        Ok(TrialOutcome {
            trial: index,
            seed,
            trace,
            corruption_spent: ledger.spent(),
            corruption_demand: ledger.demand(),
            corruption_log: ledger.log().to_vec(),
            audit,
        })
    }
}

/// Runs all trials (in parallel, on at most `threads` workers) and
/// aggregates cumulative regret. Results are ordered by trial index.
pub fn run_trials<T: Scalar>(exp: &Experiment<T>) -> Result<TrialsOutcome<T>> {
    exp.validate()?;
    let threads = exp.threads.unwrap_or(exp.trials).clamp(1, exp.trials);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid("threads", e.to_string()))?;
    let trials: Vec<TrialOutcome<T>> = pool.install(|| {
        (0..exp.trials)
            .into_par_iter()
            .map(|i| exp.run_trial(i))
            .collect::<Result<Vec<_>>>()
    })?;
    let aggregate = RegretAggregate::from_traces(trials.iter().map(|t| &t.trace));
    Ok(TrialsOutcome { trials, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{BetaSchedule, ConfidenceConfig, WidthMode};
    use crate::environment::GroundTruthKind;

    fn experiment(trials: usize, horizon: u64) -> Experiment<f64> {
        let domain = Domain::grid(0.0, 1.0, 4, 1).unwrap();
        let truth = GroundTruth::from_values(GroundTruthKind::Analytic, vec![0.1, 0.5, 0.3, 0.0]).unwrap();
        Experiment {
            kernel: KernelSpec::squared_exponential(0.3).unwrap(),
            domain,
            truth,
            noise_sd: 0.02,
            algorithm: AlgorithmConfig::GpUcb(UcbConfig {
                horizon,
                lambda: 1.0,
                confidence: ConfidenceConfig {
                    beta: BetaSchedule::SqrtLog { scale: 0.5 },
                    width: WidthMode::Practical { b: 0.1 },
                    c_known: 0.0,
                },
            }),
            attack: AttackConfig::none(),
            trials,
            seed: 17,
            threads: None,
            audit: false,
        }
    }

    #[test]
    fn single_trial_has_horizon_rows() {
        let out = run_trials(&experiment(1, 10)).unwrap();
        assert_eq!(out.trials.len(), 1);
        assert_eq!(out.trials[0].trace.len(), 10);
        assert_eq!(out.aggregate.len(), 10);
        assert_eq!(out.trials[0].seed, 17);
    }

    #[test]
    fn repeatable_and_independent_of_thread_count() {
        let mut a = experiment(4, 60);
        let r1 = run_trials(&a).unwrap();
        a.threads = Some(1);
        let r2 = run_trials(&a).unwrap();
        assert_eq!(r1.aggregate, r2.aggregate);
        for (x, y) in r1.trials.iter().zip(&r2.trials) {
            assert_eq!(x.trace, y.trace);
        }
        // trial i of this run equals trial 0 of a run seeded at base + i
        let mut b = experiment(1, 60);
        b.seed = 17 + 2;
        let r3 = run_trials(&b).unwrap();
        assert_eq!(r3.trials[0].trace, r1.trials[2].trace);
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(run_trials(&experiment(0, 10)).is_err());
    }
}
