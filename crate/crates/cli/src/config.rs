//! Flat `key=value` experiment configuration.
//!
//! One key per line, dotted names, `#` starts a comment. Every key has a
//! default (see [`KEYS`]) except `algo` and `T`; keys outside the table are
//! rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cgb_core::adversary::{AttackConfig, AttackKind, Region, Trigger};
use cgb_core::algorithms::{
    gamma_surrogate, theoretical_psi, BetaSchedule, ConfidenceConfig, PsiChoice, RgpPeConfig,
    UcbConfig, WidthMode,
};
use cgb_core::environment::{sample_gp_function, BumpFunction, GroundTruth};
use cgb_core::kernel::{Domain, KernelSpec};
use cgb_core::linred::{DeltaMode, RpeLinearConfig};
use cgb_core::trials::{AlgorithmConfig, Experiment};

use crate::error::{CliError, CliResult};

/// Known keys and their defaults; an empty default means "unset".
pub const KEYS: &[(&str, &str)] = &[
    ("algo", ""),
    ("T", ""),
    ("trials", "1"),
    ("seed", "0"),
    ("noise.sigma", "0.02"),
    ("lambda", "1"),
    ("eta", "2"),
    ("psi", "0.5"),
    ("b", "0.1"),
    ("C_known", ""),
    ("beta.mode", "constant"),
    ("beta.value", "2"),
    ("beta.B", "1"),
    ("beta.delta", "0.05"),
    ("beta.gamma", "auto"),
    ("width.mode", "practical"),
    ("kernel.type", "se"),
    ("kernel.lengthscale", "0.5"),
    ("kernel.nu", "2.5"),
    ("domain.type", "grid"),
    ("domain.lo", "0"),
    ("domain.hi", "1"),
    ("domain.n", "10"),
    ("domain.dim", "1"),
    ("domain.file", ""),
    ("function.type", "gp_sample"),
    ("function.seed", "0"),
    ("function.centres", ""),
    ("function.heights", ""),
    ("function.widths", ""),
    ("function.theta", ""),
    ("attack.type", "none"),
    ("attack.C", "0"),
    ("attack.delta", "0.5"),
    ("attack.hmax", "1"),
    ("attack.K", "3"),
    ("attack.region", ""),
    ("attack.trigger", "immediate"),
    ("linear.alpha", "0.1"),
    ("linear.delta", "0.05"),
    ("linear.B", "1"),
    ("linear.Delta_mode", "inv_sqrt_T"),
    ("linear.Delta", ""),
    ("newton.e", "0.1"),
    ("output.dir", "out"),
];

/// A parsed configuration: every known key resolved to its given or default
/// value.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    values: BTreeMap<&'static str, String>,
    base_dir: PathBuf,
}

/// The experiment built from a configuration, plus derived quantities worth
/// recording.
#[derive(Debug, Clone)]
pub struct Plan {
    pub experiment: Experiment<f64>,
    pub derived: Vec<(String, String)>,
}

fn bad(key: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {why}"))
}

impl ExperimentConfig {
    /// Parses configuration text. Relative paths inside it resolve against
    /// `base_dir`.
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> CliResult<Self> {
        let mut given: BTreeMap<&'static str, String> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key=value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let key = KEYS
                .iter()
                .map(|(name, _)| *name)
                .find(|name| *name == k)
                .ok_or_else(|| CliError::Config(format!("line {}: unknown key `{k}`", n + 1)))?;
            if given.insert(key, v.to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{k}`", n + 1)));
            }
        }
        let mut values = BTreeMap::new();
        for (k, default) in KEYS {
            let v = given.remove(k).unwrap_or_else(|| default.to_string());
            values.insert(*k, v);
        }
        for required in ["algo", "T"] {
            if values[required].is_empty() {
                return Err(bad(required, "required"));
            }
        }
        let cfg = Self {
            values,
            base_dir: base_dir.into(),
        };
        if cfg.u64("T")? < 2 {
            return Err(bad("T", "must be at least 2"));
        }
        if cfg.usize("trials")? < 1 {
            return Err(bad("trials", "must be at least 1"));
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, dir)
    }

    /// Replaces a key's value, as the command-line overrides do.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> CliResult<()> {
        let slot = self
            .values
            .iter_mut()
            .find(|(k, _)| **k == key)
            .ok_or_else(|| bad(key, "unknown key"))?;
        *slot.1 = value.into();
        if self.u64("T")? < 2 {
            return Err(bad("T", "must be at least 2"));
        }
        if self.usize("trials")? < 1 {
            return Err(bad("trials", "must be at least 1"));
        }
        Ok(())
    }

    /// Resolved `(key, value)` pairs in key order, unset keys omitted.
    pub fn resolved(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| (*k, v.as_str()))
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    fn required(&self, key: &str) -> CliResult<&str> {
        match self.get(key) {
            "" => Err(bad(key, "required")),
            v => Ok(v),
        }
    }

    pub fn f64(&self, key: &str) -> CliResult<f64> {
        let v = self.required(key)?;
        let x: f64 = v.parse().map_err(|_| bad(key, format!("`{v}` is not a number")))?;
        if x.is_nan() {
            return Err(bad(key, "must not be NaN"));
        }
        Ok(x)
    }

    pub fn u64(&self, key: &str) -> CliResult<u64> {
        let v = self.required(key)?;
        v.parse()
            .map_err(|_| bad(key, format!("`{v}` is not a nonnegative integer")))
    }

    pub fn usize(&self, key: &str) -> CliResult<usize> {
        let v = self.required(key)?;
        v.parse()
            .map_err(|_| bad(key, format!("`{v}` is not a nonnegative integer")))
    }

    fn list(&self, key: &str) -> CliResult<Vec<f64>> {
        parse_list(key, self.required(key)?)
    }

    pub fn algo(&self) -> &str {
        self.get("algo")
    }

    pub fn horizon(&self) -> CliResult<u64> {
        self.u64("T")
    }

    pub fn trials(&self) -> CliResult<usize> {
        self.usize("trials")
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.u64("seed")
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(self.get("output.dir"))
    }

    pub fn kernel(&self) -> CliResult<KernelSpec<f64>> {
        let k = match self.get("kernel.type") {
            "se" => KernelSpec::squared_exponential(self.f64("kernel.lengthscale")?),
            "matern" => KernelSpec::matern(self.f64("kernel.nu")?, self.f64("kernel.lengthscale")?),
            "linear" => Ok(KernelSpec::linear()),
            other => return Err(bad("kernel.type", format!("`{other}` is not one of se, matern, linear"))),
        };
        Ok(k?)
    }

    pub fn domain(&self) -> CliResult<Domain<f64>> {
        match self.get("domain.type") {
            "grid" => {
                let d = Domain::grid(
                    self.f64("domain.lo")?,
                    self.f64("domain.hi")?,
                    self.usize("domain.n")?,
                    self.usize("domain.dim")?,
                )?;
                Ok(d)
            }
            "file" => {
                let path = self.base_dir.join(self.required("domain.file")?);
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                let mut points = Vec::new();
                for line in text.lines() {
                    let line = line.split('#').next().unwrap_or("").trim();
                    if !line.is_empty() {
                        points.push(parse_list("domain.file", line)?);
                    }
                }
                Ok(Domain::new(points)?)
            }
            other => Err(bad("domain.type", format!("`{other}` is not one of grid, file"))),
        }
    }

    pub fn truth(&self, kernel: &KernelSpec<f64>, domain: &Domain<f64>) -> CliResult<GroundTruth<f64>> {
        let truth = match self.get("function.type") {
            "gp_sample" => sample_gp_function(kernel, domain, self.u64("function.seed")?)?,
            "bumps" => {
                let flat = self.list("function.centres")?;
                let heights = self.list("function.heights")?;
                let widths = self.list("function.widths")?;
                let dim = domain.dim();
                if flat.len() != heights.len() * dim || widths.len() != heights.len() {
                    return Err(bad(
                        "function.centres",
                        "need one centre (domain.dim coordinates), height and width per bump",
                    ));
                }
                BumpFunction {
                    centres: flat.chunks(dim).map(<[f64]>::to_vec).collect(),
                    heights,
                    widths,
                }
                .tabulate(domain)?
            }
            "linear" => {
                let theta = self.list("function.theta")?;
                if theta.len() != domain.dim() {
                    return Err(bad("function.theta", "length must equal the domain dimension"));
                }
                GroundTruth::analytic(domain, |x| x.iter().zip(&theta).map(|(a, b)| a * b).sum())?
            }
            other => {
                return Err(bad(
                    "function.type",
                    format!("`{other}` is not one of gp_sample, bumps, linear"),
                ))
            }
        };
        Ok(truth)
    }

    pub fn attack(&self, domain: &Domain<f64>) -> CliResult<AttackConfig<f64>> {
        let kind = match self.get("attack.type") {
            "none" => AttackKind::None,
            "clipping" => AttackKind::Clipping,
            "aggsub" => AttackKind::AggSub,
            "topk" => AttackKind::TopK(self.usize("attack.K")?),
            "flip" => AttackKind::Flip,
            other => {
                return Err(bad(
                    "attack.type",
                    format!("`{other}` is not one of none, clipping, aggsub, topk, flip"),
                ))
            }
        };
        let trigger = match self.get("attack.trigger") {
            "immediate" => Trigger::Immediate,
            "later" => Trigger::Later,
            other => return Err(bad("attack.trigger", format!("`{other}` is not one of immediate, later"))),
        };
        let budget = if kind == AttackKind::None { 0.0 } else { self.f64("attack.C")? };
        let mut attack = AttackConfig::new(kind, budget)
            .with_trigger(trigger)
            .with_delta(self.f64("attack.delta")?)
            .with_h_max(self.f64("attack.hmax")?);
        if !self.get("attack.region").is_empty() {
            attack = attack.with_region(Region::parse(self.get("attack.region"), domain)?);
        }
        attack.validate()?;
        Ok(attack)
    }

    fn confidence(&self, domain: &Domain<f64>, kernel: &KernelSpec<f64>, derived: &mut Vec<(String, String)>) -> CliResult<ConfidenceConfig<f64>> {
        let sigma = self.f64("noise.sigma")?;
        let beta = match self.get("beta.mode") {
            "constant" => BetaSchedule::Constant(self.f64("beta.value")?),
            "finite_domain" => BetaSchedule::FiniteDomain {
                b_norm: self.f64("beta.B")?,
                noise_sd: sigma,
                delta: self.f64("beta.delta")?,
                n_actions: domain.len(),
            },
            "adaptive" => {
                let gamma = if self.get("beta.gamma") == "auto" {
                    let g = gamma_surrogate(kernel, domain, self.f64("lambda")?, self.horizon()?)?;
                    derived.push(("beta.gamma".into(), crate::csvio::fmt_f64(g)));
                    g
                } else {
                    self.f64("beta.gamma")?
                };
                BetaSchedule::Adaptive {
                    b_norm: self.f64("beta.B")?,
                    noise_sd: sigma,
                    delta: self.f64("beta.delta")?,
                    gamma,
                }
            }
            "sqrt_log" => BetaSchedule::SqrtLog {
                scale: self.f64("beta.value")?,
            },
            other => {
                return Err(bad(
                    "beta.mode",
                    format!("`{other}` is not one of constant, finite_domain, adaptive, sqrt_log"),
                ))
            }
        };
        let width = match self.get("width.mode") {
            "theoretical" => WidthMode::Theoretical,
            "practical" => WidthMode::Practical { b: self.f64("b")? },
            other => return Err(bad("width.mode", format!("`{other}` is not one of theoretical, practical"))),
        };
        let c_known = match self.get("C_known") {
            "" if self.get("attack.type") == "none" => 0.0,
            "" => self.f64("attack.C")?,
            _ => self.f64("C_known")?,
        };
        Ok(ConfidenceConfig { beta, width, c_known })
    }

    fn psi(&self) -> CliResult<PsiChoice<f64>> {
        match self.get("psi") {
            "auto" => Ok(PsiChoice::Auto),
            _ => Ok(PsiChoice::Fixed(self.f64("psi")?)),
        }
    }

    pub fn algorithm(&self, kernel: &KernelSpec<f64>, domain: &Domain<f64>, derived: &mut Vec<(String, String)>) -> CliResult<AlgorithmConfig<f64>> {
        let horizon = self.horizon()?;
        let lambda = self.f64("lambda")?;
        let algo = match self.algo() {
            "rgp_pe" => {
                let eta = self.f64("eta")?;
                let psi = match self.psi()? {
                    PsiChoice::Fixed(p) => p,
                    PsiChoice::Auto => {
                        let p = theoretical_psi(kernel, domain, lambda, eta, horizon)?;
                        derived.push(("psi".into(), crate::csvio::fmt_f64(p)));
                        p
                    }
                };
                AlgorithmConfig::RgpPe(RgpPeConfig {
                    horizon,
                    lambda,
                    eta,
                    psi,
                    confidence: self.confidence(domain, kernel, derived)?,
                })
            }
            "gp_ucb" | "rgp_ucb" => {
                let cfg = UcbConfig {
                    horizon,
                    lambda,
                    confidence: self.confidence(domain, kernel, derived)?,
                };
                if self.algo() == "gp_ucb" {
                    AlgorithmConfig::GpUcb(cfg)
                } else {
                    AlgorithmConfig::RgpUcb(cfg)
                }
            }
            "rpe_linear" => {
                let delta_mode = match self.get("linear.Delta_mode") {
                    "inv_sqrt_T" => DeltaMode::InvSqrtHorizon,
                    "matern" => DeltaMode::MaternRate {
                        nu: self.f64("kernel.nu")?,
                    },
                    "fixed" => DeltaMode::Fixed(self.f64("linear.Delta")?),
                    other => {
                        return Err(bad(
                            "linear.Delta_mode",
                            format!("`{other}` is not one of inv_sqrt_T, matern, fixed"),
                        ))
                    }
                };
                let c_known = match self.get("C_known") {
                    "" if self.get("attack.type") == "none" => 0.0,
                    "" => self.f64("attack.C")?,
                    _ => self.f64("C_known")?,
                };
                AlgorithmConfig::RpeLinear(RpeLinearConfig {
                    horizon,
                    alpha: self.f64("linear.alpha")?,
                    delta: self.f64("linear.delta")?,
                    b_norm: self.f64("linear.B")?,
                    delta_mode,
                    c_known,
                })
            }
            other => {
                return Err(bad(
                    "algo",
                    format!("`{other}` is not one of rgp_pe, gp_ucb, rgp_ucb, rpe_linear"),
                ))
            }
        };
        algo.validate()?;
        Ok(algo)
    }

    /// Builds and validates the whole experiment.
    pub fn plan(&self, threads: Option<usize>, audit: bool) -> CliResult<Plan> {
        let kernel = self.kernel()?;
        let domain = self.domain()?;
        domain.validate_for(&kernel)?;
        let mut derived = Vec::new();
        let algorithm = self.algorithm(&kernel, &domain, &mut derived)?;
        let attack = self.attack(&domain)?;
        let noise_sd = self.f64("noise.sigma")?;
        if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
            return Err(bad("noise.sigma", "must be finite and nonnegative"));
        }
        let truth = self.truth(&kernel, &domain)?;
        let experiment = Experiment {
            kernel,
            domain,
            truth,
            noise_sd,
            algorithm,
            attack,
            trials: self.trials()?,
            seed: self.seed()?,
            threads,
            audit,
        };
        experiment.validate()?;
        Ok(Plan { experiment, derived })
    }
}

fn parse_list(key: &str, text: &str) -> CliResult<Vec<f64>> {
    text.split([',', ';'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| bad(key, format!("`{s}` is not a number"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> CliResult<ExperimentConfig> {
        ExperimentConfig::parse(text, ".")
    }

    #[test]
    fn defaults_fill_in() {
        let c = cfg("algo=gp_ucb\nT=10 # horizon\n\n# comment\n").unwrap();
        assert_eq!(c.get("trials"), "1");
        assert_eq!(c.get("kernel.type"), "se");
        let plan = c.plan(None, false).unwrap();
        assert_eq!(plan.experiment.domain.len(), 10);
        assert_eq!(plan.experiment.algorithm.name(), "gp_ucb");
    }

    #[test]
    fn rejects_unknown_duplicate_and_missing() {
        assert!(cfg("algo=gp_ucb\nT=10\nfoo=1").unwrap_err().to_string().contains("unknown key `foo`"));
        assert!(cfg("algo=gp_ucb\nT=10\nT=11").unwrap_err().to_string().contains("duplicate"));
        assert!(cfg("algo=gp_ucb").unwrap_err().to_string().contains("`T`"));
        assert!(cfg("algo=gp_ucb\nT=1").is_err());
        assert!(cfg("algo=gp_ucb\nT=10\ntrials=0").is_err());
        assert!(cfg("algo=gp_ucb\nT=10\nnoline").is_err());
    }

    #[test]
    fn eta_one_is_rejected() {
        let c = cfg("algo=rgp_pe\nT=10\neta=1.0").unwrap();
        let e = c.plan(None, false).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("eta must exceed 1"));
    }

    #[test]
    fn attack_keys() {
        let c = cfg("algo=rgp_pe\nT=10\ndomain.dim=2\ndomain.n=3\nattack.type=clipping\nattack.C=5\nattack.region=x1<=x2").unwrap();
        let plan = c.plan(None, false).unwrap();
        assert_eq!(plan.experiment.attack.region.as_ref().unwrap().len(), 6);
        match plan.experiment.algorithm {
            AlgorithmConfig::RgpPe(r) => assert_eq!(r.confidence.c_known, 5.0),
            _ => unreachable!(),
        }
        let c = cfg("algo=rgp_pe\nT=10\nattack.type=clipping\nattack.C=5").unwrap();
        assert!(c.plan(None, false).unwrap_err().to_string().contains("attack.region"));
    }

    #[test]
    fn derived_psi_is_recorded() {
        let c = cfg("algo=rgp_pe\nT=16\npsi=auto").unwrap();
        let plan = c.plan(None, false).unwrap();
        assert_eq!(plan.derived[0].0, "psi");
    }

    #[test]
    fn linear_function_and_bumps() {
        let c = cfg("algo=rpe_linear\nT=10\nkernel.type=linear\ndomain.type=grid\ndomain.lo=-0.5\ndomain.hi=0.5\ndomain.n=3\ndomain.dim=2\nfunction.type=linear\nfunction.theta=1,0").unwrap();
        let plan = c.plan(None, false).unwrap();
        assert_eq!(plan.experiment.truth.value(0), -0.5);
        let c = cfg("algo=gp_ucb\nT=10\nfunction.type=bumps\nfunction.centres=0.5\nfunction.heights=1\nfunction.widths=0.1").unwrap();
        let plan = c.plan(None, false).unwrap();
        assert_eq!(plan.experiment.truth.argmax(), 4);
    }
}
