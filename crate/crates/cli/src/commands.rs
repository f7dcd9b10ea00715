//! The `run`, `audit`, `newton` and `plot` subcommands. All files are
//! written by the calling thread after the trials have been reduced.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use cgb_core::audit::first_violation;
use cgb_core::linred::newton_basis;
use cgb_core::trials::{run_trials, TrialsOutcome};

use crate::config::{ExperimentConfig, Plan};
use crate::csvio::{
    aggregate_rows, audit_rows, fmt_f64, epoch_rows, newton_rows, read_aggregate, to_csv_bytes, trace_rows,
    write_file, AGGREGATE_HEADER, AUDIT_HEADER, EPOCH_HEADER, NEWTON_HEADER, TRACE_HEADER,
};
use crate::error::{CliError, CliResult};
use crate::plot::{label_from_path, render_svg, Series};

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    /// Cap on trial parallelism.
    pub threads: Option<usize>,
}

/// What a command wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct Written {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

pub fn load_config(path: &Path, ov: &Overrides) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(n) = ov.trials {
        cfg.set("trials", n.to_string())?;
    }
    if let Some(s) = ov.seed {
        cfg.set("seed", s.to_string())?;
    }
    Ok(cfg)
}

fn output_dir(cfg: &ExperimentConfig, ov: &Overrides) -> CliResult<PathBuf> {
    let dir = ov.out.clone().unwrap_or_else(|| cfg.output_dir());
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn manifest(command: &str, config_path: &Path, cfg: &ExperimentConfig, plan: &Plan, out: &TrialsOutcome<f64>) -> String {
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut s = String::new();
    let _ = writeln!(s, "# cgb run manifest");
    let _ = writeln!(s, "version={}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "command={command}");
    let _ = writeln!(s, "timestamp={timestamp}");
    let _ = writeln!(s, "config_file={}", config_path.display());
    for (k, v) in cfg.resolved() {
        let _ = writeln!(s, "config.{k}={v}");
    }
    for (k, v) in &plan.derived {
        let _ = writeln!(s, "derived.{k}={v}");
    }
    let _ = writeln!(s, "derived.argmax={}", plan.experiment.truth.argmax());
    let _ = writeln!(s, "derived.f_max={}", fmt_f64(plan.experiment.truth.f_max()));
    for t in &out.trials {
        let k = t.trial;
        let _ = writeln!(s, "trial.{k}.seed={}", t.seed);
        let _ = writeln!(s, "trial.{k}.cum_regret={}", fmt_f64(t.trace.cum_regret()));
        let _ = writeln!(s, "trial.{k}.corruption_spent={}", fmt_f64(t.corruption_spent));
        let _ = writeln!(s, "trial.{k}.corruption_demand={}", fmt_f64(t.corruption_demand));
        if let Some(active) = t.trace.final_active() {
            let list: Vec<String> = active.iter().map(usize::to_string).collect();
            let _ = writeln!(s, "trial.{k}.final_active={}", list.join(";"));
        }
    }
    s
}

fn emit(dir: &Path, name: String, bytes: &[u8], files: &mut Vec<PathBuf>) -> CliResult<()> {
    let path = dir.join(name);
    write_file(&path, bytes)?;
    files.push(path);
    Ok(())
}

fn execute(command: &str, config_path: &Path, ov: &Overrides, audit: bool) -> CliResult<Written> {
    let cfg = load_config(config_path, ov)?;
    let plan = cfg.plan(ov.threads, audit)?;
    let out = run_trials(&plan.experiment)?;
    let dir = output_dir(&cfg, ov)?;
    let algo = plan.experiment.algorithm.name();
    let mut files = Vec::new();
    for t in &out.trials {
        let bytes = to_csv_bytes(TRACE_HEADER, trace_rows(algo, t.trial, t.seed, &t.trace));
        emit(&dir, format!("trace_{algo}_trial{}.csv", t.trial), &bytes, &mut files)?;
    }
    let bytes = to_csv_bytes(AGGREGATE_HEADER, aggregate_rows(&out.aggregate));
    emit(&dir, format!("aggregate_{algo}.csv"), &bytes, &mut files)?;
    if plan.experiment.algorithm.is_epoch_based() {
        let rows = out.trials.iter().flat_map(|t| epoch_rows(algo, t.trial, &t.trace));
        emit(&dir, format!("epochs_{algo}.csv"), &to_csv_bytes(EPOCH_HEADER, rows), &mut files)?;
    }
    let mut violation = None;
    for t in &out.trials {
        if let Some(rows) = &t.audit {
            let bytes = to_csv_bytes(AUDIT_HEADER, audit_rows(rows));
            emit(&dir, format!("audit_{algo}_trial{}.csv", t.trial), &bytes, &mut files)?;
            if violation.is_none() {
                violation = first_violation(rows).map(|r| {
                    format!(
                        "{} failed in trial {} epoch {}: lhs {} > rhs {}",
                        r.lemma_id, t.trial, r.h, r.lhs, r.rhs
                    )
                });
            }
        }
    }
    let text = manifest(command, config_path, &cfg, &plan, &out);
    emit(&dir, "manifest.txt".to_string(), text.as_bytes(), &mut files)?;
    match violation {
        Some(msg) => Err(CliError::Audit(msg)),
        None => Ok(Written { dir, files }),
    }
}

/// Runs the configured experiment and writes traces, the aggregate, epoch
/// marks (epoch-based learners only) and the manifest.
pub fn run(config_path: &Path, ov: &Overrides) -> CliResult<Written> {
    execute("run", config_path, ov, false)
}

/// As [`run`], with the invariant checks enabled and one audit CSV per
/// trial; any failing check is an [`CliError::Audit`] naming it.
pub fn audit(config_path: &Path, ov: &Overrides) -> CliResult<Written> {
    execute("audit", config_path, ov, true)
}

/// Builds the Newton basis of the configured kernel and domain at
/// admissible error `newton.e` and writes its selection log.
pub fn newton(config_path: &Path, ov: &Overrides) -> CliResult<Written> {
    let cfg = load_config(config_path, ov)?;
    let kernel = cfg.kernel()?;
    let domain = cfg.domain()?;
    let basis = newton_basis(&kernel, &domain, cfg.f64("newton.e")?)?;
    let dir = output_dir(&cfg, ov)?;
    let mut files = Vec::new();
    emit(&dir, "newton.csv".to_string(), &to_csv_bytes(NEWTON_HEADER, newton_rows(basis.log())), &mut files)?;
    Ok(Written { dir, files })
}

/// Plots one series per aggregate CSV into `out_svg`.
pub fn plot(inputs: &[PathBuf], out_svg: &Path) -> CliResult<Written> {
    if inputs.is_empty() {
        return Err(CliError::Config("plot needs at least one aggregate CSV".into()));
    }
    let mut series = Vec::new();
    for path in inputs {
        let rows = read_aggregate(path)?;
        if rows.is_empty() {
            return Err(CliError::csv(path, "no data rows"));
        }
        series.push(Series {
            label: label_from_path(path),
            rows,
        });
    }
    if let Some(parent) = out_svg.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    write_file(out_svg, render_svg(&series).as_bytes())?;
    Ok(Written {
        dir: out_svg.parent().map(Path::to_path_buf).unwrap_or_default(),
        files: vec![out_svg.to_path_buf()],
    })
}
