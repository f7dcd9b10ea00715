//! CSV emission and the matching readers. Files are comma separated with a
//! mandatory header, `.` decimals and LF line endings; floats are written in
//! shortest round-trip form so reading a file back recovers the exact
//! values.

use std::path::Path;
use std::str::FromStr;

use cgb_core::audit::AuditRow;
use cgb_core::environment::{RegretAggregate, RegretTrace};
use cgb_core::linred::NewtonStep;

use crate::error::{CliError, CliResult};

pub const TRACE_HEADER: &[&str] = &[
    "algorithm",
    "trial",
    "seed",
    "t",
    "action",
    "y",
    "c",
    "instant_regret",
    "cum_regret",
];
pub const AGGREGATE_HEADER: &[&str] = &["t", "mean_cum_regret", "std_cum_regret"];
pub const EPOCH_HEADER: &[&str] = &[
    "algorithm",
    "trial",
    "h",
    "t_start",
    "active_size",
    "support_size",
    "epoch_len",
];
pub const AUDIT_HEADER: &[&str] = &["h", "lemma_id", "lhs", "rhs", "pass"];
pub const NEWTON_HEADER: &[&str] = &["iter", "center_index", "p2max"];

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub algorithm: String,
    pub trial: usize,
    pub seed: u64,
    pub t: u64,
    pub action: usize,
    pub y: f64,
    pub c: f64,
    pub instant_regret: f64,
    pub cum_regret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRecord {
    pub t: u64,
    pub mean_cum_regret: f64,
    pub std_cum_regret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub algorithm: String,
    pub trial: usize,
    pub h: usize,
    pub t_start: u64,
    pub active_size: usize,
    pub support_size: usize,
    pub epoch_len: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRecord {
    pub h: usize,
    pub lemma_id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonRecord {
    pub iter: usize,
    pub center_index: usize,
    pub p2max: f64,
}

/// Shortest round-trip decimal form, with an exponent for very large or
/// small magnitudes.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Serializes a table to CSV bytes.
pub fn to_csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn trace_rows<'a>(algorithm: &'a str, trial: usize, seed: u64, trace: &'a RegretTrace<f64>) -> impl Iterator<Item = Vec<String>> + 'a {
    trace.rows().iter().map(move |r| {
        vec![
            algorithm.to_string(),
            trial.to_string(),
            seed.to_string(),
            r.t.to_string(),
            r.action.to_string(),
            fmt_f64(r.y),
            fmt_f64(r.c),
            fmt_f64(r.instant_regret),
            fmt_f64(r.cum_regret),
        ]
    })
}

pub fn aggregate_rows(agg: &RegretAggregate<f64>) -> impl Iterator<Item = Vec<String>> + '_ {
    agg.mean
        .iter()
        .zip(&agg.std)
        .enumerate()
        .map(|(i, (m, s))| vec![(i + 1).to_string(), fmt_f64(*m), fmt_f64(*s)])
}

pub fn epoch_rows<'a>(algorithm: &'a str, trial: usize, trace: &'a RegretTrace<f64>) -> impl Iterator<Item = Vec<String>> + 'a {
    trace.epochs().iter().map(move |e| {
        vec![
            algorithm.to_string(),
            trial.to_string(),
            e.h.to_string(),
            e.t_start.to_string(),
            e.active_size.to_string(),
            e.support_size.to_string(),
            e.epoch_len.to_string(),
        ]
    })
}

pub fn audit_rows(rows: &[AuditRow]) -> impl Iterator<Item = Vec<String>> + '_ {
    rows.iter().map(|r| {
        vec![
            r.h.to_string(),
            r.lemma_id.to_string(),
            fmt_f64(r.lhs),
            fmt_f64(r.rhs),
            r.pass.to_string(),
        ]
    })
}

pub fn newton_rows(log: &[NewtonStep<f64>]) -> impl Iterator<Item = Vec<String>> + '_ {
    log.iter()
        .map(|s| vec![s.iter.to_string(), s.center_index.to_string(), fmt_f64(s.p2max)])
}

/// Reads a CSV file, checks its header, and returns the data rows.
pub fn read_table(path: &Path, header: &[&str]) -> CliResult<Vec<csv::StringRecord>> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes.as_slice());
    let got = r.headers().map_err(|e| CliError::csv(path, e.to_string()))?.clone();
    if got.is_empty() || got.iter().ne(header.iter().copied()) {
        return Err(CliError::csv(
            path,
            format!("expected header `{}`, found `{}`", header.join(","), got.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    r.records()
        .map(|rec| rec.map_err(|e| CliError::csv(path, e.to_string())))
        .collect()
}

fn field<T: FromStr>(path: &Path, rec: &csv::StringRecord, i: usize, name: &str) -> CliResult<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| CliError::csv(path, format!("line {}: bad `{name}` value `{raw}`", line_of(rec))))
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

pub fn read_trace(path: &Path) -> CliResult<Vec<TraceRecord>> {
    read_table(path, TRACE_HEADER)?
        .iter()
        .map(|r| {
            Ok(TraceRecord {
                algorithm: r.get(0).unwrap_or("").to_string(),
                trial: field(path, r, 1, "trial")?,
                seed: field(path, r, 2, "seed")?,
                t: field(path, r, 3, "t")?,
                action: field(path, r, 4, "action")?,
                y: field(path, r, 5, "y")?,
                c: field(path, r, 6, "c")?,
                instant_regret: field(path, r, 7, "instant_regret")?,
                cum_regret: field(path, r, 8, "cum_regret")?,
            })
        })
        .collect()
}

pub fn read_aggregate(path: &Path) -> CliResult<Vec<AggregateRecord>> {
    read_table(path, AGGREGATE_HEADER)?
        .iter()
        .map(|r| {
            Ok(AggregateRecord {
                t: field(path, r, 0, "t")?,
                mean_cum_regret: field(path, r, 1, "mean_cum_regret")?,
                std_cum_regret: field(path, r, 2, "std_cum_regret")?,
            })
        })
        .collect()
}

pub fn read_epochs(path: &Path) -> CliResult<Vec<EpochRecord>> {
    read_table(path, EPOCH_HEADER)?
        .iter()
        .map(|r| {
            Ok(EpochRecord {
                algorithm: r.get(0).unwrap_or("").to_string(),
                trial: field(path, r, 1, "trial")?,
                h: field(path, r, 2, "h")?,
                t_start: field(path, r, 3, "t_start")?,
                active_size: field(path, r, 4, "active_size")?,
                support_size: field(path, r, 5, "support_size")?,
                epoch_len: field(path, r, 6, "epoch_len")?,
            })
        })
        .collect()
}

pub fn read_audit(path: &Path) -> CliResult<Vec<AuditRecord>> {
    read_table(path, AUDIT_HEADER)?
        .iter()
        .map(|r| {
            Ok(AuditRecord {
                h: field(path, r, 0, "h")?,
                lemma_id: r.get(1).unwrap_or("").to_string(),
                lhs: field(path, r, 2, "lhs")?,
                rhs: field(path, r, 3, "rhs")?,
                pass: field(path, r, 4, "pass")?,
            })
        })
        .collect()
}

pub fn read_newton(path: &Path) -> CliResult<Vec<NewtonRecord>> {
    read_table(path, NEWTON_HEADER)?
        .iter()
        .map(|r| {
            Ok(NewtonRecord {
                iter: field(path, r, 0, "iter")?,
                center_index: field(path, r, 1, "center_index")?,
                p2max: field(path, r, 2, "p2max")?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agg.csv");
        let agg = RegretAggregate {
            mean: vec![0.1 + 0.2, 1.0 / 3.0, 1e-300],
            std: vec![0.0, f64::MIN_POSITIVE, 12345.678901234567],
        };
        write_file(&path, &to_csv_bytes(AGGREGATE_HEADER, aggregate_rows(&agg))).unwrap();
        let back = read_aggregate(&path).unwrap();
        assert_eq!(back.len(), 3);
        for (i, r) in back.iter().enumerate() {
            assert_eq!(r.t, i as u64 + 1);
            assert_eq!(r.mean_cum_regret, agg.mean[i]);
            assert_eq!(r.std_cum_regret, agg.std[i]);
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,mean_cum_regret,std_cum_regret\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn wrong_header_and_bad_values_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
        assert!(matches!(read_aggregate(&path), Err(CliError::Csv { .. })));
        std::fs::write(&path, "t,mean_cum_regret,std_cum_regret\n1,x,3\n").unwrap();
        assert!(matches!(read_aggregate(&path), Err(CliError::Csv { .. })));
        std::fs::write(&path, "").unwrap();
        assert!(matches!(read_aggregate(&path), Err(CliError::Csv { .. })));
    }
}
