use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use super::config::OutputFormat;
use super::experiment::TrialRow;
use crate::baselines::{BaselineKind, GridSpec};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = [
    "scheme",
    "sweep_value",
    "mean_rate_bps_hz",
    "stderr",
    "trials",
    "mean_iters",
    "mean_seconds",
];

/// Summary of one (scheme, sweep value) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub scheme: BaselineKind,
    pub sweep_value: f64,
    pub mean_rate_bps_hz: f64,
    /// Sample standard deviation over `sqrt(trials)`; 0 for one trial.
    pub stderr: f64,
    pub trials: usize,
    pub mean_iters: f64,
    pub mean_seconds: f64,
    /// Search grid, on upper-bound rows only. Not part of the CSV form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufWriter::new(f))
}

/// Writes aggregate rows. Floats use the shortest representation that
/// parses back to the same value.
pub fn write_results<W: Write>(rows: &[AggregateRow], format: OutputFormat, out: W) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Precondition("no result rows to write".into()));
    }
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER)?;
            for r in rows {
                w.write_record([
                    r.scheme.to_string(),
                    r.sweep_value.to_string(),
                    r.mean_rate_bps_hz.to_string(),
                    r.stderr.to_string(),
                    r.trials.to_string(),
                    r.mean_iters.to_string(),
                    r.mean_seconds.to_string(),
                ])?;
            }
            w.flush().map_err(csv::Error::from)?;
        }
        OutputFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows)?;
            out.write_all(b"\n").map_err(|e| Error::Json(serde_json::Error::io(e)))?;
        }
    }
    Ok(())
}

pub fn emit_results(rows: &[AggregateRow], format: OutputFormat, path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Precondition("no result rows to write".into()));
    }
    let mut f = create(path)?;
    write_results(rows, format, &mut f)?;
    f.flush().map_err(|e| Error::io(path, e))
}

/// Writes per-trial rows.
pub fn emit_trials(rows: &[TrialRow], format: OutputFormat, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut f);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut f, rows)?;
            f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
    }
    f.flush().map_err(|e| Error::io(path, e))
}

/// Parses the CSV form written by [`write_results`].
pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Precondition(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<AggregateRow> {
        vec![
            AggregateRow {
                scheme: BaselineKind::FpaSub,
                sweep_value: 0.5,
                mean_rate_bps_hz: 1.0 / 3.0,
                stderr: 0.1 + 0.2,
                trials: 3,
                mean_iters: 17.333333333333332,
                mean_seconds: 0.0,
                grid: None,
            },
            AggregateRow {
                scheme: BaselineKind::UpperBound,
                sweep_value: -10.0,
                mean_rate_bps_hz: 12.345678901234567,
                stderr: 1e-17,
                trials: 100,
                mean_iters: 2.0,
                mean_seconds: 3.5e-3,
                grid: Some(GridSpec::default()),
            },
        ]
    }

    #[test]
    fn csv_header_and_round_trip() {
        let mut buf = Vec::new();
        write_results(&rows(), OutputFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("scheme,sweep_value,mean_rate_bps_hz,stderr,trials,mean_iters,mean_seconds\n"));
        let back = read_csv(&buf[..]).unwrap();
        let mut expect = rows();
        expect[1].grid = None;
        assert_eq!(back, expect);
    }

    #[test]
    fn csv_and_json_agree() {
        let mut c = Vec::new();
        let mut j = Vec::new();
        write_results(&rows(), OutputFormat::Csv, &mut c).unwrap();
        write_results(&rows(), OutputFormat::Json, &mut j).unwrap();
        let from_csv = read_csv(&c[..]).unwrap();
        let mut from_json: Vec<AggregateRow> = serde_json::from_slice(&j).unwrap();
        from_json.iter_mut().for_each(|r| r.grid = None);
        assert_eq!(from_csv, from_json);
    }

    #[test]
    fn empty_rows_rejected() {
        let err = write_results(&[], OutputFormat::Csv, Vec::new()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn unwritable_path_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let target = blocker.join("out.csv");
        match emit_results(&rows(), OutputFormat::Csv, &target) {
            Err(Error::Io { path, .. }) => assert!(path.starts_with(&blocker)),
            other => panic!("{other:?}"),
        }
    }
}
