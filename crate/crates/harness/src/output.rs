//! CSV result rows and atomic file output.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const HEADER: [&str; 8] = ["experiment", "sweep_name", "sweep_value", "seed", "metric", "value", "trials", "ci"];

/// One metric at one sweep point. `experiment` is `name@confighash`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub sweep_name: String,
    pub sweep_value: f64,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
    pub trials: u64,
    /// 95% confidence half-width.
    pub ci: f64,
}

pub fn to_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(HEADER).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| HarnessError::Config(e.to_string()))
}

pub fn from_csv(bytes: &[u8]) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header != HEADER {
        return Err(HarnessError::Config(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Config(format!("csv: {e}"))
}

/// Writes all rows to a temporary file next to `path` and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let bytes = to_csv(rows)?;
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| HarnessError::io(dir, e))?;
    tmp.write_all(&bytes).map_err(|e| HarnessError::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| HarnessError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| HarnessError::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(metric: &str, value: f64) -> ResultRow {
        ResultRow {
            experiment: "fig9@0123456789abcdef".into(),
            sweep_name: "snr_db".into(),
            sweep_value: 3.0,
            seed: 7,
            metric: metric.into(),
            value,
            trials: 100,
            ci: 0.01,
        }
    }

    #[test]
    fn round_trip() {
        let rows = vec![row("erasure_rate:antennas=1", 0.25), row("error_rate:antennas=1", 1e-4)];
        let bytes = to_csv(&rows).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("experiment,sweep_name,sweep_value,seed,metric,value,trials,ci\n"));
        assert_eq!(from_csv(&bytes).unwrap(), rows);
    }

    #[test]
    fn empty_output_has_header() {
        assert_eq!(to_csv(&[]).unwrap(), b"experiment,sweep_name,sweep_value,seed,metric,value,trials,ci\n");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        std::fs::write(&path, "old").unwrap();
        write_atomic(&path, &[row("m", 1.0)]).unwrap();
        let back = from_csv(&std::fs::read(&path).unwrap()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(from_csv(b"a,b\n1,2\n").is_err());
    }
}
