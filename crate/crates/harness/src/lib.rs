//! Experiment harness for the tonedisc simulator: config files, trial
//! scheduling, CSV output, the invariant oracle and a codec debug front end.

pub mod codec_cli;
pub mod config;
pub mod error;
pub mod oracle;
pub mod output;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{HarnessError, Result};
pub use output::ResultRow;
pub use run::{run, RunOutput};

use std::path::Path;

/// Runs `cfg` and writes the CSV atomically to `out`, or returns the bytes
/// when `out` is `None`. Oracle failures are reported after the file is
/// written.
pub fn run_and_write(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Option<Vec<u8>>> {
    let result = run(cfg)?;
    let bytes = match out {
        Some(path) => {
            output::write_atomic(path, &result.rows)?;
            None
        }
        None => Some(output::to_csv(&result.rows)?),
    };
    if result.failed_checks > 0 {
        return Err(HarnessError::Oracle {
            failed: result.failed_checks,
            total: result.rows.len(),
        });
    }
    Ok(bytes)
}
