//! Deterministic result emission: RFC-4180 CSV artifacts and a line-delimited
//! key-value summary per run. Timestamps live only in the summary so repeated
//! runs with the same config produce byte-identical CSVs.

use std::io::Write;
use std::path::Path;

use crate::commands::ResultRecord;
use crate::config::RunConfig;
use crate::CliError;

pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    w.write_record(header)
        .map_err(|e| CliError::Config(format!("csv write failed: {e}")))?;
    for row in rows {
        w.write_record(&row)
            .map_err(|e| CliError::Config(format!("csv write failed: {e}")))?;
    }
    w.flush()
        .map_err(|e| CliError::Config(format!("csv flush failed: {e}")))?;
    Ok(())
}

pub fn write_summary(cfg: &RunConfig, rec: &ResultRecord) -> Result<(), CliError> {
    let path = cfg.outdir.join(format!("{}_summary.txt", rec.command));
    let mut f = std::fs::File::create(&path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    let mut lines = vec![
        format!("command={}", rec.command),
        format!("config_hash={}", rec.config_hash),
        format!("timestamp={}", rec.timestamp),
    ];
    for (k, v) in &rec.metrics {
        lines.push(format!("{k}={v}"));
    }
    for a in &rec.artifacts {
        lines.push(format!("artifact={}", a.display()));
    }
    writeln!(f, "{}", lines.join("\n"))
        .map_err(|e| CliError::Config(format!("summary write failed: {e}")))?;
    Ok(())
}
