//! Per-epoch training telemetry as append-only CSV.

use crate::dataset::Split;
use crate::error::Result;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

pub const METRICS_HEADER: &str = "epoch,split,loss,accuracy,lr,wall_s";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    pub accuracy: f64,
    pub lr: f64,
    pub wall_s: f64,
}

/// Renders with 6 significant digits, plain decimal notation.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0.000000".to_string();
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (5 - exponent).clamp(0, 17) as usize;
    format!("{v:.decimals$}")
}

/// Appends one CSV line, writing the header first on an empty file.
pub fn append_metrics(path: &Path, row: &MetricsRow) -> Result<()> {
    debug_assert!((0.0..=1.0).contains(&row.accuracy));
    debug_assert!(row.loss >= 0.0);
    let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(file, "{METRICS_HEADER}")?;
    }
    writeln!(
        file,
        "{},{},{},{},{},{}",
        row.epoch,
        row.split.as_str(),
        format_sig6(row.loss),
        format_sig6(row.accuracy),
        format_sig6(row.lr),
        format_sig6(row.wall_s),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig6(0.9301), "0.930100");
        assert_eq!(format_sig6(2.302585), "2.30259");
        assert_eq!(format_sig6(0.05), "0.0500000");
        assert_eq!(format_sig6(0.0), "0.000000");
        assert_eq!(format_sig6(123456.0), "123456");
    }

    #[test]
    fn header_then_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let row = MetricsRow {
            epoch: 1,
            split: Split::Train,
            loss: 1.5,
            accuracy: 0.9301,
            lr: 0.05,
            wall_s: 0.0,
        };
        append_metrics(&path, &row).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], METRICS_HEADER);
        assert_eq!(lines[1], "1,train,1.50000,0.930100,0.0500000,0.000000");

        append_metrics(&path, &row).unwrap();
        append_metrics(&path, &row).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
    }
}
