use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{BenchError, Result};
use crate::sweep::TrialStats;

pub const CSV_HEADER: [&str; 6] = ["estimator", "m", "median_rel_err", "q25", "q75", "mean_matvecs"];

// 17 significant digits: every f64 survives a text round trip
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes one row per cell with LF line endings.
pub fn write_csv<W: Write>(stats: &[TrialStats], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for s in stats {
        w.write_record([
            s.estimator.name().to_string(),
            s.m.to_string(),
            real(s.median_rel_err),
            real(s.q25_rel_err),
            real(s.q75_rel_err),
            real(s.mean_matvecs),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(stats: &[TrialStats], destination: &Path) -> Result<()> {
    let file = File::create(destination).map_err(|source| BenchError::File {
        path: destination.display().to_string(),
        source,
    })?;
    write_csv(stats, BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use trace_core::EstimatorKind;

    fn cell() -> TrialStats {
        TrialStats {
            estimator: EstimatorKind::NaHutchPlusPlus,
            m: 48,
            median_rel_err: 0.1,
            q25_rel_err: 1.0 / 3.0,
            q75_rel_err: 2.5e-17,
            mean_matvecs: 48.0,
        }
    }

    #[test]
    fn header_only_when_empty() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "estimator,m,median_rel_err,q25,q75,mean_matvecs\n"
        );
    }

    #[test]
    fn one_cell_two_lines() {
        let mut buf = Vec::new();
        write_csv(&[cell()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.contains('\r'));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("na_hutch_pp,48,1.0000000000000001e-1,"));
    }

    #[test]
    fn unwritable_destination() {
        let err = emit_csv(&[cell()], Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(matches!(err, BenchError::File { .. }));
    }
}
