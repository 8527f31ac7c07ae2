//! CSV output.

use std::io::Write;

use msep::sim::SerPoint;

pub const CSV_HEADER: [&str; 7] = ["method", "snr_db", "ser", "std_err", "errors", "decisions", "seed"];

/// Writes one row per point. Floats use the shortest round-trip form, so
/// equal results give byte-identical files.
pub fn write_csv<W: Write>(out: W, points: &[SerPoint], seed: u64) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for p in points {
        w.write_record([
            p.method.to_string(),
            p.snr_db.to_string(),
            p.ser.to_string(),
            p.std_err.to_string(),
            p.error_count.to_string(),
            p.decision_count.to_string(),
            seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One human-readable line per point.
pub fn summary_line(p: &SerPoint) -> String {
    format!(
        "{:<18} {:>6} dB  SER {:.6e} +- {:.1e}  ({} errors / {} decisions{})",
        p.method.to_string(),
        p.snr_db,
        p.ser,
        p.std_err,
        p.error_count,
        p.decision_count,
        if p.skipped > 0 { format!(", {} skipped", p.skipped) } else { String::new() }
    )
}
