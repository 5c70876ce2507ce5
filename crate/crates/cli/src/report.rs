//! Frequency tables and error metrics.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalRow {
    pub mode: usize,
    pub full_hz: f64,
    pub rom_hz: f64,
    pub error_pct: f64,
}

/// Frequency comparison of the first `rows` modes.
pub fn modal_report(full_hz: &[f64], rom_hz: &[f64], rows: usize) -> Vec<ModalRow> {
    full_hz
        .iter()
        .zip(rom_hz)
        .take(rows)
        .enumerate()
        .map(|(k, (&f, &r))| ModalRow {
            mode: k + 1,
            full_hz: f,
            rom_hz: r,
            error_pct: 100.0 * (r - f).abs() / f,
        })
        .collect()
}

pub fn write_modal_csv(rows: &[ModalRow], mut w: impl std::io::Write) -> std::io::Result<()> {
    writeln!(w, "mode,full_hz,rom_hz,error_pct")?;
    for r in rows {
        writeln!(w, "{},{:.6},{:.6},{:.4}", r.mode, r.full_hz, r.rom_hz, r.error_pct)?;
    }
    Ok(())
}

/// `‖x - ref‖₂ / ‖ref‖₂`.
pub fn rms_relative_error(x: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = reference.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

/// `max |x - ref| / max |ref|`.
pub fn peak_relative_error(x: &[f64], reference: &[f64]) -> f64 {
    let num = x.iter().zip(reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let den = reference.iter().map(|b| b.abs()).fold(0.0, f64::max);
    num / den
}

pub fn peak_amplitude(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Error of one variant at one probe against the full model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub variant: String,
    pub probe: String,
    pub rms_rel_err: f64,
    pub peak_rel_err: f64,
    pub wall_clock_s: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_spectra_have_zero_error() {
        let f = [269.5, 742.8, 1456.8];
        let rows = modal_report(&f, &f, 2);
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.error_pct == 0.0));
    }

    #[test]
    fn percentage_error() {
        let rows = modal_report(&[100.0, 200.0], &[101.0, 198.0], 4);
        assert_eq!(rows.len(), 2);
        assert!((rows[0].error_pct - 1.0).abs() < 1e-12);
        assert!((rows[1].error_pct - 1.0).abs() < 1e-12);
    }

    #[test]
    fn error_norms() {
        let r = [1.0, -2.0, 2.0];
        assert_eq!(rms_relative_error(&r, &r), 0.0);
        let x = [1.0, -2.0, 1.0];
        assert!((rms_relative_error(&x, &r) - 1.0 / 3.0).abs() < 1e-15);
        assert!((peak_relative_error(&x, &r) - 0.5).abs() < 1e-15);
        assert_eq!(peak_amplitude(&r), 2.0);
    }
}
