//! Amplitude spectra of sampled signals.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// One-sided amplitude spectrum `(frequency [Hz], amplitude)` of a uniformly
/// sampled signal with a rectangular window. A sinusoid of amplitude `A` on
/// an exact bin shows up with amplitude `A`.
pub fn spectrum(signal: &[f64], dt: f64) -> Vec<(f64, f64)> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = 1.0 / (n as f64 * dt);
    (0..=n / 2)
        .map(|k| {
            let scale = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
            (k as f64 * df, scale * buf[k].norm() / n as f64)
        })
        .collect()
}

/// Largest amplitude within `tolerance` Hz of `frequency`.
pub fn amplitude_near(spec: &[(f64, f64)], frequency: f64, tolerance: f64) -> f64 {
    spec.iter()
        .filter(|(f, _)| (f - frequency).abs() <= tolerance)
        .map(|&(_, a)| a)
        .fold(0.0, f64::max)
}

/// Frequency of the largest non-DC component.
pub fn dominant_frequency(spec: &[(f64, f64)]) -> Option<f64> {
    spec.iter()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|&(f, _)| f)
}
