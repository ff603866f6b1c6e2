//! Analytic-signal envelope and envelope normalization.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Minimum length accepted by the envelope routines.
pub const MIN_ENVELOPE_LEN: usize = 4;

/// Envelope floor used during normalization, relative to the peak envelope.
pub const ENVELOPE_FLOOR: f64 = 1e-6;

/// Division passes made by [`envelope_normalize`].
///
/// After one division the analytic envelope of the result still swings by
/// roughly ±30% around 1 near the nulls of the original; each further pass
/// shrinks that residual.
pub const NORMALIZATION_PASSES: usize = 10;

/// Analytic signal `x + i H{x}` computed in the frequency domain.
///
/// Positive-frequency bins are doubled, negative ones zeroed; DC and (for
/// even lengths) Nyquist are kept as-is. The transform treats the input as
/// periodic, so the ends carry wrap-around error.
pub fn analytic_signal(signal: &[f64]) -> Result<Vec<Complex64>> {
    let n = signal.len();
    if n < MIN_ENVELOPE_LEN {
        return Err(Error::SignalTooShort {
            len: n,
            min: MIN_ENVELOPE_LEN,
        });
    }
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);

    let mut buf: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    forward.process(&mut buf);

    let half = n / 2;
    let last_positive = if n.is_multiple_of(2) { half - 1 } else { half };
    for v in &mut buf[1..=last_positive] {
        *v *= 2.0;
    }
    for v in &mut buf[last_positive + 1 + usize::from(n.is_multiple_of(2))..] {
        *v = Complex64::new(0.0, 0.0);
    }

    inverse.process(&mut buf);
    let scale = 1.0 / n as f64;
    for v in &mut buf {
        *v *= scale;
    }
    Ok(buf)
}

/// Magnitude of the analytic signal.
pub fn analytic_envelope(signal: &[f64]) -> Result<Vec<f64>> {
    Ok(analytic_signal(signal)?.iter().map(|z| z.norm()).collect())
}

/// Flattens the envelope of `signal` to 1 by dividing it by its own analytic
/// envelope [`NORMALIZATION_PASSES`] times.
///
/// Every pass keeps `|output| <= 1`, since a sample never exceeds the
/// magnitude of its analytic signal.
pub fn envelope_normalize(signal: &[f64]) -> Result<Vec<f64>> {
    envelope_normalize_passes(signal, NORMALIZATION_PASSES)
}

/// [`envelope_normalize`] with an explicit pass count (at least one).
pub fn envelope_normalize_passes(signal: &[f64], passes: usize) -> Result<Vec<f64>> {
    let mut out = divide_by_envelope(signal)?;
    for _ in 1..passes {
        out = divide_by_envelope(&out)?;
    }
    Ok(out)
}

/// Divides `signal` by its analytic envelope once, sample by sample.
///
/// The envelope is floored at [`ENVELOPE_FLOOR`] times its peak so deep nulls
/// do not blow up.
pub fn divide_by_envelope(signal: &[f64]) -> Result<Vec<f64>> {
    let envelope = analytic_envelope(signal)?;
    let peak = envelope.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 || !peak.is_finite() {
        return Err(Error::SilentSignal);
    }
    let floor = ENVELOPE_FLOOR * peak;
    Ok(signal
        .iter()
        .zip(&envelope)
        .map(|(&x, &e)| x / e.max(floor))
        .collect())
}

/// The central `fraction` of a sequence, trimming equally from both ends.
pub fn interior(values: &[f64], fraction: f64) -> &[f64] {
    let n = values.len();
    let cut = ((1.0 - fraction.clamp(0.0, 1.0)) * n as f64 / 2.0).round() as usize;
    &values[cut.min(n)..n.saturating_sub(cut).max(cut.min(n))]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(amp: f64, freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / fs).sin())
            .collect()
    }

    #[test]
    fn tone_envelope_is_its_amplitude() {
        let x = tone(0.7, 260.0, 100_000.0, 50_000);
        let env = analytic_envelope(&x).unwrap();
        let inner = interior(&env, 0.9);
        assert!(inner.iter().all(|e| (e - 0.7).abs() < 0.007));
        assert!(env.iter().all(|&e| e >= 0.0));
    }

    #[test]
    fn silence_has_zero_envelope() {
        let env = analytic_envelope(&[0.0; 32]).unwrap();
        assert!(env.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn amplitude_modulated_tone_tracks_modulator() {
        let fs = 100_000.0;
        let n = 100_000;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                (1.0 + 0.5 * (2.0 * PI * 5.0 * t).sin()) * (2.0 * PI * 260.0 * t).sin()
            })
            .collect();
        let env = analytic_envelope(&x).unwrap();
        let cut = n / 20;
        for (i, &e) in env.iter().enumerate().take(n - cut).skip(cut) {
            let t = i as f64 / fs;
            let m = 1.0 + 0.5 * (2.0 * PI * 5.0 * t).sin();
            assert!((e - m).abs() / m < 0.02, "i={i} env={e} m={m}");
        }
    }

    #[test]
    fn odd_length_matches_tone() {
        let x = tone(1.0, 1000.0, 100_000.0, 10_001);
        let env = analytic_envelope(&x).unwrap();
        assert!(interior(&env, 0.8).iter().all(|e| (e - 1.0).abs() < 0.01));
    }

    #[test]
    fn normalizing_a_tone_gives_unit_amplitude() {
        let x = tone(0.3, 260.0, 100_000.0, 50_000);
        let y = envelope_normalize(&x).unwrap();
        let inner = interior(&y, 0.9);
        let peak = inner.iter().cloned().fold(0.0, |m: f64, v| m.max(v.abs()));
        assert!((peak - 1.0).abs() < 0.01, "peak {peak}");
    }

    #[test]
    fn repeated_passes_flatten_narrowband_noise() {
        use crate::synthesis::{design_bandpass, white_noise};
        let c = design_bandpass(260.0, 0.067, 100_000.0).unwrap();
        let x = c.apply(&white_noise(250_000, 17));
        let flat_fraction = |y: &[f64]| {
            let env = analytic_envelope(y).unwrap();
            let inner = interior(&env, 0.9);
            inner.iter().filter(|e| (0.9..=1.1).contains(*e)).count() as f64 / inner.len() as f64
        };
        let once = divide_by_envelope(&x).unwrap();
        let full = envelope_normalize(&x).unwrap();
        assert!(flat_fraction(&once) < 0.9);
        assert!(flat_fraction(&full) >= 0.9, "{}", flat_fraction(&full));
        assert!(full.iter().all(|v| v.abs() <= 1.0 + 1e-9));
    }

    #[test]
    fn normalizing_silence_fails() {
        assert!(matches!(
            envelope_normalize(&[0.0; 16]),
            Err(Error::SilentSignal)
        ));
        assert!(matches!(
            analytic_envelope(&[1.0, 2.0]),
            Err(Error::SignalTooShort { .. })
        ));
    }

    #[test]
    fn interior_trims_both_ends() {
        let v: Vec<f64> = (0..100).map(f64::from).collect();
        let i = interior(&v, 0.9);
        assert_eq!(i.len(), 90);
        assert_eq!(i[0], 5.0);
    }
}
