use std::io::Cursor;

use crate::error::{invalid, Error, Result};

/// Preview rate for audio playback.
pub const PREVIEW_RATE: u32 = 44_100;
/// Anti-alias cutoff applied before resampling to the preview rate.
pub const PREVIEW_CUTOFF_HZ: f64 = 20_000.0;

/// Half-length of the resampling kernel, in input samples.
const KERNEL_HALF_WIDTH: i64 = 160;
const KAISER_BETA: f64 = 8.0;
const MAX_PHASES: u64 = 20_000;

/// 16-bit mono PCM WAV. Samples are clamped to `[-1, 1]`.
pub fn wav_bytes(samples: &[f64], fs: u32) -> Result<Vec<u8>> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: fs,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut buf = Cursor::new(Vec::with_capacity(44 + 2 * samples.len()));
    {
        let mut w = hound::WavWriter::new(&mut buf, spec)?;
        for &s in samples {
            w.write_sample((s.clamp(-1.0, 1.0) * f64::from(i16::MAX)).round() as i16)?;
        }
        w.finalize()?;
    }
    Ok(buf.into_inner())
}

/// Decodes a mono 16-bit WAV into samples in `[-1, 1]` and its rate.
pub fn read_wav_bytes(bytes: &[u8]) -> Result<(Vec<f64>, u32)> {
    let reader = hound::WavReader::new(Cursor::new(bytes))?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(invalid("wav", "expected mono 16-bit PCM"));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / f64::from(i16::MAX)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((samples, spec.sample_rate))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn bessel_i0(x: f64) -> f64 {
    let (mut sum, mut term, mut k) = (1.0, 1.0, 1.0);
    while term > 1e-12 * sum {
        term *= (x / (2.0 * k)).powi(2);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Resamples a looping signal from `fs_in` to `fs_out` after low-passing at
/// `cutoff_hz`, with a Kaiser-windowed sinc kernel.
///
/// The input is treated as periodic, so a seamless loop stays seamless. The
/// output has `round(len * fs_out / fs_in)` samples.
pub fn resample_loop(samples: &[f64], fs_in: u32, fs_out: u32, cutoff_hz: f64) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples to resample"));
    }
    if fs_in == 0 || fs_out == 0 {
        return Err(invalid("sample rate", "must be positive"));
    }
    let nyquist = f64::from(fs_in.min(fs_out)) / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(invalid("cutoff", format!("must lie in (0, {nyquist}) Hz, got {cutoff_hz}")));
    }
    let g = gcd(u64::from(fs_in), u64::from(fs_out));
    let (up, down) = (u64::from(fs_out) / g, u64::from(fs_in) / g);
    if up > MAX_PHASES {
        return Err(invalid("sample rate", format!("ratio {fs_out}/{fs_in} needs too many kernel phases")));
    }

    // one kernel per fractional input offset; offsets repeat every `up` outputs
    let fc = cutoff_hz / f64::from(fs_in);
    let taps = (2 * KERNEL_HALF_WIDTH) as usize;
    let half = KERNEL_HALF_WIDTH as f64;
    let norm = bessel_i0(KAISER_BETA);
    let kernels: Vec<Vec<f64>> = (0..up)
        .map(|p| {
            let frac = p as f64 / up as f64;
            let mut k: Vec<f64> = (0..taps)
                .map(|j| {
                    let tau = frac - (j as f64 - half + 1.0);
                    let r = tau / half;
                    if r.abs() >= 1.0 {
                        return 0.0;
                    }
                    let x = 2.0 * fc * tau;
                    let sinc = if x == 0.0 { 1.0 } else { (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x) };
                    2.0 * fc * sinc * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm
                })
                .collect();
            let sum: f64 = k.iter().sum();
            k.iter_mut().for_each(|v| *v /= sum);
            k
        })
        .collect();

    let n = samples.len() as i64;
    let out_len = ((samples.len() as u64 * up + down / 2) / down) as usize;
    Ok((0..out_len as u64)
        .map(|m| {
            let pos = m * down;
            let base = (pos / up) as i64;
            let kernel = &kernels[(pos % up) as usize];
            kernel
                .iter()
                .enumerate()
                .map(|(j, h)| h * samples[(base + j as i64 - KERNEL_HALF_WIDTH + 1).rem_euclid(n) as usize])
                .sum()
        })
        .collect())
}

/// Low-passed 44.1 kHz preview of a looping signal.
pub fn preview_wav_bytes(samples: &[f64], fs: u32) -> Result<Vec<u8>> {
    let resampled = resample_loop(samples, fs, PREVIEW_RATE, PREVIEW_CUTOFF_HZ)?;
    wav_bytes(&resampled, PREVIEW_RATE)
}
