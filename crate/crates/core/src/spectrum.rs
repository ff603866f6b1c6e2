//! Spectral checks of rendered textures, sweep generation, transfer-function
//! estimation and turntable kinematics.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::synthesis::{impulse_response, TextureParams};

/// Shortest signal accepted by [`magnitude_spectrum`].
pub const MIN_SPECTRUM_LEN: usize = 16;
/// Default Welch segment length (about 0.66 s at 100 kHz).
pub const DEFAULT_SEGMENT_LEN: usize = 1 << 16;
/// Default band for [`spectral_centroid`], in Hz.
pub const CENTROID_BAND_HZ: (f64, f64) = (50.0, 2000.0);
/// Band reported by [`estimate_response`], in Hz.
pub const RESPONSE_BAND_HZ: (f64, f64) = (10.0, 1000.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            // periodic Hann, so 50% overlapped windows sum to a constant
            Window::Hann => (0..len)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
                .collect(),
        }
    }
}

/// Averaged-periodogram settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    pub segment_len: usize,
    /// Fraction of a segment shared with the next one, in [0, 1).
    pub overlap: f64,
    pub window: Window,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            segment_len: DEFAULT_SEGMENT_LEN,
            overlap: 0.5,
            window: Window::Hann,
        }
    }
}

impl SpectrumOptions {
    /// One rectangular segment spanning the whole signal.
    pub fn single_rectangular(len: usize) -> Self {
        Self {
            segment_len: len,
            overlap: 0.0,
            window: Window::Rectangular,
        }
    }
}

/// Single-sided amplitude spectrum.
///
/// Magnitudes are scaled so a sinusoid of amplitude `a` centered on a bin
/// reads `a` there; with several segments each bin is the RMS over segments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub fs: f64,
    pub window: Window,
    pub segment_len: usize,
    pub segments: usize,
}

struct Segments {
    len: usize,
    starts: Vec<usize>,
    window: Vec<f64>,
}

fn plan_segments(n: usize, opts: &SpectrumOptions) -> Result<Segments> {
    if !(0.0..1.0).contains(&opts.overlap) {
        return Err(invalid("overlap", format!("must lie in [0, 1), got {}", opts.overlap)));
    }
    let len = opts.segment_len.min(n);
    if len < MIN_SPECTRUM_LEN {
        return Err(Error::SignalTooShort {
            len,
            min: MIN_SPECTRUM_LEN,
        });
    }
    let hop = (((1.0 - opts.overlap) * len as f64).round() as usize).max(1);
    let starts: Vec<usize> = (0..).map(|s| s * hop).take_while(|s| s + len <= n).collect();
    Ok(Segments {
        len,
        starts,
        window: opts.window.coefficients(len),
    })
}

fn windowed_fft(
    fft: &dyn rustfft::Fft<f64>,
    data: &[f64],
    window: &[f64],
) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = data
        .iter()
        .zip(window)
        .map(|(&x, &w)| Complex64::new(x * w, 0.0))
        .collect();
    fft.process(&mut buf);
    buf
}

/// Welch magnitude spectrum with default options.
pub fn magnitude_spectrum(signal: &[f64], fs: f64) -> Result<Spectrum> {
    magnitude_spectrum_with(signal, fs, &SpectrumOptions::default())
}

pub fn magnitude_spectrum_with(signal: &[f64], fs: f64, opts: &SpectrumOptions) -> Result<Spectrum> {
    if signal.len() < MIN_SPECTRUM_LEN {
        return Err(Error::SignalTooShort {
            len: signal.len(),
            min: MIN_SPECTRUM_LEN,
        });
    }
    let seg = plan_segments(signal.len(), opts)?;
    let fft = FftPlanner::new().plan_fft_forward(seg.len);
    let bins = seg.len / 2 + 1;
    let mut power = vec![0.0; bins];
    for &start in &seg.starts {
        let spec = windowed_fft(fft.as_ref(), &signal[start..start + seg.len], &seg.window);
        for (p, x) in power.iter_mut().zip(&spec) {
            *p += x.norm_sqr();
        }
    }

    let gain: f64 = seg.window.iter().sum();
    let count = seg.starts.len() as f64;
    let nyquist = if seg.len.is_multiple_of(2) { Some(bins - 1) } else { None };
    let magnitudes = power
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let single_sided = if k == 0 || Some(k) == nyquist { 1.0 } else { 2.0 };
            single_sided * (p / count).sqrt() / gain
        })
        .collect();
    let frequencies = (0..bins).map(|k| k as f64 * fs / seg.len as f64).collect();

    Ok(Spectrum {
        frequencies,
        magnitudes,
        fs,
        window: opts.window,
        segment_len: seg.len,
        segments: seg.starts.len(),
    })
}

impl Spectrum {
    /// Bin spacing in Hz.
    pub fn resolution(&self) -> f64 {
        self.fs / self.segment_len as f64
    }

    /// Mean-square value implied by the spectrum; equals the signal's mean
    /// square for a single rectangular segment.
    pub fn mean_square(&self) -> f64 {
        let last = self.magnitudes.len() - 1;
        let has_nyquist = self.segment_len.is_multiple_of(2);
        self.magnitudes
            .iter()
            .enumerate()
            .map(|(k, m)| {
                if k == 0 || (k == last && has_nyquist) {
                    m * m
                } else {
                    m * m / 2.0
                }
            })
            .sum()
    }

    fn band_indices(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self.frequencies.partition_point(|&f| f < lo);
        let end = self.frequencies.partition_point(|&f| f <= hi);
        start..end.max(start)
    }

    /// Index of the largest magnitude within `[lo, hi]` Hz.
    pub fn peak_index_in(&self, lo: f64, hi: f64) -> Option<usize> {
        self.band_indices(lo, hi)
            .max_by(|&a, &b| self.magnitudes[a].total_cmp(&self.magnitudes[b]).then(b.cmp(&a)))
            .filter(|&k| self.magnitudes[k] > 0.0)
    }

    /// Frequency of the largest magnitude above DC.
    pub fn peak_frequency(&self) -> Option<f64> {
        self.peak_index_in(f64::MIN_POSITIVE, self.fs / 2.0)
            .map(|k| self.frequencies[k])
    }

    /// Peak location from a least-squares parabola through log power versus
    /// log frequency over the half-power main lobe.
    ///
    /// The lobe is located on a copy smoothed over `smooth_half_width` bins;
    /// the fit uses the unsmoothed bins, so it averages out the scatter of a
    /// noisy estimate that makes the single largest bin unreliable.
    pub fn fitted_peak_in(&self, lo_hz: f64, hi_hz: f64, smooth_half_width: usize) -> Result<f64> {
        let smooth = self.smoothed(smooth_half_width);
        let k = smooth
            .peak_index_in(lo_hz.max(f64::MIN_POSITIVE), hi_hz)
            .ok_or_else(|| Error::NoPeak(format!("no energy in {lo_hz}..{hi_hz} Hz")))?;
        let half = smooth.magnitudes[k].powi(2) / 2.0;
        let above = |i: usize| smooth.magnitudes[i].powi(2) > half;
        let mut first = k;
        while first > 1 && above(first - 1) {
            first -= 1;
        }
        let mut last = k;
        while last + 1 < self.magnitudes.len() && above(last + 1) {
            last += 1;
        }
        if last - first < 2 {
            first = k.saturating_sub(1).max(1);
            last = (k + 1).min(self.magnitudes.len() - 1);
        }

        let points: Vec<(f64, f64)> = (first..=last)
            .filter(|&i| self.magnitudes[i] > 0.0 && self.frequencies[i] > 0.0)
            .map(|i| (self.frequencies[i].ln(), 2.0 * self.magnitudes[i].ln()))
            .collect();
        if points.len() < 3 {
            return Ok(smooth.frequencies[k]);
        }
        let x0 = self.frequencies[k].ln();
        let mut normal = nalgebra::Matrix3::<f64>::zeros();
        let mut rhs = nalgebra::Vector3::<f64>::zeros();
        for &(x, y) in &points {
            let u = x - x0;
            let basis = nalgebra::Vector3::new(1.0, u, u * u);
            normal += basis * basis.transpose();
            rhs += basis * y;
        }
        match normal.lu().solve(&rhs) {
            Some(c) if c[2] < 0.0 => {
                let vertex = -c[1] / (2.0 * c[2]);
                let span = (points[0].0 - x0, points[points.len() - 1].0 - x0);
                Ok((x0 + vertex.clamp(span.0, span.1)).exp())
            }
            _ => Ok(smooth.frequencies[k]),
        }
    }

    /// Copy with power averaged over `2 * half_width + 1` neighbouring bins.
    pub fn smoothed(&self, half_width: usize) -> Spectrum {
        let n = self.magnitudes.len();
        let power: Vec<f64> = self.magnitudes.iter().map(|m| m * m).collect();
        let magnitudes = (0..n)
            .map(|k| {
                let lo = k.saturating_sub(half_width);
                let hi = (k + half_width + 1).min(n);
                (power[lo..hi].iter().sum::<f64>() / (hi - lo) as f64).sqrt()
            })
            .collect();
        Spectrum {
            magnitudes,
            ..self.clone()
        }
    }
}

/// Magnitude-weighted mean frequency over [`CENTROID_BAND_HZ`].
pub fn spectral_centroid(spectrum: &Spectrum) -> Result<f64> {
    spectral_centroid_in(spectrum, CENTROID_BAND_HZ.0, CENTROID_BAND_HZ.1)
}

pub fn spectral_centroid_in(spectrum: &Spectrum, lo_hz: f64, hi_hz: f64) -> Result<f64> {
    let (mut weighted, mut total) = (0.0, 0.0);
    for k in spectrum.band_indices(lo_hz, hi_hz) {
        weighted += spectrum.frequencies[k] * spectrum.magnitudes[k];
        total += spectrum.magnitudes[k];
    }
    if total <= 0.0 {
        return Err(Error::ZeroSpectrum { lo_hz, hi_hz });
    }
    Ok(weighted / total)
}

/// Width between the half-power points around the largest peak above DC.
///
/// Crossings are linearly interpolated in power between bins. Pass a
/// [`Spectrum::smoothed`] copy for noisy estimates.
pub fn measured_bandwidth(spectrum: &Spectrum) -> Result<f64> {
    measured_bandwidth_in(spectrum, f64::MIN_POSITIVE, spectrum.fs / 2.0)
}

/// [`measured_bandwidth`] with the peak searched only within `[lo, hi]` Hz.
pub fn measured_bandwidth_in(spectrum: &Spectrum, lo_hz: f64, hi_hz: f64) -> Result<f64> {
    let peak = spectrum
        .peak_index_in(lo_hz, hi_hz)
        .ok_or_else(|| Error::NoPeak(format!("no energy in {lo_hz}..{hi_hz} Hz")))?;
    let power = |k: usize| spectrum.magnitudes[k].powi(2);
    let half = power(peak) / 2.0;
    let freq = &spectrum.frequencies;

    let crossing = |a: usize, b: usize| {
        let (pa, pb) = (power(a), power(b));
        freq[a] + (pa - half) / (pa - pb) * (freq[b] - freq[a])
    };

    let mut lower = None;
    let mut k = peak;
    while k > 0 {
        if power(k - 1) <= half {
            lower = Some(crossing(k, k - 1));
            break;
        }
        k -= 1;
    }
    let mut upper = None;
    let mut k = peak;
    while k + 1 < freq.len() {
        if power(k + 1) <= half {
            upper = Some(crossing(k, k + 1));
            break;
        }
        k += 1;
    }
    match (lower, upper) {
        (Some(lo), Some(hi)) => Ok(hi - lo),
        _ => Err(Error::NoPeak(format!(
            "peak at {} Hz does not fall 3 dB on both sides",
            freq[peak]
        ))),
    }
}

/// A texture filter's response measured from the spectrum of its
/// amplitude-scaled impulse response, next to the closed-form values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterFidelity {
    pub f0_hz: f64,
    pub amplitude: f64,
    pub irregularity: f64,
    pub measured_peak_hz: f64,
    pub measured_bandwidth_hz: f64,
    pub closed_form_bandwidth_hz: f64,
    /// Measured peak magnitude divided by the unit-amplitude peak.
    pub measured_gain: f64,
}

impl FilterFidelity {
    pub fn peak_error(&self) -> f64 {
        (self.measured_peak_hz / self.f0_hz - 1.0).abs()
    }

    /// Relative difference from the nominal bandwidth `f0 * R`.
    pub fn bandwidth_error(&self) -> f64 {
        (self.measured_bandwidth_hz / (self.f0_hz * self.irregularity) - 1.0).abs()
    }
}

/// Measures one texture filter from `len` samples of its impulse response
/// (rectangular window, so a long record gives fine resolution).
pub fn measure_filter(params: &TextureParams, fs: f64, len: usize) -> Result<FilterFidelity> {
    let coeffs = params.filter(fs)?;
    let unit = impulse_response(&coeffs, len);
    let scaled: Vec<f64> = unit.iter().map(|v| v * params.amplitude).collect();
    let opts = SpectrumOptions::single_rectangular(len);
    let spectrum = magnitude_spectrum_with(&scaled, fs, &opts)?;
    let reference = magnitude_spectrum_with(&unit, fs, &opts)?;
    let band = (params.f0 / 20.0, (params.f0 * 20.0).min(fs / 2.0));
    let k = spectrum.peak_index_in(band.0, band.1).ok_or_else(|| Error::NoPeak("impulse response".into()))?;
    Ok(FilterFidelity {
        f0_hz: params.f0,
        amplitude: params.amplitude,
        irregularity: params.irregularity,
        measured_peak_hz: spectrum.fitted_peak_in(band.0, band.1, 0)?,
        measured_bandwidth_hz: measured_bandwidth_in(&spectrum, band.0, band.1)?,
        closed_form_bandwidth_hz: coeffs.half_power_bandwidth(),
        measured_gain: spectrum.magnitudes[k] / reference.magnitudes[k],
    })
}

/// Logarithmic chirp with unit amplitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSignal {
    pub samples: Vec<f64>,
    pub fs: f64,
    pub f_start: f64,
    pub f_end: f64,
    pub duration: f64,
}

impl SweepSignal {
    /// Instantaneous frequency at time `t` seconds.
    pub fn instantaneous_frequency(&self, t: f64) -> f64 {
        self.f_start * (self.f_end / self.f_start).powf(t / self.duration)
    }
}

/// `sin(phi(t))` with `phi' = 2 pi f_start (f_end/f_start)^(t/T)`.
pub fn generate_sweep(f_start: f64, f_end: f64, duration: f64, fs: f64) -> Result<SweepSignal> {
    if !(f_start > 0.0 && f_start < f_end && f_end < fs / 2.0) {
        return Err(invalid(
            "sweep range",
            format!("need 0 < f_start < f_end < fs/2, got {f_start}..{f_end} at {fs} Hz"),
        ));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(invalid("duration", format!("must be positive, got {duration}")));
    }
    let n = (duration * fs).round() as usize;
    let rate = (f_end / f_start).ln() / duration;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            (2.0 * PI * f_start * ((rate * t).exp() - 1.0) / rate).sin()
        })
        .collect();
    Ok(SweepSignal {
        samples,
        fs,
        f_start,
        f_end,
        duration,
    })
}

/// Estimated transfer function over [`RESPONSE_BAND_HZ`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodeData {
    pub frequencies: Vec<f64>,
    pub gain_db: Vec<f64>,
    pub phase_deg: Vec<f64>,
}

impl BodeData {
    /// Gain linearly interpolated at `freq_hz`.
    pub fn gain_db_at(&self, freq_hz: f64) -> Option<f64> {
        interpolate(&self.frequencies, &self.gain_db, freq_hz)
    }

    pub fn phase_deg_at(&self, freq_hz: f64) -> Option<f64> {
        interpolate(&self.frequencies, &self.phase_deg, freq_hz)
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let i = xs.partition_point(|&v| v < x);
    if i == 0 || i == xs.len() {
        return (xs.first() == Some(&x)).then(|| ys[0]);
    }
    let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    Some(ys[i - 1] + t * (ys[i] - ys[i - 1]))
}

/// `H = S_xy / S_xx` from Hann-windowed, half-overlapped segments.
pub fn estimate_response(input: &[f64], output: &[f64], fs: f64) -> Result<BodeData> {
    estimate_response_with(input, output, fs, &SpectrumOptions::default())
}

pub fn estimate_response_with(
    input: &[f64],
    output: &[f64],
    fs: f64,
    opts: &SpectrumOptions,
) -> Result<BodeData> {
    if input.len() != output.len() {
        return Err(Error::LengthMismatch {
            left: input.len(),
            right: output.len(),
        });
    }
    let seg = plan_segments(input.len(), opts)?;
    let fft = FftPlanner::new().plan_fft_forward(seg.len);
    let bins = seg.len / 2 + 1;
    let mut sxx = vec![0.0; bins];
    let mut sxy = vec![Complex64::new(0.0, 0.0); bins];
    for &start in &seg.starts {
        let x = windowed_fft(fft.as_ref(), &input[start..start + seg.len], &seg.window);
        let y = windowed_fft(fft.as_ref(), &output[start..start + seg.len], &seg.window);
        for k in 0..bins {
            sxx[k] += x[k].norm_sqr();
            sxy[k] += x[k].conj() * y[k];
        }
    }

    let (lo, hi) = RESPONSE_BAND_HZ;
    let df = fs / seg.len as f64;
    let band: Vec<usize> = (0..bins)
        .filter(|&k| (lo..=hi).contains(&(k as f64 * df)))
        .collect();
    let max_sxx = sxx.iter().cloned().fold(0.0, f64::max);
    if band.is_empty() || max_sxx <= 0.0 || band.iter().any(|&k| sxx[k] <= 1e-12 * max_sxx) {
        return Err(Error::InsufficientExcitation { lo_hz: lo, hi_hz: hi });
    }

    let mut data = BodeData {
        frequencies: Vec::with_capacity(band.len()),
        gain_db: Vec::with_capacity(band.len()),
        phase_deg: Vec::with_capacity(band.len()),
    };
    for k in band {
        let h = sxy[k] / sxx[k];
        data.frequencies.push(k as f64 * df);
        data.gain_db.push(20.0 * h.norm().log10());
        data.phase_deg.push(h.arg().to_degrees());
    }
    Ok(data)
}

/// Surface speed under a finger `radius_mm` from the turntable axis, in mm/s.
pub fn scan_velocity(rpm: f64, radius_mm: f64) -> f64 {
    2.0 * PI * rpm / 60.0 * radius_mm
}

/// Temporal frequency of a spatial period `wavelength_mm` scanned at
/// `velocity_mm_s`.
pub fn wavelength_to_frequency(velocity_mm_s: f64, wavelength_mm: f64) -> f64 {
    velocity_mm_s / wavelength_mm
}
