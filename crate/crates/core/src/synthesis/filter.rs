//! Second-order bandpass section used to shape white noise into a texture.
//!
//! The section has unit gain at its center frequency and a bandwidth set by
//! the irregularity `R = 1/Q`:
//!
//! ```text
//!          alpha - alpha z^-2
//! H(z) = -------------------------------------------      alpha = sin(w0) / 2Q
//!        (1 + alpha) - 2 cos(w0) z^-1 + (1 - alpha) z^-2   w0 = 2 pi f0 / fs
//! ```

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Unnormalized biquad coefficients plus the design values they came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiquadCoefficients {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub q_factor: f64,
    /// Center frequency in radians per sample.
    pub omega0: f64,
    pub fs: f64,
}

/// Designs the texture bandpass for center frequency `f0` (Hz), irregularity
/// `R` and sample rate `fs`.
pub fn design_bandpass(f0: f64, irregularity: f64, fs: f64) -> Result<BiquadCoefficients> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(invalid("fs", format!("must be positive, got {fs}")));
    }
    if !(f0.is_finite() && f0 > 0.0 && f0 < fs / 2.0) {
        return Err(invalid(
            "f0",
            format!("must lie in (0, {}) Hz, got {f0}", fs / 2.0),
        ));
    }
    if !(irregularity.is_finite() && irregularity > 0.0) {
        return Err(invalid(
            "irregularity",
            format!("must be positive, got {irregularity}"),
        ));
    }

    let q_factor = 1.0 / irregularity;
    let omega0 = 2.0 * PI * f0 / fs;
    let alpha = omega0.sin() / (2.0 * q_factor);

    Ok(BiquadCoefficients {
        b0: alpha,
        b1: 0.0,
        b2: -alpha,
        a0: 1.0 + alpha,
        a1: -2.0 * omega0.cos(),
        a2: 1.0 - alpha,
        q_factor,
        omega0,
        fs,
    })
}

impl BiquadCoefficients {
    /// Center frequency in Hz.
    pub fn center_hz(&self) -> f64 {
        self.omega0 * self.fs / (2.0 * PI)
    }

    /// Complex frequency response at `omega` radians per sample.
    pub fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        let num = self.b0 + self.b1 * z1 + self.b2 * z2;
        let den = self.a0 + self.a1 * z1 + self.a2 * z2;
        num / den
    }

    /// Magnitude response at `freq_hz`.
    pub fn magnitude_at(&self, freq_hz: f64) -> f64 {
        self.response(2.0 * PI * freq_hz / self.fs).norm()
    }

    /// Frequencies in Hz where the gain falls to half power on either side
    /// of the center, by bisection on the closed-form response.
    pub fn half_power_edges(&self) -> (f64, f64) {
        let f0 = self.center_hz();
        let target = self.magnitude_at(f0) / 2f64.sqrt();
        let bisect = |mut inside: f64, mut outside: f64| {
            for _ in 0..200 {
                let mid = 0.5 * (inside + outside);
                if self.magnitude_at(mid) >= target {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
            0.5 * (inside + outside)
        };
        (bisect(f0, 0.0), bisect(f0, self.fs / 2.0))
    }

    /// Closed-form −3 dB bandwidth in Hz.
    pub fn half_power_bandwidth(&self) -> f64 {
        let (lo, hi) = self.half_power_edges();
        hi - lo
    }

    /// Runs the difference equation over `input` from zero state.
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let (b0, b1, b2) = (self.b0 / self.a0, self.b1 / self.a0, self.b2 / self.a0);
        let (a1, a2) = (self.a1 / self.a0, self.a2 / self.a0);
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        input
            .iter()
            .map(|&x| {
                let y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
                x2 = x1;
                x1 = x;
                y2 = y1;
                y1 = y;
                y
            })
            .collect()
    }
}

/// Filters `input` through `coeffs` with zero initial state.
pub fn filter_apply(coeffs: &BiquadCoefficients, input: &[f64]) -> Result<Vec<f64>> {
    if input.is_empty() {
        return Err(crate::Error::EmptyInput("filter input"));
    }
    Ok(coeffs.apply(input))
}

/// Impulse response of `coeffs`, `len` samples long.
pub fn impulse_response(coeffs: &BiquadCoefficients, len: usize) -> Vec<f64> {
    let mut impulse = vec![0.0; len];
    if let Some(first) = impulse.first_mut() {
        *first = 1.0;
    }
    coeffs.apply(&impulse)
}
