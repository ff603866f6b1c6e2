//! Friction texture synthesis from `(f0, amplitude, irregularity)`.
//!
//! A texture is white noise shaped by a bandpass centered on `f0` whose
//! Q-factor is `1/irregularity`, divided by its own analytic envelope so the
//! result has a flat unit envelope, then scaled by the amplitude.

mod envelope;
mod filter;
mod noise;

pub use envelope::{
    analytic_envelope, analytic_signal, divide_by_envelope, envelope_normalize,
    envelope_normalize_passes, interior, ENVELOPE_FLOOR, MIN_ENVELOPE_LEN, NORMALIZATION_PASSES,
};
pub use filter::{design_bandpass, filter_apply, impulse_response, BiquadCoefficients};
pub use noise::{mix_seed, pink_noise, white_noise};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Native sample rate of the texture pipeline, in Hz.
pub const DEFAULT_FS: f64 = 100_000.0;
/// Default rendered texture length, in seconds.
pub const DEFAULT_DURATION_S: f64 = 2.0;
/// Extra signal synthesized on each side and trimmed after normalization.
pub const EDGE_PAD_S: f64 = 0.25;
/// Length of the loop-closing crossfade at the start of every texture.
pub const LOOP_CROSSFADE_S: f64 = 0.05;

/// Center frequencies of the standard set, in Hz.
pub const FREQUENCIES_HZ: [f64; 3] = [150.0, 260.0, 450.0];
/// Normalized amplitudes of the standard set.
pub const AMPLITUDES: [f64; 3] = [0.30, 0.55, 1.0];
/// Irregularities (1/Q) of the standard set.
pub const IRREGULARITIES: [f64; 3] = [0.067, 0.34, 1.67];

/// The three engineering parameters of a texture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextureParams {
    /// Center frequency in Hz.
    pub f0: f64,
    /// Normalized gain in (0, 1].
    pub amplitude: f64,
    /// Spectral width, `1/Q`.
    pub irregularity: f64,
}

impl TextureParams {
    pub fn new(f0: f64, amplitude: f64, irregularity: f64) -> Result<Self> {
        let params = Self {
            f0,
            amplitude,
            irregularity,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0.is_finite() && self.f0 > 0.0) {
            return Err(invalid("f0", format!("must be positive, got {}", self.f0)));
        }
        if !(self.amplitude > 0.0 && self.amplitude <= 1.0) {
            return Err(invalid(
                "amplitude",
                format!("must lie in (0, 1], got {}", self.amplitude),
            ));
        }
        if !(self.irregularity.is_finite() && self.irregularity > 0.0) {
            return Err(invalid(
                "irregularity",
                format!("must be positive, got {}", self.irregularity),
            ));
        }
        Ok(())
    }

    pub fn q_factor(&self) -> f64 {
        1.0 / self.irregularity
    }

    pub fn filter(&self, fs: f64) -> Result<BiquadCoefficients> {
        design_bandpass(self.f0, self.irregularity, fs)
    }
}

/// A rendered texture: normalized friction command in [-amplitude, amplitude].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextureSignal {
    pub samples: Vec<f64>,
    pub fs: f64,
    pub params: TextureParams,
    pub seed: u64,
    pub duration: f64,
}

impl TextureSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Renders one texture.
///
/// `duration + 2 * EDGE_PAD_S` seconds of noise are filtered and envelope
/// normalized, then the padding is trimmed so neither the filter warm-up nor
/// the wrap-around error of the transform-domain envelope reaches the output.
/// The first [`LOOP_CROSSFADE_S`] blends in the samples that follow the end of
/// the trimmed window, so playing the buffer on repeat has no seam.
pub fn synthesize_texture(
    params: &TextureParams,
    duration: f64,
    fs: f64,
    seed: u64,
) -> Result<TextureSignal> {
    params.validate()?;
    if !(duration.is_finite() && duration > 0.0) {
        return Err(invalid("duration", format!("must be positive, got {duration}")));
    }
    let coeffs = params.filter(fs)?;

    let n_out = (duration * fs).round() as usize;
    if n_out < MIN_ENVELOPE_LEN {
        return Err(invalid("duration", "shorter than four samples at this rate"));
    }
    let pad = (EDGE_PAD_S * fs).round() as usize;
    let fade = ((LOOP_CROSSFADE_S * fs).round() as usize).min(pad).min(n_out / 2);

    let noise = white_noise(n_out + 2 * pad, seed);
    let filtered = coeffs.apply(&noise);
    let normalized = envelope_normalize(&filtered)?;

    let mut samples = normalized[pad..pad + n_out].to_vec();
    let continuation = &normalized[pad + n_out..pad + n_out + fade];
    for (i, (s, &next)) in samples.iter_mut().zip(continuation).enumerate() {
        let w = i as f64 / fade as f64;
        *s = w * *s + (1.0 - w) * next;
    }

    let amp = params.amplitude;
    for s in &mut samples {
        *s = (*s * amp).clamp(-amp, amp);
    }

    Ok(TextureSignal {
        samples,
        fs,
        params: *params,
        seed,
        duration: n_out as f64 / fs,
    })
}

/// One entry of a texture set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextureEntry {
    pub id: u32,
    pub params: TextureParams,
    pub seed: u64,
}

/// Rendering configuration shared by every texture in a set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetConfig {
    pub fs: f64,
    pub duration: f64,
    pub base_seed: u64,
}

impl Default for SetConfig {
    fn default() -> Self {
        Self {
            fs: DEFAULT_FS,
            duration: DEFAULT_DURATION_S,
            base_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextureSet {
    pub config: SetConfig,
    pub entries: Vec<TextureEntry>,
}

/// True for the combinations left out of the standard set: the highest
/// frequency at the lowest amplitude is too faint to feel.
pub fn is_excluded(f0: f64, amplitude: f64) -> bool {
    f0 == FREQUENCIES_HZ[2] && amplitude == AMPLITUDES[0]
}

/// Builds the standard 24-texture set.
///
/// Ids run 1..=24 in `(f0, irregularity, amplitude)` ascending order, so each
/// run of three consecutive ids shares a frequency and irregularity and steps
/// through the amplitudes.
pub fn build_texture_set(fs: f64, duration: f64, base_seed: u64) -> TextureSet {
    let mut entries = Vec::with_capacity(24);
    for &f0 in &FREQUENCIES_HZ {
        for &irregularity in &IRREGULARITIES {
            for &amplitude in &AMPLITUDES {
                if is_excluded(f0, amplitude) {
                    continue;
                }
                let id = entries.len() as u32 + 1;
                entries.push(TextureEntry {
                    id,
                    params: TextureParams {
                        f0,
                        amplitude,
                        irregularity,
                    },
                    seed: mix_seed(base_seed, u64::from(id)),
                });
            }
        }
    }
    TextureSet {
        config: SetConfig {
            fs,
            duration,
            base_seed,
        },
        entries,
    }
}

impl TextureSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.id).collect()
    }

    pub fn get(&self, id: u32) -> Option<&TextureEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn synthesize(&self, entry: &TextureEntry) -> Result<TextureSignal> {
        synthesize_texture(
            &entry.params,
            self.config.duration,
            self.config.fs,
            entry.seed,
        )
    }

    /// Renders every texture, one thread per entry.
    pub fn synthesize_all(&self) -> Result<Vec<TextureSignal>> {
        #[cfg(not(target_arch = "wasm32"))]
        {
            std::thread::scope(|scope| {
                let handles: Vec<_> = self
                    .entries
                    .iter()
                    .map(|e| scope.spawn(move || self.synthesize(e)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("synthesis thread panicked"))
                    .collect()
            })
        }
        #[cfg(target_arch = "wasm32")]
        {
            self.entries.iter().map(|e| self.synthesize(e)).collect()
        }
    }
}

/// Drive-current envelope in mA.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentSignal {
    pub samples: Vec<f64>,
    pub fs: f64,
    pub center_ma: f64,
    pub span_ma: f64,
}

/// Default current at zero friction command, in mA.
pub const CURRENT_CENTER_MA: f64 = 3.0;
/// Default current swing for a unit command, in mA.
pub const CURRENT_SPAN_MA: f64 = 2.0;

/// Maps a normalized command onto the display's linear current range:
/// `center + span * sample`.
pub fn to_current(samples: &[f64], fs: f64, center_ma: f64, span_ma: f64) -> Result<CurrentSignal> {
    if !(span_ma.is_finite() && span_ma > 0.0) {
        return Err(invalid("span", format!("must be positive, got {span_ma}")));
    }
    if center_ma.is_nan() || center_ma < span_ma {
        return Err(invalid(
            "center",
            format!("center - span must be non-negative, got {}", center_ma - span_ma),
        ));
    }
    Ok(CurrentSignal {
        samples: samples.iter().map(|&s| center_ma + span_ma * s).collect(),
        fs,
        center_ma,
        span_ma,
    })
}

impl TextureSignal {
    /// [`to_current`] with the default 3 mA center and 2 mA span.
    pub fn to_current(&self) -> CurrentSignal {
        to_current(&self.samples, self.fs, CURRENT_CENTER_MA, CURRENT_SPAN_MA)
            .expect("default current mapping is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_has_24_textures_without_faint_corner() {
        let set = build_texture_set(DEFAULT_FS, DEFAULT_DURATION_S, 0);
        assert_eq!(set.len(), 24);
        assert_eq!(set.ids(), (1..=24).collect::<Vec<_>>());
        assert!(set
            .entries
            .iter()
            .all(|e| !(e.params.f0 == 450.0 && e.params.amplitude == 0.30)));
        for &f0 in &FREQUENCIES_HZ {
            for &a in &AMPLITUDES {
                let rs: Vec<f64> = set
                    .entries
                    .iter()
                    .filter(|e| e.params.f0 == f0 && e.params.amplitude == a)
                    .map(|e| e.params.irregularity)
                    .collect();
                if is_excluded(f0, a) {
                    assert!(rs.is_empty());
                } else {
                    assert_eq!(rs, IRREGULARITIES.to_vec());
                }
            }
        }
    }

    #[test]
    fn consecutive_ids_step_through_amplitude() {
        let set = build_texture_set(DEFAULT_FS, DEFAULT_DURATION_S, 0);
        let p = |id: u32| set.get(id).unwrap().params;
        assert_eq!(p(1).amplitude, 0.30);
        assert_eq!(p(2).amplitude, 0.55);
        assert_eq!(p(3).amplitude, 1.0);
        assert_eq!(p(3).f0, p(1).f0);
        assert_eq!(p(19).f0, 450.0);
        assert_eq!(p(19).amplitude, 0.55);
    }

    #[test]
    fn texture_respects_amplitude_and_length() {
        let params = TextureParams::new(260.0, 0.55, 0.34).unwrap();
        let t = synthesize_texture(&params, 0.5, DEFAULT_FS, 9).unwrap();
        assert_eq!(t.len(), 50_000);
        assert!(t.peak() <= 0.55);
        assert!(t.peak() > 0.54);
    }

    #[test]
    fn texture_is_deterministic() {
        let params = TextureParams::new(150.0, 1.0, 1.67).unwrap();
        let a = synthesize_texture(&params, 0.3, DEFAULT_FS, 5).unwrap();
        let b = synthesize_texture(&params, 0.3, DEFAULT_FS, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(TextureParams::new(0.0, 0.5, 0.3).is_err());
        assert!(TextureParams::new(100.0, 0.0, 0.3).is_err());
        assert!(TextureParams::new(100.0, 1.2, 0.3).is_err());
        assert!(TextureParams::new(100.0, 0.5, 0.0).is_err());
        let p = TextureParams::new(100.0, 0.5, 0.3).unwrap();
        assert!(synthesize_texture(&p, 0.0, DEFAULT_FS, 0).is_err());
        assert!(synthesize_texture(&p, 1.0, 150.0, 0).is_err());
    }

    #[test]
    fn current_mapping_endpoints() {
        let c = to_current(&[1.0, 0.0, -1.0], 1.0, 3.0, 2.0).unwrap();
        assert_eq!(c.samples, vec![5.0, 3.0, 1.0]);
        assert!(to_current(&[0.0], 1.0, 1.0, 2.0).is_err());
        assert!(to_current(&[0.0], 1.0, 3.0, 0.0).is_err());
    }
}
