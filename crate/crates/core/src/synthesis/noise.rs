//! Seeded noise sources.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Zero-mean, unit-variance Gaussian white noise; identical for identical
/// `(n_samples, seed)`.
pub fn white_noise(n_samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples).map(|_| rng.sample(StandardNormal)).collect()
}

/// Pink (1/f) noise scaled to a peak magnitude of `peak`.
///
/// Uses Paul Kellet's refined three-pole-plus approximation on top of
/// [`white_noise`].
pub fn pink_noise(n_samples: usize, seed: u64, peak: f64) -> Vec<f64> {
    let white = white_noise(n_samples, seed);
    let mut b = [0.0f64; 7];
    let mut out: Vec<f64> = white
        .iter()
        .map(|&w| {
            b[0] = 0.99886 * b[0] + w * 0.0555179;
            b[1] = 0.99332 * b[1] + w * 0.0750759;
            b[2] = 0.96900 * b[2] + w * 0.1538520;
            b[3] = 0.86650 * b[3] + w * 0.3104856;
            b[4] = 0.55000 * b[4] + w * 0.5329522;
            b[5] = -0.7616 * b[5] - w * 0.0168980;
            let y = b.iter().sum::<f64>() + w * 0.5362;
            b[6] = w * 0.115926;
            y
        })
        .collect();
    let max = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max > 0.0 {
        for v in &mut out {
            *v *= peak / max;
        }
    }
    out
}

/// SplitMix64 finalizer; spreads nearby seeds across the state space.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
