use super::isotonic::isotonic_fit;
use super::Configuration;
use crate::error::{Error, Result};
use crate::grouping::DissimilarityMatrix;

/// Kruskal's stress formula 1: `sqrt(sum (d - dhat)^2 / sum d^2)`.
pub fn stress1(distances: &[f64], disparities: &[f64]) -> Result<f64> {
    if distances.len() != disparities.len() {
        return Err(Error::LengthMismatch {
            left: distances.len(),
            right: disparities.len(),
        });
    }
    let denominator: f64 = distances.iter().map(|d| d * d).sum();
    if denominator <= 0.0 {
        return Err(Error::EmptyInput("all distances are zero"));
    }
    let numerator: f64 = distances
        .iter()
        .zip(disparities)
        .map(|(d, h)| (d - h).powi(2))
        .sum();
    Ok((numerator / denominator).sqrt())
}

/// Stress-1 of `coords` against `diss`, with disparities from the monotone
/// regression of the configuration's distances.
pub fn kruskal_stress(diss: &DissimilarityMatrix, coords: &Configuration) -> Result<f64> {
    if diss.n() != coords.n {
        return Err(Error::LengthMismatch {
            left: diss.n(),
            right: coords.n,
        });
    }
    let distances = coords.pair_distances();
    let disparities = isotonic_fit(&diss.upper_triangle(), &distances);
    stress1(&distances, &disparities)
}
