use nalgebra::{DMatrix, SymmetricEigen};

use super::Configuration;
use crate::error::{invalid, Result};
use crate::grouping::DissimilarityMatrix;

/// Classical (Torgerson) scaling: top-`k` eigenvectors of the double-centered
/// squared dissimilarities, scaled by the square roots of their eigenvalues.
/// Negative eigenvalues are clamped to zero.
pub fn classical_mds(diss: &DissimilarityMatrix, k: usize) -> Result<Configuration> {
    let n = diss.n();
    if k == 0 || n < k + 1 {
        return Err(invalid("k", format!("need 1 <= k < n = {n}, got {k}")));
    }
    let squared = DMatrix::from_fn(n, n, |i, j| diss.get(i, j).powi(2));
    let row_means: Vec<f64> = (0..n).map(|i| squared.row(i).mean()).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let gram = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (squared[(i, j)] - row_means[i] - row_means[j] + grand)
    });

    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut coords = Configuration::zeros(n, k);
    for (d, &e) in order.iter().take(k).enumerate() {
        let scale = eig.eigenvalues[e].max(0.0).sqrt();
        for i in 0..n {
            coords.set(i, d, eig.eigenvectors[(i, e)] * scale);
        }
    }
    coords.center();
    Ok(coords)
}
