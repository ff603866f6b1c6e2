use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Configuration;
use crate::error::{Error, Result};

/// Result of aligning one configuration onto another.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcrustesFit {
    /// The moving configuration mapped into the reference frame.
    pub aligned: Configuration,
    /// `1 - (sum of singular values)^2` after scaling both to unit size; 0 for
    /// an exact similarity match, at most 1.
    pub residual: f64,
    pub scale: f64,
}

/// Best rotation/reflection, uniform scale and translation taking `moving`
/// onto `reference`.
pub fn procrustes_align(reference: &Configuration, moving: &Configuration) -> Result<ProcrustesFit> {
    if (reference.n, reference.k) != (moving.n, moving.k) {
        return Err(Error::LengthMismatch {
            left: reference.n * reference.k,
            right: moving.n * moving.k,
        });
    }
    let mean_ref = reference.column_means();
    let mut a = reference.to_matrix();
    let mut b = moving.to_matrix();
    for (d, &m) in mean_ref.iter().enumerate() {
        let mb = b.column(d).mean();
        a.column_mut(d).add_scalar_mut(-m);
        b.column_mut(d).add_scalar_mut(-mb);
    }
    let (norm_a, norm_b) = (a.norm(), b.norm());
    if norm_a <= f64::EPSILON || norm_b <= f64::EPSILON {
        return Err(Error::RankDeficient);
    }
    a /= norm_a;
    b /= norm_b;

    let svd = (b.transpose() * &a).svd(true, true);
    let (u, v_t) = (
        svd.u.ok_or(Error::RankDeficient)?,
        svd.v_t.ok_or(Error::RankDeficient)?,
    );
    let rotation = u * v_t;
    let trace: f64 = svd.singular_values.iter().sum();

    let mut aligned: DMatrix<f64> = b * rotation * (trace * norm_a);
    for (d, &m) in mean_ref.iter().enumerate() {
        aligned.column_mut(d).add_scalar_mut(m);
    }
    Ok(ProcrustesFit {
        aligned: Configuration::from_matrix(&aligned),
        residual: (1.0 - trace * trace).clamp(0.0, 1.0),
        scale: trace * norm_a / norm_b,
    })
}
