//! Nonmetric multidimensional scaling: Kruskal stress-1 minimized by
//! majorization (Guttman transform) alternating with monotone regression.

mod classical;
mod isotonic;
mod procrustes;
mod stress;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grouping::{DissimilarityMatrix, TextureId};
use crate::synthesis::mix_seed;

pub use classical::classical_mds;
pub use isotonic::{isotonic_fit, pava, primary_order};
pub use procrustes::{procrustes_align, ProcrustesFit};
pub use stress::{kruskal_stress, stress1};

/// Stress at or below which a dimensionality is considered adequate.
pub const STRESS_CUTOFF: f64 = 0.15;

/// `n` points in `k` dimensions, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub n: usize,
    pub k: usize,
    pub data: Vec<f64>,
}

impl Configuration {
    pub fn zeros(n: usize, k: usize) -> Self {
        Self { n, k, data: vec![0.0; n * k] }
    }

    /// Panics when rows have unequal lengths.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let k = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == k), "ragged rows");
        Self { n: rows.len(), k, data: rows.concat() }
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let (n, k) = m.shape();
        let mut c = Self::zeros(n, k);
        for i in 0..n {
            for d in 0..k {
                c.set(i, d, m[(i, d)]);
            }
        }
        c
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.k, &self.data)
    }

    pub fn get(&self, i: usize, d: usize) -> f64 {
        self.data[i * self.k + d]
    }

    pub fn set(&mut self, i: usize, d: usize, v: f64) {
        self.data[i * self.k + d] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, d)).collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        (0..self.k)
            .map(|d| self.column(d).iter().sum::<f64>() / self.n.max(1) as f64)
            .collect()
    }

    pub fn center(&mut self) {
        let means = self.column_means();
        for i in 0..self.n {
            for (d, m) in means.iter().enumerate() {
                self.data[i * self.k + d] -= m;
            }
        }
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Distances for pairs `(i, j)`, `i < j`, in row order.
    pub fn pair_distances(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n.saturating_sub(1) / 2);
        for i in 0..self.n {
            for j in i + 1..self.n {
                out.push(self.distance(i, j));
            }
        }
        out
    }

    /// Centered and rotated so the dimensions are principal axes in order of
    /// decreasing variance; each axis is signed so its largest-magnitude
    /// coordinate is positive.
    pub fn to_principal_axes(&self) -> Self {
        let mut c = self.clone();
        c.center();
        if c.n == 0 || c.k == 0 {
            return c;
        }
        let m = c.to_matrix();
        let eig = nalgebra::SymmetricEigen::new(m.transpose() * &m);
        let mut order: Vec<usize> = (0..c.k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let basis = DMatrix::from_fn(c.k, c.k, |r, col| eig.eigenvectors[(r, order[col])]);
        let mut out = Self::from_matrix(&(m * basis));
        for d in 0..out.k {
            let col = out.column(d);
            let lead = col.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            if lead < 0.0 {
                for i in 0..out.n {
                    let v = out.get(i, d);
                    out.set(i, d, -v);
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdsOptions {
    /// Starts per dimensionality: one classical, the rest random.
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop once the relative stress improvement falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for MdsOptions {
    fn default() -> Self {
        Self { restarts: 20, max_iter: 500, tol: 1e-7, seed: 0 }
    }
}

impl MdsOptions {
    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(invalid("restarts", "need at least one start"));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "need at least one iteration"));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(invalid("tol", "must be a non-negative number"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdsStatus {
    Converged,
    MaxIterations,
    /// Every dissimilarity is equal, so nothing is ordered and any
    /// configuration fits equally well.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdsSolution {
    pub ids: Vec<TextureId>,
    pub coordinates: Configuration,
    pub stress: f64,
    pub k: usize,
    /// Iterations taken by the winning start.
    pub iterations: usize,
    pub restarts_used: usize,
    /// Index of the winning start; 0 is the classical start.
    pub best_restart: usize,
    pub status: MdsStatus,
    /// Stress before each iteration of the winning start, then the final value.
    pub history: Vec<f64>,
}

impl MdsSolution {
    pub fn index_of(&self, id: TextureId) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }
}

struct Run {
    coords: Configuration,
    stress: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn check_dims(diss: &DissimilarityMatrix, k: usize) -> Result<()> {
    let n = diss.n();
    if n < 3 {
        return Err(invalid("dissimilarities", format!("need at least 3 items, got {n}")));
    }
    if k == 0 || k >= n {
        return Err(invalid("k", format!("need 1 <= k < {n}, got {k}")));
    }
    Ok(())
}

fn is_degenerate(delta: &[f64]) -> bool {
    delta.windows(2).all(|w| w[0] == w[1])
}

fn random_start(n: usize, k: usize, seed: u64) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * k).map(|_| StandardNormal.sample(&mut rng)).collect();
    Configuration { n, k, data }
}

/// One majorization run from `start`.
fn smacof(delta: &[f64], start: &Configuration, opts: &MdsOptions) -> Result<Run> {
    let (n, k) = (start.n, start.k);
    let pairs = delta.len() as f64;
    let mut x = start.clone();
    x.center();
    let mut history = Vec::new();
    let mut last = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let d = x.pair_distances();
        let fit = isotonic_fit(delta, &d);
        let s = stress1(&d, &fit)?;
        // Majorization with scale-optimal disparities cannot raise stress-1.
        assert!(
            s <= last + 1e-10 * last.max(1.0),
            "stress rose from {last} to {s} at iteration {iterations}"
        );
        history.push(s);
        if s < 1e-12 || (last.is_finite() && last - s <= opts.tol * last) {
            converged = true;
            last = s;
            break;
        }
        last = s;
        if iterations == opts.max_iter {
            break;
        }

        // Disparities normalized to sum of squares = number of pairs, and
        // the configuration rescaled to best match them.
        let fit_norm = fit.iter().map(|v| v * v).sum::<f64>().sqrt();
        let hat: Vec<f64> = fit.iter().map(|v| v * pairs.sqrt() / fit_norm).collect();
        let dd: f64 = d.iter().map(|v| v * v).sum();
        let scale = d.iter().zip(&hat).map(|(a, b)| a * b).sum::<f64>() / dd;

        // Guttman transform with unit weights.
        let mut next = Configuration::zeros(n, k);
        let mut p = 0;
        for i in 0..n {
            for j in i + 1..n {
                let dij = d[p] * scale;
                if dij > 0.0 {
                    let r = hat[p] / dij;
                    for c in 0..k {
                        let diff = r * scale * (x.get(i, c) - x.get(j, c));
                        next.data[i * k + c] += diff;
                        next.data[j * k + c] -= diff;
                    }
                }
                p += 1;
            }
        }
        next.data.iter_mut().for_each(|v| *v /= n as f64);
        x = next;
        iterations += 1;
    }

    Ok(Run { coords: x, stress: last, iterations, converged, history })
}

fn best_of(
    diss: &DissimilarityMatrix,
    starts: Vec<Configuration>,
    opts: &MdsOptions,
) -> Result<MdsSolution> {
    let delta = diss.upper_triangle();
    let k = starts[0].k;
    let restarts_used = starts.len();
    let runs = run_all(&delta, &starts, opts);
    let mut best: Option<(usize, Run)> = None;
    for (idx, run) in runs.into_iter().enumerate() {
        let run = run?;
        // strict comparison keeps the lowest index on ties
        if best.as_ref().is_none_or(|(_, b)| run.stress < b.stress) {
            best = Some((idx, run));
        }
    }
    let (best_restart, run) = best.expect("at least one start");
    let coordinates = run.coords.to_principal_axes();
    let stress = kruskal_stress(diss, &coordinates)?;
    let status = if is_degenerate(&delta) {
        MdsStatus::Degenerate
    } else if run.converged {
        MdsStatus::Converged
    } else {
        MdsStatus::MaxIterations
    };
    Ok(MdsSolution {
        ids: diss.ids.clone(),
        coordinates,
        stress,
        k,
        iterations: run.iterations,
        restarts_used,
        best_restart,
        status,
        history: run.history,
    })
}

#[cfg(not(target_arch = "wasm32"))]
fn run_all(delta: &[f64], starts: &[Configuration], opts: &MdsOptions) -> Vec<Result<Run>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(starts.len());
    if workers <= 1 {
        return starts.iter().map(|s| smacof(delta, s, opts)).collect();
    }
    let chunk = starts.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = starts
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|s| smacof(delta, s, opts)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
            .collect()
    })
}

#[cfg(target_arch = "wasm32")]
fn run_all(delta: &[f64], starts: &[Configuration], opts: &MdsOptions) -> Vec<Result<Run>> {
    starts.iter().map(|s| smacof(delta, s, opts)).collect()
}

fn default_starts(diss: &DissimilarityMatrix, k: usize, opts: &MdsOptions) -> Result<Vec<Configuration>> {
    let n = diss.n();
    let mut starts = Vec::with_capacity(opts.restarts);
    let classical = classical_mds(diss, k)?;
    // A classical start with no spread (e.g. constant input) cannot move.
    if classical.data.iter().any(|v| v.abs() > 1e-12) {
        starts.push(classical);
    } else {
        starts.push(random_start(n, k, mix_seed(opts.seed, u64::MAX)));
    }
    for r in 1..opts.restarts {
        starts.push(random_start(n, k, mix_seed(opts.seed, ((k as u64) << 32) | r as u64)));
    }
    Ok(starts)
}

/// Lowest-stress `k`-dimensional solution over `opts.restarts` starts.
pub fn nonmetric_mds(diss: &DissimilarityMatrix, k: usize, opts: &MdsOptions) -> Result<MdsSolution> {
    check_dims(diss, k)?;
    opts.validate()?;
    let starts = default_starts(diss, k, opts)?;
    best_of(diss, starts, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreePoint {
    pub k: usize,
    pub stress: f64,
    pub meets_cutoff: bool,
}

/// Solutions for `k = 1..=k_max`.
///
/// Each dimensionality above the first also starts from the previous
/// solution with a small added axis, so stress cannot rise with `k`; if that
/// start still ends above the previous stress, the previous solution with a
/// zero axis (which has exactly the previous stress) is kept.
pub fn scree(diss: &DissimilarityMatrix, k_max: usize, opts: &MdsOptions) -> Result<Vec<MdsSolution>> {
    check_dims(diss, k_max)?;
    opts.validate()?;
    let n = diss.n();
    let mut out: Vec<MdsSolution> = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut starts = default_starts(diss, k, opts)?;
        let padded = out.last().map(|prev| pad_axis(&prev.coordinates, 0.0, 0));
        if let Some(prev) = out.last() {
            let rms = (prev.coordinates.data.iter().map(|v| v * v).sum::<f64>()
                / prev.coordinates.data.len() as f64)
                .sqrt();
            starts.push(pad_axis(&prev.coordinates, 1e-3 * rms, mix_seed(opts.seed, k as u64)));
        }
        let mut sol = best_of(diss, starts, opts)?;
        if let (Some(prev), Some(padded)) = (out.last(), padded) {
            if sol.stress > prev.stress {
                sol = MdsSolution {
                    coordinates: padded,
                    stress: prev.stress,
                    k,
                    iterations: 0,
                    history: vec![prev.stress],
                    ..sol
                };
            }
        }
        debug_assert_eq!(sol.coordinates.n, n);
        out.push(sol);
    }
    Ok(out)
}

pub fn scree_points(solutions: &[MdsSolution]) -> Vec<ScreePoint> {
    solutions
        .iter()
        .map(|s| ScreePoint { k: s.k, stress: s.stress, meets_cutoff: s.stress <= STRESS_CUTOFF })
        .collect()
}

/// Smallest dimensionality meeting the stress cutoff.
pub fn elbow(points: &[ScreePoint]) -> Option<usize> {
    points.iter().find(|p| p.meets_cutoff).map(|p| p.k)
}

fn pad_axis(c: &Configuration, sd: f64, seed: u64) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..c.n)
        .map(|i| {
            let mut r = c.row(i).to_vec();
            let z: f64 = StandardNormal.sample(&mut rng);
            r.push(sd * z);
            r
        })
        .collect();
    Configuration::from_rows(&rows)
}
