//! Synthetic participants for exercising the pipeline without human data.
//!
//! Each participant perceives a texture at `weights ⊙ z(log params) + noise`,
//! where `z` standardizes each log-parameter over the set. Round 1 is a
//! k-means clustering of those points; later rounds repeatedly merge the two
//! groups with the closest centroids.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{GroupingSession, RoundRecord, TextureId};
use crate::error::{Error, Result};
use crate::synthesis::TextureSet;

const KMEANS_MAX_ITER: usize = 100;

/// Perceptual model of a simulated participant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticipantModel {
    /// Salience of frequency, amplitude and irregularity.
    pub weights: [f64; 3],
    /// Standard deviation of per-texture perceptual noise.
    pub noise_sd: f64,
    /// Target group counts for rounds 1, 2 and 3.
    pub group_counts: [usize; 3],
}

impl Default for ParticipantModel {
    fn default() -> Self {
        Self {
            weights: [1.0, 1.0, 1.0],
            noise_sd: 0.25,
            group_counts: [8, 4, 2],
        }
    }
}

fn standardized_log_columns(set: &TextureSet) -> [Vec<f64>; 3] {
    let column = |f: fn(&crate::synthesis::TextureParams) -> f64| {
        let logs: Vec<f64> = set.entries.iter().map(|e| f(&e.params).ln()).collect();
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let sd = (logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        logs.iter()
            .map(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 })
            .collect()
    };
    [
        column(|p| p.f0),
        column(|p| p.amplitude),
        column(|p| p.irregularity),
    ]
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn centroid(points: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let dim = points[0].len();
    let mut c = vec![0.0; dim];
    for &m in members {
        for (ci, pi) in c.iter_mut().zip(&points[m]) {
            *ci += pi;
        }
    }
    for ci in &mut c {
        *ci /= members.len() as f64;
    }
    c
}

/// k-means++ seeding followed by Lloyd iterations. Always returns exactly `k`
/// nonempty clusters, splitting the widest cluster if seeding collapsed.
fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let weights: Vec<f64> = points
            .iter()
            .map(|p| centers.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            weights
                .iter()
                .position(|&w| {
                    target -= w;
                    target <= 0.0 && w > 0.0
                })
                .unwrap_or_else(|| weights.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[pick].clone());
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| sq_dist(p, &centers[a]).total_cmp(&sq_dist(p, &centers[b])))
                .unwrap_or(0);
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            if !members.is_empty() {
                *center = centroid(points, &members);
            }
        }
        if !changed {
            break;
        }
    }

    let mut clusters: Vec<Vec<usize>> = (0..k)
        .map(|c| (0..n).filter(|&i| labels[i] == c).collect())
        .filter(|m: &Vec<usize>| !m.is_empty())
        .collect();
    while clusters.len() < k {
        // move the point farthest from its centroid out of the largest cluster
        let widest = (0..clusters.len())
            .max_by_key(|&c| clusters[c].len())
            .expect("at least one cluster");
        let center = centroid(points, &clusters[widest]);
        let far = (0..clusters[widest].len())
            .max_by(|&a, &b| {
                sq_dist(&points[clusters[widest][a]], &center)
                    .total_cmp(&sq_dist(&points[clusters[widest][b]], &center))
            })
            .expect("nonempty cluster");
        let moved = clusters[widest].remove(far);
        clusters.push(vec![moved]);
    }
    for c in &mut clusters {
        c.sort_unstable();
    }
    clusters.sort();
    clusters
}

/// Merges the pair of groups with the closest centroids until `target` remain.
fn merge_down(points: &[Vec<f64>], groups: &mut Vec<Vec<usize>>, target: usize) {
    while groups.len() > target {
        let centers: Vec<Vec<f64>> = groups.iter().map(|g| centroid(points, g)).collect();
        let mut best = (0, 1, f64::INFINITY);
        for a in 0..groups.len() {
            for b in a + 1..groups.len() {
                let d = sq_dist(&centers[a], &centers[b]);
                if d < best.2 {
                    best = (a, b, d);
                }
            }
        }
        let absorbed = groups.remove(best.1);
        groups[best.0].extend(absorbed);
        groups[best.0].sort_unstable();
    }
}

fn group_label(index: usize) -> String {
    let mut label = String::new();
    let mut i = index;
    loop {
        label.insert(0, (b'A' + (i % 26) as u8) as char);
        if i < 26 {
            break;
        }
        i = i / 26 - 1;
    }
    label
}

fn to_round(round: u8, groups: &[Vec<usize>], ids: &[TextureId]) -> RoundRecord {
    RoundRecord {
        round,
        groups: groups
            .iter()
            .enumerate()
            .map(|(g, members)| (group_label(g), members.iter().map(|&m| ids[m]).collect()))
            .collect::<BTreeMap<_, _>>(),
        names: BTreeMap::new(),
    }
}

/// A name from the one or two most extreme perceived traits of a group.
fn describe(center: &[f64]) -> String {
    const WORDS: [(&str, &str); 3] = [("low", "high"), ("faint", "strong"), ("smooth", "rough")];
    let mut order: Vec<usize> = (0..center.len().min(3)).collect();
    order.sort_by(|&a, &b| center[b].abs().total_cmp(&center[a].abs()).then(a.cmp(&b)));
    let words: Vec<&str> = order
        .iter()
        .take(2)
        .filter(|&&d| center[d].abs() > 0.25)
        .map(|&d| if center[d] < 0.0 { WORDS[d].0 } else { WORDS[d].1 })
        .collect();
    if words.is_empty() {
        "medium".into()
    } else {
        words.join(" ")
    }
}

/// Simulates one participant's three rounds; deterministic per `seed`.
pub fn simulate_participant(
    set: &TextureSet,
    model: &ParticipantModel,
    participant_id: impl Into<String>,
    seed: u64,
) -> Result<GroupingSession> {
    let [g1, g2, g3] = model.group_counts;
    let n = set.len();
    if !(g1 >= g2 && g2 >= g3 && g3 >= 2 && g1 <= n) {
        return Err(Error::InfeasibleGroupCounts(format!(
            "need {n} >= g1 >= g2 >= g3 >= 2, got {g1}, {g2}, {g3}"
        )));
    }
    if !(model.noise_sd >= 0.0 && model.noise_sd.is_finite()) {
        return Err(crate::error::invalid(
            "noise_sd",
            format!("must be non-negative, got {}", model.noise_sd),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns = standardized_log_columns(set);
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..3)
                .map(|d| {
                    let noise: f64 = rng.sample(StandardNormal);
                    model.weights[d] * columns[d][i] + model.noise_sd * noise
                })
                .collect()
        })
        .collect();

    let ids = set.ids();
    let mut groups = kmeans(&points, g1, &mut rng);
    let mut rounds = vec![to_round(1, &groups, &ids)];
    for (round, &target) in [(2u8, &g2), (3u8, &g3)] {
        merge_down(&points, &mut groups, target);
        let mut record = to_round(round, &groups, &ids);
        record.names = groups
            .iter()
            .enumerate()
            .map(|(g, members)| (group_label(g), describe(&centroid(&points, members))))
            .collect();
        rounds.push(record);
    }

    Ok(GroupingSession {
        participant_id: participant_id.into(),
        rounds,
    })
}
