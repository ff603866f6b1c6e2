//! Three-round grouping sessions and the similarity matrix they add up to.
//!
//! A pair of textures earns `4 - r` points from a participant, where `r` is
//! the first round in which the participant put both in the same group, and
//! zero points if they were never grouped together.

mod simulate;

pub use simulate::{simulate_participant, ParticipantModel};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TextureId = u32;

/// Maximum number of rounds in a session, and the points for a first-round pair.
pub const MAX_ROUNDS: u8 = 3;

/// One round's partition of the textures into named groups.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u8,
    pub groups: BTreeMap<String, Vec<TextureId>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub names: BTreeMap<String, String>,
}

impl RoundRecord {
    /// Builds a round from a texture → group map.
    pub fn from_assignment<'a, I>(round: u8, assignment: I) -> Self
    where
        I: IntoIterator<Item = (&'a TextureId, &'a String)>,
    {
        let mut groups: BTreeMap<String, Vec<TextureId>> = BTreeMap::new();
        for (&texture, group) in assignment {
            groups.entry(group.clone()).or_default().push(texture);
        }
        for members in groups.values_mut() {
            members.sort_unstable();
        }
        Self {
            round,
            groups,
            names: BTreeMap::new(),
        }
    }

    /// Texture → group lookup. Fails on a texture listed twice.
    pub fn assignment(&self) -> Result<BTreeMap<TextureId, &str>> {
        let mut map = BTreeMap::new();
        for (group, members) in &self.groups {
            for &t in members {
                if map.insert(t, group.as_str()).is_some() {
                    return Err(Error::InvalidSession(format!(
                        "round {}: texture {t} appears in more than one group",
                        self.round
                    )));
                }
            }
        }
        Ok(map)
    }

    /// Number of nonempty groups.
    pub fn group_count(&self) -> usize {
        self.groups.values().filter(|m| !m.is_empty()).count()
    }

    pub fn texture_ids(&self) -> BTreeSet<TextureId> {
        self.groups.values().flatten().copied().collect()
    }
}

/// One participant's rounds, in order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingSession {
    pub participant_id: String,
    pub rounds: Vec<RoundRecord>,
}

impl GroupingSession {
    /// Sorted ids covered by the first round.
    pub fn texture_ids(&self) -> Vec<TextureId> {
        self.rounds
            .first()
            .map(|r| r.texture_ids().into_iter().collect())
            .unwrap_or_default()
    }

    /// Checks the protocol invariants: two or three rounds numbered from 1,
    /// every round a partition of the same textures into nonempty groups, a
    /// non-increasing group count and names only for existing groups.
    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_ROUNDS as usize).contains(&self.rounds.len()) {
            return Err(Error::InvalidSession(format!(
                "expected 2 or 3 rounds, got {}",
                self.rounds.len()
            )));
        }
        let ids = self.rounds[0].texture_ids();
        if ids.is_empty() {
            return Err(Error::InvalidSession("round 1 assigns no textures".into()));
        }
        let mut previous_groups = usize::MAX;
        for (i, round) in self.rounds.iter().enumerate() {
            if usize::from(round.round) != i + 1 {
                return Err(Error::InvalidSession(format!(
                    "round at position {} is numbered {}",
                    i + 1,
                    round.round
                )));
            }
            round.assignment()?;
            if let Some((g, _)) = round.groups.iter().find(|(_, m)| m.is_empty()) {
                return Err(Error::InvalidSession(format!(
                    "round {}: group {g} is empty",
                    round.round
                )));
            }
            let covered = round.texture_ids();
            let missing: Vec<TextureId> = ids.difference(&covered).copied().collect();
            if !missing.is_empty() {
                return Err(Error::MissingTextures {
                    round: round.round,
                    missing,
                });
            }
            if let Some(extra) = covered.difference(&ids).next() {
                return Err(Error::InvalidSession(format!(
                    "round {}: texture {extra} was not in round 1",
                    round.round
                )));
            }
            let count = round.group_count();
            if count > previous_groups {
                return Err(Error::InvalidSession(format!(
                    "round {} has {count} groups, more than the {previous_groups} before it",
                    round.round
                )));
            }
            previous_groups = count;
            if let Some(g) = round.names.keys().find(|g| !round.groups.contains_key(*g)) {
                return Err(Error::InvalidSession(format!(
                    "round {}: name given for unknown group {g}",
                    round.round
                )));
            }
        }
        Ok(())
    }
}

/// Symmetric texture × texture point totals with a zero diagonal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub ids: Vec<TextureId>,
    pub counts: Vec<u32>,
    pub participants: u32,
}

impl SimilarityMatrix {
    pub fn zeros(ids: Vec<TextureId>, participants: u32) -> Self {
        let n = ids.len();
        Self {
            ids,
            counts: vec![0; n * n],
            participants,
        }
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.counts[i * self.n() + j]
    }

    fn set_pair(&mut self, i: usize, j: usize, value: u32) {
        let n = self.n();
        self.counts[i * n + j] = value;
        self.counts[j * n + i] = value;
    }

    /// Upper bound on any entry: three points per participant.
    pub fn max_count(&self) -> u32 {
        u32::from(MAX_ROUNDS) * self.participants
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..n).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// Scores one session. Rounds are scored by the earliest round a pair shared a
/// group, whether or not later rounds only merged groups.
pub fn session_points(session: &GroupingSession) -> Result<SimilarityMatrix> {
    let ids = session.texture_ids();
    if ids.is_empty() {
        return Err(Error::InvalidSession("session has no textures".into()));
    }
    let mut rounds: Vec<&RoundRecord> = session.rounds.iter().collect();
    rounds.sort_by_key(|r| r.round);

    let mut labels: Vec<Vec<&str>> = Vec::with_capacity(rounds.len());
    for round in &rounds {
        if !(1..=MAX_ROUNDS).contains(&round.round) {
            return Err(Error::InvalidSession(format!(
                "round index {} outside 1..=3",
                round.round
            )));
        }
        let assignment = round.assignment()?;
        let missing: Vec<TextureId> = ids
            .iter()
            .filter(|t| !assignment.contains_key(t))
            .copied()
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingTextures {
                round: round.round,
                missing,
            });
        }
        labels.push(ids.iter().map(|t| assignment[t]).collect());
    }

    let mut matrix = SimilarityMatrix::zeros(ids, 1);
    let n = matrix.n();
    for i in 0..n {
        for j in i + 1..n {
            let first = rounds
                .iter()
                .zip(&labels)
                .find(|(_, l)| l[i] == l[j])
                .map(|(r, _)| r.round);
            if let Some(r) = first {
                matrix.set_pair(i, j, u32::from(MAX_ROUNDS + 1 - r));
            }
        }
    }
    Ok(matrix)
}

/// Sums [`session_points`] over participants.
pub fn aggregate(sessions: &[GroupingSession]) -> Result<SimilarityMatrix> {
    let (first, rest) = sessions
        .split_first()
        .ok_or(Error::EmptyInput("no sessions to aggregate"))?;
    let mut total = session_points(first)?;
    for session in rest {
        let points = session_points(session)?;
        if points.ids != total.ids {
            return Err(Error::MismatchedTextureSets);
        }
        for (t, p) in total.counts.iter_mut().zip(&points.counts) {
            *t += p;
        }
        total.participants += 1;
    }
    Ok(total)
}

/// Symmetric, zero-diagonal dissimilarities between labelled objects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityMatrix {
    pub ids: Vec<TextureId>,
    pub values: Vec<f64>,
}

impl DissimilarityMatrix {
    /// Validates and wraps a row-major `n × n` matrix.
    pub fn new(ids: Vec<TextureId>, values: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if values.len() != n * n {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: n * n,
            });
        }
        let m = Self { ids, values };
        for i in 0..n {
            if m.get(i, i) != 0.0 {
                return Err(Error::InvalidSession(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = m.get(i, j);
                if !(v.is_finite() && v >= 0.0) || v != m.get(j, i) {
                    return Err(Error::InvalidSession(format!(
                        "entry ({i}, {j}) = {v} breaks symmetry or non-negativity"
                    )));
                }
            }
        }
        Ok(m)
    }

    /// Builds the matrix from a pairwise function evaluated for `i < j`.
    pub fn from_fn(ids: Vec<TextureId>, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let n = ids.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self::new(ids, values)
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    /// Upper-triangle entries in `(0,1), (0,2), .., (1,2), ..` order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect()
    }
}

/// `3P - count` off the diagonal, so the most often grouped pairs are closest.
pub fn to_dissimilarity(matrix: &SimilarityMatrix) -> DissimilarityMatrix {
    let n = matrix.n();
    let top = f64::from(matrix.max_count());
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                values[i * n + j] = top - f64::from(matrix.get(i, j));
            }
        }
    }
    DissimilarityMatrix {
        ids: matrix.ids.clone(),
        values,
    }
}
