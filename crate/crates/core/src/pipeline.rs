//! The study end to end: simulate or load sessions, score, embed, analyze.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grouping::{
    aggregate, simulate_participant, to_dissimilarity, DissimilarityMatrix, GroupingSession, ParticipantModel,
    SimilarityMatrix,
};
use crate::mds::{scree, scree_points, MdsOptions, MdsSolution};
use crate::space::{analyze_solution, AnalysisOptions, AnalysisReport};
use crate::synthesis::{mix_seed, TextureSet};

/// Participants in the reference cohort.
pub const DEFAULT_PARTICIPANTS: usize = 17;
/// Dimensionality analyzed by default.
pub const DEFAULT_ANALYSIS_K: usize = 3;
/// Largest dimensionality on the scree plot by default.
pub const DEFAULT_K_MAX: usize = 6;

/// `participants` simulated sessions with ids `P01`, `P02`, ...
pub fn simulate_study(
    set: &TextureSet,
    model: &ParticipantModel,
    participants: usize,
    seed: u64,
) -> Result<Vec<GroupingSession>> {
    if participants == 0 {
        return Err(invalid("participants", "need at least one"));
    }
    (0..participants)
        .map(|p| simulate_participant(set, model, format!("P{:02}", p + 1), mix_seed(seed, p as u64)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub k: usize,
    pub k_max: usize,
    pub mds: MdsOptions,
    pub analysis: AnalysisOptions,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_ANALYSIS_K,
            k_max: DEFAULT_K_MAX,
            mds: MdsOptions::default(),
            analysis: AnalysisOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyAnalysis {
    pub similarity: SimilarityMatrix,
    pub dissimilarity: DissimilarityMatrix,
    /// Solutions for `k = 1..=k_max`.
    pub scree: Vec<MdsSolution>,
    pub report: AnalysisReport,
}

impl StudyAnalysis {
    /// The solution the report describes.
    pub fn solution(&self) -> &MdsSolution {
        &self.scree[self.report.k - 1]
    }
}

/// Validates every session (reporting all failures at once), then scores,
/// embeds and analyzes them.
pub fn analyze_sessions(set: &TextureSet, sessions: &[GroupingSession], cfg: &AnalysisConfig) -> Result<StudyAnalysis> {
    if sessions.is_empty() {
        return Err(Error::EmptyInput("sessions"));
    }
    let failures: Vec<String> = sessions
        .iter()
        .filter_map(|s| s.validate().err().map(|e| format!("{}: {e}", s.participant_id)))
        .collect();
    if !failures.is_empty() {
        return Err(Error::InvalidSession(failures.join("; ")));
    }
    if cfg.k == 0 || cfg.k > cfg.k_max {
        return Err(invalid("k", format!("need 1 <= k <= k_max = {}, got {}", cfg.k_max, cfg.k)));
    }
    let similarity = aggregate(sessions)?;
    let dissimilarity = to_dissimilarity(&similarity);
    let solutions = scree(&dissimilarity, cfg.k_max, &cfg.mds)?;
    let report = analyze_solution(set, sessions, &solutions[cfg.k - 1], scree_points(&solutions), &cfg.analysis)?;
    Ok(StudyAnalysis { similarity, dissimilarity, scree: solutions, report })
}
