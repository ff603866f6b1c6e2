//! A live grouping session: the three-round protocol as a state machine
//! driven by an append-only event log.
//!
//! Round 1 assigns individual textures to groups. Rounds 2 and 3 start from
//! the previous partition and only merge whole groups, so the group count
//! can never grow. Names are collected after the second and third rounds.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grouping::{GroupingSession, RoundRecord, TextureId, MAX_ROUNDS};

/// Group slots offered in round 1 unless configured otherwise.
pub const DEFAULT_GROUP_SLOTS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Training,
    Grouping,
    Naming,
    Complete,
}

/// Everything that can happen to a session. Replaying the events in order
/// rebuilds the session exactly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        session_id: String,
        participant_id: String,
        texture_ids: Vec<TextureId>,
        seed: u64,
        group_slots: usize,
        rounds: u8,
        training: bool,
    },
    /// Leave the training phase and start round 1.
    Begin,
    Assign { texture_id: TextureId, group: String },
    Unassign { texture_id: TextureId },
    /// Move every texture of group `from` into group `into`.
    Merge { from: String, into: String },
    CommitRound,
    SubmitNames { names: BTreeMap<String, String> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiveSession {
    pub session_id: String,
    pub participant_id: String,
    pub texture_ids: Vec<TextureId>,
    /// The order the participant sees the textures in.
    pub display_order: Vec<TextureId>,
    pub seed: u64,
    pub group_slots: usize,
    pub rounds: u8,
    pub current_round: u8,
    pub state: SessionState,
    pub working: BTreeMap<TextureId, String>,
    pub committed: Vec<RoundRecord>,
    /// Advisory messages from the latest commit.
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Scrambled display order for a session seed.
pub fn display_permutation(ids: &[TextureId], seed: u64) -> Vec<TextureId> {
    let mut order = ids.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

fn state_error(msg: impl Into<String>) -> Error {
    Error::SessionState(msg.into())
}

impl LiveSession {
    pub fn new(
        session_id: impl Into<String>,
        participant_id: impl Into<String>,
        texture_ids: Vec<TextureId>,
        seed: u64,
        training: bool,
    ) -> Result<(Self, SessionEvent)> {
        let event = SessionEvent::Created {
            session_id: session_id.into(),
            participant_id: participant_id.into(),
            texture_ids,
            seed,
            group_slots: DEFAULT_GROUP_SLOTS,
            rounds: MAX_ROUNDS,
            training,
        };
        Ok((Self::from_created(&event)?, event))
    }

    fn from_created(event: &SessionEvent) -> Result<Self> {
        let SessionEvent::Created { session_id, participant_id, texture_ids, seed, group_slots, rounds, training } = event
        else {
            return Err(state_error("an event log must start with a created event"));
        };
        if texture_ids.is_empty() {
            return Err(Error::EmptyInput("session textures"));
        }
        let unique: BTreeSet<_> = texture_ids.iter().collect();
        if unique.len() != texture_ids.len() {
            return Err(Error::InvalidSession("duplicate texture id".into()));
        }
        if !(2..=MAX_ROUNDS).contains(rounds) {
            return Err(Error::InvalidSession(format!("rounds must be 2 or 3, got {rounds}")));
        }
        if *group_slots < 2 {
            return Err(Error::InvalidSession("need at least 2 group slots".into()));
        }
        Ok(Self {
            session_id: session_id.clone(),
            participant_id: participant_id.clone(),
            display_order: display_permutation(texture_ids, *seed),
            texture_ids: texture_ids.clone(),
            seed: *seed,
            group_slots: *group_slots,
            rounds: *rounds,
            current_round: 1,
            state: if *training { SessionState::Training } else { SessionState::Grouping },
            working: BTreeMap::new(),
            committed: Vec::new(),
            warnings: Vec::new(),
        })
    }

    /// Rebuilds a session from its full event log.
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a SessionEvent>) -> Result<Self> {
        let mut events = events.into_iter();
        let first = events.next().ok_or(Error::EmptyInput("event log"))?;
        let mut session = Self::from_created(first)?;
        for e in events {
            session.apply(e)?;
        }
        Ok(session)
    }

    /// Applies one event, leaving the session untouched on error.
    pub fn apply(&mut self, event: &SessionEvent) -> Result<()> {
        let mut next = self.clone();
        next.apply_in_place(event)?;
        *self = next;
        Ok(())
    }

    fn apply_in_place(&mut self, event: &SessionEvent) -> Result<()> {
        match event {
            SessionEvent::Created { .. } => Err(state_error("session already exists")),
            SessionEvent::Begin => {
                if self.state != SessionState::Training {
                    return Err(state_error("not in training"));
                }
                self.state = SessionState::Grouping;
                Ok(())
            }
            SessionEvent::Assign { texture_id, group } => {
                self.require_round_one("assign")?;
                self.require_known(*texture_id)?;
                let group = group.trim();
                if group.is_empty() {
                    return Err(Error::InvalidSession("group name must not be empty".into()));
                }
                let in_use: BTreeSet<&str> = self
                    .working
                    .iter()
                    .filter(|(t, _)| *t != texture_id)
                    .map(|(_, g)| g.as_str())
                    .collect();
                if !in_use.contains(group) && in_use.len() >= self.group_slots {
                    return Err(Error::InvalidSession(format!("all {} group slots are in use", self.group_slots)));
                }
                self.working.insert(*texture_id, group.to_string());
                Ok(())
            }
            SessionEvent::Unassign { texture_id } => {
                self.require_round_one("unassign")?;
                self.require_known(*texture_id)?;
                self.working.remove(texture_id);
                Ok(())
            }
            SessionEvent::Merge { from, into } => {
                if self.state != SessionState::Grouping || self.current_round < 2 {
                    return Err(state_error("groups can only be merged in rounds 2 and 3"));
                }
                let groups = self.working_groups();
                for g in [from, into] {
                    if !groups.contains_key(g.as_str()) {
                        return Err(Error::InvalidSession(format!("no group {g:?}")));
                    }
                }
                if from == into {
                    return Err(Error::InvalidSession("cannot merge a group into itself".into()));
                }
                for g in self.working.values_mut() {
                    if g == from {
                        g.clone_from(into);
                    }
                }
                Ok(())
            }
            SessionEvent::CommitRound => self.commit(),
            SessionEvent::SubmitNames { names } => self.name_groups(names),
        }
    }

    fn require_round_one(&self, what: &str) -> Result<()> {
        match (self.state, self.current_round) {
            (SessionState::Grouping, 1) => Ok(()),
            (SessionState::Grouping, _) => Err(state_error(format!(
                "cannot {what} single textures in round {}; merge groups instead",
                self.current_round
            ))),
            (s, _) => Err(state_error(format!("cannot {what} while {s:?}"))),
        }
    }

    fn require_known(&self, id: TextureId) -> Result<()> {
        if self.texture_ids.contains(&id) {
            Ok(())
        } else {
            Err(Error::UnknownTexture(id))
        }
    }

    fn working_groups(&self) -> BTreeMap<&str, usize> {
        let mut g = BTreeMap::new();
        for name in self.working.values() {
            *g.entry(name.as_str()).or_insert(0) += 1;
        }
        g
    }

    /// Textures not yet in any group, in manifest order.
    pub fn unassigned(&self) -> Vec<TextureId> {
        self.texture_ids.iter().copied().filter(|t| !self.working.contains_key(t)).collect()
    }

    fn commit(&mut self) -> Result<()> {
        if self.state != SessionState::Grouping {
            return Err(state_error(format!("cannot commit while {:?}", self.state)));
        }
        let missing = self.unassigned();
        if !missing.is_empty() {
            return Err(Error::MissingTextures { round: self.current_round, missing });
        }
        let record = RoundRecord::from_assignment(self.current_round, &self.working);
        self.warnings.clear();
        if let Some(prev) = self.committed.last() {
            let (before, after) = (prev.group_count(), record.group_count());
            if after > before {
                return Err(Error::InvalidSession(format!("{after} groups is more than the {before} before")));
            }
            let target = before as f64 / 2.0;
            if (after as f64 - target).abs() > (before as f64 / 4.0).max(1.0) {
                self.warnings.push(format!(
                    "went from {before} to {after} groups; the instruction is to roughly halve them"
                ));
            }
        }
        self.committed.push(record);
        self.state = if self.current_round >= 2 { SessionState::Naming } else { SessionState::Grouping };
        if self.state == SessionState::Grouping {
            self.current_round += 1;
        }
        Ok(())
    }

    fn name_groups(&mut self, names: &BTreeMap<String, String>) -> Result<()> {
        if self.state != SessionState::Naming {
            return Err(state_error(format!("cannot name groups while {:?}", self.state)));
        }
        let record = self.committed.last_mut().expect("naming follows a commit");
        if let Some(g) = names.keys().find(|g| !record.groups.contains_key(*g)) {
            return Err(Error::InvalidSession(format!("no group {g:?} in round {}", record.round)));
        }
        record.names = names.clone();
        if self.current_round >= self.rounds {
            self.state = SessionState::Complete;
        } else {
            self.current_round += 1;
            self.state = SessionState::Grouping;
        }
        Ok(())
    }

    /// The committed rounds as a session record.
    pub fn to_grouping_session(&self) -> GroupingSession {
        GroupingSession { participant_id: self.participant_id.clone(), rounds: self.committed.clone() }
    }
}
