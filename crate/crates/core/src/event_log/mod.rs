//! Event logs: parsing, preprocessing, splitting and one-hot encoding.
//!
//! A log is a set of labelled traces over a shared [`Vocabulary`]. The
//! vocabulary assigns dense ids by lexicographic activity name and reserves
//! the highest id for the artificial end-of-sequence token, so the same
//! input bytes always yield the same ids.

mod csv_source;
mod encode;
mod preprocess;
mod store;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use csv_source::{parse_csv, CsvSchema};
pub use encode::{decode_matrix, encode_trace, Decoded, EncodedTrace};
pub use preprocess::{append_eos, cut_at_quantile, prefix_log, temporal_split, truncate_outcome_activity, Split};
pub use store::{read_log, write_log, LOG_FORMAT_VERSION};

/// Display name of the end-of-sequence token.
pub const EOS_NAME: &str = "<EOS>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActivityId(pub u32);

impl ActivityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for ActivityId {
    fn from(v: usize) -> Self {
        ActivityId(v as u32)
    }
}

/// A single event `(case, activity, timestamp)`; timestamps are milliseconds
/// since the Unix epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub case_id: String,
    pub activity: ActivityId,
    pub timestamp: i64,
}

/// Bijection between activity names and dense ids, EoS last.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    names: Vec<String>,
    index: HashMap<String, ActivityId>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
    }
}

impl Eq for Vocabulary {}

impl Vocabulary {
    /// Builds a vocabulary from raw activity names (duplicates allowed);
    /// names are sorted lexicographically and EoS is appended.
    pub fn from_activity_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut sorted: Vec<String> = names.into_iter().map(|s| s.as_ref().to_owned()).collect();
        sorted.sort();
        sorted.dedup();
        if sorted.iter().any(|n| n == EOS_NAME) {
            return Err(Error::data(format!("activity name {EOS_NAME} is reserved")));
        }
        sorted.push(EOS_NAME.to_owned());
        Ok(Self::from_full_list(sorted))
    }

    /// Rebuilds a vocabulary from its persisted name list (EoS included).
    pub fn from_persisted(names: Vec<String>) -> Result<Self> {
        if names.last().map(String::as_str) != Some(EOS_NAME) {
            return Err(Error::Format("vocabulary must end with the EoS token".into()));
        }
        let body = &names[..names.len() - 1];
        if body.windows(2).any(|w| w[0] >= w[1]) || body.iter().any(|n| n == EOS_NAME) {
            return Err(Error::Format("vocabulary names must be unique and sorted".into()));
        }
        Ok(Self::from_full_list(names))
    }

    fn from_full_list(names: Vec<String>) -> Self {
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), ActivityId::from(i))).collect();
        Vocabulary { names, index }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn eos(&self) -> ActivityId {
        ActivityId::from(self.names.len() - 1)
    }

    pub fn id(&self, name: &str) -> Option<ActivityId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ActivityId) -> &str {
        &self.names[id.index()]
    }

    pub fn contains(&self, id: ActivityId) -> bool {
        id.index() < self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Ids of the non-EoS activities.
    pub fn activities(&self) -> impl Iterator<Item = ActivityId> + '_ {
        (0..self.names.len() - 1).map(ActivityId::from)
    }

    /// Hex SHA-256 over the newline-joined name list; models record it so they
    /// cannot be loaded against a differently encoded log.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for n in &self.names {
            h.update(n.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub case_id: String,
    pub activities: Vec<ActivityId>,
    pub timestamps: Vec<i64>,
    pub label: u8,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.activities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activities.is_empty()
    }

    pub fn first_timestamp(&self) -> Option<i64> {
        self.timestamps.first().copied()
    }

    pub fn events(&self) -> impl Iterator<Item = Event> + '_ {
        self.activities.iter().zip(&self.timestamps).map(|(&activity, &timestamp)| Event {
            case_id: self.case_id.clone(),
            activity,
            timestamp,
        })
    }

    /// Activities strictly before the first `eos`.
    pub fn events_before(&self, eos: ActivityId) -> &[ActivityId] {
        strip_eos(&self.activities, eos)
    }
}

/// Prefix of `activities` before the first `eos` occurrence.
pub fn strip_eos(activities: &[ActivityId], eos: ActivityId) -> &[ActivityId] {
    match activities.iter().position(|&a| a == eos) {
        Some(p) => &activities[..p],
        None => activities,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventLog {
    pub vocabulary: Vocabulary,
    pub traces: Vec<Trace>,
    /// Longest admissible trace length (after cutting, EoS included once appended).
    pub max_len: usize,
    pub eos_appended: bool,
}

impl EventLog {
    pub fn new(vocabulary: Vocabulary, traces: Vec<Trace>) -> Self {
        let max_len = traces.iter().map(Trace::len).max().unwrap_or(0);
        EventLog { vocabulary, traces, max_len, eos_appended: false }
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Copy of this log carrying `traces` instead (vocabulary and flags kept).
    pub fn with_traces(&self, traces: Vec<Trace>) -> Self {
        EventLog {
            vocabulary: self.vocabulary.clone(),
            traces,
            max_len: self.max_len,
            eos_appended: self.eos_appended,
        }
    }

    pub fn traces_with_label(&self, label: u8) -> impl Iterator<Item = &Trace> {
        self.traces.iter().filter(move |t| t.label == label)
    }

    /// Encodes every trace; fails if EoS has not been appended.
    pub fn encode_all(&self) -> Result<Vec<EncodedTrace>> {
        self.traces.iter().map(|t| encode_trace(t, &self.vocabulary, self.max_len)).collect()
    }
}
