//! Append-only JSON Lines log of relevance judgments and executed runs.
//!
//! Each line is one self-contained entry. State is rebuilt by replaying the
//! log in order: a later judgment of the same (query_id, person_id) replaces
//! the earlier one, and a later run of the same (query_id, system) replaces
//! the earlier ranking.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use create_core::eval::{p_at_k, GradedRun, Judgment, System};
use create_core::{Grade, PersonId};
use serde::{Deserialize, Serialize};

use crate::formats::{from_json, read_text, FormatError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub query_id: String,
    pub system: System,
    pub ranked: Vec<PersonId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEntry {
    Judgment(Judgment),
    Run(RunRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub query_id: String,
    pub system: System,
    pub k: usize,
    pub p_at_k: f64,
    pub ranked: Vec<PersonId>,
    pub grades: Vec<Grade>,
    /// Ranked patients without a judgment; they count as NR.
    pub unjudged: Vec<PersonId>,
}

#[derive(Debug, Default)]
pub struct JudgmentStore {
    log: Option<(PathBuf, File)>,
    judgments: BTreeMap<(String, PersonId), Judgment>,
    runs: BTreeMap<(String, System), Vec<PersonId>>,
}

impl JudgmentStore {
    /// A store that keeps nothing on disk.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Replays `path` if it exists, then appends to it.
    pub fn open(path: &Path) -> Result<Self, FormatError> {
        let mut store = Self::default();
        if path.exists() {
            for (i, line) in read_text(path)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let entry: LogEntry = from_json(line).map_err(|e| FormatError::Row {
                    path: path.into(),
                    line: i + 1,
                    message: e.message,
                })?;
                store.apply(entry);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| FormatError::Io { path: path.into(), err: e })?;
        store.log = Some((path.into(), file));
        Ok(store)
    }

    fn apply(&mut self, entry: LogEntry) {
        match entry {
            LogEntry::Judgment(j) => {
                self.judgments.insert((j.query_id.clone(), j.person_id.clone()), j);
            }
            LogEntry::Run(r) => {
                self.runs.insert((r.query_id, r.system), r.ranked);
            }
        }
    }

    /// Writes the entry before applying it, so memory never runs ahead of
    /// the log.
    pub fn append(&mut self, entry: LogEntry) -> Result<(), FormatError> {
        if let Some((path, file)) = &mut self.log {
            let mut line = serde_json::to_string(&entry).expect("serializable entry");
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|()| file.flush())
                .map_err(|e| FormatError::Io {
                    path: path.clone(),
                    err: e,
                })?;
        }
        self.apply(entry);
        Ok(())
    }

    pub fn judgments(&self) -> impl Iterator<Item = &Judgment> {
        self.judgments.values()
    }

    pub fn grades(&self, query_id: &str) -> BTreeMap<PersonId, Grade> {
        self.judgments
            .values()
            .filter(|j| j.query_id == query_id)
            .map(|j| (j.person_id.clone(), j.grade))
            .collect()
    }

    pub fn run(&self, query_id: &str, system: System) -> Option<&[PersonId]> {
        self.runs.get(&(query_id.to_string(), system)).map(Vec::as_slice)
    }

    /// P@k of the latest run of (query_id, system) under current judgments.
    pub fn metrics(&self, query_id: &str, system: System, k: usize) -> Option<Metrics> {
        let ranked = self.run(query_id, system)?.to_vec();
        let run = GradedRun::resolve(query_id, system, ranked, &self.grades(query_id)).ok()?;
        Some(Metrics {
            query_id: query_id.into(),
            system,
            k,
            p_at_k: p_at_k(&run, k),
            ranked: run.ranked,
            grades: run.grades,
            unjudged: run.unjudged,
        })
    }
}
