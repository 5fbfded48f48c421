//! On-disk formats: JSON Lines corpora and ground truth, TSV vocabularies,
//! JSON query documents and binary index snapshots.
//!
//! A corpus directory holds `persons.jsonl`, `records.jsonl` and
//! `documents.jsonl`, plus `ground_truth.jsonl` when it was generated.
//! Every reader reports the file and 1-based line of the first bad row.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use create_core::corpus::{CorpusError, DocumentInput, RecordInput, Table};
use create_core::text::TriggerLexicon;
use create_core::tsv::{self, LoadError, TsvError};
use create_core::{CohortIndex, CohortQuery, GroundTruth, Person, RawCorpus, Vocabulary};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub const PERSONS: &str = "persons.jsonl";
pub const RECORDS: &str = "records.jsonl";
pub const DOCUMENTS: &str = "documents.jsonl";
pub const GROUND_TRUTH: &str = "ground_truth.jsonl";
pub const CONCEPTS: &str = "concepts.tsv";
pub const MAPPINGS: &str = "code_mappings.tsv";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{}: {err}", path.display())]
    Io { path: PathBuf, err: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Row { path: PathBuf, line: usize, message: String },
    #[error("{}: {message}", path.display())]
    Invalid { path: PathBuf, message: String },
}

impl FormatError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.into(),
            err: source,
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|e| FormatError::io(path, e))
}

/// A JSON value failing to deserialize, with the path of the offending field.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct JsonError {
    /// `None` for syntax errors and for problems at the document root.
    pub field_path: Option<String>,
    pub message: String,
    pub syntax: bool,
}

/// Strict JSON deserialization; unknown fields are rejected by the types.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, JsonError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut *de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        JsonError {
            field_path: (path != ".").then_some(path),
            syntax: inner.is_syntax() || inner.is_eof(),
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| JsonError {
        field_path: None,
        syntax: true,
        message: e.to_string(),
    })?;
    Ok(value)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, FormatError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = from_json(line).map_err(|e| FormatError::Row {
            path: path.into(),
            line: i + 1,
            message: match e.field_path {
                Some(p) => format!("{p}: {}", e.message),
                None => e.message,
            },
        })?;
        out.push(row);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), FormatError> {
    let file = fs::File::create(path).map_err(|e| FormatError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row).map_err(|e| FormatError::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| FormatError::io(path, e))?;
    }
    w.flush().map_err(|e| FormatError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    fs::write(path, to_pretty_json(value)).map_err(|e| FormatError::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn read_raw_corpus(dir: &Path) -> Result<RawCorpus, FormatError> {
    Ok(RawCorpus {
        persons: read_jsonl::<Person>(&dir.join(PERSONS))?,
        records: read_jsonl::<RecordInput>(&dir.join(RECORDS))?,
        documents: read_jsonl::<DocumentInput>(&dir.join(DOCUMENTS))?,
    })
}

pub fn write_raw_corpus(dir: &Path, corpus: &RawCorpus) -> Result<(), FormatError> {
    fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    write_jsonl(&dir.join(PERSONS), &corpus.persons)?;
    write_jsonl(&dir.join(RECORDS), &corpus.records)?;
    write_jsonl(&dir.join(DOCUMENTS), &corpus.documents)
}

/// Maps a corpus validation error back to its file and line.
pub fn corpus_error(dir: &Path, e: &CorpusError) -> FormatError {
    let (table, row) = e.location();
    let file = match table {
        Table::Persons => PERSONS,
        Table::Records => RECORDS,
        Table::Documents => DOCUMENTS,
    };
    FormatError::Row {
        path: dir.join(file),
        line: row + 1,
        message: e.to_string(),
    }
}

pub fn read_truth(path: &Path) -> Result<Vec<GroundTruth>, FormatError> {
    let rows: Vec<GroundTruth> = read_jsonl(path)?;
    let mut keys: Vec<(&str, &str)> = rows.iter().map(|t| (t.query_id.as_str(), t.person_id.as_str())).collect();
    keys.sort_unstable();
    if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
        return Err(FormatError::Invalid {
            path: path.into(),
            message: format!("more than one grade for query {} and person {}", w[0].0, w[0].1),
        });
    }
    Ok(rows)
}

/// The bundled vocabulary for `None`; otherwise a directory holding
/// `concepts.tsv` and `code_mappings.tsv`, or a concepts file whose
/// mappings sit beside it as `code_mappings.tsv`.
pub fn load_vocabulary(path: Option<&Path>) -> Result<Vocabulary, FormatError> {
    let Some(path) = path else {
        return Ok(tsv::bundled_vocabulary());
    };
    let (concepts_path, mappings_path) = if path.is_dir() {
        (path.join(CONCEPTS), path.join(MAPPINGS))
    } else {
        (path.to_path_buf(), path.parent().unwrap_or(Path::new(".")).join(MAPPINGS))
    };
    let concepts = read_text(&concepts_path)?;
    let mappings = read_text(&mappings_path)?;
    tsv::parse_vocabulary(&concepts, &mappings).map_err(|e| match e {
        LoadError::Concepts(TsvError { line, message }) => FormatError::Row {
            path: concepts_path,
            line,
            message,
        },
        LoadError::Mappings(TsvError { line, message }) => FormatError::Row {
            path: mappings_path,
            line,
            message,
        },
        LoadError::Invalid(e) => FormatError::Invalid {
            path: concepts_path,
            message: e.to_string(),
        },
    })
}

pub fn load_triggers(path: Option<&Path>) -> Result<TriggerLexicon, FormatError> {
    let Some(path) = path else {
        return Ok(TriggerLexicon::default());
    };
    tsv::parse_triggers(&read_text(path)?).map_err(|TsvError { line, message }| FormatError::Row {
        path: path.into(),
        line,
        message,
    })
}

pub fn read_query(path: &Path) -> Result<CohortQuery, FormatError> {
    from_json(&read_text(path)?).map_err(|e| FormatError::Invalid {
        path: path.into(),
        message: match e.field_path {
            Some(p) => format!("{p}: {}", e.message),
            None => e.message,
        },
    })
}

/// Every `*.json` query document in `dir`, in file name order.
pub fn read_query_dir(dir: &Path) -> Result<Vec<CohortQuery>, FormatError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| FormatError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| FormatError::io(dir, err)))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "json"));
    paths.sort();
    paths.iter().map(|p| read_query(p)).collect()
}

pub fn write_snapshot(path: &Path, index: &CohortIndex) -> Result<(), FormatError> {
    fs::write(path, index.to_snapshot()).map_err(|e| FormatError::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<CohortIndex, FormatError> {
    let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
    CohortIndex::from_snapshot(&bytes).map_err(|e| FormatError::Invalid {
        path: path.into(),
        message: e.to_string(),
    })
}
