//! Tab-separated tables: the concept vocabulary, code mappings and trigger
//! lexicon overrides. Parsing works on `&str` so callers own file IO.
//!
//! Concepts: `concept_id  domain  preferred_name  cui  synonyms  parent_ids`,
//! with `|` separating list items. Mappings: `source_vocabulary  source_code
//! concept_id`. Both start with that exact header row. Triggers:
//! `category  trigger_phrase`, no header, `#` starts a comment line.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::text::{TriggerCategory, TriggerLexicon};
use crate::vocab::{CodeMapping, Concept, Domain, SourceVocabulary, VocabError, Vocabulary};

pub const CONCEPTS_HEADER: [&str; 6] = ["concept_id", "domain", "preferred_name", "cui", "synonyms", "parent_ids"];
pub const MAPPINGS_HEADER: [&str; 3] = ["source_vocabulary", "source_code", "concept_id"];

/// The miniature vocabulary shipped with the crate.
pub const BUNDLED_CONCEPTS: &str = include_str!("../data/vocab/concepts.tsv");
pub const BUNDLED_MAPPINGS: &str = include_str!("../data/vocab/code_mappings.tsv");

/// A malformed row; `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct TsvError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LoadError {
    #[error("concepts table, {0}")]
    Concepts(TsvError),
    #[error("code mapping table, {0}")]
    Mappings(TsvError),
    #[error(transparent)]
    Invalid(#[from] VocabError),
}

fn err(line: usize, message: impl Into<String>) -> TsvError {
    TsvError {
        line,
        message: message.into(),
    }
}

/// Data rows as (line number, cells); checks the header and column count.
fn rows<'a>(text: &'a str, header: &[&str]) -> Result<Vec<(usize, Vec<&'a str>)>, TsvError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
    match lines.next() {
        Some((_, h)) if h.split('\t').map(str::trim).eq(header.iter().copied()) => {}
        Some((n, _)) => return Err(err(n, alloc::format!("expected header {:?}", header.join("\t")))),
        None => return Err(err(1, "missing header row")),
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(err(n, alloc::format!("expected {} columns, found {}", header.len(), cells.len())));
        }
        out.push((n, cells));
    }
    Ok(out)
}

fn list(cell: &str) -> impl Iterator<Item = &str> {
    cell.split('|').map(str::trim).filter(|s| !s.is_empty())
}

pub fn parse_concepts(text: &str) -> Result<Vec<Concept>, TsvError> {
    rows(text, &CONCEPTS_HEADER)?
        .into_iter()
        .map(|(n, c)| {
            if c[0].is_empty() {
                return Err(err(n, "empty concept_id"));
            }
            let domain: Domain = c[1].parse().map_err(|_| err(n, alloc::format!("unknown domain {:?}", c[1])))?;
            Ok(Concept {
                concept_id: c[0].into(),
                domain,
                preferred_name: c[2].to_string(),
                cui: (!c[3].is_empty()).then(|| c[3].to_string()),
                synonyms: list(c[4]).map(String::from).collect(),
                parent_ids: list(c[5]).map(Into::into).collect(),
            })
        })
        .collect()
}

pub fn parse_mappings(text: &str) -> Result<Vec<CodeMapping>, TsvError> {
    rows(text, &MAPPINGS_HEADER)?
        .into_iter()
        .map(|(n, c)| {
            let source_vocabulary: SourceVocabulary = c[0]
                .parse()
                .map_err(|_| err(n, alloc::format!("unknown source vocabulary {:?}", c[0])))?;
            if c[1].is_empty() || c[2].is_empty() {
                return Err(err(n, "empty source_code or concept_id"));
            }
            Ok(CodeMapping {
                source_vocabulary,
                source_code: c[1].to_string(),
                concept_id: c[2].into(),
            })
        })
        .collect()
}

pub fn parse_vocabulary(concepts: &str, mappings: &str) -> Result<Vocabulary, LoadError> {
    let concepts = parse_concepts(concepts).map_err(LoadError::Concepts)?;
    let mappings = parse_mappings(mappings).map_err(LoadError::Mappings)?;
    Ok(Vocabulary::new(concepts, mappings)?)
}

pub fn bundled_vocabulary() -> Vocabulary {
    parse_vocabulary(BUNDLED_CONCEPTS, BUNDLED_MAPPINGS).expect("bundled vocabulary is valid")
}

/// A trigger lexicon replacing the compiled-in one.
pub fn parse_triggers(text: &str) -> Result<TriggerLexicon, TsvError> {
    let mut entries: Vec<(TriggerCategory, &str)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (category, phrase) = line
            .split_once('\t')
            .ok_or_else(|| err(i + 1, "expected category<TAB>trigger_phrase"))?;
        let category: TriggerCategory = category
            .trim()
            .parse()
            .map_err(|_| err(i + 1, alloc::format!("unknown trigger category {:?}", category.trim())))?;
        if phrase.trim().is_empty() || phrase.contains('\t') {
            return Err(err(i + 1, "expected one non-empty trigger phrase"));
        }
        entries.push((category, phrase.trim()));
    }
    Ok(TriggerLexicon::new(entries))
}
