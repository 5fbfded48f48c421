//! EHR data model: persons, structured records and clinical documents, and
//! the ETL step that resolves codes and derives sections and mentions.

mod generator;

pub use generator::{
    default_as_of, generate_synthetic_corpus, Archetype, GeneratorError, GeneratorSpec, PlantSpec, SyntheticCorpus, TEMPLATE_IDS,
};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::date::Date;
use crate::eval::Grade;
use crate::ids::{ConceptId, PersonId};
use crate::text::{extract_mentions_with, split_sections, ConceptMention, SectionText, TriggerLexicon};
use crate::vocab::{Domain, SourceVocabulary, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    F,
    M,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Person {
    pub person_id: PersonId,
    pub birth_date: Date,
    pub gender: Gender,
}

/// A structured record as it arrives, before code mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordInput {
    pub person_id: PersonId,
    pub domain: Domain,
    pub source_vocabulary: SourceVocabulary,
    pub source_code: String,
    pub event_date: Date,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

/// A clinical note as it arrives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentInput {
    pub doc_id: String,
    pub person_id: PersonId,
    pub encounter_date: Date,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredRecord {
    pub person_id: PersonId,
    pub domain: Domain,
    pub source_vocabulary: SourceVocabulary,
    pub source_code: String,
    /// Resolved by code mapping; `None` when the code is unmapped.
    pub concept_id: Option<ConceptId>,
    pub event_date: Date,
    pub value: Option<f64>,
    pub unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicalDocument {
    pub doc_id: String,
    pub person_id: PersonId,
    pub encounter_date: Date,
    pub text: String,
    pub sections: Vec<SectionText>,
    /// One list per entry of `sections`.
    pub mentions: Vec<Vec<ConceptMention>>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub query_id: String,
    pub person_id: PersonId,
    pub grade: Grade,
}

/// Input rows of a corpus, as stored on disk.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawCorpus {
    pub persons: Vec<Person>,
    pub records: Vec<RecordInput>,
    pub documents: Vec<DocumentInput>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LoadReport {
    pub persons: usize,
    pub records: usize,
    pub documents: usize,
    pub sections: usize,
    pub mentions: usize,
    /// Records whose source code has no mapping.
    pub unmapped_records: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub persons: Vec<Person>,
    pub records: Vec<StructuredRecord>,
    pub documents: Vec<ClinicalDocument>,
    pub report: LoadReport,
}

/// Which input table a row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    Persons,
    Records,
    Documents,
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Table::Persons => "persons",
            Table::Records => "records",
            Table::Documents => "documents",
        })
    }
}

/// Corpus validation failures; `row` is the zero-based row in `table`.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("{table} row {row}: duplicate person_id {person_id}")]
    DuplicatePerson { table: Table, row: usize, person_id: PersonId },
    #[error("{table} row {row}: unknown person_id {person_id}")]
    UnknownPerson { table: Table, row: usize, person_id: PersonId },
    #[error("{table} row {row}: duplicate doc_id {doc_id}")]
    DuplicateDocument { table: Table, row: usize, doc_id: String },
    #[error("{table} row {row}: date precedes the person's birth_date")]
    BeforeBirth { table: Table, row: usize },
    #[error("{table} row {row}: domain {domain} cannot hold structured records")]
    UnsupportedDomain { table: Table, row: usize, domain: Domain },
    #[error("{table} row {row}: value/unit are only allowed on Measurement records")]
    ValueOnNonMeasurement { table: Table, row: usize },
}

impl CorpusError {
    pub fn location(&self) -> (Table, usize) {
        match *self {
            CorpusError::DuplicatePerson { table, row, .. }
            | CorpusError::UnknownPerson { table, row, .. }
            | CorpusError::DuplicateDocument { table, row, .. }
            | CorpusError::BeforeBirth { table, row }
            | CorpusError::UnsupportedDomain { table, row, .. }
            | CorpusError::ValueOnNonMeasurement { table, row } => (table, row),
        }
    }
}

impl RawCorpus {
    pub fn is_empty(&self) -> bool {
        self.persons.is_empty() && self.records.is_empty() && self.documents.is_empty()
    }

    /// Validates the rows, resolves record codes and derives sections and
    /// mentions for every document.
    pub fn assemble(&self, vocab: &Vocabulary, lexicon: &TriggerLexicon) -> Result<Corpus, CorpusError> {
        let mut births: BTreeMap<&PersonId, Date> = BTreeMap::new();
        for (row, p) in self.persons.iter().enumerate() {
            if births.insert(&p.person_id, p.birth_date).is_some() {
                return Err(CorpusError::DuplicatePerson {
                    table: Table::Persons,
                    row,
                    person_id: p.person_id.clone(),
                });
            }
        }
        let birth_of = |table, row, person_id: &PersonId| {
            births.get(person_id).copied().ok_or_else(|| CorpusError::UnknownPerson {
                table,
                row,
                person_id: person_id.clone(),
            })
        };

        let mut report = LoadReport {
            persons: self.persons.len(),
            records: self.records.len(),
            documents: self.documents.len(),
            ..LoadReport::default()
        };

        let mut records = Vec::with_capacity(self.records.len());
        for (row, r) in self.records.iter().enumerate() {
            let table = Table::Records;
            let birth = birth_of(table, row, &r.person_id)?;
            if !r.domain.is_record_domain() {
                return Err(CorpusError::UnsupportedDomain {
                    table,
                    row,
                    domain: r.domain,
                });
            }
            if r.domain != Domain::Measurement && (r.value.is_some() || r.unit.is_some()) {
                return Err(CorpusError::ValueOnNonMeasurement { table, row });
            }
            if r.event_date < birth {
                return Err(CorpusError::BeforeBirth { table, row });
            }
            let concept_id = vocab.map_code(r.source_vocabulary, &r.source_code).cloned();
            if concept_id.is_none() {
                report.unmapped_records += 1;
            }
            records.push(StructuredRecord {
                person_id: r.person_id.clone(),
                domain: r.domain,
                source_vocabulary: r.source_vocabulary,
                source_code: r.source_code.clone(),
                concept_id,
                event_date: r.event_date,
                value: r.value,
                unit: r.unit.clone(),
            });
        }

        let mut doc_ids = BTreeSet::new();
        let mut documents = Vec::with_capacity(self.documents.len());
        for (row, d) in self.documents.iter().enumerate() {
            let table = Table::Documents;
            let birth = birth_of(table, row, &d.person_id)?;
            if !doc_ids.insert(d.doc_id.as_str()) {
                return Err(CorpusError::DuplicateDocument {
                    table,
                    row,
                    doc_id: d.doc_id.clone(),
                });
            }
            if d.encounter_date < birth {
                return Err(CorpusError::BeforeBirth { table, row });
            }
            documents.push(analyze_document(d, vocab, lexicon));
        }
        report.sections = documents.iter().map(|d| d.sections.len()).sum();
        report.mentions = documents.iter().flat_map(|d| &d.mentions).map(Vec::len).sum();

        Ok(Corpus {
            persons: self.persons.clone(),
            records,
            documents,
            report,
        })
    }
}

/// Sections and mentions of one document.
pub fn analyze_document(d: &DocumentInput, vocab: &Vocabulary, lexicon: &TriggerLexicon) -> ClinicalDocument {
    let sections = split_sections(&d.text);
    let mentions = sections.iter().map(|s| extract_mentions_with(s, vocab, lexicon)).collect();
    ClinicalDocument {
        doc_id: d.doc_id.clone(),
        person_id: d.person_id.clone(),
        encounter_date: d.encounter_date,
        text: d.text.clone(),
        sections,
        mentions,
    }
}

impl Corpus {
    pub fn empty() -> Self {
        Self {
            persons: Vec::new(),
            records: Vec::new(),
            documents: Vec::new(),
            report: LoadReport::default(),
        }
    }

    pub fn person(&self, id: &str) -> Option<&Person> {
        self.persons.iter().find(|p| p.person_id == *id)
    }

    /// Rows this corpus was assembled from; assembling them again with the
    /// same vocabulary and lexicon reproduces the corpus.
    pub fn to_raw(&self) -> RawCorpus {
        RawCorpus {
            persons: self.persons.clone(),
            records: self
                .records
                .iter()
                .map(|r| RecordInput {
                    person_id: r.person_id.clone(),
                    domain: r.domain,
                    source_vocabulary: r.source_vocabulary,
                    source_code: r.source_code.clone(),
                    event_date: r.event_date,
                    value: r.value,
                    unit: r.unit.clone(),
                })
                .collect(),
            documents: self
                .documents
                .iter()
                .map(|d| DocumentInput {
                    doc_id: d.doc_id.clone(),
                    person_id: d.person_id.clone(),
                    encounter_date: d.encounter_date,
                    text: d.text.clone(),
                })
                .collect(),
        }
    }
}
