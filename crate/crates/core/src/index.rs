//! The immutable patient → section index.
//!
//! Sections get dense handles in (person_id, document order, section order)
//! order, so each patient owns a contiguous, ascending run of handles. Every
//! section is searchable through two fields: `Text` (body tokens) and
//! `Concept` (extracted concept ids). Concept postings keep the count of
//! affirmed patient mentions apart from the count of all mentions, which is
//! what lets scoring ignore negated and family-history mentions.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Person};
use crate::date::{whole_years, AgeRange, Date};
use crate::ids::{ConceptId, PersonId};
use crate::text::{tokenize, Certainty, ConceptMention, Experiencer, Status};
use crate::vocab::Domain;

pub mod snapshot;

pub type SectionHandle = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Text,
    Concept,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionEntry {
    pub doc_id: String,
    pub person_id: PersonId,
    pub section_id: String,
    pub heading: String,
    pub body: String,
    pub char_offset: usize,
    pub encounter_date: Date,
    /// Token count of `body`.
    pub text_len: u32,
    /// Mention count of `body`, whatever the modifiers.
    pub concept_len: u32,
    pub mentions: Vec<ConceptMention>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecordEntry {
    pub concept_id: ConceptId,
    pub domain: Domain,
    pub event_date: Date,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientEntry {
    pub person: Person,
    /// Records with a resolved concept, sorted.
    pub records: Vec<RecordEntry>,
    /// Ascending section handles.
    pub sections: Vec<SectionHandle>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextPosting {
    pub section: SectionHandle,
    pub tf: u32,
}

/// Modifier bits recorded on concept postings.
pub mod modifier_bits {
    pub const NEGATED: u8 = 1;
    pub const FAMILY: u8 = 2;
    pub const HISTORICAL: u8 = 4;
    pub const UNCERTAIN: u8 = 8;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptPosting {
    pub section: SectionHandle,
    /// Mentions with negated = false and experiencer = Patient.
    pub affirmed_tf: u32,
    pub total_tf: u32,
    /// Union of [`modifier_bits`] over the section's mentions.
    pub modifiers: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub total_sections: usize,
    pub avg_text_len: f64,
    pub avg_concept_len: f64,
}

impl FieldStats {
    fn compute(sections: &[SectionEntry]) -> Self {
        let n = sections.len();
        let mean = |total: u64| if n == 0 { 0.0 } else { total as f64 / n as f64 };
        Self {
            total_sections: n,
            avg_text_len: mean(sections.iter().map(|s| u64::from(s.text_len)).sum()),
            avg_concept_len: mean(sections.iter().map(|s| u64::from(s.concept_len)).sum()),
        }
    }

    pub fn avg_len(&self, field: Field) -> f64 {
        match field {
            Field::Text => self.avg_text_len,
            Field::Concept => self.avg_concept_len,
        }
    }
}

/// Restricts which records count in [`CohortIndex::has_structured_concept`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventPredicate {
    /// Whole-year age at the event date, inclusive.
    pub age_at_event: Option<AgeRange>,
    /// Inclusive lower bound on the event date.
    pub from: Option<Date>,
    /// Inclusive upper bound on the event date.
    pub to: Option<Date>,
}

impl EventPredicate {
    pub fn age(range: AgeRange) -> Self {
        Self {
            age_at_event: Some(range),
            ..Self::default()
        }
    }

    pub fn matches(&self, birth: Date, event: Date) -> bool {
        self.age_at_event.is_none_or(|r| r.contains(whole_years(birth, event)))
            && self.from.is_none_or(|d| event >= d)
            && self.to.is_none_or(|d| event <= d)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IndexError {
    #[error("duplicate doc_id {0}")]
    DuplicateDocument(String),
    #[error("duplicate person_id {0}")]
    DuplicatePerson(PersonId),
    #[error("{0} refers to unknown person_id {1}")]
    UnknownPerson(&'static str, PersonId),
    #[error("document {0} has {1} sections but {2} mention lists")]
    MentionShape(String, usize, usize),
    #[error("index parts are inconsistent: {0}")]
    Inconsistent(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortIndex {
    sections: Vec<SectionEntry>,
    patients: BTreeMap<PersonId, PatientEntry>,
    text_postings: BTreeMap<String, Vec<TextPosting>>,
    concept_postings: BTreeMap<ConceptId, Vec<ConceptPosting>>,
    stats: FieldStats,
}

pub fn build_index(corpus: &Corpus) -> Result<CohortIndex, IndexError> {
    CohortIndex::build(corpus)
}

impl CohortIndex {
    pub fn build(corpus: &Corpus) -> Result<Self, IndexError> {
        let mut patients: BTreeMap<PersonId, PatientEntry> = BTreeMap::new();
        for p in &corpus.persons {
            let entry = PatientEntry {
                person: p.clone(),
                records: Vec::new(),
                sections: Vec::new(),
            };
            if patients.insert(p.person_id.clone(), entry).is_some() {
                return Err(IndexError::DuplicatePerson(p.person_id.clone()));
            }
        }
        for r in &corpus.records {
            let patient = patients
                .get_mut(&r.person_id)
                .ok_or_else(|| IndexError::UnknownPerson("record", r.person_id.clone()))?;
            if let Some(concept_id) = &r.concept_id {
                patient.records.push(RecordEntry {
                    concept_id: concept_id.clone(),
                    domain: r.domain,
                    event_date: r.event_date,
                });
            }
        }

        let mut doc_ids = BTreeSet::new();
        let mut docs_by_person: BTreeMap<&PersonId, Vec<usize>> = BTreeMap::new();
        for (i, d) in corpus.documents.iter().enumerate() {
            if !doc_ids.insert(d.doc_id.as_str()) {
                return Err(IndexError::DuplicateDocument(d.doc_id.clone()));
            }
            if !patients.contains_key(&d.person_id) {
                return Err(IndexError::UnknownPerson("document", d.person_id.clone()));
            }
            if d.sections.len() != d.mentions.len() {
                return Err(IndexError::MentionShape(d.doc_id.clone(), d.sections.len(), d.mentions.len()));
            }
            docs_by_person.entry(&d.person_id).or_default().push(i);
        }

        let mut sections = Vec::new();
        for (person_id, docs) in docs_by_person {
            let patient = patients.get_mut(person_id).expect("checked above");
            for i in docs {
                let d = &corpus.documents[i];
                for (s, mentions) in d.sections.iter().zip(&d.mentions) {
                    patient.sections.push(sections.len());
                    sections.push(SectionEntry {
                        doc_id: d.doc_id.clone(),
                        person_id: d.person_id.clone(),
                        section_id: s.section_id.clone(),
                        heading: s.heading.clone(),
                        body: s.body.clone(),
                        char_offset: s.char_offset,
                        encounter_date: d.encounter_date,
                        text_len: tokenize(&s.body).len() as u32,
                        concept_len: mentions.len() as u32,
                        mentions: mentions.clone(),
                    });
                }
            }
        }
        for p in patients.values_mut() {
            p.records.sort();
        }
        Ok(Self::assemble(sections, patients))
    }

    fn assemble(sections: Vec<SectionEntry>, patients: BTreeMap<PersonId, PatientEntry>) -> Self {
        let mut text_postings: BTreeMap<String, Vec<TextPosting>> = BTreeMap::new();
        let mut concept_postings: BTreeMap<ConceptId, Vec<ConceptPosting>> = BTreeMap::new();
        for (handle, s) in sections.iter().enumerate() {
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokenize(&s.body) {
                *tf.entry(t.text).or_default() += 1;
            }
            for (term, tf) in tf {
                text_postings.entry(term).or_default().push(TextPosting { section: handle, tf });
            }
            let mut cp: BTreeMap<&ConceptId, ConceptPosting> = BTreeMap::new();
            for m in &s.mentions {
                let p = cp.entry(&m.concept_id).or_insert(ConceptPosting {
                    section: handle,
                    affirmed_tf: 0,
                    total_tf: 0,
                    modifiers: 0,
                });
                p.total_tf += 1;
                if m.modifiers.is_affirmed() {
                    p.affirmed_tf += 1;
                }
                p.modifiers |= bits(m);
            }
            for (id, p) in cp {
                concept_postings.entry(id.clone()).or_default().push(p);
            }
        }
        let stats = FieldStats::compute(&sections);
        Self {
            sections,
            patients,
            text_postings,
            concept_postings,
            stats,
        }
    }

    /// Reassembles an index from its tables, as read from a snapshot.
    /// Postings and stats must equal the ones derived from the sections.
    pub fn from_parts(
        sections: Vec<SectionEntry>,
        patients: BTreeMap<PersonId, PatientEntry>,
        text_postings: BTreeMap<String, Vec<TextPosting>>,
        concept_postings: BTreeMap<ConceptId, Vec<ConceptPosting>>,
        stats: FieldStats,
    ) -> Result<Self, IndexError> {
        let mut owner: Vec<Option<&PersonId>> = alloc::vec![None; sections.len()];
        for (id, p) in &patients {
            if p.person.person_id != *id {
                return Err(IndexError::Inconsistent("patient key differs from person_id"));
            }
            if !p.sections.windows(2).all(|w| w[0] < w[1]) {
                return Err(IndexError::Inconsistent("patient sections not ascending"));
            }
            for &h in &p.sections {
                match owner.get_mut(h) {
                    Some(slot @ None) if sections[h].person_id == *id => *slot = Some(id),
                    _ => return Err(IndexError::Inconsistent("section ownership")),
                }
            }
        }
        if owner.iter().any(Option::is_none) {
            return Err(IndexError::Inconsistent("section without an owner"));
        }
        let index = Self::assemble(sections, patients);
        if index.text_postings != text_postings || index.concept_postings != concept_postings {
            return Err(IndexError::Inconsistent("postings differ from sections"));
        }
        if index.stats.total_sections != stats.total_sections
            || index.stats.avg_text_len.to_bits() != stats.avg_text_len.to_bits()
            || index.stats.avg_concept_len.to_bits() != stats.avg_concept_len.to_bits()
        {
            return Err(IndexError::Inconsistent("stats differ from sections"));
        }
        Ok(index)
    }

    pub fn stats(&self) -> &FieldStats {
        &self.stats
    }

    pub fn sections(&self) -> &[SectionEntry] {
        &self.sections
    }

    pub fn section(&self, handle: SectionHandle) -> Option<&SectionEntry> {
        self.sections.get(handle)
    }

    pub fn patients(&self) -> impl Iterator<Item = &PatientEntry> {
        self.patients.values()
    }

    pub fn patient(&self, person_id: &str) -> Option<&PatientEntry> {
        self.patients.get(person_id)
    }

    pub fn person_ids(&self) -> impl Iterator<Item = &PersonId> {
        self.patients.keys()
    }

    pub fn text_postings(&self) -> &BTreeMap<String, Vec<TextPosting>> {
        &self.text_postings
    }

    pub fn concept_postings(&self) -> &BTreeMap<ConceptId, Vec<ConceptPosting>> {
        &self.concept_postings
    }

    /// Sections with a positive frequency for `term`; on the concept field
    /// only affirmed patient mentions count.
    pub fn doc_frequency(&self, field: Field, term: &str) -> usize {
        match field {
            Field::Text => self.text_postings.get(term).map_or(0, Vec::len),
            Field::Concept => self
                .concept_postings
                .get(term)
                .map_or(0, |ps| ps.iter().filter(|p| p.affirmed_tf > 0).count()),
        }
    }

    /// Raw term frequency on the text field, affirmed patient frequency on
    /// the concept field.
    pub fn term_frequency(&self, field: Field, term: &str, section: SectionHandle) -> u32 {
        match field {
            Field::Text => self
                .text_postings
                .get(term)
                .and_then(|ps| ps.binary_search_by_key(&section, |p| p.section).ok().map(|i| ps[i].tf)),
            Field::Concept => self.concept_posting(term, section).map(|p| p.affirmed_tf),
        }
        .unwrap_or(0)
    }

    pub fn concept_posting(&self, concept_id: &str, section: SectionHandle) -> Option<&ConceptPosting> {
        let ps = self.concept_postings.get(concept_id)?;
        ps.binary_search_by_key(&section, |p| p.section).ok().map(|i| &ps[i])
    }

    pub fn field_len(&self, field: Field, section: SectionHandle) -> u32 {
        self.sections.get(section).map_or(0, |s| match field {
            Field::Text => s.text_len,
            Field::Concept => s.concept_len,
        })
    }

    pub fn sections_of_patient(&self, person_id: &str) -> &[SectionHandle] {
        self.patients.get(person_id).map_or(&[], |p| p.sections.as_slice())
    }

    /// Whether the patient has a record of one of `concept_ids` whose event
    /// satisfies `predicate`.
    pub fn has_structured_concept(&self, person_id: &str, concept_ids: &[ConceptId], predicate: Option<&EventPredicate>) -> bool {
        let Some(p) = self.patients.get(person_id) else {
            return false;
        };
        p.records
            .iter()
            .any(|r| concept_ids.contains(&r.concept_id) && predicate.is_none_or(|pr| pr.matches(p.person.birth_date, r.event_date)))
    }

    /// Whether any section of the patient has an affirmed patient mention of
    /// one of `concept_ids`.
    pub fn has_affirmed_mention(&self, person_id: &str, concept_ids: &[ConceptId]) -> bool {
        self.sections_of_patient(person_id).iter().any(|&h| {
            concept_ids
                .iter()
                .any(|c| self.concept_posting(c.as_str(), h).is_some_and(|p| p.affirmed_tf > 0))
        })
    }
}

fn bits(m: &ConceptMention) -> u8 {
    use modifier_bits::*;
    let t = &m.modifiers;
    (if t.negated { NEGATED } else { 0 })
        | (if t.experiencer == Experiencer::Family { FAMILY } else { 0 })
        | (if t.status == Status::Historical { HISTORICAL } else { 0 })
        | (if t.certainty == Certainty::Uncertain { UNCERTAIN } else { 0 })
}
