//! Concept vocabulary: OMOP-style concepts, source-code mapping and the
//! descendant closure used to expand concept sets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ids::ConceptId;
use crate::text::normalized_terms;

/// CDM domain a concept belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Domain {
    Condition,
    Procedure,
    Measurement,
    Drug,
    Observation,
    Person,
}

impl Domain {
    pub const ALL: [Domain; 6] = [
        Domain::Condition,
        Domain::Procedure,
        Domain::Measurement,
        Domain::Drug,
        Domain::Observation,
        Domain::Person,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Condition => "Condition",
            Domain::Procedure => "Procedure",
            Domain::Measurement => "Measurement",
            Domain::Drug => "Drug",
            Domain::Observation => "Observation",
            Domain::Person => "Person",
        }
    }

    /// Domains that structured records and structured filters may carry.
    pub fn is_record_domain(self) -> bool {
        matches!(self, Domain::Condition | Domain::Procedure | Domain::Measurement | Domain::Drug)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Domain::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| UnknownVariant(s.to_string()))
    }
}

/// Source coding systems that structured records arrive in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SourceVocabulary {
    #[serde(rename = "ICD9")]
    Icd9,
    #[serde(rename = "ICD10")]
    Icd10,
    #[serde(rename = "CPT")]
    Cpt,
    #[serde(rename = "LOCAL_LAB")]
    LocalLab,
    #[serde(rename = "DRUG_NAME")]
    DrugName,
}

impl SourceVocabulary {
    pub const ALL: [SourceVocabulary; 5] = [
        SourceVocabulary::Icd9,
        SourceVocabulary::Icd10,
        SourceVocabulary::Cpt,
        SourceVocabulary::LocalLab,
        SourceVocabulary::DrugName,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceVocabulary::Icd9 => "ICD9",
            SourceVocabulary::Icd10 => "ICD10",
            SourceVocabulary::Cpt => "CPT",
            SourceVocabulary::LocalLab => "LOCAL_LAB",
            SourceVocabulary::DrugName => "DRUG_NAME",
        }
    }

    /// Drug names are matched case-insensitively; codes are exact.
    fn normalize_code(self, code: &str) -> String {
        match self {
            SourceVocabulary::DrugName => code.trim().to_lowercase(),
            _ => code.to_string(),
        }
    }
}

impl fmt::Display for SourceVocabulary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceVocabulary {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SourceVocabulary::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown value {0:?}")]
pub struct UnknownVariant(pub String);

/// Named-entity mention types of the NLP type system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MentionType {
    SignSymptom,
    DiseaseDisorder,
    Procedure,
    Lab,
    VitalSigns,
    Medication,
}

impl MentionType {
    pub const ALL: [MentionType; 6] = [
        MentionType::SignSymptom,
        MentionType::DiseaseDisorder,
        MentionType::Procedure,
        MentionType::Lab,
        MentionType::VitalSigns,
        MentionType::Medication,
    ];

    /// CDM table a mention of this type lands in.
    pub fn cdm_domain(self) -> Domain {
        match self {
            MentionType::SignSymptom | MentionType::DiseaseDisorder => Domain::Condition,
            MentionType::Procedure => Domain::Procedure,
            MentionType::Lab | MentionType::VitalSigns => Domain::Measurement,
            MentionType::Medication => Domain::Drug,
        }
    }

    /// Mention type assigned to text matches of a concept in `domain`.
    ///
    /// Observation and Person concepts have no mention type and are not
    /// matched in text.
    pub fn for_domain(domain: Domain) -> Option<MentionType> {
        match domain {
            Domain::Condition => Some(MentionType::DiseaseDisorder),
            Domain::Procedure => Some(MentionType::Procedure),
            Domain::Measurement => Some(MentionType::Lab),
            Domain::Drug => Some(MentionType::Medication),
            Domain::Observation | Domain::Person => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub concept_id: ConceptId,
    pub domain: Domain,
    pub preferred_name: String,
    pub cui: Option<String>,
    pub synonyms: Vec<String>,
    pub parent_ids: Vec<ConceptId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeMapping {
    pub source_vocabulary: SourceVocabulary,
    pub source_code: String,
    pub concept_id: ConceptId,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VocabError {
    #[error("duplicate concept_id {0}")]
    DuplicateConcept(ConceptId),
    #[error("concept {0} has an empty preferred_name")]
    EmptyName(ConceptId),
    #[error("concept {concept} lists synonym {synonym:?} twice")]
    DuplicateSynonym { concept: ConceptId, synonym: String },
    #[error("concept {concept} names unknown parent {parent}")]
    DanglingParent { concept: ConceptId, parent: ConceptId },
    #[error("concept hierarchy has a cycle through {0}")]
    Cycle(ConceptId),
    #[error("code {vocabulary} {code:?} is mapped twice")]
    DuplicateMapping { vocabulary: SourceVocabulary, code: String },
    #[error("code {vocabulary} {code:?} maps to unknown concept {concept}")]
    MappingToUnknownConcept {
        vocabulary: SourceVocabulary,
        code: String,
        concept: ConceptId,
    },
    #[error("unknown concept {0}")]
    UnknownConcept(ConceptId),
}

/// An immutable, validated vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    concepts: BTreeMap<ConceptId, Concept>,
    mappings: Vec<CodeMapping>,
    codes: BTreeMap<(SourceVocabulary, String), ConceptId>,
    children: BTreeMap<ConceptId, Vec<ConceptId>>,
    terms: BTreeMap<Vec<String>, ConceptId>,
    max_term_len: usize,
}

impl Vocabulary {
    pub fn new(concepts: Vec<Concept>, mappings: Vec<CodeMapping>) -> Result<Self, VocabError> {
        let mut by_id = BTreeMap::new();
        for c in concepts {
            if c.preferred_name.trim().is_empty() {
                return Err(VocabError::EmptyName(c.concept_id));
            }
            let mut seen = BTreeSet::new();
            for s in &c.synonyms {
                if !seen.insert(s.to_lowercase()) {
                    return Err(VocabError::DuplicateSynonym {
                        concept: c.concept_id.clone(),
                        synonym: s.clone(),
                    });
                }
            }
            if by_id.contains_key(&c.concept_id) {
                return Err(VocabError::DuplicateConcept(c.concept_id));
            }
            by_id.insert(c.concept_id.clone(), c);
        }

        let mut children: BTreeMap<ConceptId, Vec<ConceptId>> = BTreeMap::new();
        for c in by_id.values() {
            for p in &c.parent_ids {
                if !by_id.contains_key(p) {
                    return Err(VocabError::DanglingParent {
                        concept: c.concept_id.clone(),
                        parent: p.clone(),
                    });
                }
                children.entry(p.clone()).or_default().push(c.concept_id.clone());
            }
        }
        for kids in children.values_mut() {
            kids.sort();
            kids.dedup();
        }
        check_acyclic(&by_id)?;

        let mut codes = BTreeMap::new();
        for m in &mappings {
            if !by_id.contains_key(&m.concept_id) {
                return Err(VocabError::MappingToUnknownConcept {
                    vocabulary: m.source_vocabulary,
                    code: m.source_code.clone(),
                    concept: m.concept_id.clone(),
                });
            }
            let key = (m.source_vocabulary, m.source_vocabulary.normalize_code(&m.source_code));
            if codes.insert(key, m.concept_id.clone()).is_some() {
                return Err(VocabError::DuplicateMapping {
                    vocabulary: m.source_vocabulary,
                    code: m.source_code.clone(),
                });
            }
        }

        // Concepts iterate in id order, so an ambiguous term resolves to the
        // smallest concept_id.
        let mut terms: BTreeMap<Vec<String>, ConceptId> = BTreeMap::new();
        for c in by_id.values() {
            if MentionType::for_domain(c.domain).is_none() {
                continue;
            }
            for name in core::iter::once(&c.preferred_name).chain(&c.synonyms) {
                let key = normalized_terms(name);
                if !key.is_empty() {
                    terms.entry(key).or_insert_with(|| c.concept_id.clone());
                }
            }
        }
        let max_term_len = terms.keys().map(Vec::len).max().unwrap_or(0);

        Ok(Self {
            concepts: by_id,
            mappings,
            codes,
            children,
            terms,
            max_term_len,
        })
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), Vec::new()).expect("empty vocabulary is valid")
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Concept> {
        self.concepts.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.concepts.contains_key(id)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn mappings(&self) -> &[CodeMapping] {
        &self.mappings
    }

    /// Canonical concept for a source code, or `None` when unmapped.
    pub fn map_code(&self, vocabulary: SourceVocabulary, code: &str) -> Option<&ConceptId> {
        self.codes.get(&(vocabulary, vocabulary.normalize_code(code)))
    }

    /// The concept plus all of its transitive descendants.
    pub fn expand_concept(&self, id: &str) -> Result<BTreeSet<ConceptId>, VocabError> {
        let root = self
            .concepts
            .get_key_value(id)
            .map(|(k, _)| k.clone())
            .ok_or_else(|| VocabError::UnknownConcept(ConceptId::from(id)))?;
        let mut out = BTreeSet::new();
        let mut stack = alloc::vec![root];
        while let Some(c) = stack.pop() {
            if let Some(kids) = self.children.get(&c) {
                stack.extend(kids.iter().filter(|k| !out.contains(*k)).cloned());
            }
            out.insert(c);
        }
        Ok(out)
    }

    pub fn children_of(&self, id: &str) -> &[ConceptId] {
        self.children.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn mention_type(&self, id: &str) -> Option<MentionType> {
        self.get(id).and_then(|c| MentionType::for_domain(c.domain))
    }

    /// Concept whose name tokenizes to exactly `tokens`.
    pub fn lookup_term(&self, tokens: &[String]) -> Option<&ConceptId> {
        self.terms.get(tokens)
    }

    /// Length in tokens of the longest matchable name.
    pub fn max_term_len(&self) -> usize {
        self.max_term_len
    }

    /// Case-insensitive substring search over names and synonyms, for
    /// autocomplete. Concepts whose preferred name starts with the needle
    /// come first; ties order by name, then id.
    pub fn search_names(&self, needle: &str, limit: usize) -> Vec<&Concept> {
        let needle = needle.trim().to_lowercase();
        if needle.is_empty() {
            return Vec::new();
        }
        let mut hits: Vec<(u8, String, &Concept)> = self
            .concepts
            .values()
            .filter_map(|c| {
                let name = c.preferred_name.to_lowercase();
                let rank = if name.starts_with(&needle) {
                    0
                } else if name.contains(&needle) {
                    1
                } else if c.synonyms.iter().any(|s| s.to_lowercase().contains(&needle)) {
                    2
                } else {
                    return None;
                };
                Some((rank, name, c))
            })
            .collect();
        hits.sort_by(|a, b| (a.0, &a.1, &a.2.concept_id).cmp(&(b.0, &b.1, &b.2.concept_id)));
        hits.into_iter().take(limit).map(|(_, _, c)| c).collect()
    }
}

fn check_acyclic(concepts: &BTreeMap<ConceptId, Concept>) -> Result<(), VocabError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    let mut marks: BTreeMap<&ConceptId, Mark> = BTreeMap::new();
    for start in concepts.keys() {
        if marks.contains_key(start) {
            continue;
        }
        // Iterative DFS over parent edges: (node, next parent index).
        let mut stack: Vec<(&ConceptId, usize)> = alloc::vec![(start, 0)];
        marks.insert(start, Mark::Active);
        while let Some((node, i)) = stack.pop() {
            let parents = &concepts[node].parent_ids;
            if i < parents.len() {
                stack.push((node, i + 1));
                let p = &parents[i];
                match marks.get(p) {
                    Some(Mark::Active) => return Err(VocabError::Cycle(p.clone())),
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(p, Mark::Active);
                        stack.push((p, 0));
                    }
                }
            } else {
                marks.insert(node, Mark::Done);
            }
        }
    }
    Ok(())
}
