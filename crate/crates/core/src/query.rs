//! The editable cohort query document: parsing from free text, validation,
//! and the accessors retrieval uses.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{default_as_of, Gender};
use crate::date::{AgeRange, Date};
use crate::ids::ConceptId;
use crate::index::EventPredicate;
use crate::text::{extract_from_text, tokenize, Token, TriggerLexicon};
use crate::vocab::{Domain, Vocabulary};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_TOP_K_DOCS: u32 = 100;
pub const DEFAULT_QUERY_ID: &str = "query";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    Should,
    Must,
    MustNot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterClause {
    Must,
    MustNot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryConcept {
    pub concept_id: ConceptId,
    pub clause: Clause,
    /// Byte span in `raw_text` the concept was extracted from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_span: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuredFilter {
    pub domain: Domain,
    pub concept_ids: Vec<ConceptId>,
    pub clause: FilterClause,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_at_event: Option<AgeRange>,
}

impl StructuredFilter {
    pub fn predicate(&self) -> Option<EventPredicate> {
        self.age_at_event.map(EventPredicate::age)
    }

    /// Appends every descendant of the listed concepts that shares the
    /// filter's domain, in id order, skipping ids already present.
    pub fn expand(&mut self, vocab: &Vocabulary) {
        let listed = self.concept_ids.clone();
        for c in &listed {
            for id in vocab.expand_concept(c.as_str()).unwrap_or_default() {
                if vocab.get(id.as_str()).is_some_and(|k| k.domain == self.domain) && !self.concept_ids.contains(&id) {
                    self.concept_ids.push(id);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demographics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_at_query: Option<AgeRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for Weights {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortQuery {
    #[serde(default = "format_version")]
    pub format_version: u32,
    #[serde(default = "query_id")]
    pub query_id: String,
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demographics: Option<Demographics>,
    #[serde(default = "default_as_of")]
    pub as_of_date: Date,
    #[serde(default)]
    pub structured_filters: Vec<StructuredFilter>,
    #[serde(default)]
    pub concepts: Vec<QueryConcept>,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default = "top_k")]
    pub top_k_docs: u32,
}

fn format_version() -> u32 {
    FORMAT_VERSION
}

fn query_id() -> String {
    DEFAULT_QUERY_ID.into()
}

fn top_k() -> u32 {
    DEFAULT_TOP_K_DOCS
}

impl CohortQuery {
    /// A query with only free text and every default applied.
    pub fn from_text(raw_text: impl Into<String>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            query_id: query_id(),
            raw_text: raw_text.into(),
            demographics: None,
            as_of_date: default_as_of(),
            structured_filters: Vec::new(),
            concepts: Vec::new(),
            weights: Weights::default(),
            top_k_docs: DEFAULT_TOP_K_DOCS,
        }
    }

    /// The concepts that score: Should and Must, in document order.
    pub fn scoring_concepts(&self) -> impl Iterator<Item = &ConceptId> {
        self.concepts.iter().filter(|c| c.clause != Clause::MustNot).map(|c| &c.concept_id)
    }

    /// M: the number of scoring concepts.
    pub fn m(&self) -> usize {
        self.scoring_concepts().count()
    }

    pub fn concepts_with(&self, clause: Clause) -> Vec<ConceptId> {
        self.concepts
            .iter()
            .filter(|c| c.clause == clause)
            .map(|c| c.concept_id.clone())
            .collect()
    }

    /// Distinct tokens of `raw_text`, sorted.
    pub fn text_terms(&self) -> BTreeSet<String> {
        tokenize(&self.raw_text).into_iter().map(|t| t.text).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    UnsupportedVersion,
    NoScoringSignal,
    InvalidWeight,
    InvalidTopK,
    BoundsInverted,
    EmptyFilter,
    DuplicateConcept,
    UnknownConcept,
    DomainMismatch,
    UnsupportedDomain,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::UnsupportedVersion => "UNSUPPORTED_VERSION",
            ViolationCode::NoScoringSignal => "NO_SCORING_SIGNAL",
            ViolationCode::InvalidWeight => "INVALID_WEIGHT",
            ViolationCode::InvalidTopK => "INVALID_TOP_K",
            ViolationCode::BoundsInverted => "BOUNDS_INVERTED",
            ViolationCode::EmptyFilter => "EMPTY_FILTER",
            ViolationCode::DuplicateConcept => "DUPLICATE_CONCEPT",
            ViolationCode::UnknownConcept => "UNKNOWN_CONCEPT",
            ViolationCode::DomainMismatch => "DOMAIN_MISMATCH",
            ViolationCode::UnsupportedDomain => "UNSUPPORTED_DOMAIN",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub field_path: String,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, field_path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code,
            field_path: field_path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.field_path, self.message)
    }
}

/// Invariants that need no vocabulary.
pub fn check_structure(q: &CohortQuery) -> Vec<Violation> {
    use ViolationCode::*;
    let mut out = Vec::new();
    if q.format_version != FORMAT_VERSION {
        out.push(Violation::new(
            UnsupportedVersion,
            "format_version",
            format!("format_version {} is not supported (expected {FORMAT_VERSION})", q.format_version),
        ));
    }
    for (name, w) in [("alpha", q.weights.alpha), ("beta", q.weights.beta)] {
        if !w.is_finite() || w < 0.0 {
            out.push(Violation::new(
                InvalidWeight,
                format!("weights.{name}"),
                "weights must be finite and non-negative",
            ));
        }
    }
    if q.top_k_docs < 1 {
        out.push(Violation::new(InvalidTopK, "top_k_docs", "top_k_docs must be at least 1"));
    }
    if let Some(r) = q.demographics.as_ref().and_then(|d| d.age_at_query) {
        if r.is_inverted() {
            out.push(Violation::new(
                BoundsInverted,
                "demographics.age_at_query",
                format!("age bounds {r} are inverted"),
            ));
        }
    }
    if q.m() == 0 && tokenize(&q.raw_text).is_empty() {
        out.push(Violation::new(
            NoScoringSignal,
            "concepts",
            "a query needs a should/must concept or non-empty raw_text",
        ));
    }
    let mut seen = BTreeSet::new();
    for (j, c) in q.concepts.iter().enumerate() {
        if !seen.insert(&c.concept_id) {
            out.push(Violation::new(
                DuplicateConcept,
                format!("concepts[{j}].concept_id"),
                format!("concept {} is listed twice", c.concept_id),
            ));
        }
    }
    for (i, f) in q.structured_filters.iter().enumerate() {
        if !f.domain.is_record_domain() {
            out.push(Violation::new(
                UnsupportedDomain,
                format!("structured_filters[{i}].domain"),
                format!("domain {} has no structured records", f.domain),
            ));
        }
        if f.concept_ids.is_empty() {
            out.push(Violation::new(
                EmptyFilter,
                format!("structured_filters[{i}].concept_ids"),
                "filter has no concepts",
            ));
        }
        if let Some(r) = f.age_at_event {
            if r.is_inverted() {
                out.push(Violation::new(
                    BoundsInverted,
                    format!("structured_filters[{i}].age_at_event"),
                    format!("age bounds {r} are inverted"),
                ));
            }
        }
        let mut seen = BTreeSet::new();
        for (j, c) in f.concept_ids.iter().enumerate() {
            if !seen.insert(c) {
                out.push(Violation::new(
                    DuplicateConcept,
                    format!("structured_filters[{i}].concept_ids[{j}]"),
                    format!("concept {c} is listed twice"),
                ));
            }
        }
    }
    out
}

/// Every invariant of the query document; empty means valid.
pub fn validate_query(q: &CohortQuery, vocab: &Vocabulary) -> Vec<Violation> {
    use ViolationCode::*;
    let mut out = check_structure(q);
    for (i, f) in q.structured_filters.iter().enumerate() {
        for (j, c) in f.concept_ids.iter().enumerate() {
            let path = format!("structured_filters[{i}].concept_ids[{j}]");
            match vocab.get(c.as_str()) {
                None => out.push(Violation::new(UnknownConcept, path, format!("unknown concept {c}"))),
                Some(concept) if concept.domain != f.domain => out.push(Violation::new(
                    DomainMismatch,
                    path,
                    format!("concept {c} is in domain {}, filter is {}", concept.domain, f.domain),
                )),
                Some(_) => {}
            }
        }
    }
    for (j, c) in q.concepts.iter().enumerate() {
        if !vocab.contains(c.concept_id.as_str()) {
            out.push(Violation::new(
                UnknownConcept,
                format!("concepts[{j}].concept_id"),
                format!("unknown concept {}", c.concept_id),
            ));
        }
    }
    out.sort_by(|a, b| a.field_path.cmp(&b.field_path).then(a.code.cmp(&b.code)));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("query text has no words and no concepts")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOptions {
    pub query_id: String,
    pub as_of_date: Date,
    /// Widen each draft filter to the descendants of its concepts.
    pub expand_filters: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            query_id: query_id(),
            as_of_date: default_as_of(),
            expand_filters: false,
        }
    }
}

pub fn parse_query(text: &str, vocab: &Vocabulary) -> Result<CohortQuery, ParseError> {
    parse_query_with(text, vocab, &TriggerLexicon::default(), &ParseOptions::default())
}

/// Runs concept extraction over the query text and drafts the query model.
///
/// Negated mentions become MustNot concepts and all others Should; a
/// concept mentioned both ways stays Should. Condition, Procedure and Drug
/// concepts also seed draft filters over the concept and its descendants,
/// grouped per (domain, clause): Must for Should concepts, MustNot for
/// MustNot ones.
pub fn parse_query_with(
    text: &str,
    vocab: &Vocabulary,
    lexicon: &TriggerLexicon,
    options: &ParseOptions,
) -> Result<CohortQuery, ParseError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(ParseError::Empty);
    }

    let mut concepts: Vec<QueryConcept> = Vec::new();
    for m in extract_from_text(text, vocab, lexicon) {
        let clause = if m.modifiers.negated { Clause::MustNot } else { Clause::Should };
        match concepts.iter_mut().find(|c| c.concept_id == m.concept_id) {
            Some(c) if c.clause == Clause::MustNot && clause == Clause::Should => {
                c.clause = Clause::Should;
                c.source_span = Some([m.start, m.end]);
            }
            Some(_) => {}
            None => concepts.push(QueryConcept {
                concept_id: m.concept_id,
                clause,
                source_span: Some([m.start, m.end]),
            }),
        }
    }

    let mut structured_filters: Vec<StructuredFilter> = Vec::new();
    for c in &concepts {
        let Some(domain) = vocab.get(c.concept_id.as_str()).map(|k| k.domain) else {
            continue;
        };
        if !matches!(domain, Domain::Condition | Domain::Procedure | Domain::Drug) {
            continue;
        }
        let clause = if c.clause == Clause::MustNot {
            FilterClause::MustNot
        } else {
            FilterClause::Must
        };
        let i = match structured_filters.iter().position(|f| f.domain == domain && f.clause == clause) {
            Some(i) => i,
            None => {
                structured_filters.push(StructuredFilter {
                    domain,
                    concept_ids: Vec::new(),
                    clause,
                    age_at_event: None,
                });
                structured_filters.len() - 1
            }
        };
        let ids = &mut structured_filters[i].concept_ids;
        if !ids.contains(&c.concept_id) {
            ids.push(c.concept_id.clone());
        }
    }
    if options.expand_filters {
        for f in &mut structured_filters {
            f.expand(vocab);
        }
    }

    let age_at_query = explicit_age_range(text, &tokens).or_else(|| age_word(&tokens));
    let gender = gender_words(&tokens);
    let demographics = (age_at_query.is_some() || gender.is_some()).then_some(Demographics { age_at_query, gender });

    Ok(CohortQuery {
        format_version: FORMAT_VERSION,
        query_id: options.query_id.clone(),
        raw_text: text.to_string(),
        demographics,
        as_of_date: options.as_of_date,
        structured_filters,
        concepts,
        weights: Weights::default(),
        top_k_docs: DEFAULT_TOP_K_DOCS,
    })
}

/// `N-M years old` or `N to M years old`.
fn explicit_age_range(text: &str, tokens: &[Token]) -> Option<AgeRange> {
    tokens
        .windows(4)
        .find_map(|w| {
            let lo: u32 = w[0].text.parse().ok()?;
            let hi: u32 = w[1].text.parse().ok()?;
            let sep = text[w[0].end..w[1].start].trim();
            let ranged = matches!(sep, "-" | "\u{2013}" | "\u{2014}");
            (ranged && w[2].text == "years" && w[3].text == "old").then_some(AgeRange::new(lo, hi))
        })
        .or_else(|| {
            tokens.windows(5).find_map(|w| {
                let lo: u32 = w[0].text.parse().ok()?;
                let hi: u32 = w[2].text.parse().ok()?;
                (w[1].text == "to" && w[3].text == "years" && w[4].text == "old").then_some(AgeRange::new(lo, hi))
            })
        })
}

fn age_word(tokens: &[Token]) -> Option<AgeRange> {
    tokens.iter().find_map(|t| match t.text.as_str() {
        "adult" | "adults" => Some(AgeRange::ADULTS),
        "child" | "children" => Some(AgeRange::CHILDREN),
        _ => None,
    })
}

fn gender_words(tokens: &[Token]) -> Option<Gender> {
    let has = |words: &[&str]| tokens.iter().any(|t| words.contains(&t.text.as_str()));
    let f = has(&["women", "woman", "female", "females"]);
    let m = has(&["men", "man", "male", "males"]);
    match (f, m) {
        (true, false) => Some(Gender::F),
        (false, true) => Some(Gender::M),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tsv::bundled_vocabulary;
    use crate::vocab::tests::ibd_vocab;

    const IBD_QUERY: &str = "Adults with inflammatory bowel disease (ulcerative colitis or Crohn's disease), who have not had surgery of the intestines, rectum, or anus entailing excision, ostomy";
    const Q2: &str = "Adults 18-100 years old who have a diagnosis of hereditary hemorrhagic telangiectasia (HHT), which is also called Osler-Weber-Rendu syndrome.";

    fn ids(q: &CohortQuery, clause: Clause) -> Vec<&str> {
        q.concepts
            .iter()
            .filter(|c| c.clause == clause)
            .map(|c| c.concept_id.as_str())
            .collect()
    }

    #[test]
    fn ibd_query_parses_into_should_concepts_and_surgery_exclusion() {
        let v = bundled_vocabulary();
        let q = parse_query(IBD_QUERY, &v).unwrap();
        assert_eq!(
            ids(&q, Clause::Should),
            ["cond.inflammatory_bowel_disease", "cond.ulcerative_colitis", "cond.crohns_disease"]
        );
        assert_eq!(ids(&q, Clause::MustNot), ["proc.intestinal_surgery"]);
        assert_eq!(q.demographics.as_ref().unwrap().age_at_query, Some(AgeRange::ADULTS));
        let must_not: Vec<_> = q.structured_filters.iter().filter(|f| f.clause == FilterClause::MustNot).collect();
        assert_eq!(must_not.len(), 1);
        assert_eq!(must_not[0].domain, Domain::Procedure);
        assert_eq!(must_not[0].concept_ids, [ConceptId::from("proc.intestinal_surgery")]);
        assert!(validate_query(&q, &v).is_empty());
    }

    #[test]
    fn expansion_is_opt_in() {
        let v = bundled_vocabulary();
        let options = ParseOptions {
            expand_filters: true,
            ..ParseOptions::default()
        };
        let q = parse_query_with(IBD_QUERY, &v, &TriggerLexicon::default(), &options).unwrap();
        let f = q.structured_filters.iter().find(|f| f.clause == FilterClause::MustNot).unwrap();
        let expected: Vec<ConceptId> = core::iter::once(ConceptId::from("proc.intestinal_surgery"))
            .chain(
                v.expand_concept("proc.intestinal_surgery")
                    .unwrap()
                    .into_iter()
                    .filter(|c| c != "proc.intestinal_surgery"),
            )
            .collect();
        assert_eq!(f.concept_ids, expected);
        assert!(expected.len() > 5);
        assert!(validate_query(&q, &v).is_empty());

        // Expanding twice changes nothing.
        let mut again = f.clone();
        again.expand(&v);
        assert_eq!(&again, f);
    }

    #[test]
    fn hht_query_gets_explicit_age_bounds() {
        let v = bundled_vocabulary();
        let q = parse_query(Q2, &v).unwrap();
        assert_eq!(q.demographics.as_ref().unwrap().age_at_query, Some(AgeRange::new(18, 100)));
        assert_eq!(ids(&q, Clause::Should), ["cond.hereditary_hemorrhagic_telangiectasia"]);
        assert!(ids(&q, Clause::MustNot).is_empty());
    }

    #[test]
    fn empty_text_is_an_error_and_plain_text_is_a_query() {
        let v = ibd_vocab();
        assert_eq!(parse_query("", &v), Err(ParseError::Empty));
        assert_eq!(parse_query("  ;. ", &v), Err(ParseError::Empty));
        let q = parse_query("stable angina", &v).unwrap();
        assert!(q.concepts.is_empty());
        assert!(check_structure(&q).is_empty());
    }

    #[test]
    fn children_and_gender_words() {
        let v = ibd_vocab();
        let q = parse_query("Children, boys and girls, with cough", &v).unwrap();
        assert_eq!(q.demographics.unwrap().age_at_query, Some(AgeRange::CHILDREN));
        let q = parse_query("Women 30 to 40 years old with cough", &v).unwrap();
        let d = q.demographics.unwrap();
        assert_eq!((d.age_at_query, d.gender), (Some(AgeRange::new(30, 40)), Some(Gender::F)));
    }

    #[test]
    fn affirmed_mention_wins_over_negated_one() {
        let v = ibd_vocab();
        let q = parse_query("no cough. cough", &v).unwrap();
        assert_eq!(ids(&q, Clause::Should), ["cough"]);
        assert_eq!(q.concepts[0].source_span, Some([10, 15]));
    }

    #[test]
    fn validation_codes_and_paths() {
        let v = ibd_vocab();
        let mut q = CohortQuery::from_text("x");
        assert!(validate_query(&q, &v).is_empty());

        q.structured_filters.push(StructuredFilter {
            domain: Domain::Condition,
            concept_ids: alloc::vec!["ghost".into(), "lisinopril".into(), "cd".into(), "cd".into()],
            clause: FilterClause::Must,
            age_at_event: Some(AgeRange::new(30, 20)),
        });
        q.demographics = Some(Demographics {
            age_at_query: Some(AgeRange::new(30, 20)),
            gender: None,
        });
        let got: Vec<(ViolationCode, String)> = validate_query(&q, &v).into_iter().map(|x| (x.code, x.field_path)).collect();
        use ViolationCode::*;
        assert_eq!(
            got,
            [
                (BoundsInverted, "demographics.age_at_query".into()),
                (BoundsInverted, "structured_filters[0].age_at_event".into()),
                (UnknownConcept, "structured_filters[0].concept_ids[0]".into()),
                (DomainMismatch, "structured_filters[0].concept_ids[1]".into()),
                (DuplicateConcept, "structured_filters[0].concept_ids[3]".into()),
            ]
        );
    }

    #[test]
    fn structural_violations() {
        let mut q = CohortQuery::from_text(" ");
        q.format_version = 2;
        q.weights.alpha = -1.0;
        q.weights.beta = f64::NAN;
        q.top_k_docs = 0;
        q.structured_filters.push(StructuredFilter {
            domain: Domain::Observation,
            concept_ids: Vec::new(),
            clause: FilterClause::MustNot,
            age_at_event: None,
        });
        q.concepts.push(QueryConcept {
            concept_id: "cd".into(),
            clause: Clause::MustNot,
            source_span: None,
        });
        q.concepts.push(q.concepts[0].clone());
        let codes: BTreeSet<ViolationCode> = check_structure(&q).into_iter().map(|v| v.code).collect();
        use ViolationCode::*;
        let expected: BTreeSet<_> = [
            UnsupportedVersion,
            InvalidWeight,
            InvalidTopK,
            NoScoringSignal,
            DuplicateConcept,
            UnsupportedDomain,
            EmptyFilter,
        ]
        .into_iter()
        .collect();
        assert_eq!(codes, expected);
    }

    #[test]
    fn m_counts_should_and_must_only() {
        let mut q = CohortQuery::from_text("x");
        for (id, clause) in [("a", Clause::Should), ("b", Clause::Must), ("c", Clause::MustNot)] {
            q.concepts.push(QueryConcept {
                concept_id: id.into(),
                clause,
                source_span: None,
            });
        }
        assert_eq!(q.m(), 2);
        assert_eq!(q.concepts_with(Clause::Must), [ConceptId::from("b")]);
    }

    #[test]
    fn parse_is_deterministic() {
        let v = bundled_vocabulary();
        assert_eq!(parse_query(IBD_QUERY, &v).unwrap(), parse_query(IBD_QUERY, &v).unwrap());
    }
}
