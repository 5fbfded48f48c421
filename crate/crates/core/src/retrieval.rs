//! Two-phase cohort search: structured filtering of candidate patients,
//! then section scoring and top-K patient aggregation.
//!
//! A section scores
//!
//! ```text
//! s_q(d) = alpha · (1/M) · Σ_o s(d,o) + beta · s(d,q)
//! ```
//!
//! over the M Should/Must concepts o, where s(d,o) is single-term BM25 on
//! the concept field (affirmed patient mentions only) and s(d,q) is BM25 on
//! the text field over the distinct tokens of the query text. The concept
//! term is 0 when M = 0. A patient scores the mean of its best
//! min(K, n) section scores. Every sum runs in a fixed order (sorted terms,
//! sorted concept ids, descending section scores) so results are
//! reproducible to the bit.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::date::whole_years;
use crate::ids::{ConceptId, PersonId};
use crate::index::{CohortIndex, Field, SectionHandle};
use crate::query::{check_structure, Clause, CohortQuery, FilterClause, Violation, Weights};
use crate::rng::SplitMix64;
use crate::text::{tokenize, ConceptMention};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`; never negative.
pub fn idf(total_sections: usize, df: usize) -> f64 {
    let (n, df) = (total_sections as f64, df as f64);
    libm::log(1.0 + (n - df + 0.5) / (df + 0.5))
}

/// BM25 weight of one term given its statistics.
pub fn bm25_term(params: Bm25Params, idf: f64, tf: u32, len: u32, avg_len: f64) -> f64 {
    if tf == 0 {
        return 0.0;
    }
    let tf = f64::from(tf);
    let ratio = if avg_len > 0.0 { f64::from(len) / avg_len } else { 0.0 };
    idf * (tf * (params.k1 + 1.0)) / (tf + params.k1 * (1.0 - params.b + params.b * ratio))
}

/// BM25 of `section` for the distinct `terms` on `field`, default params.
pub fn bm25<'a>(index: &CohortIndex, field: Field, terms: impl IntoIterator<Item = &'a str>, section: SectionHandle) -> f64 {
    bm25_with(index, Bm25Params::default(), field, terms, section)
}

pub fn bm25_with<'a>(
    index: &CohortIndex,
    params: Bm25Params,
    field: Field,
    terms: impl IntoIterator<Item = &'a str>,
    section: SectionHandle,
) -> f64 {
    let distinct: BTreeSet<&str> = terms.into_iter().collect();
    let stats = index.stats();
    let len = index.field_len(field, section);
    let avg = stats.avg_len(field);
    distinct
        .into_iter()
        .map(|t| {
            let tf = index.term_frequency(field, t, section);
            if tf == 0 {
                return 0.0;
            }
            bm25_term(params, idf(stats.total_sections, index.doc_frequency(field, t)), tf, len, avg)
        })
        .sum()
}

/// Where a section matched the query, as byte offsets into its body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceSpan {
    pub start: usize,
    pub end: usize,
    /// The query concept mentioned here; `None` for a plain text match.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept_id: Option<ConceptId>,
    /// False for negated or family mentions, which never score.
    pub affirmed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSection {
    pub section: SectionHandle,
    pub doc_id: String,
    pub section_id: String,
    pub person_id: PersonId,
    pub score: f64,
    /// s(d,o) for each Should/Must concept.
    pub concept_scores: BTreeMap<ConceptId, f64>,
    /// s(d,q).
    pub text_score: f64,
    pub spans: Vec<EvidenceSpan>,
}

impl ScoredSection {
    /// The score recomputed from its stored parts.
    pub fn recompose(&self, weights: Weights) -> f64 {
        compose(weights, &self.concept_scores, self.text_score)
    }
}

fn compose(weights: Weights, concept_scores: &BTreeMap<ConceptId, f64>, text_score: f64) -> f64 {
    let m = concept_scores.len();
    let concept_term = if m == 0 {
        0.0
    } else {
        concept_scores.values().sum::<f64>() / m as f64
    };
    weights.alpha * concept_term + weights.beta * text_score
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPatient {
    pub person_id: PersonId,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
    /// The top-K sections behind `score`, best first.
    pub sections: Vec<ScoredSection>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("invalid query: {} violation(s)", .0.len())]
    Invalid(Vec<Violation>),
    #[error("limit must be at least 1")]
    InvalidLimit,
}

/// Query state shared by every section scored for one query.
struct Scorer<'a> {
    index: &'a CohortIndex,
    weights: Weights,
    scoring: BTreeSet<&'a ConceptId>,
    highlighted: BTreeSet<&'a ConceptId>,
    text_terms: BTreeSet<String>,
}

impl<'a> Scorer<'a> {
    fn new(index: &'a CohortIndex, q: &'a CohortQuery) -> Self {
        Self {
            index,
            weights: q.weights,
            scoring: q.scoring_concepts().collect(),
            highlighted: q.concepts.iter().map(|c| &c.concept_id).collect(),
            text_terms: q.text_terms(),
        }
    }

    fn score(&self, section: SectionHandle) -> ScoredSection {
        let concept_scores: BTreeMap<ConceptId, f64> = self
            .scoring
            .iter()
            .map(|&c| ((*c).clone(), bm25(self.index, Field::Concept, [c.as_str()], section)))
            .collect();
        let text_score = bm25(self.index, Field::Text, self.text_terms.iter().map(String::as_str), section);
        let entry = &self.index.sections()[section];
        ScoredSection {
            section,
            doc_id: entry.doc_id.clone(),
            section_id: entry.section_id.clone(),
            person_id: entry.person_id.clone(),
            score: compose(self.weights, &concept_scores, text_score),
            concept_scores,
            text_score,
            spans: self.spans(&entry.body, &entry.mentions),
        }
    }

    fn spans(&self, body: &str, mentions: &[ConceptMention]) -> Vec<EvidenceSpan> {
        let mut out: Vec<EvidenceSpan> = mentions
            .iter()
            .filter(|m| self.highlighted.contains(&m.concept_id))
            .map(|m| EvidenceSpan {
                start: m.start,
                end: m.end,
                concept_id: Some(m.concept_id.clone()),
                affirmed: m.modifiers.is_affirmed(),
            })
            .collect();
        out.extend(
            tokenize(body)
                .into_iter()
                .filter(|t| self.text_terms.contains(&t.text))
                .map(|t| EvidenceSpan {
                    start: t.start,
                    end: t.end,
                    concept_id: None,
                    affirmed: true,
                }),
        );
        out.sort_by(|a, b| (a.start, a.end, &a.concept_id).cmp(&(b.start, b.end, &b.concept_id)));
        out
    }
}

pub fn score_section(index: &CohortIndex, q: &CohortQuery, section: SectionHandle) -> ScoredSection {
    Scorer::new(index, q).score(section)
}

/// Mean of the largest min(k, n) scores; 0 for an empty list.
pub fn score_patient(sections: &[ScoredSection], k: usize) -> f64 {
    let mut scores: Vec<f64> = sections.iter().map(|s| s.score).collect();
    top_k_mean(&mut scores, k)
}

pub fn top_k_mean(scores: &mut [f64], k: usize) -> f64 {
    scores.sort_by(|a, b| b.total_cmp(a));
    let n = k.min(scores.len());
    if n == 0 {
        return 0.0;
    }
    scores[..n].iter().sum::<f64>() / n as f64
}

fn passes_demographics(index: &CohortIndex, q: &CohortQuery, person_id: &str) -> bool {
    let Some(p) = index.patient(person_id) else {
        return false;
    };
    let Some(d) = &q.demographics else {
        return true;
    };
    d.gender.is_none_or(|g| p.person.gender == g)
        && d.age_at_query
            .is_none_or(|r| r.contains(whole_years(p.person.birth_date, q.as_of_date)))
}

fn passes_structured(index: &CohortIndex, q: &CohortQuery, person_id: &str) -> bool {
    q.structured_filters.iter().all(|f| {
        let hit = index.has_structured_concept(person_id, &f.concept_ids, f.predicate().as_ref());
        match f.clause {
            FilterClause::Must => hit,
            FilterClause::MustNot => !hit,
        }
    })
}

/// Phase 1: demographics, structured filters and the exclusion of patients
/// with an affirmed mention of a MustNot concept.
pub fn filter_patients(index: &CohortIndex, q: &CohortQuery) -> BTreeSet<PersonId> {
    let must_not = q.concepts_with(Clause::MustNot);
    index
        .person_ids()
        .filter(|p| {
            passes_demographics(index, q, p.as_str())
                && passes_structured(index, q, p.as_str())
                && !index.has_affirmed_mention(p.as_str(), &must_not)
        })
        .cloned()
        .collect()
}

fn rank(
    index: &CohortIndex,
    q: &CohortQuery,
    candidates: impl IntoIterator<Item = PersonId>,
    limit: usize,
) -> Result<Vec<ScoredPatient>, SearchError> {
    let violations = check_structure(q);
    if !violations.is_empty() {
        return Err(SearchError::Invalid(violations));
    }
    if limit == 0 {
        return Err(SearchError::InvalidLimit);
    }
    let scorer = Scorer::new(index, q);
    let must = q.concepts_with(Clause::Must);
    let k = q.top_k_docs as usize;
    let mut patients = Vec::new();
    for person_id in candidates {
        let mut sections: Vec<ScoredSection> = index
            .sections_of_patient(person_id.as_str())
            .iter()
            .map(|&h| scorer.score(h))
            .collect();
        let satisfies_must = must
            .iter()
            .all(|c| sections.iter().any(|s| s.concept_scores.get(c).is_some_and(|&x| x > 0.0)));
        if !satisfies_must {
            continue;
        }
        sections.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.section.cmp(&b.section)));
        sections.truncate(k);
        let score = score_patient(&sections, k);
        // Patients with no evidence at all are not retrieved.
        if score > 0.0 {
            patients.push(ScoredPatient {
                person_id,
                score,
                rank: 0,
                sections,
            });
        }
    }
    patients.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.person_id.cmp(&b.person_id)));
    patients.truncate(limit);
    for (i, p) in patients.iter_mut().enumerate() {
        p.rank = i + 1;
    }
    Ok(patients)
}

/// Both phases: filtered candidates ranked by concept and text evidence.
pub fn search(index: &CohortIndex, q: &CohortQuery, limit: usize) -> Result<Vec<ScoredPatient>, SearchError> {
    rank(index, q, filter_patients(index, q), limit)
}

/// Ranking without structured filters; demographic bounds and the MustNot
/// concept exclusion still apply, since both come from the query text.
pub fn unstructured_only_search(index: &CohortIndex, q: &CohortQuery, limit: usize) -> Result<Vec<ScoredPatient>, SearchError> {
    let must_not = q.concepts_with(Clause::MustNot);
    let candidates: Vec<PersonId> = index
        .person_ids()
        .filter(|p| passes_demographics(index, q, p.as_str()) && !index.has_affirmed_mention(p.as_str(), &must_not))
        .cloned()
        .collect();
    rank(index, q, candidates, limit)
}

/// A seeded uniform sample, without replacement, of the filtered patients,
/// in sample order.
pub fn structured_only_search(index: &CohortIndex, q: &CohortQuery, sample_n: usize, seed: u64) -> Vec<PersonId> {
    let pool: Vec<PersonId> = filter_patients(index, q).into_iter().collect();
    SplitMix64::new(seed)
        .sample_indices(pool.len(), sample_n)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect()
}

/// A patient's chart as seen by one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceView {
    pub person_id: PersonId,
    pub query_id: String,
    pub passes_filters: bool,
    pub score: f64,
    /// Every section of the patient, best first.
    pub sections: Vec<EvidenceSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSection {
    pub doc_id: String,
    pub section_id: String,
    pub heading: String,
    pub body: String,
    pub encounter_date: crate::date::Date,
    pub score: f64,
    pub concept_scores: BTreeMap<ConceptId, f64>,
    pub text_score: f64,
    pub spans: Vec<EvidenceSpan>,
}

/// `None` for an unknown patient.
pub fn evidence_view(index: &CohortIndex, q: &CohortQuery, person_id: &str) -> Option<EvidenceView> {
    let patient = index.patient(person_id)?;
    let scorer = Scorer::new(index, q);
    let mut scored: Vec<ScoredSection> = patient.sections.iter().map(|&h| scorer.score(h)).collect();
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.section.cmp(&b.section)));
    let score = score_patient(&scored, q.top_k_docs as usize);
    let passes_filters = passes_demographics(index, q, person_id)
        && passes_structured(index, q, person_id)
        && !index.has_affirmed_mention(person_id, &q.concepts_with(Clause::MustNot));
    let sections = scored
        .into_iter()
        .map(|s| {
            let e = &index.sections()[s.section];
            EvidenceSection {
                doc_id: s.doc_id,
                section_id: s.section_id,
                heading: e.heading.clone(),
                body: e.body.clone(),
                encounter_date: e.encounter_date,
                score: s.score,
                concept_scores: s.concept_scores,
                text_score: s.text_score,
                spans: s.spans,
            }
        })
        .collect();
    Some(EvidenceView {
        person_id: patient.person.person_id.clone(),
        query_id: q.query_id.clone(),
        passes_filters,
        score,
        sections,
    })
}
