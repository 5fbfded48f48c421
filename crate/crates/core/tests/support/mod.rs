//! Random small corpora and queries, and a reference implementation of
//! filtering and ranking that scans the loaded corpus directly, without the
//! index.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, NaiveDate};
use create_core::corpus::{DocumentInput, Gender, RecordInput};
use create_core::query::{Clause, Demographics, FilterClause, QueryConcept, StructuredFilter, Weights};
use create_core::rng::SplitMix64;
use create_core::text::{extract_mentions, tokenize, Certainty, Experiencer, SectionText, Status, TermModifiers, TriggerLexicon, PREAMBLE};
use create_core::tsv::parse_vocabulary;
use create_core::{AgeRange, CohortQuery, ConceptId, Corpus, Domain, Person, PersonId, RawCorpus, SourceVocabulary, Vocabulary};

pub const CONCEPTS: &str = "concept_id\tdomain\tpreferred_name\tcui\tsynonyms\tparent_ids
ibd\tCondition\tInflammatory bowel disease\t\tIBD\t
cd\tCondition\tCrohn disease\t\tCrohn's disease\tibd
uc\tCondition\tUlcerative colitis\t\t\tibd
cough\tCondition\tCough\t\tdry cough\t
angina\tCondition\tStable angina\t\t\t
acei\tDrug\tACE inhibitor\t\t\t
lis\tDrug\tLisinopril\t\tZestril\tacei
colectomy\tProcedure\tColectomy\t\t\t
visit\tProcedure\tNeurology visit\t\t\t
";

pub const MAPPINGS: &str = "source_vocabulary\tsource_code\tconcept_id
ICD9\t555.9\tcd
ICD9\t556.9\tuc
ICD9\t786.2\tcough
ICD9\t413.9\tangina
DRUG_NAME\tLisinopril\tlis
CPT\t44140\tcolectomy
CPT\t99204\tvisit
";

pub fn vocab() -> Vocabulary {
    parse_vocabulary(CONCEPTS, MAPPINGS).unwrap()
}

const CHUNKS: &[&str] = &[
    "no",
    "denies",
    "mother",
    "history of",
    "possible",
    "crohn disease",
    "crohn's disease",
    "ulcerative colitis",
    "ibd",
    "cough",
    "dry cough",
    "stable angina",
    "angina",
    "lisinopril",
    "zestril",
    "ace inhibitor",
    "colectomy",
    "neurology visit",
    "flare",
    "today",
    "with",
    "and",
];

const HEADINGS: &[&str] = &["PLAN:", "HISTORY:", "ROS:"];

const CODES: &[(Domain, SourceVocabulary, &str)] = &[
    (Domain::Condition, SourceVocabulary::Icd9, "555.9"),
    (Domain::Condition, SourceVocabulary::Icd9, "556.9"),
    (Domain::Condition, SourceVocabulary::Icd9, "786.2"),
    (Domain::Condition, SourceVocabulary::Icd9, "413.9"),
    (Domain::Condition, SourceVocabulary::Icd9, "999.9"),
    (Domain::Drug, SourceVocabulary::DrugName, "Lisinopril"),
    (Domain::Procedure, SourceVocabulary::Cpt, "44140"),
    (Domain::Procedure, SourceVocabulary::Cpt, "99204"),
];

fn date(rng: &mut SplitMix64, from_year: i32, to_year: i32) -> NaiveDate {
    let y = rng.between(from_year as u64, to_year as u64) as i32;
    let m = rng.between(1, 12) as u32;
    let d = rng.between(1, 28) as u32;
    // Some leap-day birthdays.
    if m == 2 && d == 28 && y % 4 == 0 && rng.chance(1, 2) {
        return NaiveDate::from_ymd_opt(y, 2, 29).unwrap();
    }
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn sentence(rng: &mut SplitMix64, max_chunks: u64) -> String {
    let n = rng.between(1, max_chunks) as usize;
    let words: Vec<&str> = (0..n).map(|_| *rng.pick(CHUNKS)).collect();
    let mut s = words.join(" ");
    s.push_str(if rng.chance(1, 4) { "; " } else { ". " });
    s
}

fn part(rng: &mut SplitMix64) -> String {
    (0..rng.between(1, 3)).map(|_| sentence(rng, 5)).collect()
}

/// At most 6 persons with at most 3 two-part notes each, so at most 36
/// sections.
pub fn random_raw(rng: &mut SplitMix64) -> RawCorpus {
    let mut raw = RawCorpus::default();
    let n = rng.between(1, 6);
    for i in 0..n {
        let person_id: PersonId = format!("p{:02}", rng.below(100) * 10 + i).into();
        let birth = date(rng, 1940, 2012);
        raw.persons.push(Person {
            person_id: person_id.clone(),
            birth_date: birth,
            gender: *rng.pick(&[Gender::F, Gender::M, Gender::Other]),
        });
        for _ in 0..rng.below(5) {
            let (domain, vocab, code) = *rng.pick(CODES);
            raw.records.push(RecordInput {
                person_id: person_id.clone(),
                domain,
                source_vocabulary: vocab,
                source_code: code.into(),
                event_date: date(rng, birth.year() + 1, 2019).max(birth),
                value: None,
                unit: None,
            });
        }
        for d in 0..rng.below(4) {
            let mut text = String::new();
            if rng.chance(1, 2) {
                text.push_str(&part(rng));
                text.push('\n');
            }
            text.push_str(rng.pick(HEADINGS));
            text.push('\n');
            text.push_str(&part(rng));
            raw.documents.push(DocumentInput {
                doc_id: format!("{person_id}-{d}"),
                person_id: person_id.clone(),
                encounter_date: date(rng, 2000, 2019).max(birth),
                text,
            });
        }
    }
    raw
}

pub fn random_corpus(rng: &mut SplitMix64, vocab: &Vocabulary) -> Corpus {
    random_raw(rng).assemble(vocab, &TriggerLexicon::default()).unwrap()
}

fn age_range(rng: &mut SplitMix64, max: u64) -> AgeRange {
    let a = rng.below(max) as u32;
    let b = rng.below(max) as u32;
    AgeRange::new(a.min(b), a.max(b))
}

/// A structurally valid query over `vocab`.
pub fn random_query(rng: &mut SplitMix64, vocab: &Vocabulary) -> CohortQuery {
    let ids: Vec<&ConceptId> = vocab.concepts().map(|c| &c.concept_id).collect();
    let mut q = CohortQuery::from_text("");
    let mut chosen = BTreeSet::new();
    for _ in 0..rng.below(5) {
        let id = *rng.pick(&ids);
        if !chosen.insert(id.clone()) {
            continue;
        }
        let clause = match rng.below(10) {
            0..=4 => Clause::Should,
            5..=6 => Clause::Must,
            _ => Clause::MustNot,
        };
        q.concepts.push(QueryConcept {
            concept_id: id.clone(),
            clause,
            source_span: None,
        });
    }
    q.raw_text = (0..rng.below(3)).map(|_| sentence(rng, 3)).collect();
    if q.m() == 0 && tokenize(&q.raw_text).is_empty() {
        q.raw_text = "angina".into();
    }
    if rng.chance(1, 3) {
        q.demographics = Some(Demographics {
            age_at_query: rng.chance(2, 3).then(|| age_range(rng, 90)),
            gender: rng.chance(1, 3).then(|| *rng.pick(&[Gender::F, Gender::M])),
        });
    }
    for _ in 0..rng.below(3) {
        let domain = *rng.pick(&[Domain::Condition, Domain::Drug, Domain::Procedure]);
        let pool: Vec<&ConceptId> = vocab.concepts().filter(|c| c.domain == domain).map(|c| &c.concept_id).collect();
        let mut concept_ids: Vec<ConceptId> = Vec::new();
        for _ in 0..rng.between(1, 3) {
            let c = (*rng.pick(&pool)).clone();
            if !concept_ids.contains(&c) {
                concept_ids.push(c);
            }
        }
        q.structured_filters.push(StructuredFilter {
            domain,
            concept_ids,
            clause: if rng.chance(2, 3) {
                FilterClause::Must
            } else {
                FilterClause::MustNot
            },
            age_at_event: rng.chance(1, 2).then(|| age_range(rng, 60)),
        });
    }
    let w = [0.0, 0.5, 1.0, 2.0];
    q.weights = Weights {
        alpha: *rng.pick(&w),
        beta: *rng.pick(&w),
    };
    q.top_k_docs = *rng.pick(&[1, 2, 3, 100]);
    q
}

/// Whole years from `birth` to `at`, by anniversary: the age increments on
/// the first day whose (month, day) reaches the birthday.
pub fn age(birth: NaiveDate, at: NaiveDate) -> i64 {
    let before_birthday = at.month() < birth.month() || (at.month() == birth.month() && at.day() < birth.day());
    i64::from(at.year() - birth.year()) - i64::from(before_birthday)
}

fn in_range(r: AgeRange, years: i64) -> bool {
    years >= i64::from(r.min) && years <= i64::from(r.max)
}

/// A section as the reference implementation sees it.
pub struct RefSection {
    pub doc_id: String,
    pub section_id: String,
    pub person_id: PersonId,
    pub tokens: Vec<String>,
    /// Not negated, patient experiencer.
    pub affirmed: BTreeMap<ConceptId, u32>,
    pub mentions: usize,
}

pub fn ref_sections(corpus: &Corpus) -> Vec<RefSection> {
    let mut out = Vec::new();
    for d in &corpus.documents {
        for (s, ms) in d.sections.iter().zip(&d.mentions) {
            let mut affirmed = BTreeMap::new();
            for m in ms {
                if !m.modifiers.negated && m.modifiers.experiencer == Experiencer::Patient {
                    *affirmed.entry(m.concept_id.clone()).or_insert(0) += 1;
                }
            }
            out.push(RefSection {
                doc_id: d.doc_id.clone(),
                section_id: s.section_id.clone(),
                person_id: d.person_id.clone(),
                tokens: tokenize(&s.body).into_iter().map(|t| t.text).collect(),
                affirmed,
                mentions: ms.len(),
            });
        }
    }
    out
}

/// Patients passing demographics, structured filters and the MustNot
/// concept exclusion, by direct scan of persons, records and mentions.
pub fn ref_filter(corpus: &Corpus, q: &CohortQuery, structured: bool) -> BTreeSet<PersonId> {
    let sections = ref_sections(corpus);
    let must_not: Vec<&ConceptId> = q
        .concepts
        .iter()
        .filter(|c| c.clause == Clause::MustNot)
        .map(|c| &c.concept_id)
        .collect();
    let mut out = BTreeSet::new();
    for p in &corpus.persons {
        if let Some(d) = &q.demographics {
            if d.gender.is_some_and(|g| g != p.gender) {
                continue;
            }
            if d.age_at_query.is_some_and(|r| !in_range(r, age(p.birth_date, q.as_of_date))) {
                continue;
            }
        }
        let filters_ok = !structured
            || q.structured_filters.iter().all(|f| {
                let hit = corpus.records.iter().any(|r| {
                    r.person_id == p.person_id
                        && r.concept_id.as_ref().is_some_and(|c| f.concept_ids.contains(c))
                        && f.age_at_event.is_none_or(|a| in_range(a, age(p.birth_date, r.event_date)))
                });
                hit == (f.clause == FilterClause::Must)
            });
        if !filters_ok {
            continue;
        }
        let excluded = sections
            .iter()
            .any(|s| s.person_id == p.person_id && must_not.iter().any(|c| s.affirmed.get(*c).copied().unwrap_or(0) > 0));
        if !excluded {
            out.insert(p.person_id.clone());
        }
    }
    out
}

/// Okapi BM25 with k1 = 1.2, b = 0.75 over `terms` (deduplicated, in
/// sorted order), where `tf(section, term)` and `len(section)` define the
/// field.
pub fn ref_bm25(
    n_sections: usize,
    tf: impl Fn(usize, &str) -> u32,
    len: impl Fn(usize) -> usize,
    terms: &BTreeSet<&str>,
    section: usize,
) -> f64 {
    let (k1, b) = (1.2, 0.75);
    let n = n_sections as f64;
    let avg = (0..n_sections).map(&len).sum::<usize>() as f64 / n;
    let mut total = 0.0;
    for &t in terms {
        let f = tf(section, t);
        if f == 0 {
            continue;
        }
        let df = (0..n_sections).filter(|&i| tf(i, t) > 0).count() as f64;
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        let f = f64::from(f);
        total += idf * f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * len(section) as f64 / avg));
    }
    total
}

pub fn ref_text_bm25(sections: &[RefSection], terms: &BTreeSet<&str>, i: usize) -> f64 {
    ref_bm25(
        sections.len(),
        |s, t| sections[s].tokens.iter().filter(|x| x.as_str() == t).count() as u32,
        |s| sections[s].tokens.len(),
        terms,
        i,
    )
}

pub fn ref_concept_bm25(sections: &[RefSection], concept: &str, i: usize) -> f64 {
    ref_bm25(
        sections.len(),
        |s, t| sections[s].affirmed.get(t).copied().unwrap_or(0),
        |s| sections[s].mentions,
        &BTreeSet::from([concept]),
        i,
    )
}

/// (person_id, score) in rank order.
pub fn ref_search(corpus: &Corpus, q: &CohortQuery, structured: bool, limit: usize) -> Vec<(PersonId, f64)> {
    let sections = ref_sections(corpus);
    let candidates = ref_filter(corpus, q, structured);
    let terms_owned: BTreeSet<String> = tokenize(&q.raw_text).into_iter().map(|t| t.text).collect();
    let terms: BTreeSet<&str> = terms_owned.iter().map(String::as_str).collect();
    let scoring: BTreeSet<&ConceptId> = q
        .concepts
        .iter()
        .filter(|c| c.clause != Clause::MustNot)
        .map(|c| &c.concept_id)
        .collect();
    let must: Vec<&ConceptId> = q
        .concepts
        .iter()
        .filter(|c| c.clause == Clause::Must)
        .map(|c| &c.concept_id)
        .collect();

    let mut ranked = Vec::new();
    for p in candidates {
        let mut scores = Vec::new();
        let mut positive: BTreeSet<&ConceptId> = BTreeSet::new();
        for (i, s) in sections.iter().enumerate() {
            if s.person_id != p {
                continue;
            }
            let mut concept_sum = 0.0;
            for &c in &scoring {
                let x = ref_concept_bm25(&sections, c.as_str(), i);
                if x > 0.0 {
                    positive.insert(c);
                }
                concept_sum += x;
            }
            let concept_term = if scoring.is_empty() {
                0.0
            } else {
                concept_sum / scoring.len() as f64
            };
            scores.push(q.weights.alpha * concept_term + q.weights.beta * ref_text_bm25(&sections, &terms, i));
        }
        if !must.iter().all(|c| positive.contains(c)) {
            continue;
        }
        scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let k = scores.len().min(q.top_k_docs as usize);
        let score = if k == 0 { 0.0 } else { scores[..k].iter().sum::<f64>() / k as f64 };
        if score > 0.0 {
            ranked.push((p, score));
        }
    }
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(limit);
    ranked
}

pub const SNIPPETS: &str = include_str!("../data/modifier_snippets.tsv");

pub struct Snippet {
    pub category: String,
    pub text: String,
    /// `None` when the text must yield no mention at all.
    pub expected: Option<(ConceptId, String, TermModifiers)>,
}

pub fn snippets() -> Vec<Snippet> {
    SNIPPETS
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let c: Vec<&str> = line.split('\t').collect();
            assert_eq!(c.len(), 8, "{line}");
            let expected = (c[2] != "none").then(|| {
                let modifiers = TermModifiers {
                    negated: c[4].parse().unwrap(),
                    experiencer: match c[5] {
                        "Patient" => Experiencer::Patient,
                        "Family" => Experiencer::Family,
                        other => panic!("experiencer {other}"),
                    },
                    status: match c[6] {
                        "Current" => Status::Current,
                        "Historical" => Status::Historical,
                        other => panic!("status {other}"),
                    },
                    certainty: match c[7] {
                        "Certain" => Certainty::Certain,
                        "Uncertain" => Certainty::Uncertain,
                        other => panic!("certainty {other}"),
                    },
                };
                (ConceptId::from(c[2]), c[3].to_string(), modifiers)
            });
            Snippet {
                category: c[0].into(),
                text: c[1].into(),
                expected,
            }
        })
        .collect()
}

/// Disagreements between extraction with the bundled vocabulary and the
/// labels, one message per failing snippet.
pub fn snippet_disagreements(vocab: &Vocabulary, all: &[Snippet]) -> Vec<String> {
    let mut out = Vec::new();
    for s in all {
        let section = SectionText {
            section_id: "s0".into(),
            heading: PREAMBLE.into(),
            body: s.text.clone(),
            char_offset: 0,
        };
        let mentions = extract_mentions(&section, vocab);
        let overlapping = mentions.windows(2).any(|w| w[0].end > w[1].start);
        let ok = !overlapping
            && match &s.expected {
                None => mentions.is_empty(),
                Some((id, matched, modifiers)) => mentions.iter().any(|m| {
                    &m.concept_id == id && &m.matched_text == matched && &s.text[m.start..m.end] == matched && &m.modifiers == modifiers
                }),
            };
        if !ok {
            out.push(format!("{} {:?}: got {:?}", s.category, s.text, mentions));
        }
    }
    out
}

fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).unwrap()
}

fn person(id: &str, birth: NaiveDate, gender: Gender) -> Person {
    Person {
        person_id: id.into(),
        birth_date: birth,
        gender,
    }
}

fn record(id: &str, vocab: SourceVocabulary, code: &str, at: NaiveDate) -> RecordInput {
    let domain = match vocab {
        SourceVocabulary::Cpt => Domain::Procedure,
        SourceVocabulary::DrugName => Domain::Drug,
        _ => Domain::Condition,
    };
    RecordInput {
        person_id: id.into(),
        domain,
        source_vocabulary: vocab,
        source_code: code.into(),
        event_date: at,
        value: None,
        unit: None,
    }
}

fn note(id: &str, n: usize, text: &str) -> DocumentInput {
    DocumentInput {
        doc_id: format!("{id}-{n}"),
        person_id: id.into(),
        encounter_date: d(2015, 6, 1),
        text: text.into(),
    }
}

/// Five persons with events one day either side of birthdays, a leap-day birth, unmapped
/// codes, and affirmed, negated and family mentions of the same concepts.
pub fn boundary_corpus() -> Corpus {
    use SourceVocabulary::*;
    let raw = RawCorpus {
        persons: vec![
            person("a", d(2000, 3, 15), Gender::F),
            person("b", d(1990, 7, 1), Gender::M),
            person("c", d(2004, 2, 29), Gender::F),
            person("e", d(1950, 1, 1), Gender::Other),
            person("f", d(2010, 12, 31), Gender::M),
        ],
        records: vec![
            record("a", Icd9, "555.9", d(2003, 3, 14)),
            record("a", Icd9, "555.9", d(2003, 3, 15)),
            record("b", Icd9, "556.9", d(2008, 7, 1)),
            record("b", Cpt, "44140", d(2012, 1, 1)),
            record("c", Icd9, "555.9", d(2007, 2, 28)),
            record("c", Icd9, "786.2", d(2008, 3, 1)),
            record("e", Icd9, "999.9", d(2000, 1, 1)),
            record("e", DrugName, "Lisinopril", d(2010, 5, 5)),
            record("f", Cpt, "99204", d(2013, 12, 30)),
            record("f", Icd9, "556.9", d(2014, 1, 1)),
        ],
        documents: vec![
            note("a", 0, "Crohn disease flare. No colectomy."),
            note("b", 0, "Status post colectomy. Ulcerative colitis."),
            note("c", 0, "Mother with Crohn disease. Cough."),
            note("e", 0, "Denies cough. Lisinopril."),
            note("e", 1, "PLAN:\nPossible cough."),
            note("f", 0, "Neurology visit today."),
        ],
    };
    raw.assemble(&vocab(), &TriggerLexicon::default()).unwrap()
}

pub fn age_options() -> Vec<Option<AgeRange>> {
    let mut v = vec![None];
    for (lo, hi) in [(0, 2), (3, 3), (0, 17), (18, 120), (4, 9), (20, 70)] {
        v.push(Some(AgeRange::new(lo, hi)));
    }
    v
}

pub fn filter_options() -> Vec<Option<StructuredFilter>> {
    let sets: [(Domain, &[&str]); 5] = [
        (Domain::Condition, &["cd"]),
        (Domain::Condition, &["cd", "uc", "ibd"]),
        (Domain::Condition, &["cough"]),
        (Domain::Procedure, &["colectomy"]),
        (Domain::Drug, &["acei", "lis"]),
    ];
    let mut v = vec![None];
    for (domain, ids) in sets {
        for clause in [FilterClause::Must, FilterClause::MustNot] {
            for age in age_options() {
                v.push(Some(StructuredFilter {
                    domain,
                    concept_ids: ids.iter().map(|&s| ConceptId::from(s)).collect(),
                    clause,
                    age_at_event: age,
                }));
            }
        }
    }
    v
}

pub fn demographic_options() -> Vec<Option<Demographics>> {
    let mut v = vec![None];
    for gender in [None, Some(Gender::F), Some(Gender::M)] {
        for age in age_options() {
            v.push(Some(Demographics { age_at_query: age, gender }));
        }
    }
    v
}

/// Every combination of demographics, one MustNot concept and one
/// structured filter from the grids above.
pub fn filter_grid() -> Vec<CohortQuery> {
    let excluded: [Option<&str>; 4] = [None, Some("colectomy"), Some("cough"), Some("cd")];
    let mut out = Vec::new();
    for demo in demographic_options() {
        for must_not in excluded {
            for f in filter_options() {
                let mut q = CohortQuery::from_text("cough");
                q.demographics = demo.clone();
                q.concepts = must_not
                    .map(|c| QueryConcept {
                        concept_id: c.into(),
                        clause: Clause::MustNot,
                        source_span: None,
                    })
                    .into_iter()
                    .collect();
                q.structured_filters = f.into_iter().collect();
                out.push(q);
            }
        }
    }
    out
}
