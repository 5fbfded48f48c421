mod support;

use std::collections::BTreeSet;

use create_core::corpus::{DocumentInput, Gender};
use create_core::index::Field;
use create_core::retrieval::{bm25, bm25_term, idf, Bm25Params};
use create_core::rng::SplitMix64;
use create_core::text::TriggerLexicon;
use create_core::{build_index, CohortIndex, Date, Person, RawCorpus};
use proptest::prelude::*;
use support::{random_corpus, ref_concept_bm25, ref_sections, ref_text_bm25, vocab};

const TOL: f64 = 1e-9;

fn one_patient(texts: &[&str]) -> CohortIndex {
    let d = Date::from_ymd_opt(2010, 1, 1).unwrap();
    let raw = RawCorpus {
        persons: vec![Person {
            person_id: "p1".into(),
            birth_date: Date::from_ymd_opt(1970, 1, 1).unwrap(),
            gender: Gender::F,
        }],
        records: vec![],
        documents: texts
            .iter()
            .enumerate()
            .map(|(i, t)| DocumentInput {
                doc_id: format!("d{i}"),
                person_id: "p1".into(),
                encounter_date: d,
                text: (*t).into(),
            })
            .collect(),
    };
    build_index(&raw.assemble(&vocab(), &TriggerLexicon::default()).unwrap()).unwrap()
}

#[test]
fn two_section_example_is_ln2() {
    let ix = one_patient(&["crohn disease flare", "stable angina pectoris"]);
    assert!((bm25(&ix, Field::Text, ["crohn"], 0) - std::f64::consts::LN_2).abs() < TOL);
    assert_eq!(bm25(&ix, Field::Text, ["crohn"], 1), 0.0);
}

#[test]
fn unequal_lengths_shift_the_example() {
    // len 3 against an average of 2.5.
    let ix = one_patient(&["crohn disease flare", "stable angina"]);
    let norm = 0.25 + 0.75 * 3.0 / 2.5;
    let want = 2f64.ln() * 2.2 / (1.0 + 1.2 * norm);
    assert!((bm25(&ix, Field::Text, ["crohn"], 0) - want).abs() < TOL);
}

fn closed_form(n: usize, df: usize, tf: u32, len: u32, avg: f64) -> f64 {
    let (n, df, tf) = (n as f64, df as f64, f64::from(tf));
    let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
    idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * f64::from(len) / avg))
}

const WORDS: &[&str] = &[
    "crohn",
    "disease",
    "cough",
    "angina",
    "stable",
    "flare",
    "no",
    "lisinopril",
    "colitis",
    "today",
    "mother",
    "absent",
];

proptest! {
    #[test]
    fn term_weight_matches_closed_form(
        n in 1usize..500,
        df_frac in 0.0f64..1.0,
        tf in 1u32..20,
        len in 1u32..200,
        avg in 0.5f64..100.0,
    ) {
        let df = 1 + ((n - 1) as f64 * df_frac) as usize;
        let got = bm25_term(Bm25Params::default(), idf(n, df), tf, len, avg);
        prop_assert!((got - closed_form(n, df, tf, len, avg)).abs() <= TOL);
    }

    #[test]
    fn index_scores_match_direct_scan(seed in any::<u64>(), picks in proptest::collection::vec(0..WORDS.len(), 0..5)) {
        let vocab = vocab();
        let corpus = random_corpus(&mut SplitMix64::new(seed), &vocab);
        let ix = build_index(&corpus).unwrap();
        let refs = ref_sections(&corpus);
        let terms: BTreeSet<&str> = picks.iter().map(|&i| WORDS[i]).collect();
        for (h, entry) in ix.sections().iter().enumerate() {
            let i = refs
                .iter()
                .position(|r| r.doc_id == entry.doc_id && r.section_id == entry.section_id)
                .unwrap();
            let got = bm25(&ix, Field::Text, terms.iter().copied(), h);
            prop_assert!((got - ref_text_bm25(&refs, &terms, i)).abs() <= TOL);
            for c in vocab.concepts() {
                let got = bm25(&ix, Field::Concept, [c.concept_id.as_str()], h);
                prop_assert!((got - ref_concept_bm25(&refs, c.concept_id.as_str(), i)).abs() <= TOL);
            }
        }
    }
}
