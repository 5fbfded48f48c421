#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use create_app::formats;
use create_core::corpus::{generate_synthetic_corpus, GeneratorSpec, SyntheticCorpus};
use create_core::text::TriggerLexicon;
use create_core::{build_index, bundled_vocabulary, CohortIndex, CohortQuery};

pub const SEED: u64 = 7;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn queries_dir() -> PathBuf {
    data_dir().join("queries")
}

pub fn queries() -> Vec<CohortQuery> {
    formats::read_query_dir(&queries_dir()).unwrap()
}

pub fn query(id: &str) -> CohortQuery {
    formats::read_query(&queries_dir().join(format!("{id}.json"))).unwrap()
}

pub fn generated() -> &'static SyntheticCorpus {
    static G: OnceLock<SyntheticCorpus> = OnceLock::new();
    G.get_or_init(|| generate_synthetic_corpus(&GeneratorSpec::bundled(), SEED).unwrap())
}

/// The seed-7 benchmark index.
pub fn index() -> &'static CohortIndex {
    static IX: OnceLock<CohortIndex> = OnceLock::new();
    IX.get_or_init(|| {
        let corpus = generated()
            .corpus
            .assemble(&bundled_vocabulary(), &TriggerLexicon::default())
            .unwrap();
        build_index(&corpus).unwrap()
    })
}
