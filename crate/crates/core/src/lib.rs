//! Cohort retrieval over structured and unstructured EHR data.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithm of the
//! engine: the concept vocabulary and code mapping, section splitting and
//! concept extraction with term modifiers, the patient → section index,
//! the editable query model, two-phase retrieval (structured filtering then
//! BM25 concept/text ranking), and P@k evaluation. File formats, the CLI and
//! the HTTP service live in the `create-app` companion crate.
//!
//! ```text
//! documents ──split_sections──► sections ──extract_mentions──► mentions
//!                                   │                              │
//! records ──map_code──► concepts    └──────────► CohortIndex ◄─────┘
//!                                                   │
//! query text ──parse_query──► CohortQuery ──search──► ranked patients ──p_at_k──► P@5
//! ```

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod corpus;
pub mod date;
pub mod eval;
pub mod index;
pub mod query;
pub mod retrieval;
pub mod rng;
pub mod text;
pub mod tsv;
pub mod vocab;

mod ids;

pub use corpus::{Corpus, GroundTruth, Person, RawCorpus};
pub use date::{AgeRange, Date};
pub use eval::{average_p_at_k, p_at_k, Grade, GradedRun, System};
pub use ids::{ConceptId, PersonId};
pub use index::{build_index, CohortIndex, Field};
pub use query::{parse_query, validate_query, CohortQuery};
pub use retrieval::{search, structured_only_search, unstructured_only_search, ScoredPatient, ScoredSection};
pub use text::{extract_mentions, split_sections, ConceptMention, TermModifiers};
pub use tsv::bundled_vocabulary;
pub use vocab::{Concept, Domain, SourceVocabulary, Vocabulary};
