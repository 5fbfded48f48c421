//! Deterministic clinical text analysis: section splitting, dictionary
//! longest-match concept extraction, and trigger-window term modifiers.
//!
//! Tokens are lowercase alphanumeric runs; everything else separates them,
//! so `Crohn's` becomes `crohn`, `s`. Vocabulary names are tokenized the same
//! way, which makes matching plain token-sequence equality. Offsets are byte
//! offsets into the UTF-8 section body.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ids::ConceptId;
use crate::vocab::{MentionType, UnknownVariant, Vocabulary};

/// Tokens preceding a mention that are searched for triggers.
pub const CONTEXT_WINDOW: usize = 6;

/// Heading given to text that precedes the first heading line.
pub const PREAMBLE: &str = "PREAMBLE";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Lowercased token text.
    pub text: String,
    pub start: usize,
    pub end: usize,
    /// Index of the sentence the token belongs to; `.` and `;` end sentences.
    pub sentence: usize,
}

pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut sentence = 0;
    let mut start: Option<usize> = None;
    for (i, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
            continue;
        }
        if let Some(s) = start.take() {
            tokens.push(Token {
                text: text[s..i].to_lowercase(),
                start: s,
                end: i,
                sentence,
            });
        }
        if ch == '.' || ch == ';' {
            sentence += 1;
        }
    }
    if let Some(s) = start {
        tokens.push(Token {
            text: text[s..].to_lowercase(),
            start: s,
            end: text.len(),
            sentence,
        });
    }
    tokens
}

/// Token texts only; the normal form used for terms, names and triggers.
pub fn normalized_terms(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.text).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionText {
    pub section_id: String,
    pub heading: String,
    pub body: String,
    /// Byte offset of `body` within the parent document.
    pub char_offset: usize,
}

/// Splits a document at heading lines.
///
/// A heading line starts (after indentation) with an all-caps or title-case
/// phrase followed by `:`; anything after the colon on that line opens the
/// body. Bodies are trimmed. Text before the first heading becomes a
/// `PREAMBLE` section unless it is blank.
pub fn split_sections(document: &str) -> Vec<SectionText> {
    struct Open {
        heading: String,
        body_start: usize,
    }

    let mut sections = Vec::new();
    let mut current = Open {
        heading: PREAMBLE.to_string(),
        body_start: 0,
    };
    let mut line_start = 0;
    for line in document.split_inclusive('\n') {
        let indent = line.len() - line.trim_start().len();
        if let Some(colon) = heading_colon(&line[indent..]) {
            close_section(document, &current.heading, current.body_start, line_start, &mut sections);
            current = Open {
                heading: line[indent..indent + colon].trim().to_string(),
                body_start: line_start + indent + colon + 1,
            };
        }
        line_start += line.len();
    }
    close_section(document, &current.heading, current.body_start, document.len(), &mut sections);
    sections
}

fn close_section(doc: &str, heading: &str, start: usize, end: usize, out: &mut Vec<SectionText>) {
    let raw = &doc[start..end];
    let lead = raw.len() - raw.trim_start().len();
    let body = raw.trim();
    if heading == PREAMBLE && body.is_empty() {
        return;
    }
    out.push(SectionText {
        section_id: alloc::format!("s{}", out.len()),
        heading: heading.to_string(),
        body: body.to_string(),
        char_offset: if body.is_empty() { start } else { start + lead },
    });
}

const CONNECTORS: [&str; 11] = ["a", "an", "and", "at", "for", "in", "of", "on", "or", "the", "to"];

/// Byte index of the colon ending a heading prefix, if `line` starts with one.
fn heading_colon(line: &str) -> Option<usize> {
    let colon = line.find(':')?;
    let prefix = line[..colon].trim_end();
    if prefix.is_empty() || prefix.len() > 64 {
        return None;
    }
    if !prefix.chars().next()?.is_alphabetic() {
        return None;
    }
    if !prefix
        .chars()
        .all(|c| c.is_alphanumeric() || c == ' ' || c == '/' || c == '&' || c == '-')
    {
        return None;
    }
    let words: Vec<&str> = prefix.split_whitespace().collect();
    if words.len() > 8 {
        return None;
    }
    let all_caps = prefix.chars().filter(|c| c.is_alphabetic()).all(char::is_uppercase);
    let title_case = words.iter().enumerate().all(|(i, w)| {
        let first = w.chars().next().unwrap_or(' ');
        first.is_uppercase() || (i > 0 && CONNECTORS.contains(w))
    });
    (all_caps || title_case).then_some(colon)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum Experiencer {
    #[default]
    Patient,
    Family,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum Status {
    #[default]
    Current,
    Historical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum Certainty {
    #[default]
    Certain,
    Uncertain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TermModifiers {
    pub negated: bool,
    pub experiencer: Experiencer,
    pub status: Status,
    pub certainty: Certainty,
}

impl TermModifiers {
    /// Mentions that count as evidence about the patient: not negated and
    /// experienced by the patient. Historical and uncertain mentions count.
    pub fn is_affirmed(&self) -> bool {
        !self.negated && self.experiencer == Experiencer::Patient
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptMention {
    pub concept_id: ConceptId,
    /// `body[start..end]` as written.
    pub matched_text: String,
    pub start: usize,
    pub end: usize,
    pub modifiers: TermModifiers,
    pub mention_type: MentionType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriggerCategory {
    Negation,
    Family,
    History,
    Uncertainty,
}

impl TriggerCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            TriggerCategory::Negation => "negation",
            TriggerCategory::Family => "family",
            TriggerCategory::History => "history",
            TriggerCategory::Uncertainty => "uncertainty",
        }
    }

    fn apply(self, m: &mut TermModifiers) {
        match self {
            TriggerCategory::Negation => m.negated = true,
            TriggerCategory::Family => m.experiencer = Experiencer::Family,
            TriggerCategory::History => m.status = Status::Historical,
            TriggerCategory::Uncertainty => m.certainty = Certainty::Uncertain,
        }
    }
}

impl fmt::Display for TriggerCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TriggerCategory {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "negation" => Ok(TriggerCategory::Negation),
            "family" => Ok(TriggerCategory::Family),
            "history" => Ok(TriggerCategory::History),
            "uncertainty" => Ok(TriggerCategory::Uncertainty),
            other => Err(UnknownVariant(other.to_string())),
        }
    }
}

/// Trigger phrases per modifier category, stored tokenized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerLexicon {
    triggers: Vec<(TriggerCategory, Vec<String>)>,
}

const DEFAULT_TRIGGERS: &[(TriggerCategory, &str)] = &[
    (TriggerCategory::Negation, "no"),
    (TriggerCategory::Negation, "not"),
    (TriggerCategory::Negation, "denies"),
    (TriggerCategory::Negation, "without"),
    (TriggerCategory::Negation, "negative for"),
    (TriggerCategory::Negation, "no evidence of"),
    (TriggerCategory::Negation, "never had"),
    (TriggerCategory::Negation, "has not had"),
    (TriggerCategory::Family, "mother"),
    (TriggerCategory::Family, "father"),
    (TriggerCategory::Family, "brother"),
    (TriggerCategory::Family, "sister"),
    (TriggerCategory::Family, "family history of"),
    (TriggerCategory::History, "history of"),
    (TriggerCategory::History, "prior"),
    (TriggerCategory::History, "past"),
    (TriggerCategory::Uncertainty, "possible"),
    (TriggerCategory::Uncertainty, "probable"),
    (TriggerCategory::Uncertainty, "suspected"),
    (TriggerCategory::Uncertainty, "rule out"),
];

impl Default for TriggerLexicon {
    fn default() -> Self {
        Self::new(DEFAULT_TRIGGERS.iter().map(|(c, p)| (*c, *p)))
    }
}

impl TriggerLexicon {
    /// Phrases that tokenize to nothing are dropped.
    pub fn new<'a>(entries: impl IntoIterator<Item = (TriggerCategory, &'a str)>) -> Self {
        let triggers = entries
            .into_iter()
            .map(|(c, p)| (c, normalized_terms(p)))
            .filter(|(_, t)| !t.is_empty())
            .collect();
        Self { triggers }
    }

    pub fn entries(&self) -> impl Iterator<Item = (TriggerCategory, &[String])> {
        self.triggers.iter().map(|(c, t)| (*c, t.as_slice()))
    }
}

/// Modifiers for the mention whose first token is `tokens[mention_start]`.
///
/// A trigger fires when its whole token sequence lies within the
/// [`CONTEXT_WINDOW`] tokens before the mention, inside the mention's
/// sentence. Triggers are applied from farthest to closest.
pub fn apply_context_rules(tokens: &[Token], mention_start: usize, lexicon: &TriggerLexicon) -> TermModifiers {
    let mut modifiers = TermModifiers::default();
    let Some(head) = tokens.get(mention_start) else {
        return modifiers;
    };
    let mut lo = mention_start.saturating_sub(CONTEXT_WINDOW);
    while lo < mention_start && tokens[lo].sentence != head.sentence {
        lo += 1;
    }
    let window = &tokens[lo..mention_start];

    let mut fired: Vec<(usize, TriggerCategory)> = Vec::new();
    for (pos, _) in window.iter().enumerate() {
        for (category, phrase) in lexicon.entries() {
            let end = pos + phrase.len();
            if end <= window.len() && window[pos..end].iter().map(|t| &t.text).eq(phrase.iter()) {
                fired.push((end, category));
            }
        }
    }
    fired.sort();
    for (_, category) in fired {
        category.apply(&mut modifiers);
    }
    modifiers
}

/// Concept mentions in a section body with the default trigger lexicon.
pub fn extract_mentions(section: &SectionText, vocab: &Vocabulary) -> Vec<ConceptMention> {
    extract_mentions_with(section, vocab, &TriggerLexicon::default())
}

/// Leftmost-longest dictionary matching over token n-grams (never across a
/// sentence boundary), then trigger-window modifiers. Output is sorted by
/// start offset and spans never overlap.
pub fn extract_mentions_with(section: &SectionText, vocab: &Vocabulary, lexicon: &TriggerLexicon) -> Vec<ConceptMention> {
    extract_from_text(&section.body, vocab, lexicon)
}

pub(crate) fn extract_from_text(body: &str, vocab: &Vocabulary, lexicon: &TriggerLexicon) -> Vec<ConceptMention> {
    let tokens = tokenize(body);
    let texts: Vec<String> = tokens.iter().map(|t| t.text.clone()).collect();
    let mut mentions = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = vocab.max_term_len().min(tokens.len() - i);
        let hit = (1..=longest).rev().find_map(|n| {
            let last = &tokens[i + n - 1];
            if last.sentence != tokens[i].sentence {
                return None;
            }
            vocab.lookup_term(&texts[i..i + n]).map(|id| (n, id))
        });
        match hit {
            Some((n, id)) => {
                let (start, end) = (tokens[i].start, tokens[i + n - 1].end);
                mentions.push(ConceptMention {
                    concept_id: id.clone(),
                    matched_text: body[start..end].to_string(),
                    start,
                    end,
                    modifiers: apply_context_rules(&tokens, i, lexicon),
                    mention_type: vocab.mention_type(id.as_str()).expect("text terms only come from typed concepts"),
                });
                i += n;
            }
            None => i += 1,
        }
    }
    mentions
}
