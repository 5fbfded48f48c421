//! Bit-exact binary snapshot of a [`CohortIndex`].
//!
//! All integers are little-endian. `str` is a `u32` byte length followed by
//! UTF-8 bytes, `date` is an `i32` day number counted from 0001-01-01 (day 1),
//! `f64` is its IEEE-754 bit pattern as `u64`, and `[T]` is a `u32` count
//! followed by the items.
//!
//! ```text
//! "CRIX"  u32 version (= 1)
//! patients  [str person_id, date birth, u8 gender,
//!            [str concept_id, u8 domain, date event],   records
//!            [u32 section]]                              sections
//! sections  [str doc_id, str person_id, str section_id, str heading,
//!            str body, u64 char_offset, date encounter, u32 text_len,
//!            u32 concept_len,
//!            [str concept_id, str matched_text, u64 start, u64 end,
//!             u8 modifier_bits, u8 mention_type]]
//! text      [str term, [u32 section, u32 tf]]
//! concept   [str concept_id, [u32 section, u32 affirmed_tf, u32 total_tf, u8 modifier_bits]]
//! stats     u64 total_sections, f64 avg_text_len, f64 avg_concept_len
//! ```
//!
//! Gender codes are F = 0, M = 1, Other = 2; domain and mention-type codes
//! are positions in `Domain::ALL` and `MentionType::ALL`. Loading rejects
//! unknown versions, trailing bytes, and tables that disagree with the
//! sections they were derived from.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::*;
use crate::corpus::Gender;
use crate::text::TermModifiers;
use crate::vocab::MentionType;
use chrono::Datelike;

pub const MAGIC: &[u8; 4] = b"CRIX";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SnapshotError {
    #[error("not an index snapshot (bad magic bytes)")]
    BadMagic,
    #[error("unsupported snapshot version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error("snapshot is truncated")]
    Truncated,
    #[error("snapshot has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("invalid {0} in snapshot")]
    Invalid(&'static str),
    #[error(transparent)]
    Index(#[from] IndexError),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("table fits in u32"));
    }
    fn str(&mut self, s: &str) {
        self.len(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn date(&mut self, d: Date) {
        self.0.extend_from_slice(&d.num_days_from_ce().to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SnapshotError> {
        let end = self.pos.checked_add(n).ok_or(SnapshotError::Truncated)?;
        let out = self.bytes.get(self.pos..end).ok_or(SnapshotError::Truncated)?;
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8, SnapshotError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, SnapshotError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64, SnapshotError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn usize(&mut self) -> Result<usize, SnapshotError> {
        usize::try_from(self.u64()?).map_err(|_| SnapshotError::Invalid("offset"))
    }
    fn str(&mut self) -> Result<String, SnapshotError> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        core::str::from_utf8(bytes)
            .map(String::from)
            .map_err(|_| SnapshotError::Invalid("utf-8 string"))
    }
    fn date(&mut self) -> Result<Date, SnapshotError> {
        let days = i32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes"));
        Date::from_num_days_from_ce_opt(days).ok_or(SnapshotError::Invalid("date"))
    }
    fn count(&mut self) -> Result<usize, SnapshotError> {
        let n = self.u32()? as usize;
        // Every item takes at least one byte, which bounds preallocation.
        if n > self.bytes.len() - self.pos {
            return Err(SnapshotError::Truncated);
        }
        Ok(n)
    }
}

fn gender_code(g: Gender) -> u8 {
    match g {
        Gender::F => 0,
        Gender::M => 1,
        Gender::Other => 2,
    }
}

fn position<T: PartialEq>(all: &[T], v: &T) -> u8 {
    all.iter().position(|x| x == v).expect("listed variant") as u8
}

fn modifiers_from(b: u8) -> Result<TermModifiers, SnapshotError> {
    use modifier_bits::*;
    if b & !(NEGATED | FAMILY | HISTORICAL | UNCERTAIN) != 0 {
        return Err(SnapshotError::Invalid("modifier bits"));
    }
    Ok(TermModifiers {
        negated: b & NEGATED != 0,
        experiencer: if b & FAMILY != 0 {
            Experiencer::Family
        } else {
            Experiencer::Patient
        },
        status: if b & HISTORICAL != 0 { Status::Historical } else { Status::Current },
        certainty: if b & UNCERTAIN != 0 {
            Certainty::Uncertain
        } else {
            Certainty::Certain
        },
    })
}

impl CohortIndex {
    pub fn to_snapshot(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION);

        w.len(self.patients.len());
        for p in self.patients.values() {
            w.str(p.person.person_id.as_str());
            w.date(p.person.birth_date);
            w.u8(gender_code(p.person.gender));
            w.len(p.records.len());
            for r in &p.records {
                w.str(r.concept_id.as_str());
                w.u8(position(&Domain::ALL, &r.domain));
                w.date(r.event_date);
            }
            w.len(p.sections.len());
            for &h in &p.sections {
                w.len(h);
            }
        }

        w.len(self.sections.len());
        for s in &self.sections {
            w.str(&s.doc_id);
            w.str(s.person_id.as_str());
            w.str(&s.section_id);
            w.str(&s.heading);
            w.str(&s.body);
            w.u64(s.char_offset as u64);
            w.date(s.encounter_date);
            w.u32(s.text_len);
            w.u32(s.concept_len);
            w.len(s.mentions.len());
            for m in &s.mentions {
                w.str(m.concept_id.as_str());
                w.str(&m.matched_text);
                w.u64(m.start as u64);
                w.u64(m.end as u64);
                w.u8(bits(m));
                w.u8(position(&MentionType::ALL, &m.mention_type));
            }
        }

        w.len(self.text_postings.len());
        for (term, ps) in &self.text_postings {
            w.str(term);
            w.len(ps.len());
            for p in ps {
                w.len(p.section);
                w.u32(p.tf);
            }
        }

        w.len(self.concept_postings.len());
        for (id, ps) in &self.concept_postings {
            w.str(id.as_str());
            w.len(ps.len());
            for p in ps {
                w.len(p.section);
                w.u32(p.affirmed_tf);
                w.u32(p.total_tf);
                w.u8(p.modifiers);
            }
        }

        w.u64(self.stats.total_sections as u64);
        w.u64(self.stats.avg_text_len.to_bits());
        w.u64(self.stats.avg_concept_len.to_bits());
        w.0
    }

    pub fn from_snapshot(bytes: &[u8]) -> Result<Self, SnapshotError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4).map_err(|_| SnapshotError::BadMagic)? != MAGIC {
            return Err(SnapshotError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(SnapshotError::UnsupportedVersion(version));
        }

        let mut patients = BTreeMap::new();
        for _ in 0..r.count()? {
            let person_id = PersonId::new(r.str()?);
            let birth_date = r.date()?;
            let gender = match r.u8()? {
                0 => Gender::F,
                1 => Gender::M,
                2 => Gender::Other,
                _ => return Err(SnapshotError::Invalid("gender")),
            };
            let mut records = Vec::new();
            for _ in 0..r.count()? {
                let concept_id = ConceptId::new(r.str()?);
                let domain = *Domain::ALL.get(r.u8()? as usize).ok_or(SnapshotError::Invalid("domain"))?;
                records.push(RecordEntry {
                    concept_id,
                    domain,
                    event_date: r.date()?,
                });
            }
            let mut sections = Vec::new();
            for _ in 0..r.count()? {
                sections.push(r.u32()? as usize);
            }
            let person = Person {
                person_id: person_id.clone(),
                birth_date,
                gender,
            };
            if patients.insert(person_id, PatientEntry { person, records, sections }).is_some() {
                return Err(SnapshotError::Invalid("duplicate patient"));
            }
        }

        let mut sections = Vec::new();
        for _ in 0..r.count()? {
            let doc_id = r.str()?;
            let person_id = PersonId::new(r.str()?);
            let section_id = r.str()?;
            let heading = r.str()?;
            let body = r.str()?;
            let char_offset = r.usize()?;
            let encounter_date = r.date()?;
            let text_len = r.u32()?;
            let concept_len = r.u32()?;
            let mut mentions = Vec::new();
            for _ in 0..r.count()? {
                let concept_id = ConceptId::new(r.str()?);
                let matched_text = r.str()?;
                let start = r.usize()?;
                let end = r.usize()?;
                let modifiers = modifiers_from(r.u8()?)?;
                let mention_type = *MentionType::ALL
                    .get(r.u8()? as usize)
                    .ok_or(SnapshotError::Invalid("mention type"))?;
                if start >= end || body.get(start..end) != Some(matched_text.as_str()) {
                    return Err(SnapshotError::Invalid("mention span"));
                }
                mentions.push(ConceptMention {
                    concept_id,
                    matched_text,
                    start,
                    end,
                    modifiers,
                    mention_type,
                });
            }
            if mentions.len() != concept_len as usize || tokenize(&body).len() != text_len as usize {
                return Err(SnapshotError::Invalid("section lengths"));
            }
            sections.push(SectionEntry {
                doc_id,
                person_id,
                section_id,
                heading,
                body,
                char_offset,
                encounter_date,
                text_len,
                concept_len,
                mentions,
            });
        }

        let mut text_postings = BTreeMap::new();
        for _ in 0..r.count()? {
            let term = r.str()?;
            let mut ps = Vec::new();
            for _ in 0..r.count()? {
                ps.push(TextPosting {
                    section: r.u32()? as usize,
                    tf: r.u32()?,
                });
            }
            text_postings.insert(term, ps);
        }

        let mut concept_postings = BTreeMap::new();
        for _ in 0..r.count()? {
            let id = ConceptId::new(r.str()?);
            let mut ps = Vec::new();
            for _ in 0..r.count()? {
                ps.push(ConceptPosting {
                    section: r.u32()? as usize,
                    affirmed_tf: r.u32()?,
                    total_tf: r.u32()?,
                    modifiers: r.u8()?,
                });
            }
            concept_postings.insert(id, ps);
        }

        let stats = FieldStats {
            total_sections: r.usize()?,
            avg_text_len: f64::from_bits(r.u64()?),
            avg_concept_len: f64::from_bits(r.u64()?),
        };
        if r.pos != bytes.len() {
            return Err(SnapshotError::TrailingBytes(bytes.len() - r.pos));
        }
        Ok(CohortIndex::from_parts(sections, patients, text_postings, concept_postings, stats)?)
    }
}
