//! Seeded synthetic corpora with planted relevance for the five bundled
//! query templates.
//!
//! All draws come from one [`SplitMix64`] stream seeded with the caller's
//! seed. The stream is consumed in a fixed order: first a shuffle of the
//! person numbers `1..=n`, then one chart per slot, where slots are laid out
//! as the spec's queries in order (DR, PR, structured-trap, text-only
//! archetypes for each) followed by the background persons.
//!
//! Planted charts all share one shape: two notes of three sections each,
//! where the first note carries the archetype's evidence and the second is
//! filler. Filler only ever names distractor concepts, so no query concept
//! leaks into charts that were not planted for it.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::{Datelike, Days};
use serde::{Deserialize, Serialize};

use super::{DocumentInput, Gender, GroundTruth, Person, RawCorpus, RecordInput};
use crate::date::{whole_years, Date};
use crate::eval::Grade;
use crate::ids::PersonId;
use crate::rng::SplitMix64;
use crate::vocab::{Domain, SourceVocabulary};

pub const TEMPLATE_IDS: [&str; 5] = ["q1", "q2", "q3", "q4", "q5"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    Dr,
    Pr,
    StructuredTrap,
    TextOnly,
    Background,
}

impl Archetype {
    pub const PLANTED: [Archetype; 4] = [Archetype::Dr, Archetype::Pr, Archetype::StructuredTrap, Archetype::TextOnly];

    /// Grade of a person of this archetype for the query it was planted for.
    pub fn grade(self) -> Grade {
        match self {
            Archetype::Dr | Archetype::TextOnly => Grade::Dr,
            Archetype::Pr => Grade::Pr,
            Archetype::StructuredTrap | Archetype::Background => Grade::Nr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub template: String,
    #[serde(default)]
    pub dr: usize,
    #[serde(default)]
    pub pr: usize,
    #[serde(default)]
    pub structured_trap: usize,
    #[serde(default)]
    pub text_only: usize,
}

impl PlantSpec {
    pub fn count(&self, a: Archetype) -> usize {
        match a {
            Archetype::Dr => self.dr,
            Archetype::Pr => self.pr,
            Archetype::StructuredTrap => self.structured_trap,
            Archetype::TextOnly => self.text_only,
            Archetype::Background => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub queries: Vec<PlantSpec>,
    #[serde(default)]
    pub background: usize,
    /// Reference date for ages; every generated date precedes it.
    #[serde(default = "default_as_of")]
    pub as_of_date: Date,
}

pub fn default_as_of() -> Date {
    Date::from_ymd_opt(2020, 1, 1).expect("valid date")
}

impl GeneratorSpec {
    /// Ten DR, five PR, ten structured-trap and five text-only persons per
    /// template, plus 350 background persons: 500 in all.
    pub fn bundled() -> Self {
        Self {
            queries: TEMPLATE_IDS
                .iter()
                .map(|t| PlantSpec {
                    template: t.to_string(),
                    dr: 10,
                    pr: 5,
                    structured_trap: 10,
                    text_only: 5,
                })
                .collect(),
            background: 350,
            as_of_date: default_as_of(),
        }
    }

    pub fn total_persons(&self) -> usize {
        self.background
            + self
                .queries
                .iter()
                .map(|q| Archetype::PLANTED.iter().map(|&a| q.count(a)).sum::<usize>())
                .sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plant {
    pub person_id: PersonId,
    /// `None` for background persons.
    pub template: Option<String>,
    pub archetype: Archetype,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub corpus: RawCorpus,
    /// One row per (template, person), sorted.
    pub truth: Vec<GroundTruth>,
    /// One row per person, sorted by person_id.
    pub plants: Vec<Plant>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GeneratorError {
    #[error("unknown query template {0:?} (expected one of q1..q5)")]
    UnknownTemplate(String),
    #[error("query template {0:?} is listed twice")]
    DuplicateTemplate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Template {
    Ibd,
    Hht,
    FocalEpilepsy,
    Ra,
    AceCough,
}

impl Template {
    fn from_id(id: &str) -> Option<Self> {
        Some(match id {
            "q1" => Template::Ibd,
            "q2" => Template::Hht,
            "q3" => Template::FocalEpilepsy,
            "q4" => Template::Ra,
            "q5" => Template::AceCough,
            _ => return None,
        })
    }
}

pub fn generate_synthetic_corpus(spec: &GeneratorSpec, seed: u64) -> Result<SyntheticCorpus, GeneratorError> {
    let mut seen = Vec::new();
    let mut slots: Vec<(Option<(&str, Template)>, Archetype)> = Vec::new();
    for q in &spec.queries {
        let t = Template::from_id(&q.template).ok_or_else(|| GeneratorError::UnknownTemplate(q.template.clone()))?;
        if seen.contains(&q.template.as_str()) {
            return Err(GeneratorError::DuplicateTemplate(q.template.clone()));
        }
        seen.push(q.template.as_str());
        for a in Archetype::PLANTED {
            slots.extend(core::iter::repeat_n((Some((q.template.as_str(), t)), a), q.count(a)));
        }
    }
    slots.extend(core::iter::repeat_n((None, Archetype::Background), spec.background));

    let mut g = Gen {
        rng: SplitMix64::new(seed),
        as_of: spec.as_of_date,
    };
    let mut numbers: Vec<usize> = (1..=slots.len()).collect();
    g.rng.shuffle(&mut numbers);

    let mut charts: BTreeMap<PersonId, (Chart, Plant)> = BTreeMap::new();
    for (&(template, archetype), number) in slots.iter().zip(numbers) {
        let person_id = PersonId::new(format!("P{number:05}"));
        let chart = match template {
            Some((_, t)) => g.planted(t, archetype),
            None => g.background(),
        };
        let plant = Plant {
            person_id: person_id.clone(),
            template: template.map(|(id, _)| id.to_string()),
            archetype,
        };
        charts.insert(person_id, (chart, plant));
    }

    let mut corpus = RawCorpus::default();
    let mut plants = Vec::with_capacity(charts.len());
    for (person_id, (chart, plant)) in charts {
        corpus.persons.push(Person {
            person_id: person_id.clone(),
            birth_date: chart.birth,
            gender: chart.gender,
        });
        for r in chart.records {
            corpus.records.push(RecordInput {
                person_id: person_id.clone(),
                domain: r.domain,
                source_vocabulary: r.vocabulary,
                source_code: r.code.to_string(),
                event_date: r.date,
                value: r.value,
                unit: r.unit.map(String::from),
            });
        }
        for (i, (date, text)) in chart.notes.into_iter().enumerate() {
            corpus.documents.push(DocumentInput {
                doc_id: format!("{person_id}-D{}", i + 1),
                person_id: person_id.clone(),
                encounter_date: date,
                text,
            });
        }
        plants.push(plant);
    }

    let mut truth = Vec::new();
    for q in &spec.queries {
        for p in &plants {
            let grade = match &p.template {
                Some(t) if *t == q.template => p.archetype.grade(),
                _ => Grade::Nr,
            };
            truth.push(GroundTruth {
                query_id: q.template.clone(),
                person_id: p.person_id.clone(),
                grade,
            });
        }
    }
    truth.sort();

    Ok(SyntheticCorpus { corpus, truth, plants })
}

struct Rec {
    domain: Domain,
    vocabulary: SourceVocabulary,
    code: &'static str,
    date: Date,
    value: Option<f64>,
    unit: Option<&'static str>,
}

struct Chart {
    birth: Date,
    gender: Gender,
    records: Vec<Rec>,
    notes: Vec<(Date, String)>,
}

/// (text name, ICD9, ICD10)
type Dx = (&'static str, &'static str, &'static str);

const IBD_DX: [Dx; 2] = [("Crohn's disease", "555.9", "K50.90"), ("ulcerative colitis", "556.9", "K51.90")];
const INTESTINAL_SURGERY_CPT: [&str; 5] = ["44140", "44150", "44160", "44310", "45110"];
const HHT_DX: Dx = ("hereditary hemorrhagic telangiectasia", "448.0", "I78.0");
const FOCAL_DX: [Dx; 2] = [("complex", "345.40", "G40.209"), ("simple", "345.50", "G40.109")];
const NEURO_VISIT_CPT: &str = "99204";
const RA_DX: Dx = ("rheumatoid arthritis", "714.0", "M06.9");
const METHOTREXATE: [&str; 2] = ["Methotrexate", "Trexall"];
const BIOLOGICS: [&str; 8] = [
    "Adalimumab",
    "Etanercept",
    "Infliximab",
    "Abatacept",
    "Tocilizumab",
    "Humira",
    "Enbrel",
    "Rituximab",
];
const ACE_INHIBITORS: [&str; 8] = [
    "Lisinopril",
    "Enalapril",
    "Ramipril",
    "Benazepril",
    "Quinapril",
    "Captopril",
    "Fosinopril",
    "Zestril",
];

const FILLER_DX: [Dx; 36] = [
    ("Hypertension", "401.9", "I10"),
    ("Type 2 diabetes mellitus", "250.00", "E11.9"),
    ("Hyperlipidemia", "272.4", "E78.5"),
    ("Asthma", "493.90", "J45.909"),
    ("Chronic obstructive pulmonary disease", "496", "J44.9"),
    ("Coronary artery disease", "414.01", "I25.10"),
    ("Heart failure", "428.0", "I50.9"),
    ("Atrial fibrillation", "427.31", "I48.91"),
    ("Gastroesophageal reflux disease", "530.81", "K21.9"),
    ("Migraine", "346.90", "G43.909"),
    ("Major depressive disorder", "311", "F32.9"),
    ("Anxiety disorder", "300.00", "F41.9"),
    ("Hypothyroidism", "244.9", "E03.9"),
    ("Osteoporosis", "733.00", "M81.0"),
    ("Chronic kidney disease", "585.9", "N18.9"),
    ("Obesity", "278.00", "E66.9"),
    ("Anemia", "285.9", "D64.9"),
    ("Pneumonia", "486", "J18.9"),
    ("Urinary tract infection", "599.0", "N39.0"),
    ("Otitis media", "382.9", "H66.90"),
    ("Colon cancer", "153.9", "C18.9"),
    ("Breast cancer", "174.9", "C50.919"),
    ("Obstructive sleep apnea", "327.23", "G47.33"),
    ("Low back pain", "724.2", "M54.5"),
    ("Gout", "274.9", "M10.9"),
    ("Allergic rhinitis", "477.9", "J30.9"),
    ("Diverticulitis", "562.11", "K57.92"),
    ("Celiac disease", "579.0", "K90.0"),
    ("Attention deficit hyperactivity disorder", "314.01", "F90.9"),
    ("Developmental delay", "315.9", "F88"),
    ("Atopic dermatitis", "691.8", "L20.9"),
    ("Osteoarthritis", "715.90", "M19.90"),
    ("Headache", "784.0", "R51.9"),
    ("Fatigue", "780.79", "R53.83"),
    ("Dizziness", "780.4", "R42"),
    ("Stroke", "434.91", "I63.9"),
];

const FILLER_PX: [(&str, &str); 10] = [
    ("Office visit", "99213"),
    ("Echocardiogram", "93306"),
    ("Chest X-ray", "71046"),
    ("Spirometry", "94010"),
    ("Appendectomy", "44950"),
    ("Cholecystectomy", "47562"),
    ("Total knee replacement", "27447"),
    ("Joint injection", "20610"),
    ("Cataract surgery", "66984"),
    ("Immunization", "90471"),
];

/// (text name, local code, unit, low, high) with bounds in tenths of a unit.
const FILLER_LABS: [(&str, &str, &str, u64, u64); 12] = [
    ("Hemoglobin", "HGB", "g/dL", 110, 170),
    ("C-reactive protein", "CRP", "mg/L", 1, 100),
    ("Hemoglobin A1c", "A1C", "%", 50, 100),
    ("LDL cholesterol", "LDL", "mg/dL", 600, 1900),
    ("Creatinine", "CREAT", "mg/dL", 6, 15),
    ("Alanine aminotransferase", "ALT", "U/L", 100, 600),
    ("White blood cell count", "WBC", "10^9/L", 40, 110),
    ("Platelet count", "PLT", "10^9/L", 1500, 4000),
    ("Thyroid stimulating hormone", "TSH", "mIU/L", 5, 50),
    ("Ferritin", "FERR", "ng/mL", 150, 3000),
    ("Heart rate", "HR", "bpm", 550, 1000),
    ("Blood pressure", "BPSYS", "mmHg", 1000, 1600),
];

const FILLER_DRUGS: [&str; 15] = [
    "Metformin",
    "Atorvastatin",
    "Amlodipine",
    "Losartan",
    "Hydrochlorothiazide",
    "Metoprolol",
    "Levothyroxine",
    "Omeprazole",
    "Albuterol",
    "Sertraline",
    "Ibuprofen",
    "Acetaminophen",
    "Prednisone",
    "Amoxicillin",
    "Warfarin",
];

const HEADINGS: [&str; 9] = [
    "CHIEF COMPLAINT",
    "HISTORY OF PRESENT ILLNESS",
    "PAST MEDICAL HISTORY",
    "MEDICATIONS",
    "REVIEW OF SYSTEMS",
    "PHYSICAL EXAM",
    "ASSESSMENT AND PLAN",
    "SOCIAL HISTORY",
    "PLAN",
];

const UNMAPPED_CPT: &str = "99999-unmapped";

fn note(sections: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (heading, body) in sections {
        out.push_str(heading);
        out.push_str(":\n");
        out.push_str(body);
        out.push('\n');
    }
    out
}

struct Gen {
    rng: SplitMix64,
    as_of: Date,
}

impl Gen {
    fn gender(&mut self) -> Gender {
        if self.rng.chance(1, 50) {
            Gender::Other
        } else if self.rng.chance(1, 2) {
            Gender::F
        } else {
            Gender::M
        }
    }

    /// A birth date roughly `age` years before the reference date, on a day
    /// of month no later than 28 so every anniversary exists.
    fn birth_around(&mut self, age: u64) -> Date {
        let days = age * 365 + age / 4 + self.rng.between(30, 330);
        let d = self.as_of - Days::new(days);
        Date::from_ymd_opt(d.year(), d.month(), d.day().min(28)).expect("valid date")
    }

    /// A date at which the person is exactly `years` old.
    fn at_age(&mut self, birth: Date, years: u64) -> Date {
        let anniversary = Date::from_ymd_opt(birth.year() + years as i32, birth.month(), birth.day()).expect("day <= 28");
        let d = anniversary + Days::new(self.rng.below(300));
        debug_assert_eq!(whole_years(birth, d), years as i32);
        d
    }

    /// A date within the ten years before the reference date, not before birth.
    fn recent(&mut self, birth: Date) -> Date {
        let hi = self.as_of - Days::new(1);
        let lo = core::cmp::max(birth, self.as_of - Days::new(3650));
        let span = hi.signed_duration_since(lo).num_days().max(0) as u64;
        lo + Days::new(self.rng.below(span + 1))
    }

    fn icd(&mut self, dx: Dx, date: Date) -> Rec {
        let (vocabulary, code) = if self.rng.chance(1, 2) {
            (SourceVocabulary::Icd9, dx.1)
        } else {
            (SourceVocabulary::Icd10, dx.2)
        };
        Rec {
            domain: Domain::Condition,
            vocabulary,
            code,
            date,
            value: None,
            unit: None,
        }
    }

    fn coded(domain: Domain, vocabulary: SourceVocabulary, code: &'static str, date: Date) -> Rec {
        Rec {
            domain,
            vocabulary,
            code,
            date,
            value: None,
            unit: None,
        }
    }

    fn filler_record(&mut self, birth: Date) -> Rec {
        let date = self.recent(birth);
        match self.rng.below(4) {
            0 => {
                let dx = *self.rng.pick(&FILLER_DX);
                self.icd(dx, date)
            }
            1 => {
                let (_, cpt) = *self.rng.pick(&FILLER_PX);
                Self::coded(Domain::Procedure, SourceVocabulary::Cpt, cpt, date)
            }
            2 => {
                let (_, code, unit, lo, hi) = *self.rng.pick(&FILLER_LABS);
                let tenths = self.rng.between(lo, hi);
                Rec {
                    domain: Domain::Measurement,
                    vocabulary: SourceVocabulary::LocalLab,
                    code,
                    date,
                    value: Some(tenths as f64 / 10.0),
                    unit: Some(unit),
                }
            }
            _ => {
                let drug = *self.rng.pick(&FILLER_DRUGS);
                Self::coded(Domain::Drug, SourceVocabulary::DrugName, drug, date)
            }
        }
    }

    fn filler_sentence(&mut self) -> String {
        match self.rng.below(9) {
            0..=5 => {
                let (name, _, _) = *self.rng.pick(&FILLER_DX);
                match self.rng.below(6) {
                    0 => format!("{name} is stable."),
                    1 => format!("Follow up for {name}."),
                    2 => format!("Denies {name}."),
                    3 => format!("History of {name}."),
                    4 => format!("Discussed {name} management."),
                    _ => format!("Possible {name}."),
                }
            }
            6 => {
                let (name, _) = *self.rng.pick(&FILLER_PX);
                format!("{name} reviewed.")
            }
            7 => {
                let (name, ..) = *self.rng.pick(&FILLER_LABS);
                format!("{name} within normal limits.")
            }
            _ => self.drug_sentence(),
        }
    }

    fn drug_sentence(&mut self) -> String {
        let drug = self.rng.pick(&FILLER_DRUGS).to_lowercase();
        if self.rng.chance(1, 2) {
            format!("Takes {drug} daily.")
        } else {
            format!("Refilled {drug}.")
        }
    }

    fn filler_body(&mut self, sentences: u64) -> String {
        let parts: Vec<String> = (0..sentences).map(|_| self.filler_sentence()).collect();
        parts.join(" ")
    }

    fn background(&mut self) -> Chart {
        let age = self.rng.below(91);
        let birth = self.birth_around(age);
        let gender = self.gender();
        let mut records = Vec::new();
        for _ in 0..self.rng.below(6) {
            let r = self.filler_record(birth);
            records.push(r);
        }
        if self.rng.chance(1, 25) {
            let date = self.recent(birth);
            records.push(Self::coded(Domain::Procedure, SourceVocabulary::Cpt, UNMAPPED_CPT, date));
        }
        let mut notes = Vec::new();
        for _ in 0..self.rng.between(1, 3) {
            let date = self.recent(birth);
            let count = self.rng.between(2, 4) as usize;
            let mut picked = self.rng.sample_indices(HEADINGS.len(), count);
            picked.sort_unstable();
            let mut sections = Vec::new();
            for h in picked {
                let n = self.rng.between(1, 3);
                sections.push((HEADINGS[h], self.filler_body(n)));
            }
            notes.push((date, note(&sections)));
        }
        Chart {
            birth,
            gender,
            records,
            notes,
        }
    }

    fn planted(&mut self, t: Template, a: Archetype) -> Chart {
        let age = match t {
            Template::FocalEpilepsy => self.rng.between(9, 15),
            _ => self.rng.between(25, 65),
        };
        let birth = self.birth_around(age);
        let gender = self.gender();
        let coded = a != Archetype::TextOnly;
        let mut records = Vec::new();

        let (cc, hpi, plan): (&str, String, String) = match t {
            Template::Ibd => {
                let dx = if a == Archetype::StructuredTrap {
                    IBD_DX[0]
                } else {
                    *self.rng.pick(&IBD_DX)
                };
                if coded {
                    let date = self.recent(birth);
                    records.push(self.icd(dx, date));
                }
                if a == Archetype::Pr {
                    let cpt = *self.rng.pick(&INTESTINAL_SURGERY_CPT);
                    let date = self.recent(birth);
                    records.push(Self::coded(Domain::Procedure, SourceVocabulary::Cpt, cpt, date));
                }
                if a == Archetype::StructuredTrap {
                    (
                        "Abdominal pain.",
                        "Colonoscopy negative for Crohn's disease. No evidence of inflammatory bowel disease.".into(),
                        "Irritable bowel syndrome. Follow up as needed.".into(),
                    )
                } else {
                    let name = dx.0;
                    (
                        "Abdominal pain and diarrhea.",
                        format!("Patient with {name} presents with a flare of inflammatory bowel disease."),
                        format!("Active {name}. Continue mesalamine."),
                    )
                }
            }
            Template::Hht => {
                if matches!(a, Archetype::Dr | Archetype::StructuredTrap) {
                    let date = self.recent(birth);
                    records.push(self.icd(HHT_DX, date));
                }
                match a {
                    Archetype::Pr => (
                        "Recurrent nosebleeds.",
                        "Mother has hereditary hemorrhagic telangiectasia.".into(),
                        "Genetic counseling offered.".into(),
                    ),
                    Archetype::StructuredTrap => (
                        "Recurrent nosebleeds.",
                        "Genetic testing negative for hereditary hemorrhagic telangiectasia.".into(),
                        "No evidence of Osler-Weber-Rendu syndrome.".into(),
                    ),
                    _ => (
                        "Recurrent nosebleeds.",
                        "Patient with hereditary hemorrhagic telangiectasia and recurrent epistaxis.".into(),
                        "Osler-Weber-Rendu syndrome. Continue nasal care.".into(),
                    ),
                }
            }
            Template::FocalEpilepsy => {
                let dx = *self.rng.pick(&FOCAL_DX);
                let onset = match a {
                    Archetype::Pr => self.rng.between(5, 8),
                    Archetype::StructuredTrap => 2,
                    _ => self.rng.between(1, 3),
                };
                if coded {
                    let date = self.at_age(birth, onset);
                    records.push(self.icd(dx, date));
                    let date = self.recent(birth);
                    records.push(Self::coded(Domain::Procedure, SourceVocabulary::Cpt, NEURO_VISIT_CPT, date));
                }
                if a == Archetype::StructuredTrap {
                    (
                        "Staring spells.",
                        "Seen at outpatient neurology visit. Workup negative for focal epilepsy.".into(),
                        "Staring spells are behavioral. Reassured family.".into(),
                    )
                } else {
                    let kind = dx.0;
                    (
                        "Focal epilepsy follow up.",
                        format!("Seen at outpatient neurology visit. Focal epilepsy with {kind} partial seizures since age {onset}."),
                        "Partial seizures controlled. Continue levetiracetam.".into(),
                    )
                }
            }
            Template::Ra => {
                if coded {
                    let date = self.recent(birth);
                    records.push(self.icd(RA_DX, date));
                    let drug = *self.rng.pick(&METHOTREXATE);
                    let date = self.recent(birth);
                    records.push(Self::coded(Domain::Drug, SourceVocabulary::DrugName, drug, date));
                }
                if a == Archetype::Pr {
                    let drug = *self.rng.pick(&BIOLOGICS);
                    let date = self.recent(birth);
                    records.push(Self::coded(Domain::Drug, SourceVocabulary::DrugName, drug, date));
                }
                if a == Archetype::StructuredTrap {
                    (
                        "Joint pain.",
                        "No evidence of rheumatoid arthritis. Methotrexate prescribed for psoriasis.".into(),
                        "Continue topical therapy.".into(),
                    )
                } else {
                    (
                        "Joint pain and morning stiffness.",
                        "Rheumatoid arthritis with synovitis of both hands. Currently on methotrexate weekly.".into(),
                        "Continue methotrexate and folic acid.".into(),
                    )
                }
            }
            Template::AceCough => {
                let drug = *self.rng.pick(&ACE_INHIBITORS);
                if coded {
                    let date = self.recent(birth);
                    records.push(Self::coded(Domain::Drug, SourceVocabulary::DrugName, drug, date));
                }
                let drug = drug.to_lowercase();
                match a {
                    Archetype::Pr => (
                        "Blood pressure check.",
                        format!("Hypertension treated with {drug}, an ACE inhibitor."),
                        format!("Tolerating {drug} well."),
                    ),
                    Archetype::StructuredTrap => (
                        "Blood pressure check.",
                        format!("Hypertension treated with {drug}, an ACE inhibitor."),
                        "No cough.".into(),
                    ),
                    _ => (
                        "Dry cough.",
                        format!("Developed a dry cough after starting {drug}, an ACE inhibitor."),
                        format!("ACE inhibitor induced cough. Stop {drug} and start losartan."),
                    ),
                }
            }
        };

        for _ in 0..self.rng.between(1, 2) {
            let r = self.filler_record(birth);
            records.push(r);
        }
        let visit = self.recent(birth);
        let follow_up = self.recent(birth);
        let n = self.rng.between(1, 2);
        let ros = self.filler_body(n);
        let meds = self.drug_sentence();
        let closing = self.filler_body(1);
        let notes = alloc::vec![
            (
                visit,
                note(&[
                    ("CHIEF COMPLAINT", cc.to_string()),
                    ("HISTORY OF PRESENT ILLNESS", hpi),
                    ("ASSESSMENT AND PLAN", plan)
                ]),
            ),
            (
                follow_up,
                note(&[("REVIEW OF SYSTEMS", ros), ("MEDICATIONS", meds), ("PLAN", closing)])
            ),
        ];
        Chart {
            birth,
            gender,
            records,
            notes,
        }
    }
}
