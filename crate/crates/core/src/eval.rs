//! Graded relevance, P@k and the three-system benchmark.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::GroundTruth;
use crate::ids::PersonId;
use crate::index::CohortIndex;
use crate::query::CohortQuery;
use crate::retrieval::{search, structured_only_search, unstructured_only_search, SearchError};
use crate::vocab::UnknownVariant;

/// Relevance grade; scores 1, 0.5 and 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Grade {
    #[serde(rename = "DR")]
    Dr,
    #[serde(rename = "PR")]
    Pr,
    #[serde(rename = "NR")]
    Nr,
}

impl Grade {
    pub const ALL: [Grade; 3] = [Grade::Dr, Grade::Pr, Grade::Nr];

    pub fn score(self) -> f64 {
        match self {
            Grade::Dr => 1.0,
            Grade::Pr => 0.5,
            Grade::Nr => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Grade::Dr => "DR",
            Grade::Pr => "PR",
            Grade::Nr => "NR",
        }
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Grade {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Grade::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| UnknownVariant(s.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JudgmentSource {
    Human,
    Planted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Judgment {
    pub query_id: String,
    pub person_id: PersonId,
    pub grade: Grade,
    pub source: JudgmentSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Structured,
    Unstructured,
    Combined,
}

impl System {
    pub const ALL: [System; 3] = [System::Structured, System::Unstructured, System::Combined];

    pub fn as_str(self) -> &'static str {
        match self {
            System::Structured => "structured",
            System::Unstructured => "unstructured",
            System::Combined => "combined",
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for System {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        System::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| UnknownVariant(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("no runs to average")]
    Empty,
    #[error("{0} appears twice in the ranked list")]
    DuplicateResult(PersonId),
    #[error("query {0} has no ground truth rows")]
    NoTruth(String),
    #[error("query {0} is listed twice")]
    DuplicateQuery(String),
    #[error("query {0}: {1}")]
    Search(String, SearchError),
}

/// A ranked list with a grade for every position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradedRun {
    pub query_id: String,
    pub system: System,
    pub ranked: Vec<PersonId>,
    /// Parallel to `ranked`; unjudged positions hold NR.
    pub grades: Vec<Grade>,
    /// Ranked patients that had no judgment.
    pub unjudged: Vec<PersonId>,
}

impl GradedRun {
    pub fn resolve(
        query_id: &str,
        system: System,
        ranked: Vec<PersonId>,
        judgments: &BTreeMap<PersonId, Grade>,
    ) -> Result<Self, EvalError> {
        let mut seen = BTreeSet::new();
        let mut grades = Vec::with_capacity(ranked.len());
        let mut unjudged = Vec::new();
        for p in &ranked {
            if !seen.insert(p) {
                return Err(EvalError::DuplicateResult(p.clone()));
            }
            grades.push(match judgments.get(p) {
                Some(&g) => g,
                None => {
                    unjudged.push(p.clone());
                    Grade::Nr
                }
            });
        }
        Ok(Self {
            query_id: query_id.into(),
            system,
            ranked,
            grades,
            unjudged,
        })
    }

    /// A run of anonymous positions `r1, r2, …`, all judged.
    pub fn from_grades(system: System, grades: &[Grade]) -> Self {
        Self {
            query_id: String::new(),
            system,
            ranked: (1..=grades.len()).map(|i| PersonId::from(alloc::format!("r{i}"))).collect(),
            grades: grades.to_vec(),
            unjudged: Vec::new(),
        }
    }
}

/// Graded relevance mass in the first `k` positions divided by `k`; 0 when
/// `k` is 0.
pub fn p_at_k(run: &GradedRun, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    run.grades.iter().take(k).map(|g| g.score()).sum::<f64>() / k as f64
}

/// Arithmetic mean, summed left to right.
pub fn mean(values: &[f64]) -> Result<f64, EvalError> {
    if values.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

pub fn average_p_at_k(runs: &[GradedRun], k: usize) -> Result<f64, EvalError> {
    let per_run: Vec<f64> = runs.iter().map(|r| p_at_k(r, k)).collect();
    mean(&per_run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemResult {
    pub p_at_k: f64,
    pub ranked: Vec<PersonId>,
    pub grades: Vec<Grade>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unjudged: Vec<PersonId>,
}

impl SystemResult {
    fn of(run: GradedRun, k: usize) -> Self {
        Self {
            p_at_k: p_at_k(&run, k),
            ranked: run.ranked,
            grades: run.grades,
            unjudged: run.unjudged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemResults {
    pub structured: SystemResult,
    pub unstructured: SystemResult,
    pub combined: SystemResult,
}

impl SystemResults {
    pub fn get(&self, system: System) -> &SystemResult {
        match system {
            System::Structured => &self.structured,
            System::Unstructured => &self.unstructured,
            System::Combined => &self.combined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub query_id: String,
    pub systems: SystemResults,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub structured: f64,
    pub unstructured: f64,
    pub combined: f64,
}

impl Averages {
    pub fn get(&self, system: System) -> f64 {
        match system {
            System::Structured => self.structured,
            System::Unstructured => self.unstructured,
            System::Combined => self.combined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub corpus_seed: u64,
    pub k: usize,
    /// Ordered by query_id.
    pub queries: Vec<QueryReport>,
    pub averages: Averages,
}

impl BenchmarkReport {
    pub fn unjudged_count(&self) -> usize {
        self.queries
            .iter()
            .flat_map(|q| System::ALL.map(|s| q.systems.get(s).unjudged.len()))
            .sum()
    }
}

/// Runs the three systems for every query and grades the top `k` against
/// `truth`. The structured sample for every query is drawn with `seed`,
/// which the report also records as the corpus seed.
pub fn run_benchmark(
    index: &CohortIndex,
    queries: &[CohortQuery],
    truth: &[GroundTruth],
    seed: u64,
    k: usize,
) -> Result<BenchmarkReport, EvalError> {
    let mut by_query: BTreeMap<&str, BTreeMap<PersonId, Grade>> = BTreeMap::new();
    for t in truth {
        by_query
            .entry(t.query_id.as_str())
            .or_default()
            .insert(t.person_id.clone(), t.grade);
    }
    let mut ordered: Vec<&CohortQuery> = queries.iter().collect();
    ordered.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    if let Some(w) = ordered.windows(2).find(|w| w[0].query_id == w[1].query_id) {
        return Err(EvalError::DuplicateQuery(w[0].query_id.clone()));
    }

    let mut reports = Vec::with_capacity(ordered.len());
    for q in ordered {
        let id = q.query_id.as_str();
        let judgments = by_query.get(id).ok_or_else(|| EvalError::NoTruth(id.into()))?;
        let searched = |r: Result<Vec<crate::retrieval::ScoredPatient>, SearchError>| {
            r.map(|ps| ps.into_iter().map(|p| p.person_id).collect::<Vec<_>>())
                .map_err(|e| EvalError::Search(id.into(), e))
        };
        let structured = structured_only_search(index, q, k, seed);
        let unstructured = searched(unstructured_only_search(index, q, k))?;
        let combined = searched(search(index, q, k))?;
        reports.push(QueryReport {
            query_id: id.into(),
            systems: SystemResults {
                structured: SystemResult::of(GradedRun::resolve(id, System::Structured, structured, judgments)?, k),
                unstructured: SystemResult::of(GradedRun::resolve(id, System::Unstructured, unstructured, judgments)?, k),
                combined: SystemResult::of(GradedRun::resolve(id, System::Combined, combined, judgments)?, k),
            },
        });
    }

    let avg = |s: System| mean(&reports.iter().map(|r| r.systems.get(s).p_at_k).collect::<Vec<_>>());
    let averages = Averages {
        structured: avg(System::Structured)?,
        unstructured: avg(System::Unstructured)?,
        combined: avg(System::Combined)?,
    };
    Ok(BenchmarkReport {
        corpus_seed: seed,
        k,
        queries: reports,
        averages,
    })
}
