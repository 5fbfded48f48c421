//! HTTP JSON API over one immutable index. Handlers only decode requests,
//! call into `create_core` and encode results; judgments and executed runs
//! go through the single-writer [`JudgmentStore`].
//!
//! | method | path | body / query | response |
//! |---|---|---|---|
//! | POST | `/api/parse` | `{text, query_id?, as_of_date?}` | query document |
//! | POST | `/api/validate` | `{query}` | `{valid, violations}` |
//! | POST | `/api/search` | `{query, limit?, system?, seed?}` | `{query, system, results}` |
//! | GET | `/api/patients/{id}/evidence` | `?query_id=` | evidence view |
//! | POST | `/api/judgments` | `{query_id, person_id, grade}` | stored judgment |
//! | GET | `/api/judgments` | `?query_id=` | judgments of the query |
//! | GET | `/api/metrics/p-at-5` | `?query_id=&system=` | P@5 of the latest run |
//! | GET | `/api/vocabulary/search` | `?q=&limit=` | matching concepts |
//!
//! Errors carry `{code, message, field_path?}`; invalid query documents
//! answer 422 and add the full `violations` list.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use create_core::eval::{Judgment, JudgmentSource, System};
use create_core::query::{parse_query_with, ParseOptions, Violation};
use create_core::retrieval::{evidence_view, ScoredSection};
use create_core::text::TriggerLexicon;
use create_core::{
    search, structured_only_search, unstructured_only_search, validate_query, CohortIndex, CohortQuery, Date, Grade, PersonId, Vocabulary,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::formats::from_json;
use crate::judgments::{JudgmentStore, LogEntry, Metrics, RunRecord};

pub const METRICS_K: usize = 5;
const DEFAULT_LIMIT: usize = 10;
const DEFAULT_VOCAB_LIMIT: usize = 20;

pub struct AppState {
    pub index: CohortIndex,
    pub vocab: Vocabulary,
    pub lexicon: TriggerLexicon,
    store: Mutex<JudgmentStore>,
    /// Last executed document per query_id, for evidence lookups.
    queries: RwLock<BTreeMap<String, CohortQuery>>,
}

impl AppState {
    pub fn new(index: CohortIndex, vocab: Vocabulary, lexicon: TriggerLexicon, store: JudgmentStore) -> Self {
        Self {
            index,
            vocab,
            lexicon,
            store: Mutex::new(store),
            queries: RwLock::new(BTreeMap::new()),
        }
    }

    /// Makes `queries` known to the evidence endpoint before any search.
    pub fn with_queries(self, queries: impl IntoIterator<Item = CohortQuery>) -> Self {
        {
            let mut known = self.queries.write().expect("query map lock");
            for q in queries {
                known.insert(q.query_id.clone(), q);
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_path: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.into(),
            message: message.into(),
            field_path: None,
            violations: Vec::new(),
        }
    }

    fn at(mut self, field_path: impl Into<String>) -> Self {
        self.field_path = Some(field_path.into());
        self
    }

    fn invalid_query(violations: Vec<Violation>) -> Self {
        let first = &violations[0];
        Self {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            code: first.code.as_str().into(),
            message: first.message.clone(),
            field_path: Some(format!("query.{}", first.field_path)),
            violations,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn decode<T: DeserializeOwned>(body: &str) -> Result<T, ApiError> {
    from_json(body).map_err(|e| {
        if e.syntax {
            ApiError::new(StatusCode::BAD_REQUEST, "MALFORMED_JSON", e.message)
        } else {
            let err = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_DOCUMENT", e.message);
            match e.field_path {
                Some(p) => err.at(p),
                None => err,
            }
        }
    })
}

fn query_params<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(t)| t)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "INVALID_PARAMETERS", e.body_text()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/parse", post(parse))
        .route("/api/validate", post(validate))
        .route("/api/search", post(run_search))
        .route("/api/patients/{id}/evidence", get(evidence))
        .route("/api/judgments", post(judge).get(list_judgments))
        .route("/api/metrics/p-at-5", get(metrics))
        .route("/api/vocabulary/search", get(vocabulary_search))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", "no such endpoint") })
        .with_state(state)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParseRequest {
    text: String,
    #[serde(default)]
    query_id: Option<String>,
    #[serde(default)]
    as_of_date: Option<Date>,
    #[serde(default)]
    expand: bool,
}

async fn parse(State(s): State<Arc<AppState>>, body: String) -> ApiResult<CohortQuery> {
    let req: ParseRequest = decode(&body)?;
    let mut options = ParseOptions {
        expand_filters: req.expand,
        ..ParseOptions::default()
    };
    if let Some(id) = req.query_id {
        options.query_id = id;
    }
    if let Some(d) = req.as_of_date {
        options.as_of_date = d;
    }
    parse_query_with(&req.text, &s.vocab, &s.lexicon, &options)
        .map(Json)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "EMPTY_QUERY", e.to_string()).at("text"))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ValidateRequest {
    query: CohortQuery,
}

#[derive(Serialize, Deserialize)]
pub struct ValidateResponse {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

async fn validate(State(s): State<Arc<AppState>>, body: String) -> ApiResult<ValidateResponse> {
    let req: ValidateRequest = decode(&body)?;
    let violations = validate_query(&req.query, &s.vocab);
    Ok(Json(ValidateResponse {
        valid: violations.is_empty(),
        violations,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchRequest {
    query: CohortQuery,
    #[serde(default = "default_limit")]
    limit: usize,
    #[serde(default)]
    system: Option<System>,
    #[serde(default)]
    seed: Option<u64>,
}

fn default_limit() -> usize {
    DEFAULT_LIMIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub person_id: PersonId,
    pub rank: usize,
    /// Absent for the structured system, which does not rank.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sections: Vec<ScoredSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    /// The executed document, exactly as submitted.
    pub query: CohortQuery,
    pub system: System,
    pub results: Vec<SearchHit>,
}

/// Runs one system on a validated query.
pub fn execute(
    index: &CohortIndex,
    q: &CohortQuery,
    system: System,
    limit: usize,
    seed: u64,
) -> Result<Vec<SearchHit>, create_core::retrieval::SearchError> {
    let ranked = match system {
        System::Structured => {
            return Ok(structured_only_search(index, q, limit, seed)
                .into_iter()
                .enumerate()
                .map(|(i, person_id)| SearchHit {
                    person_id,
                    rank: i + 1,
                    score: None,
                    sections: Vec::new(),
                })
                .collect());
        }
        System::Unstructured => unstructured_only_search(index, q, limit)?,
        System::Combined => search(index, q, limit)?,
    };
    Ok(ranked
        .into_iter()
        .map(|p| SearchHit {
            person_id: p.person_id,
            rank: p.rank,
            score: Some(p.score),
            sections: p.sections,
        })
        .collect())
}

async fn run_search(State(s): State<Arc<AppState>>, body: String) -> ApiResult<SearchResponse> {
    let req: SearchRequest = decode(&body)?;
    let violations = validate_query(&req.query, &s.vocab);
    if !violations.is_empty() {
        return Err(ApiError::invalid_query(violations));
    }
    if req.limit == 0 {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_LIMIT", "limit must be at least 1").at("limit"));
    }
    let system = req.system.unwrap_or(System::Combined);
    let results = execute(&s.index, &req.query, system, req.limit, req.seed.unwrap_or(0))
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_QUERY", e.to_string()))?;
    let run = RunRecord {
        query_id: req.query.query_id.clone(),
        system,
        ranked: results.iter().map(|h| h.person_id.clone()).collect(),
    };
    store_error(s.store.lock().expect("judgment store lock").append(LogEntry::Run(run)))?;
    s.queries
        .write()
        .expect("query map lock")
        .insert(req.query.query_id.clone(), req.query.clone());
    Ok(Json(SearchResponse {
        query: req.query,
        system,
        results,
    }))
}

fn store_error<T>(r: Result<T, crate::formats::FormatError>) -> Result<T, ApiError> {
    r.map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "STORE_FAILED", e.to_string()))
}

#[derive(Deserialize)]
struct EvidenceParams {
    query_id: String,
}

async fn evidence(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
    params: Result<Query<EvidenceParams>, QueryRejection>,
) -> ApiResult<create_core::retrieval::EvidenceView> {
    let params = query_params(params)?;
    let query = s
        .queries
        .read()
        .expect("query map lock")
        .get(&params.query_id)
        .cloned()
        .ok_or_else(|| {
            ApiError::new(
                StatusCode::NOT_FOUND,
                "UNKNOWN_QUERY",
                format!("no query {} has been executed", params.query_id),
            )
            .at("query_id")
        })?;
    evidence_view(&s.index, &query, &id)
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "UNKNOWN_PATIENT", format!("no patient {id}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JudgmentRequest {
    query_id: String,
    person_id: PersonId,
    grade: Grade,
}

async fn judge(State(s): State<Arc<AppState>>, body: String) -> ApiResult<Judgment> {
    let req: JudgmentRequest = decode(&body)?;
    if s.index.patient(req.person_id.as_str()).is_none() {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "UNKNOWN_PATIENT", format!("no patient {}", req.person_id)).at("person_id"));
    }
    let j = Judgment {
        query_id: req.query_id,
        person_id: req.person_id,
        grade: req.grade,
        source: JudgmentSource::Human,
    };
    store_error(s.store.lock().expect("judgment store lock").append(LogEntry::Judgment(j.clone())))?;
    Ok(Json(j))
}

#[derive(Deserialize)]
struct JudgmentListParams {
    query_id: String,
}

async fn list_judgments(
    State(s): State<Arc<AppState>>,
    params: Result<Query<JudgmentListParams>, QueryRejection>,
) -> ApiResult<Vec<Judgment>> {
    let params = query_params(params)?;
    let store = s.store.lock().expect("judgment store lock");
    Ok(Json(store.judgments().filter(|j| j.query_id == params.query_id).cloned().collect()))
}

#[derive(Deserialize)]
struct MetricsParams {
    query_id: String,
    #[serde(default)]
    system: Option<System>,
}

async fn metrics(State(s): State<Arc<AppState>>, params: Result<Query<MetricsParams>, QueryRejection>) -> ApiResult<Metrics> {
    let params = query_params(params)?;
    let system = params.system.unwrap_or(System::Combined);
    let store = s.store.lock().expect("judgment store lock");
    store.metrics(&params.query_id, system, METRICS_K).map(Json).ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "NO_RUN",
            format!("query {} has not been run on the {system} system", params.query_id),
        )
    })
}

#[derive(Deserialize)]
struct VocabParams {
    q: String,
    #[serde(default)]
    limit: Option<usize>,
}

async fn vocabulary_search(
    State(s): State<Arc<AppState>>,
    params: Result<Query<VocabParams>, QueryRejection>,
) -> ApiResult<Vec<create_core::Concept>> {
    let params = query_params(params)?;
    let limit = params.limit.unwrap_or(DEFAULT_VOCAB_LIMIT);
    Ok(Json(s.vocab.search_names(&params.q, limit).into_iter().cloned().collect()))
}

/// Serves until Ctrl-C.
pub async fn serve(addr: &str, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
