//! HTTP/JSON service over a single hcatd project.
//!
//! Every response carries the project `revision`. Mutations must name the
//! revision they were based on, either as a `revision` body field or an
//! `If-Match` header; stale revisions are refused with 409 and missing ones
//! with 428. Successful mutations are persisted before they become visible
//! and bump the revision by one.

mod error;
pub mod mutation;
pub mod views;

use std::collections::{BTreeSet, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hcatd_core::{Project, Session, MAIN_SESSION};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::RwLock;

pub use error::ApiError;
pub use mutation::{apply, replay, AssumptionBody, Mutation};

struct Workspace {
    initial: Project,
    project: Project,
    path: Option<PathBuf>,
    revision: u64,
    journal: Vec<Mutation>,
}

/// Shared service state. Reads take a shared lock; mutations are
/// serialised through the exclusive lock.
#[derive(Clone)]
pub struct AppState(Arc<RwLock<Workspace>>);

impl AppState {
    /// `path`, when given, receives the project after every mutation.
    pub fn new(project: Project, path: Option<PathBuf>) -> Self {
        AppState(Arc::new(RwLock::new(Workspace {
            initial: project.clone(),
            project,
            path,
            revision: 0,
            journal: Vec::new(),
        })))
    }

    pub async fn revision(&self) -> u64 {
        self.0.read().await.revision
    }

    pub async fn project(&self) -> Project {
        self.0.read().await.project.clone()
    }

    /// Project as loaded, plus every mutation applied since.
    pub async fn journal(&self) -> (Project, Vec<Mutation>) {
        let ws = self.0.read().await;
        (ws.initial.clone(), ws.journal.clone())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/model", get(get_model))
        .route("/scenarios", get(get_scenarios))
        .route("/coverage", get(get_coverage))
        .route("/queries", get(get_queries))
        .route("/queries/{id}/answer", post(post_answer))
        .route("/tests", post(post_test))
        .route("/restrictions", post(post_restriction))
        .route("/levels", get(get_levels).post(post_level))
        .route("/levels/{level}/audit", get(get_audit))
        .route("/levels/{level}/assumption-diff", get(get_assumption_diff))
        .route("/retest", post(post_retest))
        .route("/journal", get(get_journal))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(state)
}

/// Serves `project` on `addr` until the process stops.
pub async fn serve(project: Project, path: Option<PathBuf>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(project, path))).await
}

type Params = Query<HashMap<String, String>>;

fn envelope(revision: u64, payload: Value) -> Response {
    let mut body = match payload {
        Value::Object(map) => map,
        other => {
            let mut map = serde_json::Map::new();
            map.insert("data".into(), other);
            map
        }
    };
    body.insert("revision".into(), json!(revision));
    (StatusCode::OK, Json(Value::Object(body))).into_response()
}

fn respond(revision: u64, result: Result<Value, ApiError>) -> Response {
    match result {
        Ok(v) => envelope(revision, v),
        Err(e) => e.at(revision).into_response(),
    }
}

fn session_id(params: &HashMap<String, String>) -> String {
    params
        .get("session")
        .cloned()
        .unwrap_or_else(|| MAIN_SESSION.to_string())
}

fn session<'a>(project: &'a Project, params: &HashMap<String, String>) -> Result<&'a Session, ApiError> {
    Ok(project.session(&session_id(params))?)
}

fn number(params: &HashMap<String, String>, key: &str) -> Result<Option<usize>, ApiError> {
    params
        .get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| ApiError::bad_request(format!("`{key}` must be a non-negative integer")))
        })
        .transpose()
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes)
        .map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn level_index(raw: &str) -> Result<usize, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::bad_request(format!("invalid level `{raw}`")))
}

async fn get_model(State(st): State<AppState>, Query(params): Params) -> Response {
    let ws = st.0.read().await;
    let id = session_id(&params);
    respond(ws.revision, session(&ws.project, &params).map(|s| views::model(&id, s)))
}

async fn get_scenarios(State(st): State<AppState>, Query(params): Params) -> Response {
    let ws = st.0.read().await;
    respond(ws.revision, session(&ws.project, &params).map(views::scenarios))
}

async fn get_coverage(State(st): State<AppState>, Query(params): Params) -> Response {
    let ws = st.0.read().await;
    let result = number(&params, "strength")
        .and_then(|t| views::coverage(session(&ws.project, &params)?, t));
    respond(ws.revision, result)
}

async fn get_queries(State(st): State<AppState>, Query(params): Params) -> Response {
    let ws = st.0.read().await;
    let result = number(&params, "limit").and_then(|limit| {
        Ok(views::queries(session(&ws.project, &params)?, limit.unwrap_or(10)))
    });
    respond(ws.revision, result)
}

async fn get_levels(State(st): State<AppState>) -> Response {
    let ws = st.0.read().await;
    respond(ws.revision, views::levels(&ws.project))
}

async fn get_audit(State(st): State<AppState>, Path(level): Path<String>) -> Response {
    let ws = st.0.read().await;
    let result = level_index(&level)
        .and_then(|l| Ok(views::audit(l, &ws.project.abstraction_audit(l)?)));
    respond(ws.revision, result)
}

async fn get_assumption_diff(State(st): State<AppState>, Path(level): Path<String>) -> Response {
    let ws = st.0.read().await;
    let result = level_index(&level)
        .and_then(|l| Ok(views::assumption_diff(l, &ws.project.assumption_diff(l)?)));
    respond(ws.revision, result)
}

async fn get_journal(State(st): State<AppState>) -> Response {
    let ws = st.0.read().await;
    let journal = serde_json::to_value(&ws.journal).expect("mutations serialise");
    envelope(ws.revision, json!({ "journal": journal }))
}

/// Revision named by the client: body field first, then `If-Match`.
fn client_revision(headers: &HeaderMap, from_body: Option<u64>) -> Result<u64, ApiError> {
    if let Some(r) = from_body {
        return Ok(r);
    }
    let Some(raw) = headers.get("if-match") else {
        return Err(ApiError::new(
            StatusCode::PRECONDITION_REQUIRED,
            "revision_required",
            "mutations must carry the revision they are based on",
        ));
    };
    let text = raw.to_str().unwrap_or_default().trim();
    let text = text.strip_prefix("W/").unwrap_or(text).trim_matches('"');
    text.parse()
        .map_err(|_| ApiError::bad_request(format!("invalid If-Match revision `{text}`")))
}

/// Checks the revision, applies `m` to a copy, persists it and only then
/// publishes the result.
async fn mutate(st: &AppState, headers: &HeaderMap, revision: Option<u64>, m: Mutation) -> Response {
    let mut ws = st.0.write().await;
    let current = ws.revision;
    let result = (|| {
        let expected = client_revision(headers, revision)?;
        if expected != current {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "stale_revision",
                format!("revision {expected} is stale; the project is at {current}"),
            )
            .details(json!({ "expected": expected, "current": current })));
        }
        let mut next = ws.project.clone();
        let payload = mutation::apply(&mut next, &m)?;
        if let Some(path) = &ws.path {
            next.save(path)?;
        }
        Ok((next, payload))
    })();
    match result {
        Ok((next, payload)) => {
            ws.project = next;
            ws.revision += 1;
            ws.journal.push(m);
            envelope(ws.revision, payload)
        }
        Err(e) => e.at(current).into_response(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerBody {
    answer: String,
    #[serde(default)]
    revision: Option<u64>,
}

async fn post_answer(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(params): Params,
    headers: HeaderMap,
    bytes: Bytes,
) -> Response {
    let b: AnswerBody = match body(&bytes) {
        Ok(b) => b,
        Err(e) => return e.at(st.revision().await).into_response(),
    };
    let m = Mutation::Answer {
        session: session_id(&params),
        query_id: id,
        answer: b.answer,
    };
    mutate(&st, &headers, b.revision, m).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TestBody {
    scenario: String,
    #[serde(default)]
    revision: Option<u64>,
}

async fn post_test(
    State(st): State<AppState>,
    Query(params): Params,
    headers: HeaderMap,
    bytes: Bytes,
) -> Response {
    let b: TestBody = match body(&bytes) {
        Ok(b) => b,
        Err(e) => return e.at(st.revision().await).into_response(),
    };
    let m = Mutation::AddTest {
        session: session_id(&params),
        scenario: b.scenario,
    };
    mutate(&st, &headers, b.revision, m).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RestrictionBody {
    source: String,
    #[serde(default)]
    revision: Option<u64>,
    #[serde(default)]
    dry_run: bool,
}

/// Parses and checks a restriction against a copy of the session.
fn dry_run_restriction(project: &Project, session_id: &str, source: &str) -> Result<Value, ApiError> {
    let mut s = project.session(session_id)?.clone();
    let before = s.requirements().len();
    let excluded_before = s.executable().len();
    let canonical = s.model().parse_restriction(source)?.source().to_string();
    s.apply_restriction(source)?;
    Ok(json!({
        "dry_run": true,
        "restriction": canonical,
        "requirements_before": before,
        "requirements_after": s.requirements().len(),
        "newly_excluded_scenarios": excluded_before - s.executable().len(),
    }))
}

async fn post_restriction(
    State(st): State<AppState>,
    Query(params): Params,
    headers: HeaderMap,
    bytes: Bytes,
) -> Response {
    let b: RestrictionBody = match body(&bytes) {
        Ok(b) => b,
        Err(e) => return e.at(st.revision().await).into_response(),
    };
    let id = session_id(&params);
    if b.dry_run {
        let ws = st.0.read().await;
        return respond(ws.revision, dry_run_restriction(&ws.project, &id, &b.source));
    }
    let m = Mutation::ApplyRestriction {
        session: id,
        source: b.source,
    };
    mutate(&st, &headers, b.revision, m).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    meta_level: String,
    #[serde(default)]
    lprop: BTreeSet<String>,
    #[serde(default)]
    tracked_abstr: BTreeSet<String>,
    #[serde(default)]
    assumptions: Vec<AssumptionBody>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RefineBody {
    from: usize,
    #[serde(default)]
    promote: BTreeSet<String>,
    #[serde(default)]
    remove_assumptions: Vec<String>,
    #[serde(default)]
    add_assumptions: Vec<AssumptionBody>,
    #[serde(default)]
    meta_level: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelBody {
    #[serde(default)]
    revision: Option<u64>,
    #[serde(default)]
    create: Option<CreateBody>,
    #[serde(default)]
    refine: Option<RefineBody>,
}

async fn post_level(State(st): State<AppState>, headers: HeaderMap, bytes: Bytes) -> Response {
    let parsed = body::<LevelBody>(&bytes).and_then(|b| {
        let m = match (b.create, b.refine) {
            (Some(c), None) => Mutation::CreateLevel {
                meta_level: c.meta_level,
                lprop: c.lprop,
                tracked_abstr: c.tracked_abstr,
                assumptions: c.assumptions,
            },
            (None, Some(r)) => Mutation::RefineLevel {
                from: r.from,
                promote: r.promote,
                remove_assumptions: r.remove_assumptions,
                add_assumptions: r.add_assumptions,
                meta_level: r.meta_level,
            },
            _ => return Err(ApiError::bad_request("body needs exactly one of `create` or `refine`")),
        };
        Ok((b.revision, m))
    });
    match parsed {
        Ok((revision, m)) => mutate(&st, &headers, revision, m).await,
        Err(e) => e.at(st.revision().await).into_response(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RetestBody {
    assumption_id: String,
    level: usize,
    #[serde(default)]
    revision: Option<u64>,
    #[serde(default)]
    dry_run: bool,
}

async fn post_retest(State(st): State<AppState>, headers: HeaderMap, bytes: Bytes) -> Response {
    let b: RetestBody = match body(&bytes) {
        Ok(b) => b,
        Err(e) => return e.at(st.revision().await).into_response(),
    };
    if b.dry_run {
        let ws = st.0.read().await;
        let result = ws
            .project
            .retest_plan(&b.assumption_id, b.level)
            .map(|plan| views::retest(ws.project.model(), &plan))
            .map_err(ApiError::from);
        return respond(ws.revision, result);
    }
    let m = Mutation::Retest {
        assumption_id: b.assumption_id,
        level: b.level,
    };
    mutate(&st, &headers, b.revision, m).await
}
