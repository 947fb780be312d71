use axum::body::Body;
use axum::http::{Request, StatusCode};
use hcatd_core::bundled::robots;
use hcatd_core::Project;
use hcatd_server::{replay, router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const T3: &str = "P1:pos3,P2:pos3,GM1:close,GM2:open";

async fn call(state: &AppState, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    call_with(state, method, uri, body, None).await
}

async fn call_with(
    state: &AppState,
    method: &str,
    uri: &str,
    body: Option<Value>,
    if_match: Option<&str>,
) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(r) = if_match {
        req = req.header("if-match", r);
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn strip_timestamps(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("timestamp");
            map.values_mut().for_each(strip_timestamps);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timestamps),
        _ => {}
    }
}

fn normalized(p: &Project) -> Value {
    let mut v: Value = serde_json::from_str(&p.to_json_string()).unwrap();
    strip_timestamps(&mut v);
    v
}

#[tokio::test]
async fn coverage_of_the_seeded_robot_project() {
    let st = AppState::new(robots(), None);
    let (status, body) = call(&st, "GET", "/coverage", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["revision"], 0);
    assert_eq!(body["requirements"], 22);
    let uncovered: Vec<&str> = body["uncovered"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(uncovered.len(), 11);
    assert!(uncovered.contains(&"P1:pos1,P2:pos2"));
    assert!(uncovered.contains(&"P1:pos3,P2:pos3"));
    assert_eq!(body["valid"], false);
    // GM1:open and GM2:close never occur together with the fixed grippers.
    assert!(body["excluded"].as_array().unwrap().contains(&json!("GM1:open,GM2:open")));
}

#[tokio::test]
async fn top_query_and_model_views() {
    let st = AppState::new(robots(), None);
    let (_, q) = call(&st, "GET", "/queries?limit=1", None).await;
    assert_eq!(q["queries"][0]["candidate"], T3);
    assert_eq!(q["queries"][0]["kind"], "confirm-test");
    assert_eq!(q["queries"][0]["rank_score"], 5);
    let (_, m) = call(&st, "GET", "/model", None).await;
    assert_eq!(m["parameters"].as_array().unwrap().len(), 4);
    assert_eq!(m["executable"], 9);
    let (_, s) = call(&st, "GET", "/scenarios", None).await;
    assert_eq!(s["scenarios"].as_array().unwrap().len(), 9);
    assert_eq!(s["validated"], 2);
    let (status, e) = call(&st, "GET", "/model?session=nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(e["revision"], 0);
    assert!(e["code"].is_string() && e["message"].is_string() && e["details"].is_object());
}

#[tokio::test]
async fn revisions_are_checked() {
    let st = AppState::new(robots(), None);
    let (_, q) = call(&st, "GET", "/queries?limit=1", None).await;
    let id = q["queries"][0]["id"].as_str().unwrap().to_string();
    let uri = format!("/queries/{id}/answer");

    let (status, body) = call(&st, "POST", &uri, Some(json!({ "answer": "accept" }))).await;
    assert_eq!(status, StatusCode::PRECONDITION_REQUIRED);
    assert_eq!(body["code"], "revision_required");

    let (status, body) = call(&st, "POST", &uri, Some(json!({ "answer": "accept", "revision": 7 }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "stale_revision");
    assert_eq!(body["details"]["current"], 0);

    let (status, body) = call_with(&st, "POST", &uri, Some(json!({ "answer": "accept" })), Some("\"0\"")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["revision"], 1);

    let (status, body) = call(&st, "POST", &uri, Some(json!({ "answer": "accept", "revision": 1 }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "already_answered");
    assert_eq!(st.revision().await, 1);
}

#[tokio::test]
async fn conflicting_restriction_lists_the_validated_tests() {
    let st = AppState::new(robots(), None);
    let (status, body) = call(&st, "POST", "/restrictions", Some(json!({ "source": "GM1 = open", "revision": 0 }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "restriction_conflict");
    assert_eq!(
        body["details"]["conflicting"],
        json!(["P1:pos1,P2:pos1,GM1:close,GM2:open", "P1:pos2,P2:pos2,GM1:close,GM2:open"])
    );
    assert_eq!(st.revision().await, 0);

    let (status, body) = call(&st, "POST", "/restrictions", Some(json!({ "source": "P1 = ", "dry_run": true }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "parse_error");
}

#[tokio::test]
async fn resolution_path_through_the_api() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("robots.hcatd");
    let st = AppState::new(robots(), Some(path.clone()));

    let (_, dry) = call(&st, "POST", "/restrictions", Some(json!({ "source": "P1 = P2", "dry_run": true }))).await;
    assert_eq!(dry["requirements_after"], 16);
    assert_eq!(dry["revision"], 0);
    assert!(!path.exists());

    let (status, r) = call(&st, "POST", "/restrictions", Some(json!({ "source": "P1 = P2", "revision": 0 }))).await;
    assert_eq!(status, StatusCode::OK, "{r}");
    assert_eq!(r["revision"], 1);
    let (_, cov) = call(&st, "GET", "/coverage", None).await;
    assert_eq!(cov["requirements"], 16);
    assert!(cov["excluded"].as_array().unwrap().contains(&json!("P1:pos1,P2:pos2")));

    let (status, _) = call_with(&st, "POST", "/tests", Some(json!({ "scenario": T3 })), Some("1")).await;
    assert_eq!(status, StatusCode::OK);
    let (_, cov) = call(&st, "GET", "/coverage", None).await;
    assert_eq!(cov["valid"], true);
    assert_eq!(cov["revision"], 2);

    let on_disk = Project::load(&path).unwrap();
    assert_eq!(on_disk.to_json_string(), st.project().await.to_json_string());
    let (initial, journal) = st.journal().await;
    assert_eq!(journal.len(), 2);
    assert_eq!(normalized(&replay(&initial, &journal).unwrap()), normalized(&st.project().await));
}

#[tokio::test]
async fn failed_persistence_rolls_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("robots.hcatd");
    let st = AppState::new(robots(), Some(path));
    let before = st.project().await.to_json_string();
    let (status, body) = call(&st, "POST", "/tests", Some(json!({ "scenario": T3, "revision": 0 }))).await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR);
    assert_eq!(body["code"], "persist_failed");
    assert_eq!(st.revision().await, 0);
    assert_eq!(st.project().await.to_json_string(), before);
}

#[tokio::test]
async fn reads_have_no_side_effects() {
    let st = AppState::new(robots(), None);
    let before = st.project().await.to_json_string();
    for uri in [
        "/model",
        "/scenarios",
        "/coverage",
        "/coverage?strength=3",
        "/queries?limit=50",
        "/levels",
        "/levels/0/audit",
        "/levels/0/assumption-diff",
        "/journal",
    ] {
        let (_, body) = call(&st, "GET", uri, None).await;
        assert_eq!(body["revision"], 0, "{uri}");
    }
    call(&st, "POST", "/restrictions", Some(json!({ "source": "P1 = P2", "dry_run": true }))).await;
    call(&st, "POST", "/retest", Some(json!({ "assumption_id": "a1", "level": 0, "dry_run": true }))).await;
    assert_eq!(st.project().await.to_json_string(), before);
    assert_eq!(st.revision().await, 0);
}

#[tokio::test]
async fn level_endpoints() {
    let st = AppState::new(robots(), None);
    let (_, levels) = call(&st, "GET", "/levels", None).await;
    assert_eq!(levels["levels"].as_array().unwrap().len(), 1);
    assert_eq!(levels["levels"][0]["abstr"], json!(["fine-positioning", "take"]));
    assert_eq!(levels["complete"], false);

    let (_, audit) = call(&st, "GET", "/levels/0/audit", None).await;
    assert_eq!(audit["silently_abstracted"], json!(["take"]));

    let (status, _) = call(&st, "GET", "/levels/0/assumption-diff", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let refine = json!({
        "revision": 0,
        "refine": {
            "from": 0,
            "promote": ["fine-positioning", "take"],
            "add_assumptions": [{ "id": "a3", "statement": "grippers close fully", "strength_parent": "a1", "supports": ["give-grip"] }],
            "meta_level": "virtual"
        }
    });
    let (status, body) = call(&st, "POST", "/levels", Some(refine)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["level"], 1);
    let (_, levels) = call(&st, "GET", "/levels", None).await;
    assert_eq!(levels["complete"], true);
    let (_, diff) = call(&st, "GET", "/levels/0/assumption-diff", None).await;
    assert_eq!(diff["modified"], json!([{ "from": "a1", "to": "a3" }]));

    let (status, body) = call(&st, "POST", "/levels", Some(json!({ "revision": 1, "refine": { "from": 0, "promote": [] } }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "level_error");

    let (status, body) = call(&st, "POST", "/retest", Some(json!({ "assumption_id": "a1", "level": 1, "revision": 1 }))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["revision"], 2);
    assert_eq!(body["retest"][0]["level"], 0);
    let project = st.project().await;
    assert!(project.levels()[1]
        .assumptions()
        .iter()
        .filter(|a| a.id == "a3")
        .all(|a| a.status == hcatd_core::AssumptionStatus::Contradicted));
}

#[tokio::test]
async fn malformed_requests_use_the_error_body() {
    let st = AppState::new(robots(), None);
    let (status, body) = call(&st, "POST", "/tests", Some(json!({ "scenarioo": T3 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "bad_request");
    let (status, body) = call(&st, "GET", "/nowhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not_found");
    let (status, _) = call(&st, "GET", "/coverage?strength=9", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}
