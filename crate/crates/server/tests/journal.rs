use axum::body::Body;
use axum::http::{Request, StatusCode};
use hcatd_core::bundled::robots;
use hcatd_server::{replay, router, AppState};
use http_body_util::BodyExt;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(state: &AppState, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
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

fn normalized(p: &hcatd_core::Project) -> Value {
    let mut v: Value = serde_json::from_str(&p.to_json_string()).unwrap();
    strip_timestamps(&mut v);
    v
}

const SOURCES: &[&str] = &["P1 = P2", "P1 != pos3", "!(P1 = pos1 && P2 = pos3)", "GM1 = open", "P2 = pos2 || P1 = pos1"];

#[tokio::test]
async fn random_mutation_sequences_replay_to_the_final_state() {
    for seed in 0..20u64 {
        let mut rng = StdRng::seed_from_u64(seed);
        let st = AppState::new(robots(), None);
        for _ in 0..15 {
            let before = st.revision().await;
            let revision = if rng.gen_bool(0.85) { before } else { before + 1 };
            let session = if rng.gen_bool(0.7) { "main" } else { "level-0" };
            let (_, q) = call(&st, "GET", &format!("/queries?limit=5&session={session}"), None).await;
            let queries = q["queries"].as_array().unwrap().clone();
            let (status, _) = match rng.gen_range(0..3) {
                0 if !queries.is_empty() => {
                    let pick = queries.choose(&mut rng).unwrap();
                    let answer = if rng.gen_bool(0.5) { "accept" } else { "reject" };
                    let uri = format!("/queries/{}/answer?session={session}", pick["id"].as_str().unwrap());
                    call(&st, "POST", &uri, Some(json!({ "answer": answer, "revision": revision }))).await
                }
                1 => {
                    let (_, s) = call(&st, "GET", &format!("/scenarios?session={session}"), None).await;
                    let all = s["scenarios"].as_array().unwrap().clone();
                    let Some(pick) = all.choose(&mut rng) else { continue };
                    let uri = format!("/tests?session={session}");
                    call(&st, "POST", &uri, Some(json!({ "scenario": pick["key"], "revision": revision }))).await
                }
                _ => {
                    let source = SOURCES.choose(&mut rng).unwrap();
                    let uri = format!("/restrictions?session={session}");
                    call(&st, "POST", &uri, Some(json!({ "source": source, "revision": revision }))).await
                }
            };
            let after = st.revision().await;
            if status == StatusCode::OK {
                assert_eq!(after, before + 1);
            } else {
                assert_eq!(after, before);
            }
        }
        let (initial, journal) = st.journal().await;
        assert_eq!(journal.len() as u64, st.revision().await);
        let replayed = replay(&initial, &journal).unwrap();
        assert_eq!(normalized(&replayed), normalized(&st.project().await), "seed {seed}");
    }
}
