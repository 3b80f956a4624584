//! Request/response tests for the annotation HTTP API, driven in-process.

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{Duration, TimeZone, Utc};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use reception_core::annotate::server::{router, AppState, ChunkTable};
use reception_core::annotate::{AnnotationStore, Candidate, ContextRef, ExportRecord};
use reception_core::corpus::Chunk;
use reception_core::sampling::Stage;

fn candidate(query: &str, rank: usize) -> Candidate {
    let doc = format!("doc{rank}");
    let chunk = format!("{doc}#1");
    Candidate {
        candidate_id: format!("{query}:{rank}"),
        query_id: query.into(),
        quote_text: format!("quote of {query}"),
        chunk_id: chunk.clone(),
        hit_text: format!("hit {rank}"),
        rank,
        score: 0.9 - rank as f32 / 100.0,
        pool_size: 10,
        stage: Stage::Pilot,
        doc_id: doc.clone(),
        work_id: format!("work{rank}"),
        author: "Locke".into(),
        title: "Essay".into(),
        year: Some(1690),
        genre: "philosophy".into(),
        declared_language: "en".into(),
        context_ref: ContextRef {
            doc_id: doc,
            chunk_id: chunk,
        },
    }
}

fn chunks() -> Vec<Chunk> {
    (0..5)
        .map(|i| Chunk {
            chunk_id: format!("doc1#{i}"),
            doc_id: "doc1".into(),
            work_id: "work1".into(),
            token_start: i * 100,
            token_end: (i + 1) * 100,
            char_start: 0,
            char_end: 0,
            text: format!("chunk {i}"),
        })
        .collect()
}

/// Router over two queries (3 and 2 candidates) and a clock advanced by
/// the returned handle, in minutes.
fn app() -> (Router, Arc<AtomicI64>) {
    let mut store = AnnotationStore::in_memory();
    let mut cands: Vec<_> = (1..=3).map(|r| candidate("qa", r)).collect();
    cands.extend((1..=2).map(|r| candidate("qb", r)));
    store.enqueue(cands).unwrap();
    let minutes = Arc::new(AtomicI64::new(0));
    let m = minutes.clone();
    let t0 = Utc.with_ymd_and_hms(2024, 3, 1, 9, 0, 0).unwrap();
    let state =
        AppState::new(store, ChunkTable::new(chunks()), 0.5).with_clock(Arc::new(move || {
            t0 + Duration::minutes(m.load(Ordering::SeqCst))
        }));
    (router(Arc::new(state), None), minutes)
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, body)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, body) = call(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    let v = serde_json::from_slice(&body).unwrap_or(Value::Null);
    (s, v)
}

async fn post_label(app: &Router, body: Value) -> (StatusCode, Value) {
    let req = Request::post("/api/label")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (s, body) = call(app, req).await;
    (s, serde_json::from_slice(&body).unwrap_or(Value::Null))
}

fn label(id: &str, label: &str, who: &str) -> Value {
    json!({"candidate_id": id, "label": label, "annotator": who, "duration_seconds": 4.5})
}

#[tokio::test]
async fn queries_lists_progress() {
    let (app, _) = app();
    let (s, v) = get(&app, "/api/queries").await;
    assert_eq!(s, StatusCode::OK);
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 2);
    assert_eq!(arr[0]["query_id"], "qa");
    assert_eq!(arr[0]["quote_text"], "quote of qa");
    assert_eq!(arr[0]["total"], 3);
    assert_eq!(arr[0]["annotated"], 0);
    assert_eq!(arr[1]["total"], 2);
}

#[tokio::test]
async fn next_leases_disjointly_then_204() {
    let (app, minutes) = app();
    let (s, a) = get(&app, "/api/next?annotator=alice&query=qa").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(a["candidate_id"], "qa:1");
    assert_eq!(a["author"], "Locke");
    let (_, b) = get(&app, "/api/next?annotator=bob&query=qa").await;
    assert_eq!(b["candidate_id"], "qa:2");
    // same annotator polling again keeps their lease
    let (_, a2) = get(&app, "/api/next?annotator=alice&query=qa").await;
    assert_eq!(a2["candidate_id"], "qa:1");
    let (_, c) = get(&app, "/api/next?annotator=carol&query=qa").await;
    assert_eq!(c["candidate_id"], "qa:3");
    let (s, v) = get(&app, "/api/next?annotator=dave&query=qa").await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    assert_eq!(v, Value::Null);

    minutes.store(11, Ordering::SeqCst);
    let (s, v) = get(&app, "/api/next?annotator=dave&query=qa").await;
    assert_eq!(s, StatusCode::OK, "expired leases return to the pool");
    assert_eq!(v["candidate_id"], "qa:1");
}

#[tokio::test]
async fn next_requires_annotator() {
    let (app, _) = app();
    let (s, v) = get(&app, "/api/next?annotator=").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("annotator"));
    let (s, _) = get(&app, "/api/next").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn label_validation() {
    let (app, _) = app();
    let (s, v) = post_label(&app, label("qa:1", "Paraphrase", "alice")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["label"], "Paraphrase");
    assert_eq!(v["annotator_id"], "alice");

    let (s, v) = post_label(&app, label("qa:1", "LexicalMatch", "alice")).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"].is_string());
    let (s, _) = post_label(&app, label("qa:1", "Brilliant", "alice")).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, v) = post_label(&app, label("qa:99", "NoMatch", "alice")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(v["error"].as_str().unwrap().contains("qa:99"));
    let (s, _) = post_label(&app, json!({"candidate_id": "qa:2"})).await;
    assert!(s.is_client_error());
    let (s, _) = post_label(
        &app,
        json!({"candidate_id": "qa:2", "label": "NoMatch", "annotator": "a", "duration_seconds": -1.0}),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn labelled_candidates_leave_queue_and_progress_decides() {
    let (app, _) = app();
    for (rank, l) in [(1, "Paraphrase"), (2, "Meaning Match"), (3, "NoMatch")] {
        let (_, c) = get(&app, "/api/next?annotator=alice&query=qa").await;
        assert_eq!(c["rank"], rank);
        let (s, _) = post_label(&app, label(c["candidate_id"].as_str().unwrap(), l, "alice")).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (s, _) = get(&app, "/api/next?annotator=alice&query=qa").await;
    assert_eq!(s, StatusCode::NO_CONTENT);

    let (s, p) = get(&app, "/api/progress?query=qa").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(p["annotated"], 3);
    assert_eq!(p["significant"], 2);
    assert_eq!(p["counts"]["Paraphrase"], 1);
    assert_eq!(p["counts"]["MeaningMatch"], 1);
    assert_eq!(p["counts"]["NoMatch"], 1);
    let density = p["decision"]["significant_density"].as_f64().unwrap();
    assert!((density - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(p["decision"]["decision"], "deepen");

    let (s, _) = get(&app, "/api/progress?query=nope").await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    // the other query is untouched
    let (_, p) = get(&app, "/api/progress?query=qb").await;
    assert_eq!(p["annotated"], 0);
    assert_eq!(p["decision"]["significant_density"], Value::Null);
}

#[tokio::test]
async fn context_window() {
    let (app, _) = app();
    let (s, v) = get(&app, "/api/context?chunk=doc1%231&radius=2").await;
    assert_eq!(s, StatusCode::OK);
    let chunks = v["chunks"].as_array().unwrap();
    let ids: Vec<_> = chunks
        .iter()
        .map(|c| c["chunk_id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["doc1#0", "doc1#1", "doc1#2", "doc1#3"]);
    let focus: Vec<_> = chunks
        .iter()
        .map(|c| c["focus"].as_bool().unwrap())
        .collect();
    assert_eq!(focus, [false, true, false, false]);

    let (_, v) = get(&app, "/api/context?chunk=doc1%232").await;
    assert_eq!(
        v["chunks"].as_array().unwrap().len(),
        5,
        "default radius is 2"
    );
    let (s, _) = get(&app, "/api/context?chunk=doc9%230").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn export_has_each_label_once() {
    let (app, _) = app();
    post_label(&app, label("qa:2", "TopicalMatch", "alice")).await;
    post_label(&app, label("qb:1", "NoMatch", "bob")).await;
    // relabel supersedes
    post_label(&app, label("qa:2", "Paraphrase", "carol")).await;

    let (s, body) = call(
        &app,
        Request::get("/api/export").body(Body::empty()).unwrap(),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let records: Vec<ExportRecord> = std::str::from_utf8(&body)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0].candidate.candidate_id, "qa:2");
    assert_eq!(records[0].annotator_id, "carol");
    assert_eq!(records[1].candidate.candidate_id, "qb:1");

    let (_, body) = call(
        &app,
        Request::get("/api/export?query=qb")
            .body(Body::empty())
            .unwrap(),
    )
    .await;
    assert_eq!(std::str::from_utf8(&body).unwrap().lines().count(), 1);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_polls_never_share() {
    let mut store = AnnotationStore::in_memory();
    store
        .enqueue((1..=40).map(|r| candidate("q", r)).collect())
        .unwrap();
    let app = router(
        Arc::new(AppState::new(store, ChunkTable::default(), 0.5)),
        None,
    );
    let tasks: Vec<_> = (0..40)
        .map(|i| {
            let app = app.clone();
            tokio::spawn(async move { get(&app, &format!("/api/next?annotator=a{i}")).await.1 })
        })
        .collect();
    let mut ids = Vec::new();
    for t in tasks {
        ids.push(
            t.await.unwrap()["candidate_id"]
                .as_str()
                .unwrap()
                .to_owned(),
        );
    }
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 40);
}
