use std::collections::BTreeSet;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use gapscope_core::analytics::class_stats;
use gapscope_core::citations::DocumentText;
use gapscope_core::snapshot::{BuildInputs, Snapshot};
use gapscope_core::synth::{SynthPaper, SyntheticSurvey};
use gapscope_core::views;
use gapscope_server::{router, AppState, ServerOptions};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const OUTLINE: &str = "Trace\n  Partial\n  Full\nCost\nScope\n  Narrow\n  Wide\n";

fn survey(extra_paper: bool) -> SyntheticSurvey {
    let mut s = SyntheticSurvey::new("api", OUTLINE)
        .with_paper(SynthPaper::new("Learning action models from partial traces", 2018, &[0, 3]))
        .with_paper(SynthPaper::new("Full observability planning with costs", 2020, &[1, 2]))
        .with_paper(SynthPaper::new("Narrow cost models for planning", 2020, &[0, 2, 3]))
        .with_paper(SynthPaper::new("Trace based model acquisition survey", 2022, &[1, 3]));
    if extra_paper {
        s = s.with_paper(SynthPaper::new("A late addition", 2023, &[0]));
    }
    s
}

fn inputs(extra_paper: bool) -> BuildInputs {
    let s = survey(extra_paper);
    let c = s.corpus();
    let id = |i: usize| c.papers[i].id;
    let refs = |titles: &[&str]| {
        let mut body = String::from("Introduction\nSome text.\nReferences\n");
        for (n, t) in titles.iter().enumerate() {
            body.push_str(&format!("[{}] A. Author. {t}. In Proceedings, 2019.\n", n + 1));
        }
        body
    };
    BuildInputs {
        config: s.config_yaml(),
        sheet_csv: s.sheet().to_csv(),
        constraints: Some("atmostone:Trace > Partial,Trace > Full\n".into()),
        preferences: None,
        documents: vec![
            DocumentText {
                paper_id: id(1),
                body: refs(&[
                    "Learning action models from partial traces",
                    "Narrow cost modls for plannnig",
                    "Unrelated work on something else entirely",
                ]),
            },
            DocumentText {
                paper_id: id(3),
                body: refs(&[
                    "Full observability planning with costs",
                    "Lerning actoin modles frm partal tracse",
                    "Yet another unrelated reference title",
                ]),
            },
        ],
        embeddings: None,
        thresholds: vec![0.15, 0.25, 0.35],
    }
}

fn snapshot() -> Snapshot {
    Snapshot::build(&inputs(false)).unwrap().0
}

fn app_with(options: ServerOptions) -> axum::Router {
    router(AppState::new(snapshot(), options)).unwrap()
}

fn app() -> axum::Router {
    app_with(ServerOptions::default())
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: &str) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn get_json(app: &axum::Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = call(app, "GET", uri, "").await;
    (s, serde_json::from_str(&b).unwrap())
}

async fn post_json(app: &axum::Router, uri: &str, body: &str) -> (StatusCode, Value) {
    let (s, b) = call(app, "POST", uri, body).await;
    (s, serde_json::from_str(&b).unwrap())
}

fn ids(v: &Value) -> BTreeSet<u64> {
    v["papers"].as_array().unwrap().iter().map(|p| p["id"].as_u64().unwrap()).collect()
}

#[tokio::test]
async fn survey_metadata() {
    let (s, v) = get_json(&app(), "/api/survey").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["title_text"], "Synthetic survey api");
    assert_eq!(v["paper_count"], 4);
    assert_eq!(v["tag_count"], 5);
    assert_eq!(v["taxonomies"], json!(["api"]));
    assert_eq!(v["default_taxonomy"], "api");
}

#[tokio::test]
async fn unknown_routes_get_an_envelope() {
    let app = app();
    for uri in ["/api/nope", "/elsewhere"] {
        let (s, v) = get_json(&app, uri).await;
        assert_eq!(s, StatusCode::NOT_FOUND);
        assert_eq!(v["error"], "not_found");
        assert!(v["detail"].is_string());
    }
}

#[tokio::test]
async fn treemap_counts_match_class_stats() {
    let snap = snapshot();
    let stats = class_stats(&snap.corpus, snap.corpus.taxonomy());
    let (s, v) = get_json(&app(), "/api/treemap?taxonomy=default&level=2").await;
    assert_eq!(s, StatusCode::OK);
    let cells = v["cells"].as_array().unwrap();
    // Level 2 holds the four second-level leaves plus the shallow leaf Cost.
    assert_eq!(cells.len(), 5);
    for cell in cells {
        let cp = cell["classpath"].as_str().unwrap();
        let st = stats.iter().find(|c| c.classpath == cp).unwrap();
        assert_eq!(cell["paper_count"].as_u64().unwrap() as usize, st.paper_count, "{cp}");
    }
    let (s, v) = get_json(&app(), "/api/treemap?level=zero").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "bad_request");
    assert!(v["detail"].as_str().unwrap().starts_with("level"));
}

#[tokio::test]
async fn malformed_queries_name_the_field() {
    let app = app();
    let (s, v) = get_json(&app, "/api/papers?year_min=2021&year_max=2019").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["detail"].as_str().unwrap().starts_with("year_min"));
    let (s, v) = get_json(&app, "/api/timeline?year_max=later").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["detail"].as_str().unwrap().starts_with("year_max"));
    let (s, _) = get_json(&app, "/api/papers?mode=most").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn filters_compose_as_intersection() {
    let app = app();
    let q = "q=planning";
    let tags = "tags=Cost";
    let years = "year_min=2019&year_max=2021";
    let (_, a) = get_json(&app, &format!("/api/papers?{q}")).await;
    let (_, b) = get_json(&app, &format!("/api/papers?{tags}")).await;
    let (_, c) = get_json(&app, &format!("/api/papers?{years}")).await;
    let (_, all) = get_json(&app, &format!("/api/papers?{q}&{tags}&{years}")).await;
    let expected: BTreeSet<u64> = ids(&a).intersection(&ids(&b)).copied().collect::<BTreeSet<_>>()
        .intersection(&ids(&c)).copied().collect();
    assert_eq!(ids(&all), expected);
    assert_eq!(expected.len(), 2);
    let (_, t) = get_json(&app, &format!("/api/timeline?{q}&{tags}&{years}")).await;
    // Years inside the requested range are filled with zeros.
    assert_eq!(
        t["series"],
        json!([{"count": 0, "year": 2019}, {"count": 2, "year": 2020}, {"count": 0, "year": 2021}])
    );
}

#[tokio::test]
async fn network_edges_grow_with_threshold() {
    let app = app();
    let mut previous: BTreeSet<(u64, u64)> = BTreeSet::new();
    for t in ["0.15", "0.25", "0.35"] {
        let (s, v) = get_json(&app, &format!("/api/network?threshold={t}")).await;
        assert_eq!(s, StatusCode::OK);
        let edges: BTreeSet<(u64, u64)> = v["edges"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| (e["from"].as_u64().unwrap(), e["to"].as_u64().unwrap()))
            .collect();
        assert!(previous.is_subset(&edges), "{t}");
        previous = edges;
    }
    assert_eq!(previous.len(), 4);
    let (s, v) = get_json(&app, "/api/network?threshold=0.3").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["detail"].as_str().unwrap().starts_with("threshold"));
}

#[tokio::test]
async fn insights_list_empty_classes() {
    let (_, v) = get_json(&app(), "/api/insights").await;
    assert_eq!(v["no_papers_yet"], json!(["Scope > Wide"]));
    assert_eq!(v["distinct_profiles"], 4);
    let snap = snapshot();
    assert_eq!(v["unwritten_papers"], snap.model_count.to_string());
}

#[tokio::test]
async fn repeated_requests_are_byte_identical() {
    let app = app();
    for uri in ["/api/survey", "/api/papers", "/api/taxonomy", "/api/affinity", "/api/insights", "/api/count", "/api/network"] {
        let a = call(&app, "GET", uri, "").await;
        let b = call(&app, "GET", uri, "").await;
        assert_eq!(a, b, "{uri}");
    }
    let a = call(&app, "POST", "/api/recommend", r#"{"k":2}"#).await;
    let b = call(&app, "POST", "/api/recommend", r#"{"k":2}"#).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn recommend_matches_the_shared_view() {
    let snap = snapshot();
    let req = views::RecommendRequest { k: 3, ..Default::default() };
    let direct = views::to_json(&views::recommend(&snap, &req, None).unwrap());
    let (s, body) = call(&app(), "POST", "/api/recommend", r#"{"k":3}"#).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body, direct);
    let v: Value = serde_json::from_str(&body).unwrap();
    let recs = v["recommendations"].as_array().unwrap();
    assert_eq!(recs.len(), 3);
    assert!(recs.iter().all(|r| r["coordinates"]["x"].is_number()));
    assert!(recs.iter().all(|r| r["neighbors"].as_array().unwrap().len() <= 3));
}

#[tokio::test]
async fn exhausted_theory_is_not_an_error() {
    let snap = snapshot();
    let total: usize = snap.model_count.to_string().parse().unwrap();
    let (s, v) = post_json(&app(), "/api/recommend", &format!(r#"{{"k":{}}}"#, total + 2)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["exhausted"], true);
    assert_eq!(v["recommendations"].as_array().unwrap().len(), total);
}

#[tokio::test]
async fn recommend_rejects_bad_bodies() {
    let app = app();
    let (s, v) = post_json(&app, "/api/recommend", "{not json").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["detail"].as_str().unwrap().starts_with("body"));
    let (s, v) = post_json(&app, "/api/recommend", r#"{"k":0}"#).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["detail"].as_str().unwrap().starts_with("k"));
    let (s, v) = post_json(&app, "/api/recommend", r#"{"focus":["Scope > Huge"]}"#).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["detail"].as_str().unwrap().starts_with("focus"));
    let (s, v) = post_json(&app, "/api/recommend", r#"{"k":1,"preferences":["Cost","Cost"]}"#).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["detail"].as_str().unwrap().starts_with("preferences"));
}

#[tokio::test]
async fn focus_and_preferences_shape_the_result() {
    let (s, v) = post_json(
        &app(),
        "/api/recommend",
        r#"{"k":1,"focus":["Scope > Wide"],"preferences":["Cost","~Trace > Full"]}"#,
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let profile = v["recommendations"][0]["profile"].as_array().unwrap();
    assert!(profile.contains(&json!("Scope > Wide")));
    assert!(profile.contains(&json!("Cost")));
    assert!(!profile.contains(&json!("Trace > Full")));
}

#[tokio::test]
async fn recommend_over_the_time_cap_is_a_capacity_error() {
    let app = app_with(ServerOptions { recommend_timeout: Duration::ZERO, ..Default::default() });
    let (s, v) = post_json(&app, "/api/recommend", r#"{"k":1}"#).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(v["error"], "capacity");
}

#[tokio::test]
async fn validate_reports_directive_lines() {
    let app = app();
    let (s, v) = post_json(&app, "/api/validate", "").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["violation_count"], 0);
    let body = json!({"constraints": "# exploratory\nimplies:Trace > Full,Scope > Wide\n"}).to_string();
    let (s, v) = post_json(&app, "/api/validate", &body).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["violation_count"], 2);
    assert_eq!(v["violations"][0]["sources"][0]["kind"], "directive");
    assert_eq!(v["violations"][0]["sources"][0]["line"], 2);
    let (s, _) = post_json(&app, "/api/validate", r#"{"constraints":"bogus:Trace"}"#).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn affinity_points_and_summary() {
    let app = app();
    let (_, v) = get_json(&app, "/api/affinity").await;
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 4);
    let all: Vec<u64> = points.iter().map(|p| p["paper_id"].as_u64().unwrap()).collect();
    let (s, v) = post_json(&app, "/api/affinity/summary", &json!({"paper_ids": all}).to_string()).await;
    assert_eq!(s, StatusCode::OK);
    // Corpus-wide counts: Scope > Narrow 3, Cost 2, Trace > Full 2, Trace > Partial 2.
    assert_eq!(v["tags"][0], json!({"classpath": "Scope > Narrow", "count": 3}));
    assert_eq!(v["tags"].as_array().unwrap().len(), 4);
    let (_, v) = post_json(&app, "/api/affinity/summary", r#"{"paper_ids":[]}"#).await;
    assert_eq!(v["tags"], json!([]));
    let (s, _) = post_json(&app, "/api/affinity/summary", r#"{"paper_ids":[4242]}"#).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn reload_swaps_the_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("snap");
    snapshot().save(&dir).unwrap();
    let app = router(AppState::new(
        Snapshot::load(&dir).unwrap(),
        ServerOptions { snapshot_dir: Some(dir.clone()), ..Default::default() },
    ))
    .unwrap();
    Snapshot::build(&inputs(true)).unwrap().0.save(&dir).unwrap();
    let (s, v) = post_json(&app, "/api/admin/reload", "").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["paper_count"], 5);
    let (_, v) = get_json(&app, "/api/survey").await;
    assert_eq!(v["paper_count"], 5);

    std::fs::remove_file(dir.join("corpus.json")).unwrap();
    let (s, v) = post_json(&app, "/api/admin/reload", "").await;
    assert_eq!(s, StatusCode::INTERNAL_SERVER_ERROR);
    assert_eq!(v["error"], "reload_failed");
    let (_, v) = get_json(&app, "/api/survey").await;
    assert_eq!(v["paper_count"], 5);
}

#[tokio::test]
async fn static_bundle_and_cors() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("index.html"), "<html>ui</html>").unwrap();
    let app = app_with(ServerOptions {
        static_dir: Some(tmp.path().to_path_buf()),
        cors_origin: Some("http://localhost:5173".into()),
        ..Default::default()
    });
    let (s, body) = call(&app, "GET", "/", "").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body, "<html>ui</html>");
    let (s, _) = get_json(&app, "/api/missing").await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let req = Request::builder()
        .uri("/api/survey")
        .header("origin", "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let res = app.oneshot(req).await.unwrap();
    assert_eq!(
        res.headers().get("access-control-allow-origin").unwrap(),
        "http://localhost:5173"
    );
}

#[test]
fn bad_cors_origin_is_rejected() {
    let state = AppState::new(snapshot(), ServerOptions { cors_origin: Some("bad\norigin".into()), ..Default::default() });
    assert!(router(state).is_err());
}
