use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use gainpdf::io::to_json_string;
use gainpdf::synth::{default_profiles, generate};
use gainpdf::workflow::{run_frontier, Dataset, ProblemConfig};
use gainpdf_service::{router, AppState};

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn small_session() -> Value {
    json!({"synth": {"assets": 4, "scenarios": 40, "seed": 11}, "budget": 60.0})
}

async fn session(app: &Router) -> String {
    let (st, body) = call(app, "POST", "/sessions", Some(small_session())).await;
    assert_eq!(st, StatusCode::CREATED, "{body}");
    let v: Value = serde_json::from_str(&body).unwrap();
    v["session_id"].as_str().unwrap().to_string()
}

async fn wait(app: &Router, job: &str) -> Value {
    for _ in 0..600 {
        let (st, body) = call(app, "GET", &format!("/jobs/{job}"), None).await;
        assert_eq!(st, StatusCode::OK);
        let v: Value = serde_json::from_str(&body).unwrap();
        if v["status"] == "done" || v["status"] == "failed" {
            return v;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("job {job} did not finish");
}

#[tokio::test(flavor = "multi_thread")]
async fn unknown_ids_are_404() {
    let app = router(AppState::new());
    let (st, body) = call(&app, "POST", "/sessions/nope/frontier", Some(json!({"a_values": [0.5]}))).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert!(body.contains("not_found"));
    assert_eq!(call(&app, "GET", "/jobs/job99", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/sessions/s7/pdf?a=0.5", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn bad_payloads_are_400() {
    let app = router(AppState::new());
    let (st, _) = call(&app, "POST", "/sessions", Some(json!({"synth": {"scenarios": 1}}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = call(&app, "POST", "/sessions", Some(json!({"bogus": 1}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let id = session(&app).await;
    let (st, _) = call(&app, "POST", &format!("/sessions/{id}/frontier"), Some(json!({"a_values": []}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = call(&app, "POST", &format!("/sessions/{id}/marginal"), Some(json!({"a": 0.5}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread")]
async fn over_capacity_budget_is_409() {
    let app = router(AppState::new());
    let mut req = small_session();
    req["budget"] = json!(500.0);
    let (_, body) = call(&app, "POST", "/sessions", Some(req)).await;
    let id = serde_json::from_str::<Value>(&body).unwrap()["session_id"].as_str().unwrap().to_string();
    let (st, body) = call(&app, "POST", &format!("/sessions/{id}/frontier"), Some(json!({"a_values": [0.5]}))).await;
    assert_eq!(st, StatusCode::CONFLICT, "{body}");
    assert!(body.contains("infeasible"));
}

#[tokio::test(flavor = "multi_thread")]
async fn frontier_equals_library_bytes() {
    let app = router(AppState::new());
    let id = session(&app).await;
    let (st, body) = call(&app, "POST", &format!("/sessions/{id}/frontier"), Some(json!({"a_values": [0.0, 0.5, 1.0]}))).await;
    assert_eq!(st, StatusCode::OK, "{body}");
    let (y, cs) = generate::<f64>(&default_profiles(4), 40, 11).unwrap();
    let cfg = ProblemConfig {
        budget: 60.0,
        ..Default::default()
    };
    let direct = run_frontier(&cfg, &Dataset::new(y, cs).unwrap(), &[0.0, 0.5, 1.0]).unwrap();
    assert_eq!(body, to_json_string(&direct).unwrap());
}

#[tokio::test(flavor = "multi_thread")]
async fn pdf_of_cached_optimum() {
    let app = router(AppState::new());
    let id = session(&app).await;
    let (st, first) = call(&app, "GET", &format!("/sessions/{id}/pdf?a=0.5&kernel=triangular"), None).await;
    assert_eq!(st, StatusCode::OK, "{first}");
    let pdf: gainpdf::GainPdf64 = serde_json::from_str(&first).unwrap();
    assert!((pdf.integral() - 1.0).abs() < 1e-6);
    let (_, second) = call(&app, "GET", &format!("/sessions/{id}/pdf?a=0.5&kernel=triangular"), None).await;
    assert_eq!(first, second);
}

#[tokio::test(flavor = "multi_thread")]
async fn identity_match_job_has_zero_discrepancy() {
    let app = router(AppState::new());
    let id = session(&app).await;
    let (st, body) = call(&app, "POST", &format!("/sessions/{id}/match"), Some(json!({"boost": {"gamma": 1.0}}))).await;
    assert_eq!(st, StatusCode::ACCEPTED, "{body}");
    let job = serde_json::from_str::<Value>(&body).unwrap()["job_id"].as_str().unwrap().to_string();
    let v = wait(&app, &job).await;
    assert_eq!(v["status"], "done", "{v}");
    let d = v["result"]["report"]["discrepancy"].as_f64().unwrap();
    assert!(d.abs() < 1e-12);
    let orig = v["result"]["portfolio"]["original"].as_array().unwrap();
    let matched = v["result"]["portfolio"]["matched"].as_array().unwrap();
    for (a, b) in orig.iter().zip(matched) {
        assert!((a.as_f64().unwrap() - b.as_f64().unwrap()).abs() < 1e-9);
    }
    assert!(v["result"]["pdfs_csv"].as_str().unwrap().starts_with("v,original,target,matched\n"));
}

#[tokio::test(flavor = "multi_thread")]
async fn failed_job_reports_error() {
    let app = router(AppState::new());
    let id = session(&app).await;
    let (_, body) = call(&app, "POST", &format!("/sessions/{id}/match"), Some(json!({"init_portfolio": [0.5, 0.5, 0.5, 0.5]}))).await;
    let job = serde_json::from_str::<Value>(&body).unwrap()["job_id"].as_str().unwrap().to_string();
    let v = wait(&app, &job).await;
    assert_eq!(v["status"], "failed");
    assert_eq!(v["error_status"], 400);
}

#[tokio::test(flavor = "multi_thread")]
async fn marginal_identity_and_landscape_job() {
    let app = router(AppState::new());
    let id = session(&app).await;
    let (_, body) = call(&app, "POST", &format!("/sessions/{id}/marginal"), Some(json!({"a": 0.5, "delta_a": 0.0}))).await;
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["delta_b"].as_f64(), Some(0.0), "{v}");

    let (st, body) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/landscape"),
        Some(json!({"b_values": [50.0, 55.0, 60.0, 65.0, 70.0], "a_values": [0.25, 0.5, 0.75]})),
    )
    .await;
    assert_eq!(st, StatusCode::ACCEPTED);
    let job = serde_json::from_str::<Value>(&body).unwrap()["job_id"].as_str().unwrap().to_string();
    let v = wait(&app, &job).await;
    assert_eq!(v["status"], "done", "{v}");
    let f = v["result"]["grid"]["f"].as_array().unwrap();
    assert_eq!((f.len(), f[0].as_array().unwrap().len()), (5, 3));
    assert_eq!(v["result"]["csv"].as_str().unwrap().lines().count(), 16);
    let iso = &v["result"]["iso"];
    assert_eq!(iso["baseline"], json!([60.0, 0.5]));
    let on_baseline = iso["points"]
        .as_array()
        .unwrap()
        .iter()
        .any(|p| p["a"] == 0.5 && (p["b"].as_f64().unwrap() - 60.0).abs() < 1e-9);
    assert!(on_baseline, "{iso}");
}
