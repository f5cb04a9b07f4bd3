use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use turtle_synth::engine::{self, SynthesisRequest, SynthesisResponse};
use turtle_synth::CommandModel;
use turtle_synth_service::{router, JobStatus, JobView, ServiceConfig};

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn wait_for(app: &Router, job_id: &str) -> JobView {
    for _ in 0..600 {
        let (status, body) = call(app, "GET", &format!("/api/jobs/{job_id}"), None).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        let view: JobView = serde_json::from_value(body).unwrap();
        if matches!(view.status, JobStatus::Done | JobStatus::Failed) {
            return view;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("job {job_id} did not finish");
}

fn square_stroke() -> Vec<[f64; 2]> {
    let corners = [[0.0, 0.0], [0.0, 50.0], [50.0, 50.0], [50.0, 0.0], [0.0, 0.0]];
    let mut pts = Vec::new();
    for w in corners.windows(2) {
        for i in 0..10 {
            let t = i as f64 / 10.0;
            pts.push([w[0][0] + (w[1][0] - w[0][0]) * t, w[0][1] + (w[1][1] - w[0][1]) * t]);
        }
    }
    pts.push([0.0, 0.0]);
    pts
}

fn square_request(algorithm: &str) -> Value {
    json!({
        "commands": ["get repeat", "change 2 in 1 to 4", "get move", "connect 2 inside 1"],
        "trajectory": square_stroke(),
        "algorithm": algorithm,
        "budget": 20000,
        "cost": 4,
        "seed": 7,
    })
}

fn without_timing(mut r: SynthesisResponse) -> SynthesisResponse {
    r.elapsed = 0.0;
    r
}

#[tokio::test]
async fn health_reports_ok() {
    let app = router(ServiceConfig::default());
    let (status, body) = call(&app, "GET", "/api/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn interpret_returns_points_and_structure() {
    let app = router(ServiceConfig::default());
    let commands = [
        "get repeat",
        "get move",
        "connect 2 inside 1",
        "get turn",
        "change 30 in 3 to 120",
        "connect 3 under 2",
    ];
    let (status, body) = call(&app, "POST", "/api/interpret", Some(json!({ "commands": commands }))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let points = body["trajectory"].as_array().unwrap();
    assert_eq!(points.len(), 21);
    assert_eq!(points[0], json!([0.0, 0.0]));
    let tree = &body["workspace"][0][0];
    assert_eq!(tree["type"], "repeat");
    assert_eq!(tree["body"][1]["value"], 120);
}

#[tokio::test]
async fn interpret_of_empty_program_is_the_origin() {
    let app = router(ServiceConfig::default());
    let (status, body) = call(&app, "POST", "/api/interpret", Some(json!({ "commands": [] }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["trajectory"], json!([[0.0, 0.0]]));
}

#[tokio::test]
async fn interpret_rejects_infeasible_command_with_its_index() {
    let app = router(ServiceConfig::default());
    let body = json!({ "commands": ["get move", "get turn", "connect 1 inside 2"] });
    let (status, body) = call(&app, "POST", "/api/interpret", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["index"], 2);
}

#[tokio::test]
async fn malformed_bodies_are_bad_requests() {
    let app = router(ServiceConfig::default());
    let (status, _) = call(&app, "POST", "/api/synthesize", Some(json!({ "commands": [] }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let mut req = square_request("idps");
    req["trajectory"] = json!([]);
    let (status, _) = call(&app, "POST", "/api/synthesize", Some(req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let mut req = square_request("idps");
    req["commands"] = json!(["get move", "frobnicate 3"]);
    let (status, body) = call(&app, "POST", "/api/synthesize", Some(req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["index"], 1);
}

#[tokio::test]
async fn limits_are_unprocessable() {
    let app = router(ServiceConfig {
        max_budget: 1000,
        max_cost: 3,
        ..ServiceConfig::default()
    });
    let (status, _) = call(&app, "POST", "/api/synthesize", Some(square_request("idps"))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn idps_job_returns_the_improving_sequence() {
    let app = router(ServiceConfig::default());
    let (status, body) = call(&app, "POST", "/api/synthesize", Some(square_request("idps"))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let view = wait_for(&app, body["job_id"].as_str().unwrap()).await;
    assert_eq!(view.status, JobStatus::Done);
    let result = view.result.unwrap();
    assert!(result.candidates.len() >= 2);
    assert!(result.candidates[0].delta.is_empty());
    assert!(result.candidates.windows(2).all(|w| w[1].distance < w[0].distance));
    assert_eq!(result.candidates.last().unwrap().distance, 0.0);

    let req: SynthesisRequest = serde_json::from_value(square_request("idps")).unwrap();
    engine::verify_response(&req, &result).unwrap();
    let direct = engine::handle_synthesize(&req, &CommandModel::default(), 1).unwrap();
    assert_eq!(without_timing(result), without_timing(direct));
}

#[tokio::test]
async fn sampling_job_returns_only_the_incumbent_and_is_deterministic() {
    let app = router(ServiceConfig::default());
    let mut results = Vec::new();
    for _ in 0..2 {
        let (_, body) = call(&app, "POST", "/api/synthesize", Some(square_request("nonuniform"))).await;
        let view = wait_for(&app, body["job_id"].as_str().unwrap()).await;
        results.push(without_timing(view.result.unwrap()));
    }
    assert_eq!(results[0].candidates.len(), 1);
    assert_eq!(results[0], results[1]);
}

#[tokio::test]
async fn sampling_below_one_round_echoes_the_program() {
    let app = router(ServiceConfig::default());
    let mut req = square_request("uniform");
    req["budget"] = json!(3);
    let (_, body) = call(&app, "POST", "/api/synthesize", Some(req)).await;
    let result = wait_for(&app, body["job_id"].as_str().unwrap()).await.result.unwrap();
    assert_eq!(result.candidates.len(), 1);
    assert!(result.candidates[0].delta.is_empty());
    assert_eq!(result.states, 0);
}

#[tokio::test]
async fn jobs_expire() {
    let app = router(ServiceConfig {
        job_ttl: Duration::from_millis(200),
        ..ServiceConfig::default()
    });
    let mut req = square_request("uniform");
    req["budget"] = json!(12);
    let (_, body) = call(&app, "POST", "/api/synthesize", Some(req)).await;
    let id = body["job_id"].as_str().unwrap().to_string();
    wait_for(&app, &id).await;
    tokio::time::sleep(Duration::from_millis(300)).await;
    let (status, _) = call(&app, "GET", &format!("/api/jobs/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn cors_preflight_is_answered() {
    let app = router(ServiceConfig {
        allowed_origins: Some(vec!["http://localhost:5173".into()]),
        ..ServiceConfig::default()
    });
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/api/synthesize")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(
        resp.headers().get("access-control-allow-origin").unwrap(),
        "http://localhost:5173"
    );
}
