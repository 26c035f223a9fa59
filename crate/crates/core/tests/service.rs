use std::time::Duration;

use axum::body::{to_bytes, Body};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use psps::case_io::write_network_json;
use psps::network::tri3;
use psps::service::{router, AppState, ServiceConfig};
use psps::solver::SolverOptions;
use serde_json::{json, Value};
use tower::ServiceExt;

fn config(dir: &std::path::Path) -> ServiceConfig {
    ServiceConfig {
        data_dir: dir.to_path_buf(),
        workers: 2,
        static_dir: None,
        solver: SolverOptions::default(),
    }
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, Body::from))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = to_bytes(response.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    (status, value)
}

async fn upload_tri3(app: &Router) -> String {
    let (status, body) = call(app, Method::POST, "/api/cases", Some(write_network_json(&tri3()))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_string()
}

async fn wait(app: &Router, id: &str) -> Value {
    for _ in 0..500 {
        let (status, job) = call(app, Method::GET, &format!("/api/jobs/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        if !matches!(job["state"].as_str(), Some("queued" | "running")) {
            return job;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    panic!("job {id} did not finish");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn solve_job_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::open(config(dir.path())).unwrap());
    let case_id = upload_tri3(&app).await;

    let (status, cases) = call(&app, Method::GET, "/api/cases", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(cases[0]["lines"], 3);

    let submit = json!({"kind": "solve_scops", "case_id": case_id, "params": {"alpha": 1.0, "beta": 0.7}});
    let (status, job) = call(&app, Method::POST, "/api/jobs", Some(submit.to_string())).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{job}");
    let id = job["id"].as_str().unwrap().to_string();

    let job = wait(&app, &id).await;
    assert_eq!(job["state"], "done", "{job}");
    let (status, result) = call(&app, Method::GET, &format!("/api/jobs/{id}/result"), None).await;
    assert_eq!(status, StatusCode::OK);
    let risk = result["plan"]["summary"]["active_risk"].as_f64().unwrap();
    assert!((risk - 0.9167).abs() < 1e-4, "{risk}");

    // Byte-identical to the CLI's output for the same inputs.
    let case = dir.path().join("tri3.json");
    std::fs::write(&case, write_network_json(&tri3())).unwrap();
    let cli_out = dir.path().join("cli.json");
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_psps"))
        .args(["solve", "--problem", "scops", "--alpha", "1", "--beta", "0.7", "--case"])
        .arg(&case)
        .arg("--out")
        .arg(&cli_out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let response = app
        .clone()
        .oneshot(Request::builder().uri(format!("/api/jobs/{id}/result")).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let raw = to_bytes(response.into_body(), usize::MAX).await.unwrap();
    assert_eq!(&raw[..], &std::fs::read(&cli_out).unwrap()[..]);

    // Same request, same job.
    let (_, again) = call(&app, Method::POST, "/api/jobs", Some(submit.to_string())).await;
    assert_eq!(again["id"], id.as_str());

    // A fresh service over the same directory still knows the result.
    let app = router(AppState::open(config(dir.path())).unwrap());
    let (status, _) = call(&app, Method::GET, &format!("/api/cases/{case_id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let (status, reloaded) = call(&app, Method::GET, &format!("/api/jobs/{id}/result"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(reloaded, result);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn request_errors() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::open(config(dir.path())).unwrap());
    let case_id = upload_tri3(&app).await;

    let bad = json!({"kind": "solve_scops", "case_id": case_id, "params": {"alpha": 1.5, "beta": 0.7}});
    let (status, body) = call(&app, Method::POST, "/api/jobs", Some(bad.to_string())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "bad_request");
    assert!(body["message"].as_str().unwrap().contains("alpha"));

    let unknown = json!({"kind": "solve_ops", "case_id": "nope", "params": {"alpha": 1.0}});
    let (status, body) = call(&app, Method::POST, "/api/jobs", Some(unknown.to_string())).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "not_found");

    let (status, _) = call(&app, Method::POST, "/api/jobs", Some("{".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, Method::POST, "/api/cases", Some("{\"format_version\": 1}".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, Method::GET, "/api/jobs/missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, Method::GET, "/api/nothing/here", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn result_before_done_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.workers = 1;
    let app = router(AppState::open(cfg).unwrap());
    let case_id = upload_tri3(&app).await;

    // Occupy the only worker with a time-limited case39 solve, then queue a
    // small solve behind it.
    let mut big = psps::case_io::read_case(include_str!("data/case39.m")).unwrap();
    psps::case_io::generate_risk(&big, 42).apply(&mut big).unwrap();
    let (_, big_case) = call(&app, Method::POST, "/api/cases", Some(write_network_json(&big))).await;
    let blocker = json!({"kind": "solve_scops", "case_id": big_case["id"],
        "params": {"alpha": 0.95, "beta": 0.1, "pflex": 0.05, "max_contingencies": 2, "time_limit": 1.5}});
    let (_, blocker) = call(&app, Method::POST, "/api/jobs", Some(blocker.to_string())).await;
    let solve = json!({"kind": "solve_ops", "case_id": case_id, "params": {"alpha": 0.9}});
    let (_, job) = call(&app, Method::POST, "/api/jobs", Some(solve.to_string())).await;
    let id = job["id"].as_str().unwrap();
    assert_eq!(job["state"], "queued");
    let (status, body) = call(&app, Method::GET, &format!("/api/jobs/{id}/result"), None).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");

    wait(&app, blocker["id"].as_str().unwrap()).await;
    assert_eq!(wait(&app, id).await["state"], "done");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn sweep_job_reports_progress() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::open(config(dir.path())).unwrap());
    let case_id = upload_tri3(&app).await;
    let sweep = json!({"kind": "sweep", "case_id": case_id,
        "params": {"alpha_grid": [0.5, 1.0], "beta_grid": [0.0, 0.7, 1.0], "pflex": 1.0}});
    let (_, job) = call(&app, Method::POST, "/api/jobs", Some(sweep.to_string())).await;
    let job = wait(&app, job["id"].as_str().unwrap()).await;
    assert_eq!(job["state"], "done");
    assert_eq!(job["progress"], 1.0);
    let (_, result) = call(&app, Method::GET, &format!("/api/jobs/{}/result", job["id"].as_str().unwrap()), None).await;
    assert_eq!(result["cells"][1][1]["objective"], 1.1);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn infeasible_and_evaluate_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::open(config(dir.path())).unwrap());
    let mut net = tri3();
    net.generators[0].p_max = 0.5;
    let (_, case) = call(&app, Method::POST, "/api/cases", Some(write_network_json(&net))).await;
    let submit = json!({"kind": "solve_ops", "case_id": case["id"], "params": {"alpha": 1.0}});
    let (_, job) = call(&app, Method::POST, "/api/jobs", Some(submit.to_string())).await;
    let job = wait(&app, job["id"].as_str().unwrap()).await;
    assert_eq!(job["state"], "infeasible");

    let case_id = upload_tri3(&app).await;
    let submit = json!({"kind": "solve_ops", "case_id": case_id, "params": {"alpha": 1.0}});
    let (_, job) = call(&app, Method::POST, "/api/jobs", Some(submit.to_string())).await;
    let id = job["id"].as_str().unwrap();
    wait(&app, id).await;
    let (_, outcome) = call(&app, Method::GET, &format!("/api/jobs/{id}/result"), None).await;
    let evaluate = json!({"kind": "evaluate", "case_id": case_id, "params": {"plan": outcome["plan"], "pflex": 1.0}});
    let (status, job) = call(&app, Method::POST, "/api/jobs", Some(evaluate.to_string())).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{job}");
    let id = job["id"].as_str().unwrap();
    wait(&app, id).await;
    let (_, report) = call(&app, Method::GET, &format!("/api/jobs/{id}/result"), None).await;
    assert!((report["worst_case"]["gamma"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn static_files_are_served() {
    let dir = tempfile::tempdir().unwrap();
    let web = tempfile::tempdir().unwrap();
    std::fs::write(web.path().join("index.html"), "<html>psps</html>").unwrap();
    let mut cfg = config(dir.path());
    cfg.static_dir = Some(web.path().to_path_buf());
    let app = router(AppState::open(cfg).unwrap());
    let response = app
        .oneshot(Request::builder().uri("/index.html").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(response.status(), StatusCode::OK);
    let bytes = to_bytes(response.into_body(), usize::MAX).await.unwrap();
    assert_eq!(&bytes[..], b"<html>psps</html>");
}
