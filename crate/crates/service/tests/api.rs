use std::path::{Path, PathBuf};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use scenesmith_core::llm::{BackendConfig, Cassette};
use scenesmith_core::planner::{NonInteractive, Planner, PlannerOptions};
use scenesmith_core::retrieval::MockEmbedder;
use scenesmith_core::Registry;
use scenesmith_service::{router, AppState, ServiceConfig};

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn cassette(name: &str) -> PathBuf {
    repo().join("transcripts").join(name)
}

fn config(data_dir: Option<&Path>) -> ServiceConfig {
    ServiceConfig {
        registry: Registry::load_dir(&repo().join("registry")).unwrap(),
        embedder: Box::new(MockEmbedder::default()),
        backend: BackendConfig::replay(cassette("pine_forest.json")),
        options: PlannerOptions { seed: 42, ..PlannerOptions::default() },
        data_dir: data_dir.map(Path::to_path_buf),
        static_dir: None,
        clarification_timeout: Duration::from_secs(60),
    }
}

fn app(cfg: ServiceConfig) -> Router {
    router(AppState::new(cfg).unwrap())
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value, String) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req.header("content-type", "application/json").body(Body::from(v.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    (status, serde_json::from_str(&text).unwrap_or(Value::Null), text)
}

async fn create(app: &Router, body: Option<Value>) -> String {
    let (status, v, _) = call(app, Method::POST, "/sessions", body).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

async fn instruct(app: &Router, session: &str, text: &str) -> (StatusCode, Value) {
    let (s, v, _) = call(app, Method::POST, &format!("/sessions/{session}/instruct"), Some(json!({"text": text}))).await;
    (s, v)
}

/// Polls a job until it leaves `running`.
async fn settle(app: &Router, job: &str) -> Value {
    for _ in 0..500 {
        let (status, v, _) = call(app, Method::GET, &format!("/jobs/{job}"), None).await;
        assert_eq!(status, StatusCode::OK);
        if v["status"] != "running" {
            return v;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("job {job} never settled");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn instruct_produces_the_same_scene_as_a_direct_run() {
    let app = app(config(None));
    let id = create(&app, None).await;
    let (status, job) = instruct(&app, &id, "a pine forest by a lake").await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(job["status"], "running");
    let done = settle(&app, job["id"].as_str().unwrap()).await;
    assert_eq!(done["status"], "succeeded", "{done}");
    assert_eq!(done["executed_count"], done["total"]);

    let (status, scene, scene_text) = call(&app, Method::GET, &format!("/sessions/{id}/scene"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(!scene["instances"].as_array().unwrap().is_empty());

    let registry = Registry::load_dir(&repo().join("registry")).unwrap();
    let llm = BackendConfig::replay(cassette("pine_forest.json")).build().unwrap();
    let embedder = MockEmbedder::default();
    let direct = Planner::new(&registry, llm.as_ref(), &embedder, PlannerOptions { seed: 42, ..PlannerOptions::default() })
        .unwrap()
        .generate("a pine forest by a lake", &mut NonInteractive)
        .unwrap();
    assert_eq!(scene_text, direct.scene.to_json());
    let (_, _, plan_text) = call(&app, Method::GET, &format!("/sessions/{id}/plan"), None).await;
    assert_eq!(plan_text, direct.plan.to_json());
    let (_, _, report_text) = call(&app, Method::GET, &format!("/sessions/{id}/report"), None).await;
    assert_eq!(report_text, direct.report.run.to_json());
    let (_, trace, _) = call(&app, Method::GET, &format!("/sessions/{id}/trace"), None).await;
    assert_eq!(trace["planner"]["end_flag"], true);

    let (_, summary, _) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(summary["busy"], false);
    assert_eq!(summary["plan_count"], 1);
    assert_eq!(summary["instance_count"], scene["instances"].as_array().unwrap().len());
    let (_, list, _) = call(&app, Method::GET, "/sessions", None).await;
    assert_eq!(list.as_array().unwrap().len(), 1);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn clarification_pauses_the_run_until_answered() {
    let app = app(config(None));
    let backend = serde_json::to_value(BackendConfig::replay(cassette("eval/village_well.json"))).unwrap();
    let id = create(&app, Some(json!({"backend": backend, "seed": 0}))).await;
    let (_, job) = instruct(&app, &id, "a village of cottages around a stone well").await;
    let job_id = job["id"].as_str().unwrap().to_string();
    let paused = settle(&app, &job_id).await;
    assert_eq!(paused["status"], "awaiting_clarification");
    assert_eq!(paused["clarification"]["missing"], json!(["style"]));

    let (status, pending, _) = call(&app, Method::GET, &format!("/sessions/{id}/clarification"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(pending["plugin"], "building");

    let (status, busy) = instruct(&app, &id, "something else").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(busy["error"], "Busy");

    let (_, scene, _) = call(&app, Method::GET, &format!("/sessions/{id}/scene"), None).await;
    assert!(scene["instances"].as_array().unwrap().is_empty(), "no partial scene while paused");

    let uri = format!("/sessions/{id}/clarify");
    let (status, err, _) = call(&app, Method::POST, &uri, Some(json!({"answers": {"colour": "red"}}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["missing"], json!(["style"]));

    let (status, resumed, _) = call(&app, Method::POST, &uri, Some(json!({"answers": {"style": "victorian"}}))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(resumed["id"], job_id.as_str());
    let done = settle(&app, &job_id).await;
    assert_eq!(done["status"], "succeeded", "{done}");

    let (_, plan, _) = call(&app, Method::GET, &format!("/sessions/{id}/plan"), None).await;
    let styles: Vec<&Value> = plan["actions"].as_array().unwrap().iter().filter_map(|a| a["params"].get("style")).collect();
    assert_eq!(styles, [&json!("victorian")]);
    let (_, scene, _) = call(&app, Method::GET, &format!("/sessions/{id}/scene"), None).await;
    let houses = scene["instances"].as_array().unwrap().iter().filter(|i| i["tags"].as_array().unwrap().contains(&json!("object:house"))).count();
    assert_eq!(houses, 8);
    let (status, _, _) = call(&app, Method::POST, &uri, Some(json!({"answers": {"style": "modern"}}))).await;
    assert_eq!(status, StatusCode::CONFLICT, "nothing left to clarify");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn follow_up_instructions_edit_the_scene() {
    let dir = tempfile::tempdir().unwrap();
    let mut merged = Cassette::load(&cassette("pine_forest.json")).unwrap();
    merged.entries.extend(Cassette::load(&cassette("add_rocks.json")).unwrap().entries);
    let path = dir.path().join("session.json");
    merged.save(&path).unwrap();

    let app = app(config(None));
    let backend = serde_json::to_value(BackendConfig::replay(path)).unwrap();
    let id = create(&app, Some(json!({"backend": backend}))).await;
    let (_, job) = instruct(&app, &id, "a pine forest by a lake").await;
    assert_eq!(settle(&app, job["id"].as_str().unwrap()).await["status"], "succeeded");
    let (_, before, _) = call(&app, Method::GET, &format!("/sessions/{id}/scene"), None).await;

    let (_, job) = instruct(&app, &id, "add 10 rocks near the lake").await;
    assert_eq!(settle(&app, job["id"].as_str().unwrap()).await["status"], "succeeded");
    let (_, after, _) = call(&app, Method::GET, &format!("/sessions/{id}/scene"), None).await;
    let (b, a) = (before["instances"].as_array().unwrap(), after["instances"].as_array().unwrap());
    assert_eq!(a.len(), b.len() + 10);
    assert_eq!(&a[..b.len()], &b[..]);

    let (_, plans, _) = call(&app, Method::GET, &format!("/sessions/{id}/plans"), None).await;
    assert_eq!(plans.as_array().unwrap().len(), 2);
    let (_, plan, _) = call(&app, Method::GET, &format!("/sessions/{id}/plan"), None).await;
    assert!(plan["actions"].as_array().unwrap().iter().all(|a| a["id"].as_str().unwrap().starts_with("e1.")));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn failed_runs_leave_the_scene_untouched() {
    let app = app(config(None));
    let backend = serde_json::to_value(BackendConfig::replay(cassette("eval/crystal_cave.json"))).unwrap();
    let id = create(&app, Some(json!({"backend": backend}))).await;
    let (_, job) = instruct(&app, &id, "a glowing crystal cave").await;
    let done = settle(&app, job["id"].as_str().unwrap()).await;
    assert_eq!(done["status"], "failed");
    assert!(done["error"].as_str().unwrap().contains("decomposition"), "{done}");
    let (_, summary, _) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(summary["busy"], false);
    assert_eq!(summary["instance_count"], 0);
    let (status, err, _) = call(&app, Method::GET, &format!("/sessions/{id}/plan"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"], "NotReady");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn error_statuses() {
    let app = app(config(None));
    for uri in ["/sessions/nope", "/sessions/nope/scene", "/sessions/nope/plan", "/sessions/nope/report", "/jobs/job-99"] {
        let (status, _, _) = call(&app, Method::GET, uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
    }
    let (status, _) = instruct(&app, "nope", "x").await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let id = create(&app, None).await;
    let uri = format!("/sessions/{id}/instruct");
    for bad in [json!({}), json!({"txt": "a"}), json!({"text": 3}), json!({"text": "  "})] {
        let (status, err, _) = call(&app, Method::POST, &uri, Some(bad.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
        assert_eq!(err["error"], "MalformedBody");
    }
    let req = Request::post(&uri).header("content-type", "application/json").body(Body::from("{oops")).unwrap();
    assert_eq!(app.clone().oneshot(req).await.unwrap().status(), StatusCode::UNPROCESSABLE_ENTITY);

    let (status, _, _) = call(&app, Method::POST, &format!("/sessions/{id}/clarify"), Some(json!({"answers": {}}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _, _) = call(&app, Method::GET, &format!("/sessions/{id}/clarification"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let missing = serde_json::to_value(BackendConfig::replay("/nonexistent/c.json")).unwrap();
    let (status, err, _) = call(&app, Method::POST, "/sessions", Some(json!({"backend": missing}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["error"], "InvalidConfig");
    let (status, _, _) = call(&app, Method::POST, "/sessions", Some(json!({"components": "X,Y"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _, _) = call(&app, Method::POST, "/sessions", Some(json!({"sed": 1}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, v, _) = call(&app, Method::GET, "/health", None).await;
    assert_eq!((status, v), (StatusCode::OK, json!({"status": "ok"})));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn sessions_survive_a_restart_through_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let first = app(config(Some(dir.path())));
    let id = create(&first, None).await;
    let (_, job) = instruct(&first, &id, "a pine forest by a lake").await;
    assert_eq!(settle(&first, job["id"].as_str().unwrap()).await["status"], "succeeded");
    let (_, _, scene) = call(&first, Method::GET, &format!("/sessions/{id}/scene"), None).await;
    assert!(dir.path().join("sessions").join(format!("{id}.json")).exists());

    let second = app(config(Some(dir.path())));
    let (status, _, restored) = call(&second, Method::GET, &format!("/sessions/{id}/scene"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(restored, scene);
    let (_, _, plan) = call(&second, Method::GET, &format!("/sessions/{id}/plan"), None).await;
    let (_, _, plan_before) = call(&first, Method::GET, &format!("/sessions/{id}/plan"), None).await;
    assert_eq!(plan, plan_before);
    let next = create(&second, None).await;
    assert_ne!(next, id, "ids keep counting after a restart");

    std::fs::write(dir.path().join("sessions/broken.json"), "{").unwrap();
    assert!(AppState::new(config(Some(dir.path()))).is_err());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn serves_static_files_next_to_the_api() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<p>studio</p>").unwrap();
    let mut cfg = config(None);
    cfg.static_dir = Some(dir.path().to_path_buf());
    let app = app(cfg);
    let (status, _, text) = call(&app, Method::GET, "/index.html", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(text, "<p>studio</p>");
    let (status, _, _) = call(&app, Method::GET, "/health", None).await;
    assert_eq!(status, StatusCode::OK);
}
