use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use scenesmith_core::llm::{
    request_hash, BackendConfig, BackendKind, Cassette, ChatMessage, HttpBackend, LlmBackend, LlmError, RecordingBackend,
    ReplayBackend, ScriptedMock,
};

#[derive(Debug, Clone, Default)]
struct Seen {
    authorization: Option<String>,
    body: String,
}

/// Serves one canned `(status, body)` per connection, in order, and records
/// what each request carried.
fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in replies {
            let Ok((mut stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            let mut entry = Seen::default();
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    entry.authorization = Some(line["authorization:".len()..].trim().to_string());
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            entry.body = String::from_utf8(buf).unwrap();
            log.lock().unwrap().push(entry);
            let reason = if status == 200 { "OK" } else { "Too Many Requests" };
            let resp = format!(
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(resp.as_bytes()).unwrap();
        }
    });
    (url, seen)
}

fn ok_body(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

fn fast_backend(url: &str) -> HttpBackend {
    let mut b = HttpBackend::new(url, "test-model");
    b.backoff = Duration::from_millis(5);
    b.timeout = Duration::from_secs(10);
    b
}

#[test]
fn http_backend_sends_chat_request_and_reads_content() {
    let (url, seen) = serve(vec![(200, ok_body("{\"objects\": []}"))]);
    std::env::set_var("SCENESMITH_TEST_KEY_A", "sekrit");
    let mut b = fast_backend(&url);
    b.api_key_env = Some("SCENESMITH_TEST_KEY_A".into());
    let reply = b.complete(&[ChatMessage::system("sys"), ChatMessage::user("hi")]).unwrap();
    assert_eq!(reply, "{\"objects\": []}");
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer sekrit"));
    let body: serde_json::Value = serde_json::from_str(&seen[0].body).unwrap();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"][1]["content"], "hi");
    assert_eq!(body["messages"][0]["role"], "system");
}

#[test]
fn http_backend_retries_rate_limits_then_succeeds() {
    let limited = (429, "{}".to_string());
    let (url, seen) = serve(vec![limited.clone(), limited, (200, ok_body("done"))]);
    let reply = fast_backend(&url).complete(&[ChatMessage::user("hi")]).unwrap();
    assert_eq!(reply, "done");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn http_backend_gives_up_after_three_retries() {
    let limited = (429, "{}".to_string());
    let (url, seen) = serve(vec![limited; 5]);
    let err = fast_backend(&url).complete(&[ChatMessage::user("hi")]).unwrap_err();
    assert!(matches!(err, LlmError::RateLimited { attempts: 4 }), "{err:?}");
    assert_eq!(seen.lock().unwrap().len(), 4);
}

#[test]
fn http_backend_reports_missing_content() {
    let (url, _) = serve(vec![(200, "{\"choices\": []}".into())]);
    let err = fast_backend(&url).complete(&[ChatMessage::user("hi")]).unwrap_err();
    assert!(matches!(err, LlmError::Transport(_)));
}

#[test]
fn http_backend_reports_unreachable_endpoint() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", listener.local_addr().unwrap());
    drop(listener);
    let err = fast_backend(&url).complete(&[ChatMessage::user("hi")]).unwrap_err();
    assert!(matches!(err, LlmError::Transport(_)), "{err:?}");
}

#[test]
fn recording_then_replaying_returns_the_same_replies_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/c.json");
    let rec = RecordingBackend::open(Box::new(ScriptedMock::new("m", ["first", "second", "other"])), path.clone())
        .unwrap();
    let ask = [ChatMessage::user("same question")];
    assert_eq!(rec.complete(&ask).unwrap(), "first");
    assert_eq!(rec.complete(&ask).unwrap(), "second");
    assert_eq!(rec.complete(&[ChatMessage::user("different")]).unwrap(), "other");
    assert_eq!(rec.cassette().entries.len(), 3);

    let cassette = Cassette::load(&path).unwrap();
    assert_eq!(cassette.entries[0].hash, request_hash("m", 0.0, &ask));
    let replay = ReplayBackend::new("m", 0.0, cassette.clone());
    assert_eq!(replay.complete(&ask).unwrap(), "first");
    assert_eq!(replay.complete(&ask).unwrap(), "second");
    assert_eq!(replay.complete(&ask).unwrap(), "second", "last reply repeats");
    assert_eq!(replay.complete(&[ChatMessage::user("different")]).unwrap(), "other");

    let err = replay.complete(&[ChatMessage::user("never asked")]).unwrap_err();
    assert!(matches!(err, LlmError::UnmatchedTranscript { .. }));
    let other_model = ReplayBackend::new("m2", 0.0, cassette);
    assert!(other_model.complete(&ask).is_err(), "model is part of the request identity");
}

#[test]
fn recording_appends_to_an_existing_cassette() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let a = RecordingBackend::open(Box::new(ScriptedMock::new("m", ["one"])), path.clone()).unwrap();
    a.complete(&[ChatMessage::user("1")]).unwrap();
    let b = RecordingBackend::open(Box::new(ScriptedMock::new("m", ["two"])), path.clone()).unwrap();
    b.complete(&[ChatMessage::user("2")]).unwrap();
    assert_eq!(Cassette::load(&path).unwrap().entries.len(), 2);
}

#[test]
fn cassette_rejects_wrong_schema_and_bad_json() {
    let p = std::path::Path::new("x.json");
    assert!(Cassette::parse(r#"{"schema": "cassette/2", "entries": []}"#, p).is_err());
    assert!(Cassette::parse("{", p).is_err());
    assert!(Cassette::parse(r#"{"schema": "cassette/1", "entries": []}"#, p).is_ok());
}

#[test]
fn scripted_mock_logs_requests_and_runs_dry() {
    let m = ScriptedMock::new("m", ["a"]);
    assert_eq!(m.complete(&[ChatMessage::user("q")]).unwrap(), "a");
    assert!(matches!(m.complete(&[ChatMessage::user("q")]), Err(LlmError::ScriptExhausted)));
    assert_eq!(m.requests().len(), 2);
    assert!(matches!(m.complete(&[]), Err(LlmError::InvalidMessage(_))));
}

#[test]
fn backend_config_builds_each_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg: BackendConfig =
        serde_json::from_str(r#"{"kind": "scripted-mock", "model": "m", "script": ["x"]}"#).unwrap();
    assert_eq!(cfg.kind, BackendKind::ScriptedMock);
    assert_eq!(cfg.build().unwrap().complete(&[ChatMessage::user("q")]).unwrap(), "x");

    let mut rec = cfg.clone();
    rec.record = true;
    assert!(matches!(rec.build(), Err(LlmError::Config(_))), "recording needs a path");
    rec.cassette = Some(dir.path().join("r.json"));
    rec.build().unwrap().complete(&[ChatMessage::user("q")]).unwrap();
    assert!(dir.path().join("r.json").exists());

    let mut replay = BackendConfig::replay(dir.path().join("r.json"));
    replay.model = "m".into();
    assert_eq!(replay.build().unwrap().complete(&[ChatMessage::user("q")]).unwrap(), "x");
    replay.record = true;
    assert!(replay.build().is_err());

    let http: BackendConfig = serde_json::from_str(r#"{"kind": "http"}"#).unwrap();
    assert!(matches!(http.build(), Err(LlmError::Config(_))));
    assert!(serde_json::from_str::<BackendConfig>(r#"{"kind": "http", "endpont": "x"}"#).is_err());
    assert!(matches!(BackendConfig::replay(dir.path().join("missing.json")).build(), Err(LlmError::Cassette { .. })));
}
