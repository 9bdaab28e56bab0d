//! Thin client for a running `scenesmith serve`.

use std::time::Duration;

use serde_json::{json, Value};

use crate::args::SessionCommand;
use crate::commands::emit;
use crate::error::CliError;

struct Client {
    base: String,
    agent: ureq::Agent,
}

impl Client {
    fn new(server: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        Client { base: server.trim_end_matches('/').to_string(), agent }
    }

    fn request(&self, method: &str, path: &str, body: Option<Value>) -> Result<String, CliError> {
        let url = format!("{}{path}", self.base);
        let remote = |e: ureq::Error| CliError::Remote(format!("{url}: {e}"));
        let mut resp = match (method, body) {
            ("GET", _) => self.agent.get(&url).call().map_err(remote)?,
            (_, Some(b)) => self.agent.post(&url).send_json(&b).map_err(remote)?,
            (_, None) => self.agent.post(&url).send_empty().map_err(remote)?,
        };
        let status = resp.status();
        let text = resp.body_mut().read_to_string().map_err(remote)?;
        if status.is_success() {
            Ok(text)
        } else {
            let msg = serde_json::from_str::<Value>(&text)
                .ok()
                .and_then(|v| v["message"].as_str().map(str::to_string))
                .unwrap_or(text);
            Err(CliError::Remote(format!("{} {msg}", status.as_u16())))
        }
    }

    fn get(&self, path: &str) -> Result<String, CliError> {
        self.request("GET", path, None)
    }

    fn post(&self, path: &str, body: Option<Value>) -> Result<String, CliError> {
        self.request("POST", path, body)
    }
}

fn parse(text: &str) -> Result<Value, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Remote(format!("bad response: {e}")))
}

fn print_json(text: &str) -> Result<(), CliError> {
    let v = parse(text)?;
    emit(&format!("{}\n", serde_json::to_string_pretty(&v).expect("value serializes")))
}

pub fn run(server: Option<&str>, cmd: &SessionCommand) -> Result<(), CliError> {
    let server = server.ok_or_else(|| CliError::Usage("session commands need --server <url>".into()))?;
    let c = Client::new(server);
    match cmd {
        SessionCommand::New { seed, components } => {
            let mut body = json!({});
            if let Some(s) = seed {
                body["seed"] = json!(s);
            }
            if let Some(comp) = components {
                body["components"] = json!(comp);
            }
            let v = parse(&c.post("/sessions", Some(body))?)?;
            println!("{}", v["id"].as_str().unwrap_or_default());
            Ok(())
        }
        SessionCommand::List => print_json(&c.get("/sessions")?),
        SessionCommand::Show { id } => print_json(&c.get(&format!("/sessions/{id}"))?),
        SessionCommand::Instruct { id, text, wait } => {
            let job = parse(&c.post(&format!("/sessions/{id}/instruct"), Some(json!({"text": text})))?)?;
            if !wait {
                return print_json(&job.to_string());
            }
            let job_id = job["id"].as_str().unwrap_or_default().to_string();
            loop {
                let v = parse(&c.get(&format!("/jobs/{job_id}"))?)?;
                match v["status"].as_str() {
                    Some("running") => std::thread::sleep(Duration::from_millis(200)),
                    Some("failed") => {
                        return Err(CliError::Remote(v["error"].as_str().unwrap_or("job failed").to_string()));
                    }
                    _ => return print_json(&v.to_string()),
                }
            }
        }
        SessionCommand::Clarify { id, answers } => {
            let mut map = serde_json::Map::new();
            for a in answers {
                let (k, v) = a
                    .split_once('=')
                    .ok_or_else(|| CliError::Usage(format!("answer `{a}` is not name=value")))?;
                map.insert(k.trim().to_string(), json!(v.trim()));
            }
            print_json(&c.post(&format!("/sessions/{id}/clarify"), Some(json!({"answers": map})))?)
        }
        SessionCommand::Clarification { id } => print_json(&c.get(&format!("/sessions/{id}/clarification"))?),
        SessionCommand::Job { id } => print_json(&c.get(&format!("/jobs/{id}"))?),
        SessionCommand::Scene { id } => {
            emit(&c.get(&format!("/sessions/{id}/scene"))?)
        }
        SessionCommand::Plan { id } => {
            emit(&c.get(&format!("/sessions/{id}/plan"))?)
        }
        SessionCommand::Report { id } => {
            emit(&c.get(&format!("/sessions/{id}/report"))?)
        }
    }
}
