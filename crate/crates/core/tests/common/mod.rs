#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;

use triz_agents::cli::execute_run;
use triz_agents::config::RunConfig;
use triz_agents::llm::BackendKind;
use triz_agents::orchestrator::RunState;

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn fixture(name: &str) -> PathBuf {
    repo_root().join("fixtures").join(name)
}

pub fn test_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn problem() -> String {
    std::fs::read_to_string(fixture("gantry_crane.txt")).unwrap()
}

pub fn scripted_config(script: &Path, out: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.backend.kind = BackendKind::Scripted;
    cfg.backend.script = Some(script.to_path_buf());
    cfg.search.fixture = Some(fixture("search.json"));
    cfg.output.dir = out.to_path_buf();
    cfg
}

/// Runs the bundled gantry-crane script into `<out>/<run_id>`.
pub fn full_run(out: &Path, run_id: &str) -> RunState {
    let cfg = scripted_config(&fixture("full_run.script"), out);
    execute_run(&cfg, &problem(), &out.join(run_id), run_id).unwrap()
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_triz-agents")
}

#[derive(Debug, Clone)]
pub struct Captured {
    pub path: String,
    pub headers: Vec<String>,
    pub body: String,
}

/// Minimal HTTP/1.1 server answering each connection with the next canned
/// (status, body) pair; the last pair repeats once the queue runs dry.
pub struct MockServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<Captured>>>,
}

impl MockServer {
    pub fn start(responses: Vec<(u16, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = requests.clone();
        thread::spawn(move || {
            for (i, stream) in listener.incoming().enumerate() {
                let Ok(stream) = stream else { break };
                let (status, body) = responses[i.min(responses.len() - 1)].clone();
                if let Some(c) = serve(stream, status, &body) {
                    seen.lock().unwrap().push(c);
                }
            }
        });
        Self { url, requests }
    }

    pub fn hits(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

fn serve(stream: TcpStream, status: u16, body: &str) -> Option<Captured> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line).ok()?;
    let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
    let mut headers = Vec::new();
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).ok()?;
        let line = line.trim_end().to_string();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap_or(0);
            }
        }
        headers.push(line);
    }
    let mut buf = vec![0; length];
    reader.read_exact(&mut buf).ok()?;
    let mut out = stream;
    let response = format!(
        "HTTP/1.1 {status} Mock\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    out.write_all(response.as_bytes()).ok()?;
    out.flush().ok()?;
    Some(Captured {
        path,
        headers,
        body: String::from_utf8_lossy(&buf).into_owned(),
    })
}

/// A chat-completions body with plain text content.
pub fn text_completion(content: &str, prompt: u64, completion: u64) -> String {
    serde_json::json!({
        "id": "chatcmpl-test",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
        "usage": {"prompt_tokens": prompt, "completion_tokens": completion, "total_tokens": prompt + completion}
    })
    .to_string()
}
