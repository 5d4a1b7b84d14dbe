#![allow(dead_code)]

pub mod props;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;

use serde_json::{json, Value};
use story2pddl::harness::{build_providers, PipelineConfig};
use story2pddl::knowledge::{Providers, Relation};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn config(rel: &str) -> PipelineConfig {
    PipelineConfig::load(&fixture(rel)).expect("fixture config loads")
}

fn answer(providers: &Providers, path: &str, body: &Value) -> Option<Value> {
    let s = |k: &str| body[k].as_str().unwrap_or_default().to_string();
    match path {
        "/generate" => {
            let relation: Relation = s("relation").parse().ok()?;
            let k = body["k"].as_u64()? as usize;
            let preds = providers.commonsense.generate(&s("event"), relation, k).ok()?;
            Some(Value::Array(
                preds.iter().map(|p| json!({"phrase": p.phrase, "p": p.probability})).collect(),
            ))
        }
        "/similarity" => Some(json!({"score": providers.similarity.similarity(&s("a"), &s("b")).ok()?})),
        "/nli" => {
            let v = providers.nli.nli(&s("a"), &s("b")).ok()?;
            let label = format!("{:?}", v.label).to_lowercase();
            Some(json!({"label": label, "score": v.score}))
        }
        _ => None,
    }
}

/// Serve the model-server API from fixture providers on a local port.
/// Unknown keys get a 404. Returns the base URL.
pub fn serve_fixtures(config: &PipelineConfig) -> String {
    let providers = Arc::new(build_providers(&config.providers).expect("fixture providers"));
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let providers = Arc::clone(&providers);
            thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                if reader.read_line(&mut request_line).is_err() {
                    return;
                }
                let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
                let mut length = 0;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some((k, v)) = line.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            length = v.trim().parse().unwrap_or(0);
                        }
                    }
                }
                let mut body = vec![0; length];
                let _ = reader.read_exact(&mut body);
                let parsed: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
                let (status, payload) = match answer(&providers, &path, &parsed) {
                    Some(v) => ("200 OK", v.to_string()),
                    None => ("404 Not Found", "{}".to_string()),
                };
                let response = format!(
                    "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                    payload.len()
                );
                let _ = stream.write_all(response.as_bytes());
            });
        }
    });
    format!("http://{addr}")
}
