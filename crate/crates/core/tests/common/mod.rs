#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use satlab::encodings::render_cnf_solution;
use satlab::gen::{build_pool, Family, GenSpec, InstanceRecord, PoolOptions};
use satlab::llm::ModelConfig;
use satlab::solver::{solve, Mode, SolverOptions};
use satlab::{Alpha, Formula};

type Handler = dyn Fn(usize, &Value) -> (u16, String) + Send + Sync;

/// Minimal HTTP/1.1 server answering POSTs through a scripted handler.
pub struct MockServer {
    pub url: String,
    hits: Arc<AtomicUsize>,
    bodies: Arc<Mutex<Vec<Value>>>,
}

impl MockServer {
    pub fn start(handler: impl Fn(usize, &Value) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Handler> = Arc::new(handler);
        let (h, b) = (hits.clone(), bodies.clone());
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let (h, b, handler) = (h.clone(), b.clone(), handler.clone());
                thread::spawn(move || serve(stream, &h, &b, handler.as_ref()));
            }
        });
        MockServer { url, hits, bodies }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn bodies(&self) -> Vec<Value> {
        self.bodies.lock().unwrap().clone()
    }

    pub fn config(&self, cache: Option<&Path>) -> ModelConfig {
        ModelConfig {
            model_name: "mock-model".into(),
            endpoint: self.url.clone(),
            timeout: Duration::from_secs(10),
            backoff: Duration::from_millis(5),
            max_retries: 3,
            cache_dir: cache.map(Path::to_path_buf),
            ..ModelConfig::default()
        }
    }
}

fn serve(stream: TcpStream, hits: &AtomicUsize, bodies: &Mutex<Vec<Value>>, handler: &Handler) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut writer = stream;
    loop {
        let mut len = 0usize;
        let mut line = String::new();
        let mut saw_request = false;
        loop {
            line.clear();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                return;
            }
            if line == "\r\n" && saw_request {
                break;
            }
            saw_request = true;
            if let Some((k, v)) = line.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    len = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0u8; len];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        let body: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
        let index = hits.fetch_add(1, Ordering::SeqCst);
        bodies.lock().unwrap().push(body.clone());
        let (status, text) = handler(index, &body);
        let resp = format!(
            "HTTP/1.1 {status} Scripted\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{text}",
            text.len()
        );
        if writer.write_all(resp.as_bytes()).is_err() {
            return;
        }
    }
}

pub fn completion(content: &str, usage: Option<(u64, u64)>) -> String {
    let mut v = json!({
        "id": "cmpl-1",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}],
    });
    if let Some((p, c)) = usage {
        v["usage"] = json!({"prompt_tokens": p, "completion_tokens": c});
    }
    v.to_string()
}

pub fn last_user_message(body: &Value) -> String {
    body["messages"]
        .as_array()
        .and_then(|m| m.iter().rev().find(|m| m["role"] == "user"))
        .and_then(|m| m["content"].as_str())
        .unwrap_or_default()
        .to_string()
}

/// Answers a raw-CNF prompt correctly by solving the formula it contains.
pub fn solving_reply(body: &Value) -> String {
    let user = last_user_message(body);
    let list = user.split_once("Formula:").map(|(_, f)| f.trim()).unwrap_or("[]");
    let clauses: Vec<Vec<i32>> = serde_json::from_str(list).unwrap();
    let n = clauses.iter().flatten().map(|l| l.unsigned_abs()).max().unwrap_or(0);
    let formula = Formula::new(n, clauses).unwrap();
    let out = solve(&formula, Mode::Search, &SolverOptions::default());
    render_cnf_solution(&formula, out.assignment.as_ref())
}

/// `per_label` SAT and `per_label` UNSAT 3-SAT instances at `n` drawn from
/// densities around the threshold.
pub fn balanced_pool(n: u32, per_label: usize, seed: u64) -> Vec<InstanceRecord> {
    let alphas: Vec<Alpha> = ["3.8", "4.1", "4.4", "4.7", "5"].iter().map(|a| a.parse().unwrap()).collect();
    let specs: Vec<GenSpec> = alphas
        .iter()
        .map(|&alpha| GenSpec { family: Family::SAT3, n, alpha, seed, count: per_label })
        .collect();
    let pool = build_pool(&specs, &PoolOptions::default()).unwrap();
    let (sat, unsat): (Vec<_>, Vec<_>) = pool.into_iter().partition(|r| r.is_sat());
    assert!(sat.len() >= per_label && unsat.len() >= per_label, "{} SAT / {} UNSAT", sat.len(), unsat.len());
    let mut out: Vec<InstanceRecord> = sat.into_iter().take(per_label).chain(unsat.into_iter().take(per_label)).collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}
