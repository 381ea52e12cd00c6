use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;

use tale::backend::{BackendConfig, HttpBackend};
use tale_core::planner::{LlmBackend, PlanSource, Stage};

/// Serves one canned `(status, body)` per connection and returns the request bodies.
fn serve(responses: Vec<(u16, String)>) -> (String, thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut seen = Vec::new();
        for (status, body) in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            let mut line = String::new();
            loop {
                line.clear();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut req = vec![0; len];
            reader.read_exact(&mut req).unwrap();
            seen.push(String::from_utf8(req).unwrap());
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
        seen
    });
    (url, handle)
}

fn config(url: String, key_env: &str) -> BackendConfig {
    BackendConfig { endpoint: url, api_key_env: key_env.into(), retry_base_ms: 1, ..BackendConfig::default() }
}

fn completion(text: &str) -> String {
    serde_json::json!({ "choices": [{ "message": { "role": "assistant", "content": text } }] }).to_string()
}

#[test]
fn missing_key_is_an_error() {
    let err = HttpBackend::new(config("http://127.0.0.1:9".into(), "TALE_TEST_ABSENT_KEY")).err().unwrap();
    assert!(err.0.contains("TALE_TEST_ABSENT_KEY"));
}

#[test]
fn retries_server_errors_then_returns_content() {
    std::env::set_var("TALE_TEST_KEY_A", "secret");
    let (url, server) = serve(vec![(500, "{}".into()), (429, "{}".into()), (200, completion("pick cube"))]);
    let mut b = HttpBackend::new(config(url, "TALE_TEST_KEY_A")).unwrap();
    assert_eq!(b.complete(Stage::Task, "plan it").unwrap(), "pick cube");
    assert_eq!(b.source(), PlanSource::Live);
    assert_eq!(b.model(), "gpt-4o");
    assert!(chrono::DateTime::parse_from_rfc3339(&b.timestamp()).is_ok());
    let bodies = server.join().unwrap();
    assert_eq!(bodies.len(), 3);
    let req: serde_json::Value = serde_json::from_str(&bodies[2]).unwrap();
    assert_eq!(req["model"], "gpt-4o");
    assert_eq!(req["temperature"], 0);
    assert_eq!(req["messages"][0]["content"], "plan it");
}

#[test]
fn client_errors_are_not_retried() {
    std::env::set_var("TALE_TEST_KEY_B", "secret");
    let (url, server) = serve(vec![(401, "{\"error\":\"bad key\"}".into())]);
    let mut b = HttpBackend::new(config(url, "TALE_TEST_KEY_B")).unwrap();
    let err = b.complete(Stage::Modality, "x").unwrap_err();
    assert!(err.0.contains("401") && err.0.contains("bad key"), "{}", err.0);
    assert_eq!(server.join().unwrap().len(), 1);
}

#[test]
fn retries_are_bounded() {
    std::env::set_var("TALE_TEST_KEY_C", "secret");
    let (url, server) = serve(vec![(503, "{}".into()); 3]);
    let cfg = BackendConfig { max_retries: 2, ..config(url, "TALE_TEST_KEY_C") };
    let mut b = HttpBackend::new(cfg).unwrap();
    assert!(b.complete(Stage::Affordance, "x").unwrap_err().0.contains("503"));
    assert_eq!(server.join().unwrap().len(), 3);
}

#[test]
fn empty_choices_are_an_error() {
    std::env::set_var("TALE_TEST_KEY_D", "secret");
    let (url, server) = serve(vec![(200, "{\"choices\":[]}".into())]);
    let mut b = HttpBackend::new(config(url, "TALE_TEST_KEY_D")).unwrap();
    assert!(b.complete(Stage::Task, "x").is_err());
    server.join().unwrap();
}
