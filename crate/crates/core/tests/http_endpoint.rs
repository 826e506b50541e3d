//! Exercises the HTTP chat client against a scripted local server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use cliff_core::orchestrator::{ChatModel, ChatRequest, HttpModel, ModelEndpoint, OrchestratorError};

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    authorization: Option<String>,
    body: serde_json::Value,
}

/// Serves one scripted (status, body) response per connection, then stops.
fn serve(script: Vec<(u16, &'static str)>) -> (String, Arc<Mutex<Vec<Seen>>>, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    let handle = thread::spawn(move || {
        for (status, body) in script {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut length = 0;
            let mut authorization = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap();
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => length = value.trim().parse().unwrap(),
                    "authorization" => authorization = Some(value.trim().to_owned()),
                    _ => {}
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Seen {
                path: request_line.split_whitespace().nth(1).unwrap().to_owned(),
                authorization,
                body: serde_json::from_slice(&buf).unwrap(),
            });
            let mut stream = stream;
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}/v1"), seen, handle)
}

fn endpoint(base_url: String, key_env: Option<&str>) -> ModelEndpoint {
    ModelEndpoint {
        base_url,
        model_name: "test-model".into(),
        api_key_env: key_env.map(str::to_owned),
        max_retries: 3,
        initial_backoff_ms: 1,
        timeout_secs: 5,
        ..ModelEndpoint::default()
    }
}

fn request() -> ChatRequest {
    ChatRequest { system: "sys".into(), user: "hello".into(), temperature: 0.3, max_tokens: 64 }
}

const OK: &str = r#"{"choices":[{"message":{"role":"assistant","content":"FINAL ANSWER: Paris"}}],"usage":{"prompt_tokens":5,"completion_tokens":3,"total_tokens":8}}"#;

#[test]
fn retries_rate_limits_then_succeeds_with_bearer_auth() {
    std::env::set_var("CLIFF_HTTP_TEST_KEY", "secret-token");
    let (url, seen, handle) = serve(vec![(429, "{}"), (429, "{}"), (200, OK)]);
    let model = HttpModel::new(endpoint(url, Some("CLIFF_HTTP_TEST_KEY"))).unwrap();
    let reply = model.chat(&request()).unwrap();
    handle.join().unwrap();

    assert_eq!(reply.content, "FINAL ANSWER: Paris");
    assert_eq!(reply.retries, 2);
    assert_eq!(reply.usage.unwrap().total_tokens, 8);
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    for s in seen.iter() {
        assert_eq!(s.path, "/v1/chat/completions");
        assert_eq!(s.authorization.as_deref(), Some("Bearer secret-token"));
        assert_eq!(s.body["model"], "test-model");
        assert_eq!(s.body["messages"][0]["role"], "system");
        assert_eq!(s.body["messages"][1]["content"], "hello");
        assert_eq!(s.body["temperature"], 0.3);
        assert_eq!(s.body["max_tokens"], 64);
    }
}

#[test]
fn non_json_body_is_a_protocol_error() {
    let (url, _, handle) = serve(vec![(200, "<html>oops</html>")]);
    let model = HttpModel::new(endpoint(url, None)).unwrap();
    let err = model.chat(&request()).unwrap_err();
    handle.join().unwrap();
    assert!(matches!(err, OrchestratorError::Protocol(_)), "{err:?}");
}

#[test]
fn missing_content_is_a_protocol_error() {
    let (url, _, handle) = serve(vec![(200, r#"{"choices":[]}"#)]);
    let model = HttpModel::new(endpoint(url, None)).unwrap();
    assert!(matches!(model.chat(&request()), Err(OrchestratorError::Protocol(_))));
    handle.join().unwrap();
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen, handle) = serve(vec![(400, r#"{"error":"bad"}"#)]);
    let model = HttpModel::new(endpoint(url, None)).unwrap();
    let err = model.chat(&request()).unwrap_err();
    handle.join().unwrap();
    assert!(matches!(err, OrchestratorError::Transport { status: Some(400), .. }), "{err:?}");
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn server_errors_exhaust_the_retry_budget() {
    let (url, seen, handle) = serve(vec![(503, "{}"), (500, "{}"), (502, "{}"), (503, "{}")]);
    let model = HttpModel::new(endpoint(url, None)).unwrap();
    let err = model.chat(&request()).unwrap_err();
    handle.join().unwrap();
    assert!(matches!(err, OrchestratorError::Transport { status: Some(503), .. }), "{err:?}");
    assert_eq!(seen.lock().unwrap().len(), 4);
}

#[test]
fn missing_key_variable_is_a_config_error() {
    let ep = endpoint("http://127.0.0.1:9".into(), Some("CLIFF_HTTP_TEST_UNSET_VARIABLE"));
    assert!(matches!(HttpModel::new(ep), Err(OrchestratorError::Config(_))));
}
