//! The live provider against a local HTTP server speaking the
//! chat-completions shape.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use sciagent::backend::{BackendError, ChatClient, HttpProvider, LiveOptions, Message, ModelSettings, Transcript};

struct Seen {
    bodies: Vec<String>,
    auth: Vec<String>,
}

/// Serves one canned `(status, body)` per connection, in order.
fn serve(replies: Vec<(u16, &'static str)>) -> (String, Arc<Mutex<Seen>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Seen { bodies: vec![], auth: vec![] }));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in replies {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if let Some(v) = line.strip_prefix("authorization:").or_else(|| line.strip_prefix("Authorization:")) {
                    log.lock().unwrap().auth.push(v.trim().to_string());
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().bodies.push(String::from_utf8(buf).unwrap());
            let mut stream = stream;
            let reason = if status == 200 { "OK" } else { "Error" };
            let _ = write!(
                stream,
                "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    (url, seen)
}

const OK_BODY: &str = r#"{"choices":[{"message":{"role":"assistant","content":"1. compute"},"finish_reason":"stop"}],"usage":{"prompt_tokens":5,"completion_tokens":2,"total_tokens":7}}"#;

fn options(url: &str, key_var: &str) -> LiveOptions {
    LiveOptions {
        api_key_env: key_var.into(),
        max_retries: 3,
        deadline: Duration::from_secs(10),
        backoff: Duration::from_millis(5),
        ..LiveOptions::new(url)
    }
}

#[test]
fn transient_failures_are_retried_and_recorded() {
    std::env::set_var("SCIAGENT_HTTP_TEST_KEY_A", "sk-test-a");
    let (url, seen) = serve(vec![(503, "{}"), (429, "{}"), (200, OK_BODY)]);
    let provider = HttpProvider::new(options(&url, "SCIAGENT_HTTP_TEST_KEY_A")).unwrap();
    let client = ChatClient::new(Arc::new(provider), Arc::new(Transcript::in_memory()), ModelSettings::default());
    let answer = client.ask("student.plan", vec![Message::system("plan"), Message::user("go")]).unwrap();
    assert_eq!(answer, "1. compute");

    let entries = client.transcript().entries();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].meta.retries, 2);
    assert_eq!(entries[0].response.usage.as_ref().map(|u| u.total_tokens), Some(7));
    let seen = seen.lock().unwrap();
    assert_eq!(seen.bodies.len(), 3);
    assert!(seen.auth.iter().all(|a| a == "Bearer sk-test-a"));
    let body: serde_json::Value = serde_json::from_str(&seen.bodies[2]).unwrap();
    assert_eq!(body["messages"][1]["content"], "go");
    assert!(body.get("tag").is_none());
}

#[test]
fn client_errors_are_not_retried() {
    std::env::set_var("SCIAGENT_HTTP_TEST_KEY_B", "sk-test-b");
    let (url, seen) = serve(vec![(400, r#"{"error":"bad"}"#), (200, OK_BODY)]);
    let provider = HttpProvider::new(options(&url, "SCIAGENT_HTTP_TEST_KEY_B")).unwrap();
    let client = ChatClient::new(Arc::new(provider), Arc::new(Transcript::in_memory()), ModelSettings::default());
    let err = client.ask("student.plan", vec![Message::user("go")]).unwrap_err();
    assert!(matches!(err, BackendError::Http { status: 400, .. }), "{err}");
    assert_eq!(seen.lock().unwrap().bodies.len(), 1);
    assert!(client.transcript().entries().is_empty());
}

#[test]
fn retries_stop_at_the_limit() {
    std::env::set_var("SCIAGENT_HTTP_TEST_KEY_C", "sk-test-c");
    let (url, seen) = serve(vec![(500, "{}"); 4]);
    let provider =
        HttpProvider::new(LiveOptions { max_retries: 1, ..options(&url, "SCIAGENT_HTTP_TEST_KEY_C") }).unwrap();
    let client = ChatClient::new(Arc::new(provider), Arc::new(Transcript::in_memory()), ModelSettings::default());
    assert!(matches!(client.ask("x", vec![Message::user("go")]), Err(BackendError::Http { status: 500, .. })));
    assert_eq!(seen.lock().unwrap().bodies.len(), 2);
}

#[test]
fn unreachable_endpoint_fails_within_deadline() {
    std::env::set_var("SCIAGENT_HTTP_TEST_KEY_D", "sk-test-d");
    // bind then drop to get a port nobody listens on
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("http://127.0.0.1:{port}/v1/chat/completions");
    let provider = HttpProvider::new(LiveOptions {
        deadline: Duration::from_secs(2),
        ..options(&url, "SCIAGENT_HTTP_TEST_KEY_D")
    })
    .unwrap();
    let client = ChatClient::new(Arc::new(provider), Arc::new(Transcript::in_memory()), ModelSettings::default());
    let started = std::time::Instant::now();
    assert!(client.ask("x", vec![Message::user("go")]).is_err());
    assert!(started.elapsed() < Duration::from_secs(5));
}
