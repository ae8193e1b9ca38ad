//! Live-mode fetching against a throwaway local HTTP server, and fixture
//! files produced by it.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread::JoinHandle;

use poolbench_core::error::Error;
use poolbench_core::ingest::{encode_response, load_dir, IngestError, SnapshotClient};
use poolbench_core::runner::{fetch_to_fixtures, synth};

/// Serves `responses` in order, one connection each, and returns the
/// request lines it saw.
fn serve(responses: Vec<(u16, Vec<u8>)>) -> (String, JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let mut seen = Vec::new();
        for (code, body) in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            seen.push(line.trim_end().to_string());
            loop {
                let mut header = String::new();
                reader.read_line(&mut header).unwrap();
                if header == "\r\n" || header.is_empty() {
                    break;
                }
            }
            let head = format!(
                "HTTP/1.1 {code} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                body.len()
            );
            stream.write_all(head.as_bytes()).unwrap();
            stream.write_all(&body).unwrap();
        }
        seen
    });
    (endpoint, handle)
}

#[test]
fn live_fetch_then_fixture_replay() {
    let records = synth::generate_records(3, 0, 8);
    let pool = records[0].pool_address.clone();
    let body = encode_response(&records);
    let (endpoint, server) = serve(vec![(200, body.clone())]);

    let dir = tempfile::tempdir().unwrap();
    let from = "2024-07-20T18:00:00Z";
    let to = "2024-07-22T12:00:00Z";
    let files = fetch_to_fixtures(&endpoint, std::slice::from_ref(&pool), from, to, dir.path()).unwrap();
    let seen = server.join().unwrap();
    assert_eq!(seen.len(), 1);
    assert!(seen[0].starts_with(&format!("GET /pools/{pool}/snapshots?from=1721498400&to=")), "{}", seen[0]);

    assert_eq!(std::fs::read(&files[0]).unwrap(), body);
    let client = SnapshotClient::fixture(dir.path());
    let t0 = records[0].timestamp;
    let replayed = client.fetch_pool_snapshots(&pool, t0, records[7].timestamp).unwrap();
    assert_eq!(replayed, records);

    let loaded = load_dir(dir.path()).unwrap();
    assert_eq!(loaded.pools[&pool], records);
}

#[test]
fn missing_field_is_schema_drift() {
    let mut items: serde_json::Value = serde_json::from_slice(&encode_response(&synth::generate_records(4, 0, 3))).unwrap();
    items[1].as_object_mut().unwrap().remove("virtual_price");
    let (endpoint, server) = serve(vec![(200, serde_json::to_vec(&items).unwrap())]);

    let dir = tempfile::tempdir().unwrap();
    let err = fetch_to_fixtures(&endpoint, &["0xabc".into()], "2024-07-20T18:00:00Z", "2024-07-21T18:00:00Z", dir.path())
        .unwrap_err();
    server.join().unwrap();
    assert!(matches!(err, Error::Ingest(IngestError::SchemaDrift(_))), "{err}");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0, "drifted payload must not be stored");
}

#[test]
fn http_error_status_is_reported() {
    let (endpoint, server) = serve(vec![(503, b"{}".to_vec())]);
    let client = SnapshotClient::live(endpoint);
    let t = synth::synth_start();
    let err = client.fetch_pool_snapshots("0xabc", t, t).unwrap_err();
    server.join().unwrap();
    assert!(matches!(err, IngestError::HttpStatus { code: 503, .. }), "{err}");
}

#[test]
fn unreachable_endpoint_is_network_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let client = SnapshotClient::live(format!("http://127.0.0.1:{port}"));
    let t = synth::synth_start();
    let err = client.fetch_pool_snapshots("0xabc", t, t).unwrap_err();
    assert!(matches!(err, IngestError::NetworkUnavailable(_)), "{err}");
}
