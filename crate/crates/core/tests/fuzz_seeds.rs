//! Replays the checked-in fuzz seeds, and every prefix of each seed,
//! through the fuzz entry points on stable Rust.

#[path = "../../../fuzz/src/lib.rs"]
mod entry;

use std::path::PathBuf;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn replay(target: &str, f: fn(&[u8])) {
    for (name, data) in seeds(target) {
        for end in 0..=data.len() {
            let result = std::panic::catch_unwind(|| f(&data[..end]));
            assert!(result.is_ok(), "{target}/{name} truncated to {end} bytes");
        }
    }
}

#[test]
fn pcap_reader() {
    replay("pcap_reader", entry::pcap_reader);
}

#[test]
fn extract() {
    replay("extract", entry::extract);
}

#[test]
fn client_hello() {
    replay("client_hello", entry::client_hello);
}

#[test]
fn tls_records() {
    replay("tls_records", entry::tls_records);
}

#[test]
fn decode_tcp() {
    replay("decode_tcp", entry::decode_tcp);
}

#[test]
fn checkpoint() {
    replay("checkpoint", entry::checkpoint);
}

#[test]
fn trace_jsonl() {
    replay("trace_jsonl", entry::trace_jsonl);
}

#[test]
fn universe() {
    replay("universe", entry::universe);
}
