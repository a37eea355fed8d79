//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use sni_sight::pcap::PcapError;
use sni_sight::tls::{events_to_trace, extract_from_bytes, ExtractOptions, Extraction};
use sni_sight::trace::write_traces_to;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub enum Expect {
    /// Byte-exact trace line in `expected/<name>.jsonl`.
    Trace,
    Error(fn(&PcapError) -> bool),
}

pub const FIXTURES: &[(&str, Expect)] = &[
    ("minimal_client_hello", Expect::Trace),
    ("sni_absent", Expect::Trace),
    ("multi_record", Expect::Trace),
    ("tls13_supported_versions", Expect::Trace),
    ("malformed_lengths", Expect::Trace),
    ("vlan_tag", Expect::Trace),
    ("ipv6", Expect::Trace),
    ("nanosecond_pcap", Expect::Trace),
    ("byte_swapped_pcap", Expect::Trace),
    ("duplicate_segment", Expect::Trace),
    ("out_of_order_segments", Expect::Trace),
    ("non_tls_flow", Expect::Trace),
    ("version_filter", Expect::Trace),
    ("raw_ip_linktype", Expect::Trace),
    ("interleaved_flows", Expect::Trace),
    ("linux_sll_rejected", Expect::Error(|e| matches!(e, PcapError::UnsupportedLinkType(113)))),
    ("truncated_record", Expect::Error(|e| matches!(e, PcapError::TruncatedRecord { .. }))),
];

pub fn extract_fixture(name: &str) -> Result<Extraction, PcapError> {
    let bytes = std::fs::read(fixture_dir().join(format!("{name}.pcap"))).expect("fixture file");
    extract_from_bytes(&bytes, ExtractOptions::default())
}

/// `Ok` when the fixture behaves as expected, otherwise a description.
pub fn check_fixture(name: &str, expect: &Expect) -> Result<(), String> {
    match (extract_fixture(name), expect) {
        (Ok(ex), Expect::Trace) => {
            let mut got = Vec::new();
            write_traces_to(&mut got, &[events_to_trace(vec![], &ex.events)]).unwrap();
            let want = std::fs::read(fixture_dir().join("expected").join(format!("{name}.jsonl"))).unwrap();
            if got == want {
                Ok(())
            } else {
                Err(format!("got {} want {}", String::from_utf8_lossy(&got), String::from_utf8_lossy(&want)))
            }
        }
        (Err(e), Expect::Error(ok)) if ok(&e) => Ok(()),
        (Err(e), _) => Err(format!("unexpected error {e}")),
        (Ok(ex), Expect::Error(_)) => Err(format!("expected an error, got {} events", ex.events.len())),
    }
}
