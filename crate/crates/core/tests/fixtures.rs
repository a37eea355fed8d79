mod common;

use common::{check_fixture, extract_fixture, FIXTURES};

#[test]
fn every_fixture_matches() {
    let failures: Vec<String> = FIXTURES
        .iter()
        .filter_map(|(name, expect)| check_fixture(name, expect).err().map(|e| format!("{name}: {e}")))
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn counters_explain_dropped_hellos() {
    let s = extract_fixture("sni_absent").unwrap().stats;
    assert_eq!((s.client_hellos, s.dropped_no_sni), (1, 1));
    let s = extract_fixture("malformed_lengths").unwrap().stats;
    assert_eq!((s.client_hellos, s.malformed_hellos), (2, 1));
    let s = extract_fixture("version_filter").unwrap().stats;
    assert_eq!(s.dropped_version, 1);
    let s = extract_fixture("non_tls_flow").unwrap().stats;
    assert_eq!((s.flows, s.tls_flows), (1, 0));
    let s = extract_fixture("duplicate_segment").unwrap().stats;
    assert_eq!((s.tcp_segments, s.client_hellos), (2, 1));
}

#[test]
fn reassembled_hello_keeps_first_byte_packet() {
    let ex = extract_fixture("out_of_order_segments").unwrap();
    assert_eq!(ex.events[0].packet_index, 1);
    let ex = extract_fixture("interleaved_flows").unwrap();
    let idx: Vec<usize> = ex.events.iter().map(|e| e.packet_index).collect();
    assert_eq!(idx, [1, 0, 2]);
}

#[test]
fn tls13_fixture_version() {
    let ex = extract_fixture("tls13_supported_versions").unwrap();
    assert_eq!(ex.events[0].tls_version, sni_sight::TlsVersion::Tls13);
}
