//! Entry points shared by the fuzz targets and by the seed replay test in
//! the main crate. Each one must return normally on any input; the
//! assertions are properties that hold whenever parsing succeeds.

use std::net::{IpAddr, Ipv4Addr};

use sni_sight::corpus::WebsiteUniverse;
use sni_sight::nn::{decode_checkpoint, encode_checkpoint};
use sni_sight::pcap::{
    read_pcap_bytes, Decoded, FlowKey, FlowStream, LinkType, RawRecord, SegmentMark, Timestamp,
};
use sni_sight::tls::{extract_from_bytes, parse_client_hello, parse_records, ExtractOptions};
use sni_sight::trace::{read_traces_from, write_traces_to};

pub fn pcap_reader(data: &[u8]) {
    if let Ok((_, records)) = read_pcap_bytes(data) {
        for (i, r) in records.iter().enumerate() {
            assert_eq!(r.index, i);
            assert!(r.offset as usize + 16 + r.data.len() <= data.len());
        }
    }
}

pub fn extract(data: &[u8]) {
    for options in [ExtractOptions::default(), ExtractOptions { dedup_window: None }] {
        if let Ok(x) = extract_from_bytes(data, options) {
            assert!(x.events.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
            assert!(x.events.iter().all(|e| !e.server_name.is_empty()));
            let s = &x.stats;
            let dropped = s.malformed_hellos + s.dropped_version + s.dropped_no_sni + s.deduplicated;
            assert_eq!(s.client_hellos, dropped + x.events.len());
        }
    }
}

pub fn client_hello(data: &[u8]) {
    if let Ok(h) = parse_client_hello(data) {
        if let Some(sni) = h.sni {
            assert!(!sni.is_empty() && !sni.ends_with('.'));
            assert_eq!(sni, sni.to_ascii_lowercase());
        }
    }
}

pub fn tls_records(data: &[u8]) {
    let flow = FlowStream {
        key: FlowKey {
            src: IpAddr::V4(Ipv4Addr::new(10, 0, 0, 1)),
            dst: IpAddr::V4(Ipv4Addr::new(192, 0, 2, 1)),
            src_port: 50_000,
            dst_port: 443,
        },
        bytes: data.to_vec(),
        marks: vec![SegmentMark { offset: 0, timestamp: Timestamp::from_micros(1, 0), packet_index: 0 }],
        truncated_at_gap: false,
    };
    let scan = parse_records(&flow);
    for r in &scan.records {
        assert!(r.offset + 5 + r.body.len() <= data.len());
    }
}

pub fn decode_tcp(data: &[u8]) {
    let Some((&first, rest)) = data.split_first() else { return };
    let linktype = if first & 1 == 0 { LinkType::Ethernet } else { LinkType::RawIp };
    let record =
        RawRecord { offset: 0, index: 0, timestamp: Timestamp::from_micros(1, 0), orig_len: rest.len() as u32, data: rest.to_vec() };
    if let Ok(Decoded::Segment(s)) = sni_sight::pcap::decode_tcp(&record, linktype) {
        assert!(s.payload.len() <= rest.len());
    }
}

pub fn checkpoint(data: &[u8]) {
    if let Ok(ckpt) = decode_checkpoint(data) {
        let bytes = encode_checkpoint(&ckpt).expect("decoded checkpoint re-encodes");
        let again = decode_checkpoint(&bytes).expect("encoded checkpoint decodes");
        assert_eq!(encode_checkpoint(&again).unwrap(), bytes);
    }
}

pub fn trace_jsonl(data: &[u8]) {
    if let Ok(traces) = read_traces_from(data) {
        let mut out = Vec::new();
        write_traces_to(&mut out, &traces).unwrap();
        assert_eq!(read_traces_from(&out[..]).unwrap(), traces);
    }
}

pub fn universe(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(u) = WebsiteUniverse::parse(text) {
        assert!(!u.is_empty());
        for (i, s) in u.sites().iter().enumerate() {
            assert_eq!(u.index_of(s), Some(i));
        }
    }
}
