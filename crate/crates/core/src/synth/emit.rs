//! Re-encodes traces as classic pcap: every event becomes one
//! Ethernet/IPv4/TCP packet carrying a TLS record with a ClientHello.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use crate::pcap::Timestamp;
use crate::tls::{EXT_SERVER_NAME, EXT_SUPPORTED_VERSIONS, HANDSHAKE_CLIENT_HELLO, SNI_HOST_NAME, TLS1_0, TLS1_2, TLS1_3};
use crate::trace::{TlsVersion, Trace};

const SERVER_PORT: u16 = 443;
const SNAPLEN: u32 = 65_535;

fn push_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn push_u24(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_be_bytes()[1..]);
}

/// ClientHello handshake message (with its 4-byte header) naming `sni`.
/// TLS 1.3 adds supported_versions listing 1.3 then 1.2; TLS 1.2 omits it.
pub fn client_hello(sni: &str, version: TlsVersion, random: [u8; 32]) -> Vec<u8> {
    let mut body = Vec::new();
    push_u16(&mut body, TLS1_2);
    body.extend_from_slice(&random);
    body.push(32);
    body.extend_from_slice(&random);
    let suites: &[u16] = match version {
        TlsVersion::Tls13 => &[0x1301, 0x1302, 0xc02f],
        TlsVersion::Tls12 => &[0xc02f, 0xc030, 0x009e],
    };
    push_u16(&mut body, (suites.len() * 2) as u16);
    for &s in suites {
        push_u16(&mut body, s);
    }
    body.extend_from_slice(&[1, 0]);

    let mut ext = Vec::new();
    let name = sni.as_bytes();
    push_u16(&mut ext, EXT_SERVER_NAME);
    push_u16(&mut ext, (name.len() + 5) as u16);
    push_u16(&mut ext, (name.len() + 3) as u16);
    ext.push(SNI_HOST_NAME);
    push_u16(&mut ext, name.len() as u16);
    ext.extend_from_slice(name);
    if version == TlsVersion::Tls13 {
        push_u16(&mut ext, EXT_SUPPORTED_VERSIONS);
        push_u16(&mut ext, 5);
        ext.push(4);
        push_u16(&mut ext, TLS1_3);
        push_u16(&mut ext, TLS1_2);
    }
    push_u16(&mut body, ext.len() as u16);
    body.extend_from_slice(&ext);

    let mut msg = vec![HANDSHAKE_CLIENT_HELLO];
    push_u24(&mut msg, body.len());
    msg.extend_from_slice(&body);
    msg
}

/// Wraps a handshake message in one TLS record.
pub fn handshake_record(message: &[u8]) -> Vec<u8> {
    let mut rec = vec![22];
    push_u16(&mut rec, TLS1_0);
    push_u16(&mut rec, message.len() as u16);
    rec.extend_from_slice(message);
    rec
}

fn ipv4_checksum(header: &[u8]) -> u16 {
    let mut sum: u32 = header.chunks(2).map(|c| u32::from(u16::from_be_bytes([c[0], c[1]]))).sum();
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

/// Ethernet II + IPv4 + TCP (PSH|ACK) frame around `payload`.
pub fn tcp_frame(src: Ipv4Addr, dst: Ipv4Addr, src_port: u16, dst_port: u16, seq: u32, payload: &[u8]) -> Vec<u8> {
    let mut f = Vec::with_capacity(54 + payload.len());
    f.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x01, 0x02, 0, 0, 0, 0, 0x02, 0x08, 0x00]);
    let ip_start = f.len();
    f.extend_from_slice(&[0x45, 0]);
    push_u16(&mut f, (20 + 20 + payload.len()) as u16);
    f.extend_from_slice(&[0, 0, 0x40, 0, 64, 6, 0, 0]);
    f.extend_from_slice(&src.octets());
    f.extend_from_slice(&dst.octets());
    let sum = ipv4_checksum(&f[ip_start..ip_start + 20]);
    f[ip_start + 10..ip_start + 12].copy_from_slice(&sum.to_be_bytes());
    push_u16(&mut f, src_port);
    push_u16(&mut f, dst_port);
    f.extend_from_slice(&seq.to_be_bytes());
    f.extend_from_slice(&1u32.to_be_bytes());
    f.extend_from_slice(&[0x50, 0x18, 0xff, 0xff, 0, 0, 0, 0]);
    f.extend_from_slice(payload);
    f
}

/// Classic microsecond pcap, little-endian, Ethernet link type.
pub fn pcap_header() -> Vec<u8> {
    let mut h = Vec::with_capacity(24);
    h.extend_from_slice(&0xa1b2_c3d4u32.to_le_bytes());
    h.extend_from_slice(&2u16.to_le_bytes());
    h.extend_from_slice(&4u16.to_le_bytes());
    h.extend_from_slice(&0i32.to_le_bytes());
    h.extend_from_slice(&0u32.to_le_bytes());
    h.extend_from_slice(&SNAPLEN.to_le_bytes());
    h.extend_from_slice(&1u32.to_le_bytes());
    h
}

/// Rounds `ts` to the nearest microsecond; truncating would turn a
/// float's `…241999` ns into the wrong microsecond.
pub fn pcap_record(out: &mut Vec<u8>, ts: Timestamp, frame: &[u8]) {
    let micros = (ts.nanos + 500) / 1000;
    let (secs, micros) = if micros == 1_000_000 { (ts.secs + 1, 0) } else { (ts.secs, micros) };
    out.extend_from_slice(&(secs as u32).to_le_bytes());
    out.extend_from_slice(&micros.to_le_bytes());
    out.extend_from_slice(&(frame.len() as u32).to_le_bytes());
    out.extend_from_slice(&(frame.len() as u32).to_le_bytes());
    out.extend_from_slice(frame);
}

fn flow_addresses(flow: usize) -> (Ipv4Addr, Ipv4Addr, u16) {
    let f = flow as u32;
    let src = Ipv4Addr::from(0x0a00_0000 | (f & 0x00ff_ffff));
    let dst = Ipv4Addr::new(192, 0, 2, (f % 250) as u8 + 1);
    let port = 49_152 + (f % 16_000) as u16;
    (src, dst, port)
}

/// Emits one packet per event. `groups[i]` names the connection event `i`
/// would ideally share; a group is split into a new TCP flow whenever a
/// server name would repeat on the same flow, so per-flow deduplication
/// never merges distinct events.
pub fn emit_pcap_grouped(trace: &Trace, groups: &[usize]) -> Vec<u8> {
    assert_eq!(groups.len(), trace.events.len());
    let mut out = pcap_header();
    // group → (flow id, names on it, next sequence number)
    let mut open: BTreeMap<usize, (usize, BTreeSet<&str>, u32)> = BTreeMap::new();
    let mut flows = 0usize;
    for (i, (event, &group)) in trace.events.iter().zip(groups).enumerate() {
        let entry = open.entry(group).or_insert_with(|| {
            flows += 1;
            (flows - 1, BTreeSet::new(), 1)
        });
        if entry.1.contains(event.sni.as_str()) {
            flows += 1;
            *entry = (flows - 1, BTreeSet::new(), 1);
        }
        entry.1.insert(&event.sni);
        let mut random = [0u8; 32];
        random[..8].copy_from_slice(&(i as u64).to_be_bytes());
        let payload = handshake_record(&client_hello(&event.sni, event.ver, random));
        let (src, dst, port) = flow_addresses(entry.0);
        let frame = tcp_frame(src, dst, port, SERVER_PORT, entry.2, &payload);
        entry.2 = entry.2.wrapping_add(payload.len() as u32);
        pcap_record(&mut out, Timestamp::from_secs_f64(event.ts), &frame);
    }
    out
}

/// [`emit_pcap_grouped`] with all events in one group.
pub fn emit_pcap(trace: &Trace) -> Vec<u8> {
    emit_pcap_grouped(trace, &vec![0; trace.events.len()])
}
