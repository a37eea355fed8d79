use std::io::Read;
use std::path::Path;
use std::time::Duration;

use log::debug;

use crate::pcap::{decode_tcp, stitch_flows, Decoded, FlowKey, PcapError, PcapReader, Timestamp};
use crate::trace::{TlsVersion, Trace, TraceEvent};

use super::{parse_client_hello, parse_records, HANDSHAKE_CLIENT_HELLO};

/// One observed server name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SniEvent {
    pub server_name: String,
    pub timestamp: Timestamp,
    pub tls_version: TlsVersion,
    pub flow_key: FlowKey,
    /// Record number of the packet holding the ClientHello's first byte.
    pub packet_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractOptions {
    /// Identical server names seen again on the same flow within this window
    /// are treated as retransmissions. `None` keeps every ClientHello.
    pub dedup_window: Option<Duration>,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions { dedup_window: Some(Duration::from_secs(1)) }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractStats {
    pub packets: usize,
    pub tcp_segments: usize,
    pub skipped_packets: usize,
    pub malformed_packets: usize,
    pub flows: usize,
    pub tls_flows: usize,
    pub flagged_flows: usize,
    pub client_hellos: usize,
    pub malformed_hellos: usize,
    pub dropped_version: usize,
    pub dropped_no_sni: usize,
    pub deduplicated: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extraction {
    /// Sorted by timestamp, ties by packet order.
    pub events: Vec<SniEvent>,
    pub stats: ExtractStats,
}

/// Server names of every TLS 1.2/1.3 ClientHello in the capture, oldest
/// first.
pub fn extract_trace(path: &Path) -> Result<Vec<SniEvent>, PcapError> {
    let file = std::fs::File::open(path)?;
    Ok(extract_from_reader(std::io::BufReader::new(file), ExtractOptions::default())?.events)
}

pub fn extract_from_bytes(bytes: &[u8], options: ExtractOptions) -> Result<Extraction, PcapError> {
    extract_from_reader(bytes, options)
}

/// Runs pcap decoding, flow stitching, record scanning and ClientHello
/// parsing. Only file-level pcap errors are returned; packet and flow level
/// problems are counted in [`ExtractStats`].
pub fn extract_from_reader<R: Read>(reader: R, options: ExtractOptions) -> Result<Extraction, PcapError> {
    let reader = PcapReader::new(reader)?;
    let linktype = reader.header().linktype;
    let mut stats = ExtractStats::default();
    let mut segments = Vec::new();
    for record in reader {
        let record = record?;
        stats.packets += 1;
        match decode_tcp(&record, linktype) {
            Ok(Decoded::Segment(seg)) => {
                stats.tcp_segments += 1;
                segments.push(seg);
            }
            Ok(Decoded::Skip(_)) => stats.skipped_packets += 1,
            Err(e) => {
                debug!("packet {} skipped: {e}", record.index);
                stats.malformed_packets += 1;
            }
        }
    }

    // (timestamp, packet index, position within flow) orders the merge
    let mut keyed: Vec<((Timestamp, usize, usize), SniEvent)> = Vec::new();
    for flow in stitch_flows(segments) {
        stats.flows += 1;
        let scan = parse_records(&flow);
        if !scan.is_tls() {
            continue;
        }
        stats.tls_flows += 1;
        if scan.issue.is_some() || flow.truncated_at_gap {
            stats.flagged_flows += 1;
        }
        let mut last_seen: Vec<(String, Timestamp)> = Vec::new();
        for (position, msg) in scan.handshakes.iter().enumerate() {
            if msg.msg_type != HANDSHAKE_CLIENT_HELLO {
                continue;
            }
            stats.client_hellos += 1;
            let hello = match parse_client_hello(&msg.bytes) {
                Ok(h) => h,
                Err(e) => {
                    debug!("flow {:?}: {e}", flow.key);
                    stats.malformed_hellos += 1;
                    continue;
                }
            };
            let Some(tls_version) = hello.negotiable_version() else {
                stats.dropped_version += 1;
                continue;
            };
            let Some(server_name) = hello.sni else {
                stats.dropped_no_sni += 1;
                continue;
            };
            let ts = msg.mark.timestamp;
            if let Some(window) = options.dedup_window {
                let repeat = last_seen.iter().any(|(name, seen)| {
                    *name == server_name && ts.saturating_sub_nanos(*seen) <= window.as_nanos()
                });
                if repeat {
                    stats.deduplicated += 1;
                    continue;
                }
                last_seen.retain(|(name, _)| *name != server_name);
                last_seen.push((server_name.clone(), ts));
            }
            keyed.push((
                (ts, msg.mark.packet_index, position),
                SniEvent {
                    server_name,
                    timestamp: ts,
                    tls_version,
                    flow_key: flow.key,
                    packet_index: msg.mark.packet_index,
                },
            ));
        }
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(Extraction { events: keyed.into_iter().map(|(_, e)| e).collect(), stats })
}

/// Drops flow details and attaches a label.
pub fn events_to_trace(label: Vec<String>, events: &[SniEvent]) -> Trace {
    Trace {
        label,
        events: events
            .iter()
            .map(|e| TraceEvent { sni: e.server_name.clone(), ts: e.timestamp.as_secs_f64(), ver: e.tls_version })
            .collect(),
    }
}
