use crate::pcap::{FlowStream, SegmentMark};

pub const CONTENT_CHANGE_CIPHER_SPEC: u8 = 20;
pub const CONTENT_ALERT: u8 = 21;
pub const CONTENT_HANDSHAKE: u8 = 22;
pub const CONTENT_APPLICATION_DATA: u8 = 23;
pub const CONTENT_HEARTBEAT: u8 = 24;

pub const RECORD_HEADER_LEN: usize = 5;
/// 2^14 plaintext plus the largest expansion TLS permits.
pub const MAX_RECORD_BODY: usize = (1 << 14) + 2048;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TlsRecord {
    pub content_type: u8,
    pub version: u16,
    /// Byte offset of the record header within the flow.
    pub offset: usize,
    pub body: Vec<u8>,
    /// Segment holding the record's first byte.
    pub mark: SegmentMark,
}

/// A complete handshake message (4-byte header included), reassembled
/// across records when necessary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandshakeMessage {
    pub msg_type: u8,
    pub bytes: Vec<u8>,
    /// Mark of the record in which the message began.
    pub mark: SegmentMark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanIssue {
    /// Bytes after at least one valid record could not start a record.
    GarbageAfterRecords { offset: usize },
    /// The flow ended in the middle of a record.
    TruncatedRecord { offset: usize },
    /// A handshake message claimed more bytes than the records supplied.
    TruncatedHandshake,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordScan {
    pub records: Vec<TlsRecord>,
    pub handshakes: Vec<HandshakeMessage>,
    pub issue: Option<ScanIssue>,
}

impl RecordScan {
    /// Whether the flow looked like TLS at all.
    pub fn is_tls(&self) -> bool {
        !self.records.is_empty()
    }
}

fn plausible_header(h: &[u8]) -> bool {
    let content_type_ok = matches!(
        h[0],
        CONTENT_CHANGE_CIPHER_SPEC | CONTENT_ALERT | CONTENT_HANDSHAKE | CONTENT_APPLICATION_DATA | CONTENT_HEARTBEAT
    );
    let len = usize::from(u16::from_be_bytes([h[3], h[4]]));
    content_type_ok && h[1] == 3 && h[2] <= 4 && len <= MAX_RECORD_BODY
}

/// Splits a flow into TLS records and reassembles the plaintext handshake
/// messages they carry.
///
/// Scanning stops at the first five bytes that cannot be a record header.
/// If that happens at offset zero the flow is simply not TLS. Handshake
/// records after a ChangeCipherSpec are encrypted and are not interpreted.
pub fn parse_records(flow: &FlowStream) -> RecordScan {
    let bytes = flow.bytes.as_slice();
    let mut scan = RecordScan::default();
    let mut pos = 0;
    while pos < bytes.len() {
        if bytes.len() - pos < RECORD_HEADER_LEN {
            if plausible_prefix(&bytes[pos..]) && !scan.records.is_empty() {
                scan.issue = Some(ScanIssue::TruncatedRecord { offset: pos });
            } else if !scan.records.is_empty() {
                scan.issue = Some(ScanIssue::GarbageAfterRecords { offset: pos });
            }
            break;
        }
        let header = &bytes[pos..pos + RECORD_HEADER_LEN];
        if !plausible_header(header) {
            if !scan.records.is_empty() {
                scan.issue = Some(ScanIssue::GarbageAfterRecords { offset: pos });
            }
            break;
        }
        let len = usize::from(u16::from_be_bytes([header[3], header[4]]));
        let body_start = pos + RECORD_HEADER_LEN;
        if bytes.len() - body_start < len {
            if !scan.records.is_empty() || header[0] == CONTENT_HANDSHAKE {
                scan.issue = Some(ScanIssue::TruncatedRecord { offset: pos });
            }
            break;
        }
        scan.records.push(TlsRecord {
            content_type: header[0],
            version: u16::from_be_bytes([header[1], header[2]]),
            offset: pos,
            body: bytes[body_start..body_start + len].to_vec(),
            mark: flow.mark_at(pos),
        });
        pos = body_start + len;
    }
    let (handshakes, truncated) = coalesce_handshakes(&scan.records);
    scan.handshakes = handshakes;
    if truncated && scan.issue.is_none() {
        scan.issue = Some(ScanIssue::TruncatedHandshake);
    }
    scan
}

fn plausible_prefix(b: &[u8]) -> bool {
    let ok_type = |t: u8| (CONTENT_CHANGE_CIPHER_SPEC..=CONTENT_HEARTBEAT).contains(&t);
    match b {
        [] => false,
        [t] => ok_type(*t),
        [t, major, ..] => ok_type(*t) && *major == 3,
    }
}

fn coalesce_handshakes(records: &[TlsRecord]) -> (Vec<HandshakeMessage>, bool) {
    let mut out = Vec::new();
    let mut buf: Vec<u8> = Vec::new();
    // (offset in buf, mark) for each record that contributed to buf
    let mut origins: Vec<(usize, SegmentMark)> = Vec::new();
    let origin_of = |origins: &[(usize, SegmentMark)], at: usize| {
        origins.iter().rev().find(|(o, _)| *o <= at).map(|(_, m)| *m)
    };
    for rec in records {
        match rec.content_type {
            CONTENT_HANDSHAKE => {}
            CONTENT_CHANGE_CIPHER_SPEC | CONTENT_APPLICATION_DATA => break,
            _ => continue,
        }
        origins.push((buf.len(), rec.mark));
        buf.extend_from_slice(&rec.body);
        let mut consumed = 0;
        while buf.len() - consumed >= 4 {
            let len = (usize::from(buf[consumed + 1]) << 16)
                | (usize::from(buf[consumed + 2]) << 8)
                | usize::from(buf[consumed + 3]);
            if buf.len() - consumed < 4 + len {
                break;
            }
            out.push(HandshakeMessage {
                msg_type: buf[consumed],
                bytes: buf[consumed..consumed + 4 + len].to_vec(),
                mark: origin_of(&origins, consumed).unwrap_or(rec.mark),
            });
            consumed += 4 + len;
        }
        if consumed == buf.len() {
            buf.clear();
            origins.clear();
        } else if consumed > 0 {
            let head = origin_of(&origins, consumed).unwrap_or(rec.mark);
            buf.drain(..consumed);
            origins.retain(|(o, _)| *o > consumed);
            for (o, _) in origins.iter_mut() {
                *o -= consumed;
            }
            origins.insert(0, (0, head));
        }
    }
    (out, !buf.is_empty())
}
