//! Classic pcap decoding down to per-flow TCP byte streams.
//!
//! [`read_pcap`] yields raw records, [`decode_tcp`] peels Ethernet / IPv4 /
//! IPv6 / TCP, and [`stitch_flows`] orders each flow's payload by sequence
//! number. pcapng is not supported.

mod decode;
mod reader;
mod stitch;

use std::fmt;
use std::io;

use thiserror::Error;

pub use decode::{decode_tcp, Decoded, FlowKey, SkipReason, TcpSegment, TCP_PROTOCOL};
pub use reader::{
    read_pcap, read_pcap_bytes, LinkType, PcapHeader, PcapReader, RawRecord, TsResolution, GLOBAL_HEADER_LEN,
    MAGIC_MICROS, MAGIC_NANOS, RECORD_HEADER_LEN,
};
pub use stitch::{stitch_flows, FlowStream, SegmentMark};

#[derive(Debug, Error)]
pub enum PcapError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("truncated pcap global header: {found} of 24 bytes")]
    TruncatedHeader { found: usize },
    #[error("bad pcap magic 0x{0:08x} (pcapng and other formats are not supported)")]
    BadMagic(u32),
    #[error(
        "unsupported link type {0}; only Ethernet (1) and raw IP (101) are decoded \
         (for Linux cooked captures, re-capture on a concrete interface, e.g. tcpdump -i eth0)"
    )]
    UnsupportedLinkType(u32),
    #[error("truncated record at byte offset {offset}: needed {needed} bytes, found {found}")]
    TruncatedRecord { offset: u64, needed: usize, found: usize },
    #[error("record at byte offset {offset} claims {incl_len} bytes, above snaplen {snaplen}")]
    OversizedRecord { offset: u64, incl_len: u32, snaplen: u32 },
}

/// A packet whose headers claim TCP but do not add up.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed {layer} layer at offset {offset}: {reason}")]
pub struct MalformedLayer {
    pub layer: &'static str,
    pub offset: usize,
    pub reason: &'static str,
}

/// Capture-clock time with nanosecond precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp {
    pub secs: u64,
    pub nanos: u32,
}

impl Timestamp {
    pub fn from_micros(secs: u32, micros: u32) -> Self {
        Self::normalize(u64::from(secs), u64::from(micros) * 1_000)
    }

    pub fn from_nanos(secs: u32, nanos: u32) -> Self {
        Self::normalize(u64::from(secs), u64::from(nanos))
    }

    // Writers occasionally store fractions >= 1s; carry them over.
    fn normalize(secs: u64, nanos: u64) -> Self {
        Timestamp { secs: secs + nanos / 1_000_000_000, nanos: (nanos % 1_000_000_000) as u32 }
    }

    /// Nearest timestamp to a non-negative number of seconds.
    pub fn from_secs_f64(t: f64) -> Self {
        let t = t.max(0.0);
        let secs = t.floor();
        let mut nanos = ((t - secs) * 1e9).round() as u64;
        let mut secs = secs as u64;
        if nanos >= 1_000_000_000 {
            secs += 1;
            nanos -= 1_000_000_000;
        }
        Timestamp { secs, nanos: nanos as u32 }
    }

    pub fn as_secs_f64(self) -> f64 {
        self.secs as f64 + f64::from(self.nanos) * 1e-9
    }

    pub fn saturating_sub_nanos(self, earlier: Timestamp) -> u128 {
        let a = u128::from(self.secs) * 1_000_000_000 + u128::from(self.nanos);
        let b = u128::from(earlier.secs) * 1_000_000_000 + u128::from(earlier.nanos);
        a.saturating_sub(b)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:09}", self.secs, self.nanos)
    }
}
