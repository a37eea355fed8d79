use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::Path;

use super::{PcapError, Timestamp};

pub const MAGIC_MICROS: u32 = 0xa1b2_c3d4;
pub const MAGIC_NANOS: u32 = 0xa1b2_3c4d;

pub const GLOBAL_HEADER_LEN: usize = 24;
pub const RECORD_HEADER_LEN: usize = 16;

/// Records larger than this are rejected even when the header advertises a
/// bigger (or zero) snaplen.
const MAX_RECORD_LEN: u32 = 256 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkType {
    Ethernet,
    RawIp,
}

impl LinkType {
    pub const ETHERNET: u32 = 1;
    pub const RAW_IP: u32 = 101;
    pub const LINUX_SLL: u32 = 113;

    pub fn id(self) -> u32 {
        match self {
            LinkType::Ethernet => Self::ETHERNET,
            LinkType::RawIp => Self::RAW_IP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsResolution {
    Micros,
    Nanos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcapHeader {
    /// Magic as it reads in the file's own byte order (always one of the two
    /// native magics).
    pub magic: u32,
    pub big_endian: bool,
    pub version_major: u16,
    pub version_minor: u16,
    pub snaplen: u32,
    pub linktype: LinkType,
}

impl PcapHeader {
    pub fn resolution(&self) -> TsResolution {
        if self.magic == MAGIC_NANOS {
            TsResolution::Nanos
        } else {
            TsResolution::Micros
        }
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, PcapError> {
        if bytes.len() < GLOBAL_HEADER_LEN {
            return Err(PcapError::TruncatedHeader { found: bytes.len() });
        }
        let le = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
        let (magic, big_endian) = match le {
            MAGIC_MICROS | MAGIC_NANOS => (le, false),
            _ => {
                let be = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
                match be {
                    MAGIC_MICROS | MAGIC_NANOS => (be, true),
                    _ => return Err(PcapError::BadMagic(le)),
                }
            }
        };
        let u16_at = |o: usize| {
            let b = [bytes[o], bytes[o + 1]];
            if big_endian { u16::from_be_bytes(b) } else { u16::from_le_bytes(b) }
        };
        let u32_at = |o: usize| read_u32(&bytes[o..o + 4], big_endian);
        let linktype = match u32_at(20) {
            LinkType::ETHERNET => LinkType::Ethernet,
            LinkType::RAW_IP => LinkType::RawIp,
            other => return Err(PcapError::UnsupportedLinkType(other)),
        };
        Ok(PcapHeader {
            magic,
            big_endian,
            version_major: u16_at(4),
            version_minor: u16_at(6),
            snaplen: u32_at(16),
            linktype,
        })
    }

    fn max_record_len(&self) -> u32 {
        if self.snaplen == 0 {
            MAX_RECORD_LEN
        } else {
            self.snaplen.min(MAX_RECORD_LEN)
        }
    }
}

fn read_u32(b: &[u8], big_endian: bool) -> u32 {
    let b = [b[0], b[1], b[2], b[3]];
    if big_endian { u32::from_be_bytes(b) } else { u32::from_le_bytes(b) }
}

/// One packet record as stored in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    /// Position of the record header in the file.
    pub offset: u64,
    /// Zero-based record number.
    pub index: usize,
    pub timestamp: Timestamp,
    pub orig_len: u32,
    pub data: Vec<u8>,
}

/// Streaming classic-pcap reader. The global header is parsed eagerly; the
/// iterator then yields records in file order and stops after the first
/// error.
pub struct PcapReader<R> {
    inner: R,
    header: PcapHeader,
    offset: u64,
    index: usize,
    done: bool,
}

/// Reads up to `buf.len()` bytes, returning how many were available.
fn fill(reader: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut inner: R) -> Result<Self, PcapError> {
        let mut buf = [0u8; GLOBAL_HEADER_LEN];
        let n = fill(&mut inner, &mut buf)?;
        let header = PcapHeader::parse(&buf[..n])?;
        Ok(PcapReader { inner, header, offset: GLOBAL_HEADER_LEN as u64, index: 0, done: false })
    }

    pub fn header(&self) -> &PcapHeader {
        &self.header
    }

    fn next_record(&mut self) -> Result<Option<RawRecord>, PcapError> {
        let offset = self.offset;
        let mut hdr = [0u8; RECORD_HEADER_LEN];
        let n = fill(&mut self.inner, &mut hdr)?;
        if n == 0 {
            return Ok(None);
        }
        if n < RECORD_HEADER_LEN {
            return Err(PcapError::TruncatedRecord { offset, needed: RECORD_HEADER_LEN, found: n });
        }
        let be = self.header.big_endian;
        let ts_sec = read_u32(&hdr[0..4], be);
        let ts_frac = read_u32(&hdr[4..8], be);
        let incl_len = read_u32(&hdr[8..12], be);
        let orig_len = read_u32(&hdr[12..16], be);
        if incl_len > self.header.max_record_len() {
            return Err(PcapError::OversizedRecord { offset, incl_len, snaplen: self.header.snaplen });
        }
        let mut data = vec![0u8; incl_len as usize];
        let got = fill(&mut self.inner, &mut data)?;
        if got < data.len() {
            return Err(PcapError::TruncatedRecord {
                offset,
                needed: RECORD_HEADER_LEN + data.len(),
                found: RECORD_HEADER_LEN + got,
            });
        }
        let timestamp = match self.header.resolution() {
            TsResolution::Micros => Timestamp::from_micros(ts_sec, ts_frac),
            TsResolution::Nanos => Timestamp::from_nanos(ts_sec, ts_frac),
        };
        self.offset += (RECORD_HEADER_LEN + data.len()) as u64;
        let index = self.index;
        self.index += 1;
        Ok(Some(RawRecord { offset, index, timestamp, orig_len, data }))
    }
}

impl<R: Read> Iterator for PcapReader<R> {
    type Item = Result<RawRecord, PcapError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Opens a pcap file and parses its global header.
pub fn read_pcap(path: &Path) -> Result<PcapReader<BufReader<File>>, PcapError> {
    PcapReader::new(BufReader::new(File::open(path)?))
}

/// Decodes an in-memory capture completely.
pub fn read_pcap_bytes(bytes: &[u8]) -> Result<(PcapHeader, Vec<RawRecord>), PcapError> {
    let reader = PcapReader::new(bytes)?;
    let header = *reader.header();
    let records = reader.collect::<Result<Vec<_>, _>>()?;
    Ok((header, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn le_header(magic: u32, linktype: u32) -> Vec<u8> {
        let mut h = Vec::new();
        h.extend_from_slice(&magic.to_le_bytes());
        h.extend_from_slice(&2u16.to_le_bytes());
        h.extend_from_slice(&4u16.to_le_bytes());
        h.extend_from_slice(&0i32.to_le_bytes());
        h.extend_from_slice(&0u32.to_le_bytes());
        h.extend_from_slice(&65535u32.to_le_bytes());
        h.extend_from_slice(&linktype.to_le_bytes());
        h
    }

    #[test]
    fn empty_file_is_truncated_header() {
        assert!(matches!(read_pcap_bytes(&[]), Err(PcapError::TruncatedHeader { found: 0 })));
    }

    #[test]
    fn header_only_capture_has_no_records() {
        let (header, records) = read_pcap_bytes(&le_header(MAGIC_MICROS, 1)).unwrap();
        assert_eq!(header.snaplen, 65535);
        assert_eq!(header.linktype, LinkType::Ethernet);
        assert!(!header.big_endian);
        assert!(records.is_empty());
    }

    #[test]
    fn rejects_unknown_magic_and_linktypes() {
        assert!(matches!(read_pcap_bytes(&le_header(0x0a0d0d0a, 1)), Err(PcapError::BadMagic(0x0a0d0d0a))));
        assert!(matches!(read_pcap_bytes(&le_header(MAGIC_MICROS, 113)), Err(PcapError::UnsupportedLinkType(113))));
        assert!(matches!(read_pcap_bytes(&le_header(MAGIC_MICROS, 105)), Err(PcapError::UnsupportedLinkType(105))));
        let (h, _) = read_pcap_bytes(&le_header(MAGIC_NANOS, 101)).unwrap();
        assert_eq!(h.linktype, LinkType::RawIp);
        assert_eq!(h.resolution(), TsResolution::Nanos);
    }

    #[test]
    fn truncated_trailing_record_reports_offset() {
        let mut bytes = le_header(MAGIC_MICROS, 1);
        for v in [1u32, 2, 10, 10] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&[0u8; 10]);
        // second record: header claims 8 bytes, only 3 follow
        for v in [3u32, 4, 8, 8] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&[0u8; 3]);
        let mut reader = PcapReader::new(bytes.as_slice()).unwrap();
        let first = reader.next().unwrap().unwrap();
        assert_eq!(first.timestamp, Timestamp::from_micros(1, 2));
        match reader.next().unwrap() {
            Err(PcapError::TruncatedRecord { offset, needed, found }) => {
                assert_eq!(offset, 24 + 16 + 10);
                assert_eq!(needed, 24);
                assert_eq!(found, 19);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(reader.next().is_none());
    }

    #[test]
    fn oversized_record_is_rejected_before_allocation() {
        let mut bytes = le_header(MAGIC_MICROS, 1);
        for v in [0u32, 0, 70_000, 70_000] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        assert!(matches!(read_pcap_bytes(&bytes), Err(PcapError::OversizedRecord { incl_len: 70_000, .. })));
    }
}
