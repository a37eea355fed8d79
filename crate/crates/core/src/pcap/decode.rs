use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use super::{LinkType, MalformedLayer, RawRecord, Timestamp};

pub const TCP_PROTOCOL: u8 = 6;

const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_IPV6: u16 = 0x86dd;
const ETHERTYPE_VLAN: u16 = 0x8100;

/// Directional TCP 5-tuple (the protocol is always TCP).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowKey {
    pub src: IpAddr,
    pub dst: IpAddr,
    pub src_port: u16,
    pub dst_port: u16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcpSegment {
    pub flow_key: FlowKey,
    pub seq: u32,
    pub syn: bool,
    pub timestamp: Timestamp,
    /// Record number in the capture, used to break timestamp ties.
    pub packet_index: usize,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    /// Too short to carry a link or IP header at all.
    Runt,
    NonIp,
    NonTcp,
    /// IPv4 fragment or IPv6 with extension headers.
    Fragment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    Segment(TcpSegment),
    Skip(SkipReason),
}

fn be16(b: &[u8], o: usize) -> u16 {
    u16::from_be_bytes([b[o], b[o + 1]])
}

fn be32(b: &[u8], o: usize) -> u32 {
    u32::from_be_bytes([b[o], b[o + 1], b[o + 2], b[o + 3]])
}

fn malformed(layer: &'static str, offset: usize, reason: &'static str) -> MalformedLayer {
    MalformedLayer { layer, offset, reason }
}

/// Decodes one record down to TCP. Anything that is not TCP over IP is a
/// [`Decoded::Skip`]; an error is only returned for packets whose IP header
/// says TCP but whose lengths are inconsistent.
pub fn decode_tcp(record: &RawRecord, linktype: LinkType) -> Result<Decoded, MalformedLayer> {
    let data = record.data.as_slice();
    let (ip_offset, ethertype) = match linktype {
        LinkType::Ethernet => {
            if data.len() < 14 {
                return Ok(Decoded::Skip(SkipReason::Runt));
            }
            let mut ethertype = be16(data, 12);
            let mut offset = 14;
            if ethertype == ETHERTYPE_VLAN {
                if data.len() < 18 {
                    return Ok(Decoded::Skip(SkipReason::Runt));
                }
                ethertype = be16(data, 16);
                offset = 18;
            }
            (offset, ethertype)
        }
        LinkType::RawIp => match data.first().map(|b| b >> 4) {
            Some(4) => (0, ETHERTYPE_IPV4),
            Some(6) => (0, ETHERTYPE_IPV6),
            Some(_) => return Ok(Decoded::Skip(SkipReason::NonIp)),
            None => return Ok(Decoded::Skip(SkipReason::Runt)),
        },
    };
    let ip = &data[ip_offset..];
    let (src, dst, tcp_start, tcp_end) = match ethertype {
        ETHERTYPE_IPV4 => {
            if ip.len() < 20 {
                return Ok(Decoded::Skip(SkipReason::Runt));
            }
            if ip[0] >> 4 != 4 {
                return Ok(Decoded::Skip(SkipReason::NonIp));
            }
            if ip[9] != TCP_PROTOCOL {
                return Ok(Decoded::Skip(SkipReason::NonTcp));
            }
            let flags_frag = be16(ip, 6);
            if flags_frag & 0x3fff != 0 {
                return Ok(Decoded::Skip(SkipReason::Fragment));
            }
            let header_len = usize::from(ip[0] & 0x0f) * 4;
            let total_len = usize::from(be16(ip, 2));
            if header_len < 20 {
                return Err(malformed("ipv4", ip_offset, "header length below 20 bytes"));
            }
            if total_len < header_len {
                return Err(malformed("ipv4", ip_offset + 2, "total length smaller than header length"));
            }
            if total_len > ip.len() {
                return Err(malformed("ipv4", ip_offset + 2, "total length exceeds captured bytes"));
            }
            let src = Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]);
            let dst = Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]);
            (IpAddr::V4(src), IpAddr::V4(dst), header_len, total_len)
        }
        ETHERTYPE_IPV6 => {
            if ip.len() < 40 {
                return Ok(Decoded::Skip(SkipReason::Runt));
            }
            if ip[0] >> 4 != 6 {
                return Ok(Decoded::Skip(SkipReason::NonIp));
            }
            match ip[6] {
                TCP_PROTOCOL => {}
                // hop-by-hop, routing, fragment, destination options
                0 | 43 | 44 | 60 => return Ok(Decoded::Skip(SkipReason::Fragment)),
                _ => return Ok(Decoded::Skip(SkipReason::NonTcp)),
            }
            let payload_len = usize::from(be16(ip, 4));
            if 40 + payload_len > ip.len() {
                return Err(malformed("ipv6", ip_offset + 4, "payload length exceeds captured bytes"));
            }
            let src: [u8; 16] = ip[8..24].try_into().unwrap();
            let dst: [u8; 16] = ip[24..40].try_into().unwrap();
            (IpAddr::V6(Ipv6Addr::from(src)), IpAddr::V6(Ipv6Addr::from(dst)), 40, 40 + payload_len)
        }
        _ => return Ok(Decoded::Skip(SkipReason::NonIp)),
    };
    let tcp = &ip[tcp_start..tcp_end];
    let tcp_offset = ip_offset + tcp_start;
    if tcp.len() < 20 {
        return Err(malformed("tcp", tcp_offset, "segment shorter than the minimal TCP header"));
    }
    let data_offset = usize::from(tcp[12] >> 4) * 4;
    if data_offset < 20 {
        return Err(malformed("tcp", tcp_offset + 12, "data offset below 20 bytes"));
    }
    if data_offset > tcp.len() {
        return Err(malformed("tcp", tcp_offset + 12, "data offset beyond segment end"));
    }
    Ok(Decoded::Segment(TcpSegment {
        flow_key: FlowKey { src, dst, src_port: be16(tcp, 0), dst_port: be16(tcp, 2) },
        seq: be32(tcp, 4),
        syn: tcp[13] & 0x02 != 0,
        timestamp: record.timestamp,
        packet_index: record.index,
        payload: tcp[data_offset..].to_vec(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(data: Vec<u8>) -> RawRecord {
        RawRecord { offset: 24, index: 0, timestamp: Timestamp::default(), orig_len: data.len() as u32, data }
    }

    // Ethernet + IPv4 + TCP carrying "AB", annotated field by field.
    fn minimal_tcp_ab() -> Vec<u8> {
        let mut p = Vec::new();
        p.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x01]); // dst mac
        p.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x02]); // src mac
        p.extend_from_slice(&[0x08, 0x00]); // ethertype IPv4
        p.extend_from_slice(&[0x45, 0x00]); // v4, ihl 5, tos
        p.extend_from_slice(&[0x00, 0x2a]); // total length 42 = 20 + 20 + 2
        p.extend_from_slice(&[0x00, 0x01, 0x40, 0x00]); // id, DF
        p.extend_from_slice(&[0x40, 0x06, 0x00, 0x00]); // ttl 64, proto TCP, checksum (unchecked)
        p.extend_from_slice(&[10, 0, 0, 1, 10, 0, 0, 2]); // src, dst
        p.extend_from_slice(&[0xc0, 0x00, 0x01, 0xbb]); // ports 49152 -> 443
        p.extend_from_slice(&[0x00, 0x00, 0x03, 0xe8]); // seq 1000
        p.extend_from_slice(&[0x00, 0x00, 0x00, 0x00]); // ack
        p.extend_from_slice(&[0x50, 0x18, 0xff, 0xff]); // data offset 5, PSH|ACK, window
        p.extend_from_slice(&[0x00, 0x00, 0x00, 0x00]); // checksum, urgent
        p.extend_from_slice(b"AB");
        p
    }

    #[test]
    fn minimal_segment_carries_payload() {
        let Decoded::Segment(seg) = decode_tcp(&record(minimal_tcp_ab()), LinkType::Ethernet).unwrap() else {
            panic!("expected a segment");
        };
        assert_eq!(seg.payload, b"AB");
        assert_eq!(seg.seq, 1000);
        assert_eq!(seg.flow_key.src_port, 49152);
        assert_eq!(seg.flow_key.dst_port, 443);
        assert_eq!(seg.flow_key.src, IpAddr::V4(Ipv4Addr::new(10, 0, 0, 1)));
    }

    #[test]
    fn ethernet_padding_is_cut_by_total_length() {
        let mut p = minimal_tcp_ab();
        p.extend_from_slice(&[0u8; 6]);
        let Decoded::Segment(seg) = decode_tcp(&record(p), LinkType::Ethernet).unwrap() else { panic!() };
        assert_eq!(seg.payload, b"AB");
    }

    #[test]
    fn arp_and_udp_are_skipped() {
        let mut arp = vec![0xff; 12];
        arp.extend_from_slice(&[0x08, 0x06]);
        arp.extend_from_slice(&[0u8; 28]);
        assert_eq!(decode_tcp(&record(arp), LinkType::Ethernet).unwrap(), Decoded::Skip(SkipReason::NonIp));

        let mut udp = minimal_tcp_ab();
        udp[14 + 9] = 17;
        assert_eq!(decode_tcp(&record(udp), LinkType::Ethernet).unwrap(), Decoded::Skip(SkipReason::NonTcp));
    }

    #[test]
    fn inconsistent_lengths_are_malformed() {
        let mut p = minimal_tcp_ab();
        p[14 + 3] = 0xff; // total length 255 > captured
        let err = decode_tcp(&record(p), LinkType::Ethernet).unwrap_err();
        assert_eq!(err.layer, "ipv4");
        assert_eq!(err.offset, 16);

        let mut p = minimal_tcp_ab();
        p[14 + 20 + 12] = 0xf0; // data offset 60 > 22-byte segment
        let err = decode_tcp(&record(p), LinkType::Ethernet).unwrap_err();
        assert_eq!(err.layer, "tcp");
    }

    #[test]
    fn raw_ip_linktype_skips_link_header() {
        let p = minimal_tcp_ab()[14..].to_vec();
        let Decoded::Segment(seg) = decode_tcp(&record(p), LinkType::RawIp).unwrap() else { panic!() };
        assert_eq!(seg.payload, b"AB");
    }

    #[test]
    fn fragments_are_skipped() {
        let mut p = minimal_tcp_ab();
        p[14 + 6] = 0x20; // more fragments
        assert_eq!(decode_tcp(&record(p), LinkType::Ethernet).unwrap(), Decoded::Skip(SkipReason::Fragment));
    }
}
