use std::collections::HashMap;

use super::{FlowKey, TcpSegment, Timestamp};

/// Start of a segment's contribution to a stitched stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentMark {
    pub offset: usize,
    pub timestamp: Timestamp,
    pub packet_index: usize,
}

/// One direction of a TCP connection with its payload in sequence order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowStream {
    pub key: FlowKey,
    pub bytes: Vec<u8>,
    /// Sorted by offset; the first mark is at offset 0.
    pub marks: Vec<SegmentMark>,
    /// Set when a sequence gap cut the stream short.
    pub truncated_at_gap: bool,
}

impl FlowStream {
    pub fn first_timestamp(&self) -> Timestamp {
        self.marks[0].timestamp
    }

    /// The segment that supplied byte `offset`.
    pub fn mark_at(&self, offset: usize) -> SegmentMark {
        let i = self.marks.partition_point(|m| m.offset <= offset);
        self.marks[i.saturating_sub(1)]
    }
}

/// Groups segments by flow and concatenates each flow's payloads in
/// sequence-number order.
///
/// Exact duplicates are dropped and partially overlapping retransmissions
/// only contribute their unseen tail; a hole in the sequence space ends the
/// stream and sets [`FlowStream::truncated_at_gap`]. Flows without payload
/// are omitted. Output order is the order in which flows first carried
/// payload.
pub fn stitch_flows(segments: impl IntoIterator<Item = TcpSegment>) -> Vec<FlowStream> {
    let mut order: Vec<FlowKey> = Vec::new();
    let mut groups: HashMap<FlowKey, Vec<TcpSegment>> = HashMap::new();
    for seg in segments {
        if seg.payload.is_empty() {
            continue;
        }
        groups
            .entry(seg.flow_key)
            .or_insert_with(|| {
                order.push(seg.flow_key);
                Vec::new()
            })
            .push(seg);
    }
    order
        .into_iter()
        .map(|key| stitch_one(key, groups.remove(&key).unwrap_or_default()))
        .collect()
}

fn stitch_one(key: FlowKey, mut segs: Vec<TcpSegment>) -> FlowStream {
    // Sequence numbers relative to the earliest-captured segment, signed so
    // that segments captured out of order before it still sort first.
    let base = segs.iter().min_by_key(|s| (s.timestamp, s.packet_index)).map(|s| s.seq).unwrap_or(0);
    let rel = |s: &TcpSegment| i64::from(s.seq.wrapping_sub(base) as i32);
    segs.sort_by(|a, b| {
        rel(a)
            .cmp(&rel(b))
            .then(b.payload.len().cmp(&a.payload.len()))
            .then(a.payload.cmp(&b.payload))
            .then((a.timestamp, a.packet_index).cmp(&(b.timestamp, b.packet_index)))
    });

    let mut bytes = Vec::new();
    let mut marks = Vec::new();
    let mut truncated_at_gap = false;
    let mut next = rel(&segs[0]);
    for seg in &segs {
        let start = rel(seg);
        let end = start + seg.payload.len() as i64;
        if start > next {
            truncated_at_gap = true;
            break;
        }
        if end <= next {
            continue;
        }
        let skip = (next - start) as usize;
        marks.push(SegmentMark { offset: bytes.len(), timestamp: seg.timestamp, packet_index: seg.packet_index });
        bytes.extend_from_slice(&seg.payload[skip..]);
        next = end;
    }
    FlowStream { key, bytes, marks, truncated_at_gap }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::net::{IpAddr, Ipv4Addr};

    fn key(port: u16) -> FlowKey {
        FlowKey {
            src: IpAddr::V4(Ipv4Addr::new(10, 0, 0, 1)),
            dst: IpAddr::V4(Ipv4Addr::new(10, 0, 0, 2)),
            src_port: port,
            dst_port: 443,
        }
    }

    fn seg(port: u16, seq: u32, payload: &[u8], idx: usize) -> TcpSegment {
        TcpSegment {
            flow_key: key(port),
            seq,
            syn: false,
            timestamp: Timestamp { secs: 100, nanos: idx as u32 },
            packet_index: idx,
            payload: payload.to_vec(),
        }
    }

    #[test]
    fn in_order_segments_concatenate() {
        let flows = stitch_flows(vec![seg(1, 1000, b"hello", 0), seg(1, 1005, b"world", 1)]);
        assert_eq!(flows.len(), 1);
        assert_eq!(flows[0].bytes, b"helloworld");
        assert_eq!(flows[0].marks.len(), 2);
        assert_eq!(flows[0].mark_at(7).offset, 5);
        assert!(!flows[0].truncated_at_gap);
    }

    #[test]
    fn reversed_and_duplicated_segments_give_same_bytes() {
        let forward = stitch_flows(vec![seg(1, 1000, b"hello", 0), seg(1, 1005, b"world", 1)]);
        let reversed = stitch_flows(vec![seg(1, 1005, b"world", 0), seg(1, 1000, b"hello", 1)]);
        let duplicated =
            stitch_flows(vec![seg(1, 1000, b"hello", 0), seg(1, 1000, b"hello", 1), seg(1, 1005, b"world", 2)]);
        assert_eq!(reversed[0].bytes, forward[0].bytes);
        assert_eq!(duplicated[0].bytes, forward[0].bytes);
    }

    #[test]
    fn gap_truncates_and_flags() {
        let flows = stitch_flows(vec![seg(1, 1000, b"hello", 0), seg(1, 1010, b"late", 1)]);
        assert_eq!(flows[0].bytes, b"hello");
        assert!(flows[0].truncated_at_gap);
    }

    #[test]
    fn flows_are_separated_and_keep_first_seen_order() {
        let flows = stitch_flows(vec![seg(2, 5, b"b", 0), seg(1, 9, b"a", 1), seg(2, 6, b"c", 2)]);
        assert_eq!(flows.len(), 2);
        assert_eq!(flows[0].key.src_port, 2);
        assert_eq!(flows[0].bytes, b"bc");
        assert_eq!(flows[1].bytes, b"a");
    }

    #[test]
    fn sequence_wraparound() {
        let flows = stitch_flows(vec![seg(1, u32::MAX - 1, b"ab", 0), seg(1, 0, b"cd", 1)]);
        assert_eq!(flows[0].bytes, b"abcd");
    }

    proptest! {
        #[test]
        fn permutation_invariant(chunks in prop::collection::vec(prop::collection::vec(any::<u8>(), 1..20), 1..12),
                                 start in any::<u32>(), shuffle_seed in any::<u64>()) {
            let mut segs = Vec::new();
            let mut seq = start;
            for (i, c) in chunks.iter().enumerate() {
                segs.push(seg(7, seq, c, i));
                seq = seq.wrapping_add(c.len() as u32);
            }
            let expected: Vec<u8> = chunks.concat();
            let mut permuted = segs.clone();
            use rand::{seq::SliceRandom, SeedableRng};
            permuted.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(shuffle_seed));
            prop_assert_eq!(&stitch_flows(segs)[0].bytes, &expected);
            prop_assert_eq!(&stitch_flows(permuted)[0].bytes, &expected);
        }
    }
}
