#!/usr/bin/env python3
"""Writes corpus/<target>/ seeds from the parser fixtures. Rerun after the
fixtures change; the checkpoint seed is produced by the CLI separately."""
import pathlib, struct

root = pathlib.Path(__file__).resolve().parent
fixtures = root.parent / "crates/core/tests/fixtures"
corpus = root / "corpus"


def put(target, name, data):
    d = corpus / target
    d.mkdir(parents=True, exist_ok=True)
    (d / name).write_bytes(data)


def records(pcap):
    magic = pcap[:4]
    endian = "<" if magic in (b"\xd4\xc3\xb2\xa1", b"\x4d\x3c\xb2\xa1") else ">"
    linktype = struct.unpack(endian + "I", pcap[20:24])[0]
    off = 24
    while off + 16 <= len(pcap):
        incl = struct.unpack(endian + "I", pcap[off + 8:off + 12])[0]
        yield linktype, pcap[off + 16:off + 16 + incl]
        off += 16 + incl


def tcp_payload(linktype, frame):
    """Ethernet (optionally one VLAN tag) or raw IPv4/IPv6 down to TCP payload."""
    if linktype == 1:
        ethertype, off = struct.unpack(">H", frame[12:14])[0], 14
        if ethertype == 0x8100:
            ethertype, off = struct.unpack(">H", frame[16:18])[0], 18
    elif linktype == 101:
        ethertype, off = (0x0800 if frame[0] >> 4 == 4 else 0x86DD), 0
    else:
        return None
    if ethertype == 0x0800:
        if frame[off + 9] != 6:
            return None
        total = struct.unpack(">H", frame[off + 2:off + 4])[0]
        end, off = off + total, off + (frame[off] & 0xF) * 4
    elif ethertype == 0x86DD:
        if frame[off + 6] != 6:
            return None
        end = off + 40 + struct.unpack(">H", frame[off + 4:off + 6])[0]
        off += 40
    else:
        return None
    return frame[off + (frame[off + 12] >> 4) * 4:end]


for pcap_path in sorted(fixtures.glob("*.pcap")):
    stem, pcap = pcap_path.stem, pcap_path.read_bytes()
    put("pcap_reader", stem, pcap)
    put("extract", stem, pcap)
    for i, (linktype, frame) in enumerate(records(pcap)):
        put("decode_tcp", f"{stem}_{i}", bytes([0 if linktype == 1 else 1]) + frame)
        payload = tcp_payload(linktype, frame)
        if payload:
            put("tls_records", f"{stem}_{i}", payload)
            # a whole ClientHello inside one record
            if len(payload) > 9 and payload[0] == 22 and payload[5] == 1:
                put("client_hello", f"{stem}_{i}", payload[5:5 + struct.unpack(">H", payload[3:5])[0]])

for jsonl in sorted((fixtures / "expected").glob("*.jsonl")):
    put("trace_jsonl", jsonl.stem, jsonl.read_bytes())

put("universe", "lines", b"# sites\nwww.ebay.com\nwww.bbc.co.uk\n\nwww.wikipedia.org\n")
put("universe", "json_array", b'["a.example", "b.example", "c.example"]')
put("universe", "duplicate", b"a.example\na.example\n")
put("trace_jsonl", "labelled", b'{"label":["a.example","b.example"],"events":[{"sni":"x.example","ts":1.5,"ver":"1.3"}]}\n')
