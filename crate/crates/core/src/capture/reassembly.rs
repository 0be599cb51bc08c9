//! In-order TCP stream reassembly and message segmentation.

use std::collections::HashMap;
use std::fmt;
use std::net::Ipv4Addr;

use crate::codec::response::text_message_len;
use crate::codec::tplink;
use crate::protocol::Protocol;

use super::pcap::{Direction, PacketRecord};

pub const HTTP_METHODS: &[&str] = &["GET", "POST", "OPTIONS", "HEAD", "TRACE", "CONNECT", "PUT", "DELETE"];
pub const RTSP_METHODS: &[&str] = &[
    "DESCRIBE",
    "ANNOUNCE",
    "OPTIONS",
    "PLAY",
    "SETUP",
    "PAUSE",
    "TEARDOWN",
    "SET_PARAMETER",
    "GET_PARAMETER",
    "RECORD",
    "REDIRECT",
];

/// Directional 4-tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlowId {
    pub src_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_ip: Ipv4Addr,
    pub dst_port: u16,
}

impl FlowId {
    pub fn of(r: &PacketRecord) -> Self {
        Self {
            src_ip: r.src_ip,
            src_port: r.src_port,
            dst_ip: r.dst_ip,
            dst_port: r.dst_port,
        }
    }

    fn touches_port(&self, port: u16) -> bool {
        self.src_port == port || self.dst_port == port
    }
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{} -> {}:{}",
            self.src_ip, self.src_port, self.dst_ip, self.dst_port
        )
    }
}

/// One application message cut out of a reassembled stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowMessage {
    pub flow: FlowId,
    /// `None` for residue that matched no protocol.
    pub protocol_guess: Option<Protocol>,
    pub direction: Direction,
    pub bytes: Vec<u8>,
    pub first_packet_index: u64,
}

impl FlowMessage {
    pub fn is_request(&self) -> bool {
        match self.protocol_guess {
            Some(Protocol::Http) | Some(Protocol::Rtsp) => {
                !self.bytes.starts_with(b"HTTP/") && !self.bytes.starts_with(b"RTSP/")
            }
            Some(Protocol::TplinkSmarthome) => self.direction != Direction::FromDevice,
            None => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExcludedFlow {
    pub flow: FlowId,
    pub packet_index: u64,
    pub expected_seq: u32,
    pub found_seq: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Reassembly {
    pub messages: Vec<FlowMessage>,
    /// Flows whose sequence numbers showed a gap, overlap or reordering.
    pub excluded: Vec<ExcludedFlow>,
}

/// Concatenates each flow's payloads in capture order and splits the
/// streams at protocol message boundaries.
pub fn reassemble(records: &[PacketRecord]) -> Reassembly {
    let mut order: Vec<FlowId> = Vec::new();
    let mut flows: HashMap<FlowId, Vec<&PacketRecord>> = HashMap::new();
    for r in records {
        let id = FlowId::of(r);
        flows
            .entry(id)
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push(r);
    }

    let mut out = Reassembly::default();
    for id in order {
        let segs = &flows[&id];
        if let Some(bad) = sequence_anomaly(id, segs) {
            out.excluded.push(bad);
            continue;
        }
        split_flow(id, segs, &mut out.messages);
    }
    out.messages.sort_by_key(|m| m.first_packet_index);
    out
}

fn sequence_anomaly(flow: FlowId, segs: &[&PacketRecord]) -> Option<ExcludedFlow> {
    let mut expected = segs.first()?.tcp_seq;
    for r in segs {
        if r.tcp_seq != expected {
            return Some(ExcludedFlow {
                flow,
                packet_index: r.index,
                expected_seq: expected,
                found_seq: r.tcp_seq,
            });
        }
        expected = expected.wrapping_add(r.payload.len() as u32);
    }
    None
}

fn split_flow(flow: FlowId, segs: &[&PacketRecord], out: &mut Vec<FlowMessage>) {
    let mut stream = Vec::new();
    // (stream offset, record) for mapping bytes back to packets
    let mut starts = Vec::with_capacity(segs.len());
    for r in segs {
        starts.push((stream.len(), *r));
        stream.extend_from_slice(&r.payload);
    }
    let owner = |offset: usize| {
        let i = starts.partition_point(|(start, _)| *start <= offset) - 1;
        starts[i].1
    };

    let mut pos = 0;
    while pos < stream.len() {
        let rest = &stream[pos..];
        let (guess, len) = match next_message(flow, rest) {
            Some((p, len)) => (Some(p), len),
            None => (None, rest.len()),
        };
        let first = owner(pos);
        out.push(FlowMessage {
            flow,
            protocol_guess: guess,
            direction: first.direction,
            bytes: rest[..len].to_vec(),
            first_packet_index: first.index,
        });
        pos += len;
    }
}

fn next_message(flow: FlowId, rest: &[u8]) -> Option<(Protocol, usize)> {
    if flow.touches_port(tplink::DEFAULT_PORT) {
        return tplink_frame_len(rest).map(|n| (Protocol::TplinkSmarthome, n));
    }
    if let Some(protocol) = text_protocol(flow, rest) {
        return text_message_len(rest).map(|n| (protocol, n));
    }
    // Off the well-known port a frame must also decode to a JSON object.
    let n = tplink_frame_len(rest)?;
    (tplink::decode(&rest[tplink::PREFIX_LEN..tplink::PREFIX_LEN + 1])[0] == b'{')
        .then_some((Protocol::TplinkSmarthome, n))
}

fn tplink_frame_len(rest: &[u8]) -> Option<usize> {
    let declared = tplink::read_prefix(rest)?;
    if declared == 0 {
        return None;
    }
    tplink::complete_frame_len(rest)
}

/// Recognizes the protocol from the first line of a text message.
pub fn text_protocol(flow: FlowId, rest: &[u8]) -> Option<Protocol> {
    if rest.starts_with(b"HTTP/") {
        return Some(Protocol::Http);
    }
    if rest.starts_with(b"RTSP/") {
        return Some(Protocol::Rtsp);
    }
    let line_end = rest.iter().position(|&b| b == b'\n').unwrap_or(rest.len());
    let line = &rest[..line_end];
    let method_end = line.iter().position(|&b| b == b' ' || b == b'\t')?;
    let method = std::str::from_utf8(&line[..method_end]).ok()?;
    let is_http = HTTP_METHODS.contains(&method);
    let is_rtsp = RTSP_METHODS.contains(&method);
    let version = line
        .rsplit(|&b| b == b' ' || b == b'\t')
        .next()
        .unwrap_or_default();
    match (is_http, is_rtsp) {
        (false, false) => None,
        (true, false) => Some(Protocol::Http),
        (false, true) => Some(Protocol::Rtsp),
        (true, true) if version.starts_with(b"RTSP/") => Some(Protocol::Rtsp),
        (true, true) if version.starts_with(b"HTTP/") => Some(Protocol::Http),
        (true, true) if flow.touches_port(554) => Some(Protocol::Rtsp),
        (true, true) => Some(Protocol::Http),
    }
}
