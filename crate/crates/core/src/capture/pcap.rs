//! Classic pcap reader for Ethernet / IPv4 / TCP traffic.

use std::fs;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use thiserror::Error;

const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;
const LINKTYPE_ETHERNET: u32 = 1;
const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_VLAN: u16 = 0x8100;
const IPPROTO_TCP: u8 = 6;

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("cannot read capture {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a classic pcap file (magic {0:#010x})")]
    BadMagic(u32),
    #[error("unsupported link type {0} (only Ethernet is supported)")]
    UnsupportedLinkType(u32),
    #[error("truncated capture at byte offset {offset}")]
    Truncated { offset: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    ToDevice,
    FromDevice,
    /// Neither endpoint is the declared device.
    Unrelated,
}

/// One TCP segment carrying application bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketRecord {
    /// 1-based frame number within the capture.
    pub index: u64,
    pub ts_sec: u32,
    pub ts_usec: u32,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub tcp_seq: u32,
    pub direction: Direction,
    pub payload: Vec<u8>,
}

/// Frames that did not produce a [`PacketRecord`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SkipTally {
    pub non_ipv4: u64,
    pub non_tcp: u64,
    pub fragments: u64,
    pub empty_payload: u64,
    pub malformed: u64,
}

impl SkipTally {
    pub fn total(&self) -> u64 {
        self.non_ipv4 + self.non_tcp + self.fragments + self.empty_payload + self.malformed
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Capture {
    pub path: Option<PathBuf>,
    pub device_ip: Ipv4Addr,
    /// Number of frames in the file.
    pub total_frames: u64,
    pub records: Vec<PacketRecord>,
    pub skipped: SkipTally,
}

pub fn load_capture(path: impl AsRef<Path>, device_ip: Ipv4Addr) -> Result<Capture, CaptureError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CaptureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut capture = parse_capture(&bytes, device_ip)?;
    capture.path = Some(path.to_path_buf());
    Ok(capture)
}

#[derive(Clone, Copy)]
struct Format {
    big_endian: bool,
    nanos: bool,
}

impl Format {
    fn u32_at(self, b: &[u8], off: usize) -> u32 {
        let raw: [u8; 4] = b[off..off + 4].try_into().expect("bounds checked by caller");
        if self.big_endian {
            u32::from_be_bytes(raw)
        } else {
            u32::from_le_bytes(raw)
        }
    }
}

pub fn parse_capture(bytes: &[u8], device_ip: Ipv4Addr) -> Result<Capture, CaptureError> {
    if bytes.len() < GLOBAL_HEADER_LEN {
        return Err(CaptureError::Truncated { offset: 0 });
    }
    let magic_le = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes"));
    let format = match magic_le {
        0xa1b2_c3d4 => Format { big_endian: false, nanos: false },
        0xd4c3_b2a1 => Format { big_endian: true, nanos: false },
        0xa1b2_3c4d => Format { big_endian: false, nanos: true },
        0x4d3c_b2a1 => Format { big_endian: true, nanos: true },
        other => return Err(CaptureError::BadMagic(other)),
    };
    let link_type = format.u32_at(bytes, 20) & 0x0fff_ffff;
    if link_type != LINKTYPE_ETHERNET {
        return Err(CaptureError::UnsupportedLinkType(link_type));
    }

    let mut records = Vec::new();
    let mut skipped = SkipTally::default();
    let mut offset = GLOBAL_HEADER_LEN;
    let mut frame_no = 0u64;
    while offset < bytes.len() {
        if bytes.len() - offset < RECORD_HEADER_LEN {
            return Err(CaptureError::Truncated { offset });
        }
        let ts_sec = format.u32_at(bytes, offset);
        let ts_frac = format.u32_at(bytes, offset + 4);
        let incl_len = format.u32_at(bytes, offset + 8) as usize;
        let data_start = offset + RECORD_HEADER_LEN;
        if bytes.len() - data_start < incl_len {
            return Err(CaptureError::Truncated { offset });
        }
        frame_no += 1;
        let frame = &bytes[data_start..data_start + incl_len];
        let ts_usec = if format.nanos { ts_frac / 1000 } else { ts_frac };
        match decode_frame(frame) {
            Ok(seg) => records.push(PacketRecord {
                index: frame_no,
                ts_sec,
                ts_usec,
                direction: direction_of(seg.src_ip, seg.dst_ip, device_ip),
                src_ip: seg.src_ip,
                dst_ip: seg.dst_ip,
                src_port: seg.src_port,
                dst_port: seg.dst_port,
                tcp_seq: seg.seq,
                payload: seg.payload.to_vec(),
            }),
            Err(Skip::NonIpv4) => skipped.non_ipv4 += 1,
            Err(Skip::NonTcp) => skipped.non_tcp += 1,
            Err(Skip::Fragment) => skipped.fragments += 1,
            Err(Skip::Empty) => skipped.empty_payload += 1,
            Err(Skip::Malformed) => skipped.malformed += 1,
        }
        offset = data_start + incl_len;
    }

    Ok(Capture {
        path: None,
        device_ip,
        total_frames: frame_no,
        records,
        skipped,
    })
}

fn direction_of(src: Ipv4Addr, dst: Ipv4Addr, device: Ipv4Addr) -> Direction {
    if dst == device {
        Direction::ToDevice
    } else if src == device {
        Direction::FromDevice
    } else {
        Direction::Unrelated
    }
}

enum Skip {
    NonIpv4,
    NonTcp,
    Fragment,
    Empty,
    Malformed,
}

struct Segment<'a> {
    src_ip: Ipv4Addr,
    dst_ip: Ipv4Addr,
    src_port: u16,
    dst_port: u16,
    seq: u32,
    payload: &'a [u8],
}

fn be16(b: &[u8], off: usize) -> u16 {
    u16::from_be_bytes([b[off], b[off + 1]])
}

fn decode_frame(frame: &[u8]) -> Result<Segment<'_>, Skip> {
    if frame.len() < 14 {
        return Err(Skip::Malformed);
    }
    let mut ethertype = be16(frame, 12);
    let mut l3 = 14;
    if ethertype == ETHERTYPE_VLAN {
        if frame.len() < 18 {
            return Err(Skip::Malformed);
        }
        ethertype = be16(frame, 16);
        l3 = 18;
    }
    if ethertype != ETHERTYPE_IPV4 {
        return Err(Skip::NonIpv4);
    }

    let ip = &frame[l3..];
    if ip.len() < 20 || ip[0] >> 4 != 4 {
        return Err(Skip::Malformed);
    }
    let ihl = usize::from(ip[0] & 0x0f) * 4;
    let total_len = usize::from(be16(ip, 2));
    // total_len trims Ethernet padding off short frames.
    if ihl < 20 || total_len < ihl || ip.len() < total_len {
        return Err(Skip::Malformed);
    }
    if ip[9] != IPPROTO_TCP {
        return Err(Skip::NonTcp);
    }
    let flags_frag = be16(ip, 6);
    if flags_frag & 0x2000 != 0 || flags_frag & 0x1fff != 0 {
        return Err(Skip::Fragment);
    }
    let src_ip = Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]);
    let dst_ip = Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]);

    let tcp = &ip[ihl..total_len];
    if tcp.len() < 20 {
        return Err(Skip::Malformed);
    }
    let data_off = usize::from(tcp[12] >> 4) * 4;
    if data_off < 20 || tcp.len() < data_off {
        return Err(Skip::Malformed);
    }
    let payload = &tcp[data_off..];
    if payload.is_empty() {
        return Err(Skip::Empty);
    }
    Ok(Segment {
        src_ip,
        dst_ip,
        src_port: be16(tcp, 0),
        dst_port: be16(tcp, 2),
        seq: u32::from_be_bytes([tcp[4], tcp[5], tcp[6], tcp[7]]),
        payload,
    })
}
