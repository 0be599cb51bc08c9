//! Packet-capture ingestion: pcap decoding and TCP stream reassembly.

pub mod pcap;
pub mod reassembly;

pub use pcap::{load_capture, parse_capture, Capture, CaptureError, Direction, PacketRecord, SkipTally};
pub use reassembly::{reassemble, ExcludedFlow, FlowId, FlowMessage, Reassembly};
