//! Passive scan for credentials carried in captured HTTP requests.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::capture::{reassemble, Direction, PacketRecord};
use crate::codec::{decode_basic_credential, escape_bytes, CredentialFinding, CredentialRejection, TextRequest};
use crate::protocol::Protocol;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialScan {
    /// Frames in the capture, including those without TCP payload.
    pub total_packets: u64,
    pub http_requests: usize,
    pub findings: Vec<CredentialFinding>,
    pub rejections: Vec<(u64, CredentialRejection)>,
}

impl CredentialScan {
    pub fn basic_decoded(&self) -> usize {
        self.findings.iter().filter(|f| f.credentials().is_some()).count()
    }

    pub fn vulnerable(&self) -> bool {
        !self.findings.is_empty()
    }

    /// Distinct `user:pass` pairs in first-seen order.
    pub fn unique_credentials(&self) -> Vec<(String, String)> {
        let mut seen = HashSet::new();
        self.findings
            .iter()
            .filter_map(|f| f.credentials())
            .filter(|c| seen.insert(*c))
            .map(|(u, p)| (u.to_string(), p.to_string()))
            .collect()
    }
}

/// Inspects every device-bound HTTP request for an `Authorization` header.
/// Flows with sequence anomalies are scanned packet by packet instead.
pub fn scan_credentials(records: &[PacketRecord], total_packets: u64) -> CredentialScan {
    let reassembly = reassemble(records);
    let mut requests: Vec<(u64, Vec<u8>)> = reassembly
        .messages
        .into_iter()
        .filter(|m| m.protocol_guess == Some(Protocol::Http) && m.is_request() && m.direction != Direction::FromDevice)
        .map(|m| (m.first_packet_index, m.bytes))
        .collect();
    for ex in &reassembly.excluded {
        requests.extend(
            records
                .iter()
                .filter(|r| crate::capture::FlowId::of(r) == ex.flow && r.direction != Direction::FromDevice)
                .map(|r| (r.index, r.payload.clone())),
        );
    }
    requests.sort_by_key(|(i, _)| *i);

    let mut scan = CredentialScan {
        total_packets,
        http_requests: 0,
        findings: Vec::new(),
        rejections: Vec::new(),
    };
    for (index, bytes) in requests {
        let Ok(req) = TextRequest::parse(&bytes) else {
            continue;
        };
        scan.http_requests += 1;
        for h in req.headers.iter().filter(|h| h.name_is("Authorization")) {
            match decode_basic_credential(&h.value, index) {
                Ok(f) => scan.findings.push(f),
                Err(e) => scan.rejections.push((index, e)),
            }
        }
    }
    scan
}

pub fn render_credential_report(
    vuln_id: &str,
    vuln_name: &str,
    source: &str,
    scan: &CredentialScan,
    verbose: bool,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Vulnerability: {vuln_id} ({vuln_name})");
    let _ = writeln!(out, "Protocol: HTTP");
    let _ = writeln!(out, "Capture: {source}");
    if verbose {
        for f in &scan.findings {
            let shown = match f.credentials() {
                Some((u, p)) => format!("{u}:{p}"),
                None => escape_bytes(&f.encoded),
            };
            let _ = writeln!(out, "  packet {:>6} {:<8} {}", f.packet_index, f.scheme, shown);
        }
        for (index, why) in &scan.rejections {
            let _ = writeln!(out, "  packet {index:>6} rejected {why}");
        }
    }
    let _ = writeln!(out, "Packets={}", scan.total_packets);
    let _ = writeln!(out, "HttpRequests={}", scan.http_requests);
    let _ = writeln!(out, "Findings={}", scan.findings.len());
    let _ = writeln!(out, "BasicDecoded={}", scan.basic_decoded());
    let creds: Vec<String> = scan
        .unique_credentials()
        .into_iter()
        .map(|(u, p)| format!("{u}:{p}"))
        .collect();
    let _ = writeln!(out, "Credentials={}", creds.join(","));
    let _ = writeln!(out, "Vulnerable={}", scan.vulnerable());
    out
}
