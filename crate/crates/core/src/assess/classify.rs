//! Per-exchange verdicts.

use std::fmt;

use serde_json::Value;

use crate::assess::registry::{ExploitCheck, ValidityRule, VulnerabilityDescriptor};
use crate::codec::tplink::{self, TplinkFrame};
use crate::codec::{escape_bytes, parse_response, ResponseView, TextRequest};
use crate::injector::{ExchangeRecord, Outcome};
use crate::protocol::Protocol;

pub const JPEG_SOI: [u8; 2] = [0xFF, 0xD8];

const EXCERPT_LEN: usize = 96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VerdictClass {
    Valid,
    Invalid,
    MalformedRejected,
    NoResponse,
}

impl VerdictClass {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictClass::Valid => "valid",
            VerdictClass::Invalid => "invalid",
            VerdictClass::MalformedRejected => "malformed_rejected",
            VerdictClass::NoResponse => "no_response",
        }
    }
}

impl fmt::Display for VerdictClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evidence {
    /// Which rule fired (or why none did).
    pub rule: String,
    /// Short printable slice of the response.
    pub excerpt: String,
    /// Image bytes captured from a live-image hit.
    pub jpeg: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseVerdict {
    pub mutant_id: usize,
    pub class: VerdictClass,
    /// Status line, err_code summary or outcome name.
    pub status: String,
    /// One-line rendering of the request that was sent.
    pub request: String,
    pub evidence: Evidence,
}

fn excerpt(bytes: &[u8]) -> String {
    escape_bytes(&bytes[..bytes.len().min(EXCERPT_LEN)])
}

/// Request line for text protocols, decoded command for SmartHome.
pub fn request_summary(protocol: Protocol, sent: &[u8]) -> String {
    match protocol {
        Protocol::TplinkSmarthome => {
            let declared = tplink::read_prefix(sent).unwrap_or(0);
            let body = sent.get(tplink::PREFIX_LEN..).unwrap_or_default();
            format!("Len: {declared} Cmd: {}", escape_bytes(&tplink::decode(body)))
        }
        _ => {
            let end = sent.iter().position(|&b| b == b'\n').unwrap_or(sent.len());
            let line = sent[..end].strip_suffix(b"\r").unwrap_or(&sent[..end]);
            escape_bytes(line)
        }
    }
}

/// Every `err_code` value anywhere in the document.
pub fn err_codes(doc: &Value) -> Vec<Value> {
    let mut out = Vec::new();
    let mut stack = vec![doc];
    while let Some(v) = stack.pop() {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    if k == "err_code" {
                        out.push(child.clone());
                    } else {
                        stack.push(child);
                    }
                }
            }
            Value::Array(items) => stack.extend(items),
            _ => {}
        }
    }
    out
}

fn is_zero(v: &Value) -> bool {
    v.as_i64() == Some(0) || v.as_u64() == Some(0)
}

/// Maps one exchange to exactly one verdict class.
pub fn classify(vuln: &VulnerabilityDescriptor, exchange: &ExchangeRecord) -> ResponseVerdict {
    let request = request_summary(vuln.protocol, &exchange.sent_bytes);
    let verdict = |class, status: String, rule: String, excerpt: String, jpeg| ResponseVerdict {
        mutant_id: exchange.mutant_id,
        class,
        status,
        request: request.clone(),
        evidence: Evidence { rule, excerpt, jpeg },
    };
    if exchange.outcome != Outcome::Responded || exchange.response_bytes.is_empty() {
        return verdict(
            VerdictClass::NoResponse,
            exchange.outcome.as_str().to_string(),
            "no response".into(),
            String::new(),
            None,
        );
    }
    let bytes = &exchange.response_bytes;

    if vuln.protocol == Protocol::TplinkSmarthome {
        let Ok(frame) = TplinkFrame::parse(bytes) else {
            return verdict(
                VerdictClass::Invalid,
                "bad frame".into(),
                "response is not one SmartHome frame".into(),
                excerpt(bytes),
                None,
            );
        };
        let plain = frame.plain();
        let shown = excerpt(&plain);
        let Ok(doc) = serde_json::from_slice::<Value>(&plain) else {
            return verdict(VerdictClass::Invalid, "not JSON".into(), "reply is not JSON".into(), shown, None);
        };
        let codes = err_codes(&doc);
        let status = match codes.as_slice() {
            [] => "no err_code".to_string(),
            _ => format!(
                "err_code {}",
                codes.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
            ),
        };
        let valid = vuln.validity == ValidityRule::TplinkErrCodeZero && !codes.is_empty() && codes.iter().all(is_zero);
        let class = if valid { VerdictClass::Valid } else { VerdictClass::Invalid };
        return verdict(class, status, vuln.validity.to_string(), shown, None);
    }

    let view = parse_response(bytes, vuln.protocol);
    let status = view.status_line();
    if view.status_code.is_some_and(|c| (400..500).contains(&c)) && exchange.structure_risk {
        return verdict(
            VerdictClass::MalformedRejected,
            status,
            "4xx to a structure-breaking mutant".into(),
            excerpt(&view.raw),
            None,
        );
    }
    let valid = text_rule_holds(&vuln.validity, &view, &exchange.sent_bytes);
    let jpeg = (valid
        && vuln.exploit == ExploitCheck::ImageCapture
        && view.body.starts_with(&JPEG_SOI))
    .then(|| view.body.clone());
    let class = if valid { VerdictClass::Valid } else { VerdictClass::Invalid };
    verdict(class, status, vuln.validity.to_string(), excerpt(&view.raw), jpeg)
}

fn text_rule_holds(rule: &ValidityRule, view: &ResponseView, sent: &[u8]) -> bool {
    if !view.well_formed || view.status_code != Some(200) {
        return false;
    }
    match rule {
        ValidityRule::Http200BodyContains(needle) => {
            let needle = needle.as_bytes();
            !needle.is_empty() && view.body.windows(needle.len()).any(|w| w == needle)
        }
        ValidityRule::Http200ContentType(media) => view.header("Content-Type").is_some_and(|ct| {
            let base = ct.split(';').next().unwrap_or("").trim();
            base.eq_ignore_ascii_case(media)
        }),
        ValidityRule::Rtsp200CseqEcho => {
            let sent_cseq = TextRequest::parse(sent)
                .ok()
                .and_then(|r| r.cseq().map(|c| String::from_utf8_lossy(c).trim().to_string()));
            match (sent_cseq, view.header("CSeq")) {
                (Some(a), Some(b)) => a == b.trim(),
                _ => false,
            }
        }
        ValidityRule::TplinkErrCodeZero | ValidityRule::BasicCredential => false,
    }
}
