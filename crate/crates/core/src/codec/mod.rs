//! Wire codecs for the three target protocols.

pub mod credential;
pub mod request;
pub mod response;
pub mod tplink;

pub use credential::{decode_basic_credential, CredentialFinding, CredentialRejection};
pub use request::{
    FieldError, HeaderLine, HttpRequestTemplate, RequestParseError, RequestUri,
    RtspRequestTemplate, TextRequest,
};
pub use response::{
    parse_http_response, parse_response, parse_rtsp_response, text_message_len, HttpResponseView,
    ResponseView,
};
pub use tplink::{FrameError, TplinkFrame};

use crate::protocol::{FieldName, Protocol};

pub fn parse_http_request(bytes: &[u8]) -> Result<HttpRequestTemplate, RequestParseError> {
    TextRequest::parse(bytes)
}

pub fn parse_rtsp_request(bytes: &[u8]) -> Result<RtspRequestTemplate, RequestParseError> {
    TextRequest::parse(bytes)
}

pub fn tplink_encode(plain: &[u8]) -> Vec<u8> {
    tplink::encode(plain)
}

pub fn tplink_decode(cipher: &[u8]) -> Vec<u8> {
    tplink::decode(cipher)
}

/// A SmartHome command frame as a mutable template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TplinkRequest {
    /// Raw 4-byte prefix to send instead of the recomputed length.
    pub length_override: Option<[u8; 4]>,
    pub cipher: Vec<u8>,
}

impl TplinkRequest {
    pub fn new(cipher: Vec<u8>) -> Self {
        Self {
            length_override: None,
            cipher,
        }
    }

    pub fn length_prefix(&self) -> [u8; 4] {
        self.length_override
            .unwrap_or_else(|| (self.cipher.len() as u32).to_be_bytes())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.length_prefix().to_vec();
        out.extend_from_slice(&self.cipher);
        out
    }

    pub fn plain(&self) -> Vec<u8> {
        tplink::decode(&self.cipher)
    }
}

/// Protocol-tagged request decomposition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RequestTemplate {
    Http(TextRequest),
    Rtsp(TextRequest),
    Tplink(TplinkRequest),
}

impl RequestTemplate {
    pub fn protocol(&self) -> Protocol {
        match self {
            RequestTemplate::Http(_) => Protocol::Http,
            RequestTemplate::Rtsp(_) => Protocol::Rtsp,
            RequestTemplate::Tplink(_) => Protocol::TplinkSmarthome,
        }
    }

    /// Parses a wire message of the given protocol.
    pub fn parse(protocol: Protocol, bytes: &[u8]) -> Result<Self, TemplateError> {
        Ok(match protocol {
            Protocol::Http => RequestTemplate::Http(TextRequest::parse(bytes)?),
            Protocol::Rtsp => RequestTemplate::Rtsp(TextRequest::parse(bytes)?),
            Protocol::TplinkSmarthome => {
                let frame = TplinkFrame::parse(bytes)?;
                RequestTemplate::Tplink(TplinkRequest::new(frame.cipher))
            }
        })
    }

    /// Wire bytes. TP-Link frames get a recomputed length prefix unless an
    /// explicit override was set.
    pub fn serialize(&self) -> Vec<u8> {
        match self {
            RequestTemplate::Http(r) | RequestTemplate::Rtsp(r) => r.to_bytes(),
            RequestTemplate::Tplink(t) => t.to_bytes(),
        }
    }

    pub fn field(&self, name: &FieldName) -> Option<Vec<u8>> {
        match self {
            RequestTemplate::Http(r) | RequestTemplate::Rtsp(r) => r.field(name),
            RequestTemplate::Tplink(t) => match name {
                FieldName::FrameLength => Some(t.length_prefix().to_vec()),
                FieldName::FrameCommand => Some(t.cipher.clone()),
                _ => None,
            },
        }
    }

    pub fn set_field(&mut self, name: &FieldName, value: Vec<u8>) -> Result<(), FieldError> {
        match self {
            RequestTemplate::Http(r) | RequestTemplate::Rtsp(r) => r.set_field(name, value),
            RequestTemplate::Tplink(t) => match name {
                FieldName::FrameLength => {
                    let prefix: [u8; 4] = value
                        .try_into()
                        .map_err(|_| FieldError::InvalidValue(name.clone()))?;
                    t.length_override = Some(prefix);
                    Ok(())
                }
                FieldName::FrameCommand => {
                    t.cipher = value;
                    Ok(())
                }
                _ => Err(FieldError::NotApplicable(name.clone())),
            },
        }
    }

    /// Whether the serialized form re-parses under the strict grammar.
    pub fn is_well_formed(&self) -> bool {
        match self {
            RequestTemplate::Http(r) => r.is_well_formed(Protocol::Http),
            RequestTemplate::Rtsp(r) => r.is_well_formed(Protocol::Rtsp),
            RequestTemplate::Tplink(t) => {
                t.length_override.is_none() || t.length_prefix() == (t.cipher.len() as u32).to_be_bytes()
            }
        }
    }

    /// One-line human rendering used in verbose listings.
    pub fn summary(&self) -> String {
        match self {
            RequestTemplate::Http(r) | RequestTemplate::Rtsp(r) => {
                escape_bytes(&r.request_line())
            }
            RequestTemplate::Tplink(t) => {
                let declared = u32::from_be_bytes(t.length_prefix());
                format!("Len: {declared} Cmd: {}", escape_bytes(&t.plain()))
            }
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error(transparent)]
    Request(#[from] RequestParseError),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Printable rendering with C-style escapes for control and non-ASCII bytes.
pub fn escape_bytes(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len());
    for &b in bytes {
        match b {
            b'"' | b'\'' => out.push(b as char),
            _ => out.extend(std::ascii::escape_default(b).map(char::from)),
        }
    }
    out
}
