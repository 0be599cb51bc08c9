//! Protocol tags and the closed set of fuzzable request fields.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Application protocols the fuzzer understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Http,
    Rtsp,
    TplinkSmarthome,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Http => "HTTP",
            Protocol::Rtsp => "RTSP",
            Protocol::TplinkSmarthome => "TPLINK_SMARTHOME",
        }
    }

    /// Version prefix used on request and status lines.
    pub fn version_prefix(self) -> Option<&'static [u8]> {
        match self {
            Protocol::Http => Some(b"HTTP/"),
            Protocol::Rtsp => Some(b"RTSP/"),
            Protocol::TplinkSmarthome => None,
        }
    }

    pub fn is_text(self) -> bool {
        !matches!(self, Protocol::TplinkSmarthome)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown protocol `{0}`")]
pub struct UnknownProtocol(pub String);

impl FromStr for Protocol {
    type Err = UnknownProtocol;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "HTTP" => Ok(Protocol::Http),
            "RTSP" => Ok(Protocol::Rtsp),
            "TPLINK_SMARTHOME" | "TPLINK" | "TP-LINK" | "SMARTHOME" => Ok(Protocol::TplinkSmarthome),
            _ => Err(UnknownProtocol(s.to_string())),
        }
    }
}

/// Name of one fuzzable field of a request.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldName {
    Method,
    SpLeft,
    RequestUri,
    UriScheme,
    UriNetlocPort,
    UriPath,
    UriQuery,
    SpRight,
    Version,
    Crlf,
    /// A header value, keyed by header name as seen on the wire.
    Header(String),
    Cseq,
    FrameLength,
    FrameCommand,
}

impl FieldName {
    /// Fields whose mutation can break the request-line grammar.
    pub fn is_structure_risk(&self) -> bool {
        matches!(
            self,
            FieldName::SpLeft | FieldName::SpRight | FieldName::Version | FieldName::Crlf
        )
    }

    pub fn header(name: &str) -> Self {
        FieldName::Header(name.to_string())
    }
}

impl fmt::Display for FieldName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FieldName::Method => "method",
            FieldName::SpLeft => "sp_left",
            FieldName::RequestUri => "request_uri",
            FieldName::UriScheme => "uri_scheme",
            FieldName::UriNetlocPort => "uri_netloc_port",
            FieldName::UriPath => "uri_path",
            FieldName::UriQuery => "uri_query",
            FieldName::SpRight => "sp_right",
            FieldName::Version => "version",
            FieldName::Crlf => "crlf",
            FieldName::Header(name) => return write!(f, "header({name})"),
            FieldName::Cseq => "cseq",
            FieldName::FrameLength => "frame_length",
            FieldName::FrameCommand => "frame_command",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown field name `{0}`")]
pub struct UnknownField(pub String);

impl FromStr for FieldName {
    type Err = UnknownField;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix("header(").and_then(|r| r.strip_suffix(')')) {
            if inner.is_empty() || inner.bytes().any(|b| b.is_ascii_whitespace() || b == b':') {
                return Err(UnknownField(s.to_string()));
            }
            return Ok(FieldName::Header(inner.to_string()));
        }
        Ok(match s {
            "method" => FieldName::Method,
            "sp_left" => FieldName::SpLeft,
            "request_uri" => FieldName::RequestUri,
            "uri_scheme" => FieldName::UriScheme,
            "uri_netloc_port" => FieldName::UriNetlocPort,
            "uri_path" => FieldName::UriPath,
            "uri_query" => FieldName::UriQuery,
            "sp_right" => FieldName::SpRight,
            "version" => FieldName::Version,
            "crlf" => FieldName::Crlf,
            "cseq" => FieldName::Cseq,
            "frame_length" => FieldName::FrameLength,
            "frame_command" => FieldName::FrameCommand,
            _ => return Err(UnknownField(s.to_string())),
        })
    }
}

/// A field qualified by the protocol it belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldId {
    pub protocol: Protocol,
    pub name: FieldName,
}

impl FieldId {
    pub fn new(protocol: Protocol, name: FieldName) -> Self {
        Self { protocol, name }
    }
}

impl fmt::Display for FieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.protocol, self.name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_names_round_trip_through_text() {
        let all = [
            FieldName::Method,
            FieldName::SpLeft,
            FieldName::RequestUri,
            FieldName::UriScheme,
            FieldName::UriNetlocPort,
            FieldName::UriPath,
            FieldName::UriQuery,
            FieldName::SpRight,
            FieldName::Version,
            FieldName::Crlf,
            FieldName::header("Authorization"),
            FieldName::Cseq,
            FieldName::FrameLength,
            FieldName::FrameCommand,
        ];
        for name in all {
            assert_eq!(name.to_string().parse::<FieldName>().unwrap(), name);
        }
    }

    #[test]
    fn rejects_unknown_fields() {
        assert!("body".parse::<FieldName>().is_err());
        assert!("header()".parse::<FieldName>().is_err());
        assert!("header(a b)".parse::<FieldName>().is_err());
    }

    #[test]
    fn protocol_aliases() {
        assert_eq!("rtsp".parse::<Protocol>().unwrap(), Protocol::Rtsp);
        assert_eq!("TPLINK".parse::<Protocol>().unwrap(), Protocol::TplinkSmarthome);
        assert!("ftp".parse::<Protocol>().is_err());
    }
}
