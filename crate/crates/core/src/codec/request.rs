//! Lossless decomposition of HTTP and RTSP request messages.
//!
//! The parser is deliberately lenient: anything with a three-part request
//! line, `name:value` header lines and a blank line decomposes, and
//! [`TextRequest::to_bytes`] reproduces the input exactly. Strict grammar
//! conformance is a separate question answered by
//! [`TextRequest::is_well_formed`].

use thiserror::Error;

use crate::protocol::{FieldName, Protocol};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RequestParseError {
    #[error("no line terminator in request")]
    NoRequestLine,
    #[error("request line does not have method, URI and version")]
    MalformedRequestLine,
    #[error("header line {0} has no `:` separator")]
    MalformedHeader(usize),
    #[error("header block is not terminated by an empty line")]
    Unterminated,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("field `{0}` does not exist in this request")]
    Absent(FieldName),
    #[error("field `{0}` does not apply to this protocol")]
    NotApplicable(FieldName),
    #[error("value for `{0}` has an invalid shape")]
    InvalidValue(FieldName),
}

/// Request-URI split into the subfields that are mutated independently.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RequestUri {
    /// Scheme including the `://` separator, e.g. `rtsp://`.
    pub scheme: Option<Vec<u8>>,
    pub netloc: Option<Vec<u8>>,
    pub path: Vec<u8>,
    /// Query text after `?`; `Some(empty)` when the URI ends in a bare `?`.
    pub query: Option<Vec<u8>>,
}

impl RequestUri {
    pub fn parse(raw: &[u8]) -> Self {
        let mut rest = raw;
        let mut scheme = None;
        let mut netloc = None;
        if let Some(len) = scheme_len(raw) {
            scheme = Some(raw[..len].to_vec());
            rest = &raw[len..];
            let end = rest
                .iter()
                .position(|&b| b == b'/' || b == b'?')
                .unwrap_or(rest.len());
            netloc = Some(rest[..end].to_vec());
            rest = &rest[end..];
        }
        let (path, query) = match rest.iter().position(|&b| b == b'?') {
            Some(q) => (rest[..q].to_vec(), Some(rest[q + 1..].to_vec())),
            None => (rest.to_vec(), None),
        };
        Self {
            scheme,
            netloc,
            path,
            query,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        if let Some(scheme) = &self.scheme {
            out.extend_from_slice(scheme);
        }
        if let Some(netloc) = &self.netloc {
            out.extend_from_slice(netloc);
        }
        out.extend_from_slice(&self.path);
        if let Some(query) = &self.query {
            out.push(b'?');
            out.extend_from_slice(query);
        }
        out
    }
}

/// Length of `scheme://` at the start of `raw`, if present.
fn scheme_len(raw: &[u8]) -> Option<usize> {
    let first = *raw.first()?;
    if !first.is_ascii_alphabetic() {
        return None;
    }
    let name_len = raw
        .iter()
        .position(|&b| !(b.is_ascii_alphanumeric() || b == b'+' || b == b'-' || b == b'.'))?;
    raw[name_len..].starts_with(b"://").then_some(name_len + 3)
}

/// One header line, kept with its exact separator and line ending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderLine {
    pub name: Vec<u8>,
    /// The `:` plus any following blanks.
    pub separator: Vec<u8>,
    pub value: Vec<u8>,
    pub eol: Vec<u8>,
}

impl HeaderLine {
    pub fn new(name: &str, value: &[u8]) -> Self {
        Self {
            name: name.as_bytes().to_vec(),
            separator: b": ".to_vec(),
            value: value.to_vec(),
            eol: b"\r\n".to_vec(),
        }
    }

    pub fn name_is(&self, name: &str) -> bool {
        self.name.eq_ignore_ascii_case(name.as_bytes())
    }
}

/// A request line plus headers, decomposed into fuzzable fields.
///
/// Serves as both the HTTP and the RTSP request template; RTSP's CSeq lives
/// in the header list and is exposed through [`FieldName::Cseq`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextRequest {
    pub method: Vec<u8>,
    pub sp_left: Vec<u8>,
    pub uri: RequestUri,
    pub sp_right: Vec<u8>,
    pub version: Vec<u8>,
    pub crlf: Vec<u8>,
    pub headers: Vec<HeaderLine>,
    /// The empty line closing the header block.
    pub terminator: Vec<u8>,
    pub body: Vec<u8>,
}

pub type HttpRequestTemplate = TextRequest;
pub type RtspRequestTemplate = TextRequest;

fn is_blank(b: u8) -> bool {
    b == b' ' || b == b'\t'
}

/// Splits `line` (which includes its `\n`) into content and line ending.
fn split_eol(line: &[u8]) -> (&[u8], &[u8]) {
    let without_lf = &line[..line.len() - 1];
    match without_lf.last() {
        Some(b'\r') => (&line[..line.len() - 2], &line[line.len() - 2..]),
        _ => (without_lf, &line[line.len() - 1..]),
    }
}

fn take_while(s: &[u8], pred: impl Fn(u8) -> bool) -> (&[u8], &[u8]) {
    let n = s.iter().position(|&b| !pred(b)).unwrap_or(s.len());
    s.split_at(n)
}

impl TextRequest {
    pub fn parse(bytes: &[u8]) -> Result<Self, RequestParseError> {
        let line_end = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or(RequestParseError::NoRequestLine)?;
        let (line, crlf) = split_eol(&bytes[..=line_end]);

        let (method, rest) = take_while(line, |b| !is_blank(b));
        let (sp_left, rest) = take_while(rest, is_blank);
        let (uri, rest) = take_while(rest, |b| !is_blank(b));
        let (sp_right, version) = take_while(rest, is_blank);
        if method.is_empty()
            || sp_left.is_empty()
            || uri.is_empty()
            || sp_right.is_empty()
            || version.is_empty()
            || version.trim_ascii_end().iter().any(|&b| is_blank(b))
        {
            return Err(RequestParseError::MalformedRequestLine);
        }

        let mut headers = Vec::new();
        let mut pos = line_end + 1;
        let terminator = loop {
            let rel = bytes[pos..]
                .iter()
                .position(|&b| b == b'\n')
                .ok_or(RequestParseError::Unterminated)?;
            let raw_line = &bytes[pos..=pos + rel];
            pos += rel + 1;
            let (content, eol) = split_eol(raw_line);
            if content.is_empty() {
                break eol.to_vec();
            }
            let colon = content
                .iter()
                .position(|&b| b == b':')
                .ok_or(RequestParseError::MalformedHeader(headers.len()))?;
            let name = &content[..colon];
            if name.is_empty() {
                return Err(RequestParseError::MalformedHeader(headers.len()));
            }
            let (blanks, value) = take_while(&content[colon + 1..], is_blank);
            let mut separator = vec![b':'];
            separator.extend_from_slice(blanks);
            headers.push(HeaderLine {
                name: name.to_vec(),
                separator,
                value: value.to_vec(),
                eol: eol.to_vec(),
            });
        };

        Ok(Self {
            method: method.to_vec(),
            sp_left: sp_left.to_vec(),
            uri: RequestUri::parse(uri),
            sp_right: sp_right.to_vec(),
            version: version.to_vec(),
            crlf: crlf.to_vec(),
            headers,
            terminator,
            body: bytes[pos..].to_vec(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(128);
        out.extend_from_slice(&self.method);
        out.extend_from_slice(&self.sp_left);
        out.extend_from_slice(&self.uri.to_bytes());
        out.extend_from_slice(&self.sp_right);
        out.extend_from_slice(&self.version);
        out.extend_from_slice(&self.crlf);
        for h in &self.headers {
            out.extend_from_slice(&h.name);
            out.extend_from_slice(&h.separator);
            out.extend_from_slice(&h.value);
            out.extend_from_slice(&h.eol);
        }
        out.extend_from_slice(&self.terminator);
        out.extend_from_slice(&self.body);
        out
    }

    /// Request line text without its terminator, for listings.
    pub fn request_line(&self) -> Vec<u8> {
        let mut out = self.method.clone();
        out.extend_from_slice(&self.sp_left);
        out.extend_from_slice(&self.uri.to_bytes());
        out.extend_from_slice(&self.sp_right);
        out.extend_from_slice(&self.version);
        out
    }

    pub fn header(&self, name: &str) -> Option<&[u8]> {
        self.headers
            .iter()
            .find(|h| h.name_is(name))
            .map(|h| h.value.as_slice())
    }

    pub fn cseq(&self) -> Option<&[u8]> {
        self.header("CSeq")
    }

    /// Strict grammar check: single-space separators, CRLF line endings,
    /// token method, printable URI and a `PROTO/d.d` version.
    pub fn is_well_formed(&self, protocol: Protocol) -> bool {
        let Some(prefix) = protocol.version_prefix() else {
            return false;
        };
        let version_ok = self.version.len() == prefix.len() + 3
            && self.version.starts_with(prefix)
            && self.version[prefix.len()].is_ascii_digit()
            && self.version[prefix.len() + 1] == b'.'
            && self.version[prefix.len() + 2].is_ascii_digit();
        let uri = self.uri.to_bytes();
        version_ok
            && !self.method.is_empty()
            && self.method.iter().all(|&b| is_tchar(b))
            && self.sp_left == b" "
            && self.sp_right == b" "
            && !uri.is_empty()
            && uri.iter().all(|&b| (0x21..=0x7e).contains(&b))
            && self.crlf == b"\r\n"
            && self.terminator == b"\r\n"
            && self.headers.iter().all(|h| {
                !h.name.is_empty()
                    && h.name.iter().all(|&b| is_tchar(b))
                    && h.eol == b"\r\n"
                    && h.value.iter().all(|&b| b == b'\t' || (0x20..0x7f).contains(&b) || b >= 0x80)
            })
    }

    /// Current bytes of a field, or `None` when the request lacks it.
    pub fn field(&self, name: &FieldName) -> Option<Vec<u8>> {
        match name {
            FieldName::Method => Some(self.method.clone()),
            FieldName::SpLeft => Some(self.sp_left.clone()),
            FieldName::RequestUri => Some(self.uri.to_bytes()),
            FieldName::UriScheme => self.uri.scheme.clone(),
            FieldName::UriNetlocPort => self.uri.netloc.clone(),
            FieldName::UriPath => Some(self.uri.path.clone()),
            FieldName::UriQuery => self.uri.query.clone(),
            FieldName::SpRight => Some(self.sp_right.clone()),
            FieldName::Version => Some(self.version.clone()),
            FieldName::Crlf => Some(self.crlf.clone()),
            FieldName::Header(h) => self.header(h).map(<[u8]>::to_vec),
            FieldName::Cseq => self.cseq().map(<[u8]>::to_vec),
            FieldName::FrameLength | FieldName::FrameCommand => None,
        }
    }

    pub fn set_field(&mut self, name: &FieldName, value: Vec<u8>) -> Result<(), FieldError> {
        match name {
            FieldName::Method => self.method = value,
            FieldName::SpLeft => self.sp_left = value,
            FieldName::RequestUri => self.uri = RequestUri::parse(&value),
            FieldName::UriScheme => self.uri.scheme = Some(value),
            FieldName::UriNetlocPort => self.uri.netloc = Some(value),
            FieldName::UriPath => self.uri.path = value,
            FieldName::UriQuery => self.uri.query = Some(value),
            FieldName::SpRight => self.sp_right = value,
            FieldName::Version => self.version = value,
            FieldName::Crlf => self.crlf = value,
            FieldName::Header(h) => self.set_header_value(h, value, name)?,
            FieldName::Cseq => self.set_header_value("CSeq", value, name)?,
            FieldName::FrameLength | FieldName::FrameCommand => {
                return Err(FieldError::NotApplicable(name.clone()))
            }
        }
        Ok(())
    }

    fn set_header_value(
        &mut self,
        header: &str,
        value: Vec<u8>,
        field: &FieldName,
    ) -> Result<(), FieldError> {
        let line = self
            .headers
            .iter_mut()
            .find(|h| h.name_is(header))
            .ok_or_else(|| FieldError::Absent(field.clone()))?;
        line.value = value;
        Ok(())
    }

    /// Replaces the first header with this name, or appends a new one.
    pub fn upsert_header(&mut self, name: &str, value: &[u8]) {
        match self.headers.iter_mut().find(|h| h.name_is(name)) {
            Some(line) => line.value = value.to_vec(),
            None => self.headers.push(HeaderLine::new(name, value)),
        }
    }
}

/// RFC 9110 token characters.
pub fn is_tchar(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b"!#$%&'*+-.^_`|~".contains(&b)
}
