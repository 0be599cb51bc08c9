//! Status-line responses (HTTP and RTSP) and text message framing.

use crate::protocol::Protocol;

/// Parsed view of an HTTP or RTSP response.
///
/// Parsing never fails; anything that does not fit the grammar comes back
/// with `well_formed == false`, no status code, and the raw bytes kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseView {
    pub status_code: Option<u16>,
    pub reason: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
    pub well_formed: bool,
    pub raw: Vec<u8>,
}

pub type HttpResponseView = ResponseView;

impl ResponseView {
    fn malformed(raw: &[u8]) -> Self {
        Self {
            status_code: None,
            reason: String::new(),
            headers: Vec::new(),
            body: Vec::new(),
            well_formed: false,
            raw: raw.to_vec(),
        }
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn status_line(&self) -> String {
        match self.status_code {
            Some(code) if self.reason.is_empty() => code.to_string(),
            Some(code) => format!("{code} {}", self.reason),
            None => "malformed".to_string(),
        }
    }
}

pub fn parse_http_response(bytes: &[u8]) -> ResponseView {
    parse_response(bytes, Protocol::Http)
}

pub fn parse_rtsp_response(bytes: &[u8]) -> ResponseView {
    parse_response(bytes, Protocol::Rtsp)
}

pub fn parse_response(bytes: &[u8], protocol: Protocol) -> ResponseView {
    let Some(prefix) = protocol.version_prefix() else {
        return ResponseView::malformed(bytes);
    };
    let Some(head_len) = header_block_len(bytes) else {
        return ResponseView::malformed(bytes);
    };
    let head = String::from_utf8_lossy(&bytes[..head_len]);
    let mut lines = head.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));
    let status_line = lines.next().unwrap_or_default();

    let mut parts = status_line.splitn(3, ' ');
    let version = parts.next().unwrap_or_default();
    let code = parts.next().unwrap_or_default();
    let reason = parts.next().unwrap_or_default().trim().to_string();
    let version_ok = version.as_bytes().starts_with(prefix) && version.len() > prefix.len();
    let status_code = match code.parse::<u16>() {
        Ok(c) if code.len() == 3 && (100..1000).contains(&c) => c,
        _ => return ResponseView::malformed(bytes),
    };
    if !version_ok {
        return ResponseView::malformed(bytes);
    }

    let mut headers = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let Some((name, value)) = line.split_once(':') else {
            return ResponseView::malformed(bytes);
        };
        headers.push((name.trim().to_string(), value.trim().to_string()));
    }

    let rest = &bytes[head_len..];
    let (body, complete) = match content_length_of(headers.iter().map(|(n, v)| (n.as_str(), v.as_str()))) {
        Some(n) if rest.len() >= n => (rest[..n].to_vec(), true),
        Some(_) => (rest.to_vec(), false),
        None => (rest.to_vec(), true),
    };

    ResponseView {
        status_code: complete.then_some(status_code),
        reason,
        headers,
        body,
        well_formed: complete,
        raw: bytes.to_vec(),
    }
}

/// Length of the header block including the blank line, if it is complete.
/// Accepts both CRLF and bare LF line endings.
pub fn header_block_len(bytes: &[u8]) -> Option<usize> {
    let mut i = 0;
    while let Some(rel) = bytes[i..].iter().position(|&b| b == b'\n') {
        let nl = i + rel;
        let next = nl + 1;
        if bytes[next..].starts_with(b"\r\n") {
            return Some(next + 2);
        }
        if bytes[next..].starts_with(b"\n") {
            return Some(next + 1);
        }
        i = next;
    }
    None
}

fn content_length_of<'a>(headers: impl Iterator<Item = (&'a str, &'a str)>) -> Option<usize> {
    headers
        .filter(|(n, _)| n.trim().eq_ignore_ascii_case("content-length"))
        .find_map(|(_, v)| v.trim().parse().ok())
}

/// Content-Length declared in a raw header block.
pub fn content_length(head: &[u8]) -> Option<usize> {
    let text = String::from_utf8_lossy(head);
    content_length_of(text.split('\n').skip(1).filter_map(|l| l.split_once(':')))
}

/// Boundary of the first complete HTTP/RTSP message in `bytes`: the header
/// block plus `Content-Length` body bytes (header only when absent).
/// `None` while the message is still incomplete.
pub fn text_message_len(bytes: &[u8]) -> Option<usize> {
    let head = header_block_len(bytes)?;
    let total = head + content_length(&bytes[..head]).unwrap_or(0);
    (bytes.len() >= total).then_some(total)
}
