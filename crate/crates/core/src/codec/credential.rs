//! Authorization header decoding.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use thiserror::Error;

/// Credential material observed in one `Authorization` header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialFinding {
    pub scheme: String,
    pub encoded: Vec<u8>,
    /// Present only for the Basic scheme after a successful decode.
    pub decoded_user: Option<String>,
    pub decoded_pass: Option<String>,
    pub packet_index: u64,
}

impl CredentialFinding {
    pub fn is_basic(&self) -> bool {
        self.scheme.eq_ignore_ascii_case("Basic")
    }

    pub fn credentials(&self) -> Option<(&str, &str)> {
        Some((self.decoded_user.as_deref()?, self.decoded_pass.as_deref()?))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CredentialRejection {
    #[error("empty Authorization value")]
    Empty,
    #[error("invalid Base64 in Basic credential: {0}")]
    InvalidBase64(String),
    #[error("decoded Basic credential has no `:` separator")]
    MissingSeparator,
}

/// Splits an `Authorization` value at its first blank into scheme and
/// payload; Basic payloads are Base64-decoded and split at the first `:`.
pub fn decode_basic_credential(
    header_value: &[u8],
    packet_index: u64,
) -> Result<CredentialFinding, CredentialRejection> {
    let trimmed = header_value.trim_ascii();
    if trimmed.is_empty() {
        return Err(CredentialRejection::Empty);
    }
    let split = trimmed
        .iter()
        .position(|&b| b == b' ' || b == b'\t')
        .unwrap_or(trimmed.len());
    let scheme = String::from_utf8_lossy(&trimmed[..split]).into_owned();
    let encoded = trimmed[split..].trim_ascii().to_vec();

    let mut finding = CredentialFinding {
        scheme,
        encoded,
        decoded_user: None,
        decoded_pass: None,
        packet_index,
    };
    if !finding.is_basic() {
        return Ok(finding);
    }

    let decoded = STANDARD
        .decode(&finding.encoded)
        .map_err(|e| CredentialRejection::InvalidBase64(e.to_string()))?;
    let colon = decoded
        .iter()
        .position(|&b| b == b':')
        .ok_or(CredentialRejection::MissingSeparator)?;
    finding.decoded_user = Some(String::from_utf8_lossy(&decoded[..colon]).into_owned());
    finding.decoded_pass = Some(String::from_utf8_lossy(&decoded[colon + 1..]).into_owned());
    Ok(finding)
}
