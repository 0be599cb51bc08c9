//! TP-Link SmartHome framing and its autokey XOR obfuscation.
//!
//! A frame is a 4-byte big-endian length followed by that many cipher
//! bytes. The cipher is a byte-stream autokey XOR: the first plaintext byte
//! is XORed with [`INITIAL_KEY`], and every following byte is XORed with
//! the previous cipher byte.

use thiserror::Error;

/// Initial autokey byte, recovered by known-plaintext analysis of captured
/// command frames (`cipher[0] ^ b'{'`).
pub const INITIAL_KEY: u8 = 0xAB;

pub const PREFIX_LEN: usize = 4;

/// Default TCP port of the SmartHome service.
pub const DEFAULT_PORT: u16 = 9999;

pub fn encode(plain: &[u8]) -> Vec<u8> {
    let mut key = INITIAL_KEY;
    plain
        .iter()
        .map(|&b| {
            key ^= b;
            key
        })
        .collect()
}

pub fn decode(cipher: &[u8]) -> Vec<u8> {
    let mut key = INITIAL_KEY;
    cipher
        .iter()
        .map(|&c| {
            let p = c ^ key;
            key = c;
            p
        })
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame shorter than the 4-byte length prefix ({0} bytes)")]
    Short(usize),
    #[error("length prefix says {declared} bytes but {actual} follow")]
    LengthMismatch { declared: u32, actual: usize },
    #[error("zero-length frame")]
    Empty,
}

/// One length-prefixed SmartHome frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TplinkFrame {
    /// Declared length as carried on the wire.
    pub length: u32,
    pub cipher: Vec<u8>,
}

impl TplinkFrame {
    pub fn from_plain(plain: &[u8]) -> Self {
        let cipher = encode(plain);
        Self {
            length: cipher.len() as u32,
            cipher,
        }
    }

    pub fn from_cipher(cipher: Vec<u8>) -> Self {
        Self {
            length: cipher.len() as u32,
            cipher,
        }
    }

    /// Parses exactly one frame; trailing bytes are a length mismatch.
    pub fn parse(bytes: &[u8]) -> Result<Self, FrameError> {
        if bytes.len() < PREFIX_LEN {
            return Err(FrameError::Short(bytes.len()));
        }
        let declared = read_prefix(bytes).expect("length checked");
        let body = &bytes[PREFIX_LEN..];
        if declared as usize != body.len() {
            return Err(FrameError::LengthMismatch {
                declared,
                actual: body.len(),
            });
        }
        if declared == 0 {
            return Err(FrameError::Empty);
        }
        Ok(Self {
            length: declared,
            cipher: body.to_vec(),
        })
    }

    pub fn plain(&self) -> Vec<u8> {
        decode(&self.cipher)
    }

    pub fn is_consistent(&self) -> bool {
        self.length as usize == self.cipher.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(PREFIX_LEN + self.cipher.len());
        out.extend_from_slice(&self.length.to_be_bytes());
        out.extend_from_slice(&self.cipher);
        out
    }
}

/// Reads the big-endian length prefix, if four bytes are available.
pub fn read_prefix(bytes: &[u8]) -> Option<u32> {
    let prefix: [u8; PREFIX_LEN] = bytes.get(..PREFIX_LEN)?.try_into().ok()?;
    Some(u32::from_be_bytes(prefix))
}

/// Length of the complete frame at the start of `bytes`, if fully buffered.
pub fn complete_frame_len(bytes: &[u8]) -> Option<usize> {
    let declared = read_prefix(bytes)? as usize;
    let total = PREFIX_LEN.checked_add(declared)?;
    (bytes.len() >= total).then_some(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;

    const SWITCH_OFF: &str = "AAAAKtDygfiL/5r31e+UtsWg1Iv5nPCR6LfEsNGlwOLYo4HyhueT9tTu3qPeow==";

    #[test]
    fn switch_off_frame_decodes_with_length_42() {
        let raw = STANDARD.decode(SWITCH_OFF).unwrap();
        assert_eq!(&raw[..4], &[0, 0, 0, 42]);
        let frame = TplinkFrame::parse(&raw).unwrap();
        assert_eq!(frame.length, 42);
        assert_eq!(
            frame.plain(),
            br#"{"system":{"set_relay_state":{"state":0}}}"#.to_vec()
        );
        assert_eq!(TplinkFrame::from_plain(&frame.plain()).to_bytes(), raw);
    }

    #[test]
    fn encode_of_empty_is_empty() {
        assert!(encode(b"").is_empty());
        assert!(decode(b"").is_empty());
    }

    #[test]
    fn parse_rejects_bad_frames() {
        assert_eq!(TplinkFrame::parse(&[0, 0]), Err(FrameError::Short(2)));
        assert_eq!(TplinkFrame::parse(&[0, 0, 0, 0]), Err(FrameError::Empty));
        assert_eq!(
            TplinkFrame::parse(&[0, 0, 0, 3, 1]),
            Err(FrameError::LengthMismatch {
                declared: 3,
                actual: 1
            })
        );
    }

    #[test]
    fn complete_frame_len_waits_for_body() {
        assert_eq!(complete_frame_len(&[0, 0, 0, 2, 9]), None);
        assert_eq!(complete_frame_len(&[0, 0, 0, 2, 9, 9, 7]), Some(6));
        assert_eq!(complete_frame_len(&[0, 0]), None);
    }
}
