//! Value dictionaries for substitution mutations.

use std::collections::BTreeMap;

use crate::protocol::{FieldName, Protocol};

/// A known SmartHome command: wire frame (prefix included) and its plaintext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TplinkPair {
    pub frame: Vec<u8>,
    pub plain: Vec<u8>,
}

impl TplinkPair {
    pub fn cipher(&self) -> &[u8] {
        &self.frame[crate::codec::tplink::PREFIX_LEN..]
    }
}

/// Named dictionaries, read-only once loaded.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dictionaries {
    sets: BTreeMap<String, Vec<Vec<u8>>>,
    tplink: Vec<TplinkPair>,
}

impl Dictionaries {
    pub fn insert(&mut self, name: &str, values: Vec<Vec<u8>>) {
        self.sets.insert(name.to_string(), values);
    }

    pub fn insert_tplink(&mut self, pairs: Vec<TplinkPair>) {
        self.tplink = pairs;
    }

    pub fn get(&self, name: &str) -> Option<&[Vec<u8>]> {
        self.sets.get(name).map(Vec::as_slice)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sets.keys().map(String::as_str)
    }

    pub fn tplink_commands(&self) -> &[TplinkPair] {
        &self.tplink
    }

    /// Name of the dictionary backing a field, if it has one.
    pub fn dictionary_name(protocol: Protocol, field: &FieldName) -> Option<&'static str> {
        Some(match (protocol, field) {
            (Protocol::Http, FieldName::Method) => "http_methods",
            (Protocol::Rtsp, FieldName::Method) => "rtsp_methods",
            (Protocol::Http, FieldName::UriScheme) => "http_schemes",
            (Protocol::Rtsp, FieldName::UriScheme) => "rtsp_schemes",
            (Protocol::Http, FieldName::Version) => "http_versions",
            (Protocol::Rtsp, FieldName::Version) => "rtsp_versions",
            (Protocol::TplinkSmarthome, FieldName::FrameCommand) => "tplink_commands",
            _ => return None,
        })
    }

    /// Substitution candidates for a field. SmartHome commands are cipher
    /// bodies without the length prefix.
    pub fn values_for(&self, protocol: Protocol, field: &FieldName) -> Option<Vec<Vec<u8>>> {
        let name = Self::dictionary_name(protocol, field)?;
        if name == "tplink_commands" {
            let ciphers: Vec<Vec<u8>> = self.tplink.iter().map(|p| p.cipher().to_vec()).collect();
            return (!ciphers.is_empty()).then_some(ciphers);
        }
        self.get(name).filter(|v| !v.is_empty()).map(<[Vec<u8>]>::to_vec)
    }
}
