//! Vulnerability registry: descriptors plus mutation dictionaries.
//!
//! The file is a sequence of documents separated by lines holding a single
//! `-`. Each document is `key: value` lines; `#` starts a comment line.
//! A document with a `dictionary:` key defines a dictionary, anything else
//! must carry an `id:` and defines a vulnerability.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use thiserror::Error;

use crate::codec::tplink::{self, TplinkFrame};
use crate::mutation::dictionary::{Dictionaries, TplinkPair};
use crate::protocol::{FieldName, Protocol};

pub const BUILTIN_REGISTRY: &str = include_str!("../../registry/vulnerabilities.reg");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Passive,
    Active,
}

/// Named predicate deciding whether a response proves acceptance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidityRule {
    /// 200 status and the body contains the needle (case-sensitive).
    Http200BodyContains(String),
    /// 200 status and a Content-Type starting with the given media type.
    Http200ContentType(String),
    /// 200 status and the CSeq echoed unchanged.
    Rtsp200CseqEcho,
    /// Decoded JSON reply whose `err_code` values are all zero.
    TplinkErrCodeZero,
    /// Passive: a decodable Basic credential in the capture.
    BasicCredential,
}

impl ValidityRule {
    pub fn name(&self) -> &'static str {
        match self {
            ValidityRule::Http200BodyContains(_) => "http_200_body_contains",
            ValidityRule::Http200ContentType(_) => "http_200_content_type",
            ValidityRule::Rtsp200CseqEcho => "rtsp_200_cseq_echo",
            ValidityRule::TplinkErrCodeZero => "tplink_err_code_zero",
            ValidityRule::BasicCredential => "basic_credential",
        }
    }
}

impl fmt::Display for ValidityRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidityRule::Http200BodyContains(m) => write!(f, "200 with body containing {m:?}"),
            ValidityRule::Http200ContentType(m) => write!(f, "200 with Content-Type {m}"),
            ValidityRule::Rtsp200CseqEcho => f.write_str("200 with echoed CSeq"),
            ValidityRule::TplinkErrCodeZero => f.write_str("err_code 0"),
            ValidityRule::BasicCredential => f.write_str("decodable Basic credential"),
        }
    }
}

/// What a confirmed hit lets an attacker do; drives evidence collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExploitCheck {
    CredentialDisclosure,
    StreamAccess,
    ImageCapture,
    CommandExecution,
}

impl FromStr for ExploitCheck {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "credential_disclosure" => ExploitCheck::CredentialDisclosure,
            "stream_access" => ExploitCheck::StreamAccess,
            "image_capture" => ExploitCheck::ImageCapture,
            "command_execution" => ExploitCheck::CommandExecution,
            other => return Err(format!("unknown exploit check `{other}`")),
        })
    }
}

/// A header pinned on every mutant: copied from the corpus when `value` is
/// `None`, otherwise forced to the given bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedHeader {
    pub name: String,
    pub value: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VulnerabilityDescriptor {
    pub id: String,
    pub name: String,
    pub device: String,
    pub protocol: Protocol,
    pub port: u16,
    pub mode: Mode,
    pub mutable_fields: Vec<FieldName>,
    pub fixed_headers: Vec<FixedHeader>,
    pub campaign_size: usize,
    pub validity: ValidityRule,
    pub exploit: ExploitCheck,
    pub max_ops: usize,
    /// Share of a campaign allowed to touch structure-risk fields.
    pub risk_fraction: f64,
    pub mutate_length: bool,
    pub include_identity: bool,
    /// Only request URIs containing this text anchor base templates.
    pub seed_uri_contains: Option<String>,
    /// Substitution dictionary for the query field.
    pub query_values: Vec<Vec<u8>>,
}

impl VulnerabilityDescriptor {
    fn new(id: String) -> Self {
        Self {
            id,
            name: String::new(),
            device: String::new(),
            protocol: Protocol::Http,
            port: 0,
            mode: Mode::Active,
            mutable_fields: Vec::new(),
            fixed_headers: Vec::new(),
            campaign_size: 200,
            validity: ValidityRule::BasicCredential,
            exploit: ExploitCheck::CredentialDisclosure,
            max_ops: 3,
            risk_fraction: 0.2,
            mutate_length: false,
            include_identity: true,
            seed_uri_contains: None,
            query_values: Vec::new(),
        }
    }

    pub fn is_passive(&self) -> bool {
        self.mode == Mode::Passive
    }

    /// Mutable fields, with the frame length added when length mutation is on.
    pub fn effective_mutable_fields(&self) -> Vec<FieldName> {
        let mut fields = self.mutable_fields.clone();
        if self.mutate_length && !fields.contains(&FieldName::FrameLength) {
            fields.push(FieldName::FrameLength);
        }
        fields
    }
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("registry {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("registry entry `{entry}`: {reason}")]
    Entry { entry: String, reason: String },
    #[error("registry entry `{0}` is defined twice")]
    Duplicate(String),
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    pub descriptors: Vec<VulnerabilityDescriptor>,
    pub dictionaries: Dictionaries,
}

impl Registry {
    /// The seven shipped vulnerabilities and the default dictionaries.
    pub fn builtin() -> Self {
        parse_registry(BUILTIN_REGISTRY).expect("built-in registry parses")
    }

    pub fn get(&self, id: &str) -> Option<&VulnerabilityDescriptor> {
        self.descriptors.iter().find(|d| d.id.eq_ignore_ascii_case(id))
    }

    pub fn ids(&self) -> Vec<&str> {
        self.descriptors.iter().map(|d| d.id.as_str()).collect()
    }

    /// Entries of `other` replace same-id entries here; new ids are appended.
    pub fn merge(&mut self, other: Registry) {
        for d in other.descriptors {
            match self.descriptors.iter_mut().find(|e| e.id == d.id) {
                Some(slot) => *slot = d,
                None => self.descriptors.push(d),
            }
        }
        for name in other.dictionaries.names() {
            let values = other.dictionaries.get(name).unwrap_or_default().to_vec();
            self.dictionaries.insert(name, values);
        }
        if !other.dictionaries.tplink_commands().is_empty() {
            self.dictionaries
                .insert_tplink(other.dictionaries.tplink_commands().to_vec());
        }
    }
}

/// Built-in registry extended (or overridden) by the file at `path`.
pub fn load_registry(path: impl AsRef<Path>) -> Result<Registry, RegistryError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| RegistryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let extra = parse_registry(&text)?;
    let mut registry = Registry::builtin();
    registry.merge(extra);
    Ok(registry)
}

struct Document<'a> {
    ordinal: usize,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Document<'a> {
    fn get(&self, key: &str) -> Option<&'a str> {
        self.pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    fn all(&self, key: &str) -> impl Iterator<Item = &'a str> + '_ {
        let key = key.to_string();
        self.pairs.iter().filter(move |(k, _)| *k == key).map(|(_, v)| *v)
    }

    fn label(&self) -> String {
        self.get("id")
            .or_else(|| self.get("dictionary"))
            .map(str::to_string)
            .unwrap_or_else(|| format!("#{}", self.ordinal))
    }
}

fn split_documents(text: &str) -> Result<Vec<Document<'_>>, RegistryError> {
    let mut docs = Vec::new();
    let mut current = Document {
        ordinal: 1,
        pairs: Vec::new(),
    };
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed == "-" {
            if !current.pairs.is_empty() {
                let next = current.ordinal + 1;
                docs.push(std::mem::replace(
                    &mut current,
                    Document {
                        ordinal: next,
                        pairs: Vec::new(),
                    },
                ));
            }
            continue;
        }
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once(':') else {
            return Err(RegistryError::Entry {
                entry: current.label(),
                reason: format!("line without `key: value`: {trimmed:?}"),
            });
        };
        current.pairs.push((key.trim(), value.trim()));
    }
    if !current.pairs.is_empty() {
        docs.push(current);
    }
    Ok(docs)
}

/// Parses registry text on its own, without the built-ins.
pub fn parse_registry(text: &str) -> Result<Registry, RegistryError> {
    let mut registry = Registry::default();
    let mut ids = HashSet::new();
    let mut dict_names = HashSet::new();
    for doc in split_documents(text)? {
        let fail = |reason: String| RegistryError::Entry {
            entry: doc.label(),
            reason,
        };
        if let Some(name) = doc.get("dictionary") {
            if !dict_names.insert(name.to_string()) {
                return Err(RegistryError::Duplicate(name.to_string()));
            }
            if name == "tplink_commands" {
                let pairs = doc
                    .all("pair")
                    .map(parse_pair)
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(fail)?;
                registry.dictionaries.insert_tplink(pairs);
            } else {
                let values = doc.all("value").map(|v| v.as_bytes().to_vec()).collect();
                registry.dictionaries.insert(name, values);
            }
            continue;
        }
        let descriptor = parse_descriptor(&doc).map_err(fail)?;
        if !ids.insert(descriptor.id.clone()) {
            return Err(RegistryError::Duplicate(descriptor.id));
        }
        registry.descriptors.push(descriptor);
    }
    Ok(registry)
}

fn parse_pair(value: &str) -> Result<TplinkPair, String> {
    let (b64, plain) = value
        .split_once(' ')
        .ok_or_else(|| format!("pair needs `<base64 frame> <plaintext>`: {value:?}"))?;
    let frame = STANDARD
        .decode(b64)
        .map_err(|e| format!("pair frame is not Base64: {e}"))?;
    let parsed = TplinkFrame::parse(&frame).map_err(|e| format!("pair frame: {e}"))?;
    if tplink::decode(&parsed.cipher) != plain.as_bytes() {
        return Err(format!("pair frame does not decode to {plain:?}"));
    }
    Ok(TplinkPair {
        frame,
        plain: plain.as_bytes().to_vec(),
    })
}

fn parse_bool(key: &str, v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" => Ok(true),
        "false" | "no" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got {v:?}")),
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("{key}: not a number: {v:?}"))
}

fn parse_descriptor(doc: &Document<'_>) -> Result<VulnerabilityDescriptor, String> {
    let id = doc.get("id").filter(|v| !v.is_empty()).ok_or("missing `id`")?;
    let mut d = VulnerabilityDescriptor::new(id.to_string());
    let mut validity = None;
    let mut needle = None;
    let mut saw_protocol = false;
    let mut saw_exploit = false;

    for &(key, v) in &doc.pairs {
        match key {
            "id" => {}
            "name" => d.name = v.to_string(),
            "device" => d.device = v.to_string(),
            "protocol" => {
                d.protocol = v.parse().map_err(|e| format!("{e}"))?;
                saw_protocol = true;
            }
            "port" => d.port = parse_num(key, v)?,
            "mode" => {
                d.mode = match v {
                    "passive" => Mode::Passive,
                    "active" => Mode::Active,
                    _ => return Err(format!("mode must be passive or active, got {v:?}")),
                }
            }
            "mutable_fields" => {
                d.mutable_fields = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<FieldName>().map_err(|e| format!("{e}")))
                    .collect::<Result<_, _>>()?;
            }
            "fixed_header" => {
                let header = match v.split_once(':') {
                    Some((name, value)) => FixedHeader {
                        name: name.trim().to_string(),
                        value: Some(value.trim().as_bytes().to_vec()),
                    },
                    None => FixedHeader {
                        name: v.to_string(),
                        value: None,
                    },
                };
                if header.name.is_empty() {
                    return Err("fixed_header needs a header name".into());
                }
                d.fixed_headers.push(header);
            }
            "campaign_size" => d.campaign_size = parse_num(key, v)?,
            "validity" => validity = Some(v),
            "match" => needle = Some(v),
            "exploit" => {
                d.exploit = v.parse()?;
                saw_exploit = true;
            }
            "max_ops" => d.max_ops = parse_num(key, v)?,
            "risk_fraction" => d.risk_fraction = parse_num(key, v)?,
            "mutate_length" => d.mutate_length = parse_bool(key, v)?,
            "include_identity" => d.include_identity = parse_bool(key, v)?,
            "seed_uri_contains" => d.seed_uri_contains = Some(v.to_string()),
            "query_value" => d.query_values.push(v.as_bytes().to_vec()),
            other => return Err(format!("unknown key `{other}`")),
        }
    }

    if !saw_protocol {
        return Err("missing `protocol`".into());
    }
    if !saw_exploit {
        return Err("missing `exploit`".into());
    }
    let need = |what: &str| needle.map(str::to_string).ok_or(format!("{what} needs `match`"));
    d.validity = match validity.ok_or("missing `validity`")? {
        "http_200_body_contains" => ValidityRule::Http200BodyContains(need("http_200_body_contains")?),
        "http_200_content_type" => ValidityRule::Http200ContentType(need("http_200_content_type")?),
        "rtsp_200_cseq_echo" => ValidityRule::Rtsp200CseqEcho,
        "tplink_err_code_zero" => ValidityRule::TplinkErrCodeZero,
        "basic_credential" => ValidityRule::BasicCredential,
        other => return Err(format!("unknown validity rule `{other}`")),
    };

    if d.is_passive() {
        if !d.mutable_fields.is_empty() {
            return Err("passive entries cannot have mutable_fields".into());
        }
    } else {
        if d.mutable_fields.is_empty() && !d.mutate_length {
            return Err("active entries need mutable_fields".into());
        }
        if d.campaign_size == 0 {
            return Err("campaign_size must be at least 1".into());
        }
        if d.max_ops == 0 {
            return Err("max_ops must be at least 1".into());
        }
    }
    if !(0.0..=1.0).contains(&d.risk_fraction) {
        return Err(format!("risk_fraction must lie in [0, 1], got {}", d.risk_fraction));
    }
    if d.port == 0 {
        return Err("missing or zero `port`".into());
    }
    for f in &d.mutable_fields {
        let ok = match f {
            FieldName::FrameLength | FieldName::FrameCommand => d.protocol == Protocol::TplinkSmarthome,
            FieldName::Cseq => d.protocol == Protocol::Rtsp,
            _ => d.protocol.is_text(),
        };
        if !ok {
            return Err(format!("field {f} does not exist in {}", d.protocol));
        }
    }
    Ok(d)
}
