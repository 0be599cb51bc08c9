//! Vulnerability assessment: registry, verdicts and reports.

pub mod classify;
pub mod credentials;
pub mod registry;
pub mod report;

pub use classify::{classify, err_codes, request_summary, Evidence, ResponseVerdict, VerdictClass};
pub use credentials::{render_credential_report, scan_credentials, CredentialScan};
pub use registry::{
    load_registry, parse_registry, ExploitCheck, FixedHeader, Mode, Registry, RegistryError,
    ValidityRule, VulnerabilityDescriptor,
};
pub use report::{assess, percent_half_up, render_report, FuzzReport};
