//! Campaign summaries and their text rendering.

use std::fmt::Write as _;
use std::time::Duration;

use crate::assess::classify::{ResponseVerdict, VerdictClass};
use crate::assess::registry::VulnerabilityDescriptor;
use crate::protocol::Protocol;

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzReport {
    pub vuln_id: String,
    pub vuln_name: String,
    pub protocol: Protocol,
    pub target: String,
    pub sent: usize,
    pub valid: usize,
    pub invalid: usize,
    pub malformed_rejected: usize,
    pub no_response: usize,
    pub loss_pct: f64,
    pub duration: Duration,
    pub coverage_valid_pct: u32,
    pub coverage_invalid_pct: u32,
    pub verdicts: Vec<ResponseVerdict>,
    pub vulnerable: bool,
}

/// `part / whole` as an integer percentage, halves rounded up. Zero when
/// `whole` is zero.
pub fn percent_half_up(part: usize, whole: usize) -> u32 {
    if whole == 0 {
        return 0;
    }
    ((200 * part as u128 + whole as u128) / (2 * whole as u128)) as u32
}

pub fn assess(
    vuln: &VulnerabilityDescriptor,
    target: &str,
    verdicts: Vec<ResponseVerdict>,
    duration: Duration,
) -> FuzzReport {
    let count = |c: VerdictClass| verdicts.iter().filter(|v| v.class == c).count();
    let valid = count(VerdictClass::Valid);
    let invalid = count(VerdictClass::Invalid);
    let malformed_rejected = count(VerdictClass::MalformedRejected);
    let no_response = count(VerdictClass::NoResponse);
    let sent = verdicts.len();
    let denominated = valid + invalid;
    FuzzReport {
        vuln_id: vuln.id.clone(),
        vuln_name: vuln.name.clone(),
        protocol: vuln.protocol,
        target: target.to_string(),
        sent,
        valid,
        invalid,
        malformed_rejected,
        no_response,
        loss_pct: if sent == 0 {
            0.0
        } else {
            no_response as f64 * 100.0 / sent as f64
        },
        duration,
        coverage_valid_pct: percent_half_up(valid, denominated),
        coverage_invalid_pct: percent_half_up(invalid, denominated),
        vulnerable: valid >= 1,
        verdicts,
    }
}

/// Summary block, preceded by one line per mutant when `verbose`.
pub fn render_report(report: &FuzzReport, verbose: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Vulnerability: {} ({})", report.vuln_id, report.vuln_name);
    let _ = writeln!(out, "Protocol: {}", report.protocol);
    let _ = writeln!(out, "Target: {}", report.target);
    if verbose {
        let _ = writeln!(out, "Mutated requests for {}:", report.vuln_id);
        for v in &report.verdicts {
            let _ = writeln!(
                out,
                "  #{:03} {:<18} {:<16} {}",
                v.mutant_id, v.class, v.status, v.request
            );
        }
    }
    let _ = writeln!(out, "Sent={}", report.sent);
    let _ = writeln!(out, "Valid={}", report.valid);
    let _ = writeln!(out, "Invalid={}", report.invalid);
    let _ = writeln!(out, "MalformedRejected={}", report.malformed_rejected);
    let _ = writeln!(out, "NoResponse={}", report.no_response);
    let _ = writeln!(out, "MessageLoss%={:.2}", report.loss_pct);
    let _ = writeln!(out, "Duration(s)={:.3}", report.duration.as_secs_f64());
    let _ = writeln!(out, "CoverageValid%={}", report.coverage_valid_pct);
    let _ = writeln!(out, "CoverageInvalid%={}", report.coverage_invalid_pct);
    let _ = writeln!(out, "Vulnerable={}", report.vulnerable);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assess::classify::Evidence;
    use crate::assess::registry::Registry;
    use proptest::prelude::*;

    fn verdict(id: usize, class: VerdictClass) -> ResponseVerdict {
        ResponseVerdict {
            mutant_id: id,
            class,
            status: "200 OK".into(),
            request: format!("GET /{id} HTTP/1.1"),
            evidence: Evidence {
                rule: String::new(),
                excerpt: String::new(),
                jpeg: None,
            },
        }
    }

    fn classes(spec: &[(VerdictClass, usize)]) -> Vec<ResponseVerdict> {
        let mut out = Vec::new();
        for &(c, n) in spec {
            for _ in 0..n {
                out.push(verdict(out.len(), c));
            }
        }
        out
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(percent_half_up(48, 100), 48);
        assert_eq!(percent_half_up(1, 8), 13);
        assert_eq!(percent_half_up(1, 200), 1);
        assert_eq!(percent_half_up(1, 201), 0);
        assert_eq!(percent_half_up(0, 0), 0);
    }

    #[test]
    fn all_timeouts() {
        let r = Registry::builtin();
        let report = assess(
            r.get("D3D_001").unwrap(),
            "mock:554",
            classes(&[(VerdictClass::NoResponse, 200)]),
            Duration::from_secs(1),
        );
        assert!(!report.vulnerable);
        assert_eq!(report.loss_pct, 100.0);
        assert_eq!((report.coverage_valid_pct, report.coverage_invalid_pct), (0, 0));
        assert!(render_report(&report, false).contains("MessageLoss%=100.00\n"));
    }

    #[test]
    fn coverage_excludes_malformed() {
        let r = Registry::builtin();
        let report = assess(
            r.get("D3D_001").unwrap(),
            "mock:554",
            classes(&[
                (VerdictClass::Valid, 48),
                (VerdictClass::Invalid, 52),
                (VerdictClass::MalformedRejected, 25),
            ]),
            Duration::ZERO,
        );
        assert_eq!(report.sent, 125);
        assert_eq!((report.coverage_valid_pct, report.coverage_invalid_pct), (48, 52));
        let text = render_report(&report, false);
        assert!(text.contains("CoverageValid%=48\nCoverageInvalid%=52\n"));
        assert!(text.ends_with("Vulnerable=true\n"));
    }

    #[test]
    fn verbose_lists_every_mutant() {
        let r = Registry::builtin();
        let report = assess(
            r.get("D3D_003").unwrap(),
            "mock:80",
            classes(&[(VerdictClass::Valid, 1), (VerdictClass::Invalid, 2)]),
            Duration::ZERO,
        );
        let text = render_report(&report, true);
        assert_eq!(text.lines().filter(|l| l.starts_with("  #")).count(), 3);
        assert!(text.contains("Sent=3\n"));
        assert_eq!(render_report(&report, false).lines().count(), 13);
    }

    proptest! {
        #[test]
        fn totals_reconcile(v in 0usize..300, i in 0usize..300, m in 0usize..100, n in 0usize..100) {
            let r = Registry::builtin();
            let report = assess(
                r.get("D3D_001").unwrap(),
                "t",
                classes(&[
                    (VerdictClass::Valid, v),
                    (VerdictClass::Invalid, i),
                    (VerdictClass::MalformedRejected, m),
                    (VerdictClass::NoResponse, n),
                ]),
                Duration::ZERO,
            );
            prop_assert_eq!(report.sent, report.valid + report.invalid + report.malformed_rejected + report.no_response);
            if v + i > 0 {
                let total = report.coverage_valid_pct + report.coverage_invalid_pct;
                prop_assert!((99..=101).contains(&total));
            }
            prop_assert_eq!(report.vulnerable, v > 0);
        }

        #[test]
        fn adding_a_valid_keeps_vulnerable(v in 1usize..20, i in 0usize..20) {
            let r = Registry::builtin();
            let vuln = r.get("D3D_003").unwrap();
            let mut list = classes(&[(VerdictClass::Valid, v), (VerdictClass::Invalid, i)]);
            prop_assert!(assess(vuln, "t", list.clone(), Duration::ZERO).vulnerable);
            list.push(verdict(999, VerdictClass::Valid));
            prop_assert!(assess(vuln, "t", list, Duration::ZERO).vulnerable);
        }
    }
}
