mod common;

use std::time::Instant;

use iotlexfuzz::assess::{classify, Registry, VerdictClass};
use iotlexfuzz::codec::tplink::{self, TplinkFrame};
use iotlexfuzz::codec::{RequestTemplate, TextRequest};
use iotlexfuzz::injector::{ExchangeRecord, Outcome};
use iotlexfuzz::mock::MockBehavior;
use iotlexfuzz::mutation::{generate_campaign, risk_cap, FieldContext, Edit};
use iotlexfuzz::protocol::{FieldId, FieldName, Protocol};
use iotlexfuzz::seeds::reference_corpus;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ACTIVE: &[&str] = &["D3D_001", "D3D_002", "D3D_003", "Ezviz_000", "Ezviz_001", "TPLink_Kasa_000"];

fn token() -> impl Strategy<Value = String> {
    "[A-Z][A-Z_]{0,12}"
}

fn request_text() -> impl Strategy<Value = Vec<u8>> {
    (
        token(),
        "/[a-zA-Z0-9_./-]{0,30}",
        proptest::option::of("[a-z0-9=&-]{0,20}"),
        prop_oneof![Just("HTTP/1.1"), Just("HTTP/1.0"), Just("RTSP/1.0")],
        proptest::collection::vec(("[A-Za-z][A-Za-z-]{0,15}", "[ -~]{0,40}"), 0..6),
        prop_oneof![Just(" "), Just("  "), Just("\t")],
        prop_oneof![Just("\r\n"), Just("\n")],
    )
        .prop_map(|(method, path, query, version, headers, sp, eol)| {
            let mut out = format!("{method}{sp}{path}");
            if let Some(q) = query {
                out.push('?');
                out.push_str(&q);
            }
            out.push_str(&format!(" {version}{eol}"));
            for (name, value) in headers {
                out.push_str(&format!("{name}: {}{eol}", value.trim()));
            }
            out.push_str(eol);
            out.into_bytes()
        })
}

fn exchange(sent: Vec<u8>, response: Vec<u8>, outcome: Outcome, risky: bool) -> ExchangeRecord {
    let now = Instant::now();
    ExchangeRecord {
        mutant_id: 0,
        sent_bytes: sent,
        response_bytes: response,
        outcome,
        rtt: None,
        structure_risk: risky,
        started: now,
        finished: now,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn tplink_cipher_round_trips(plain in proptest::collection::vec(any::<u8>(), 0..4096)) {
        prop_assert_eq!(tplink::decode(&tplink::encode(&plain)), plain.clone());
        if !plain.is_empty() {
            let frame = TplinkFrame::from_plain(&plain);
            let parsed = TplinkFrame::parse(&frame.to_bytes()).unwrap();
            prop_assert_eq!(parsed.plain(), plain);
        }
    }

    #[test]
    fn text_requests_reserialize_verbatim(bytes in request_text()) {
        let parsed = TextRequest::parse(&bytes).unwrap();
        prop_assert_eq!(parsed.to_bytes(), bytes);
    }

    #[test]
    fn anything_that_parses_reserializes(bytes in proptest::collection::vec(any::<u8>(), 0..300)) {
        if let Ok(parsed) = TextRequest::parse(&bytes) {
            prop_assert_eq!(parsed.to_bytes(), bytes);
        }
    }

    #[test]
    fn campaigns_are_distinct_sized_and_reproducible(idx in 0..ACTIVE.len(), n in 1usize..80, seed in any::<u64>()) {
        let registry = Registry::builtin();
        let vuln = registry.get(ACTIVE[idx]).unwrap();
        let corpus = reference_corpus(&vuln.device).unwrap();
        let a = generate_campaign(&corpus, vuln, &registry.dictionaries, n, seed).unwrap();
        let b = generate_campaign(&corpus, vuln, &registry.dictionaries, n, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.len(), n);
        let distinct: std::collections::HashSet<Vec<u8>> = a.iter().map(|m| m.serialize()).collect();
        prop_assert_eq!(distinct.len(), n);
        let risky = a.iter().filter(|m| m.structure_risk).count();
        if vuln.protocol.is_text() {
            prop_assert_eq!(risky, risk_cap(n, vuln.risk_fraction));
        } else {
            prop_assert!(risky <= risk_cap(n, vuln.risk_fraction));
        }
        for m in &a {
            prop_assert!(m.applied.len() <= vuln.max_ops);
            prop_assert_eq!(m.is_identity(), m.mutant_id == 0 && vuln.include_identity);
            for op in &m.applied {
                prop_assert!(vuln.effective_mutable_fields().contains(&op.target.name));
            }
        }
    }

    #[test]
    fn edits_stay_inside_alphabet_or_dictionary(
        field_idx in 0usize..6,
        value in "[!-~]{1,24}",
        seed in any::<u64>(),
    ) {
        let registry = Registry::builtin();
        let (protocol, name) = [
            (Protocol::Http, FieldName::Method),
            (Protocol::Rtsp, FieldName::Method),
            (Protocol::Http, FieldName::UriPath),
            (Protocol::Http, FieldName::Version),
            (Protocol::Rtsp, FieldName::SpLeft),
            (Protocol::Http, FieldName::Crlf),
        ][field_idx].clone();
        let ctx = FieldContext::new(FieldId::new(protocol, name), &registry.dictionaries, None);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(edit) = ctx.draw(value.as_bytes(), &mut rng) {
            let out = ctx.apply(value.as_bytes(), &edit).unwrap();
            match edit {
                Edit::DictionarySubstitute { index } => {
                    let dict = ctx.dictionary.as_ref().unwrap();
                    prop_assert_eq!(&out, &dict[index]);
                }
                Edit::CaseFlip { pos } => {
                    prop_assert_eq!(out.len(), value.len());
                    prop_assert!(out[pos].eq_ignore_ascii_case(&value.as_bytes()[pos]));
                }
                Edit::DigitPerturb { pos, digit } => {
                    prop_assert!(value.as_bytes()[pos].is_ascii_digit());
                    prop_assert_eq!(out[pos], digit);
                }
                _ => {
                    for b in &out {
                        prop_assert!(ctx.alphabet.contains(*b) || value.as_bytes().contains(b));
                    }
                }
            }
        }
    }

    #[test]
    fn every_exchange_gets_exactly_one_verdict(
        idx in 0..ACTIVE.len(),
        response in proptest::collection::vec(any::<u8>(), 0..200),
        outcome in prop_oneof![Just(Outcome::Responded), Just(Outcome::Timeout), Just(Outcome::Reset), Just(Outcome::ConnectionRefused)],
        risky in any::<bool>(),
    ) {
        let registry = Registry::builtin();
        let vuln = registry.get(ACTIVE[idx]).unwrap();
        let sent = common::PTZ_LEFT_REQUEST.to_vec();
        let response_was_empty = response.is_empty();
        let verdict = classify(vuln, &exchange(sent, response, outcome, risky));
        let silent = outcome != Outcome::Responded || response_was_empty;
        prop_assert_eq!(verdict.class == VerdictClass::NoResponse, silent);
        if verdict.class == VerdictClass::MalformedRejected {
            prop_assert!(risky);
        }
    }

    #[test]
    fn mocks_survive_arbitrary_input(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
        for mock in [
            MockBehavior::d3d_http(),
            MockBehavior::d3d_rtsp(),
            MockBehavior::ezviz_http(),
            MockBehavior::ezviz_rtsp(),
            MockBehavior::tplink(),
        ] {
            let _ = mock.respond(&bytes);
        }
    }

    #[test]
    fn well_formed_requests_parse_as_templates(bytes in request_text()) {
        let t = RequestTemplate::parse(Protocol::Http, &bytes).unwrap();
        prop_assert_eq!(t.serialize(), bytes);
    }
}
