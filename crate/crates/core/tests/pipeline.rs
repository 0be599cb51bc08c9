mod common;

use std::time::{Duration, Instant};

use common::*;
use iotlexfuzz::assess::{assess, classify, scan_credentials, Registry, VerdictClass};
use iotlexfuzz::capture::{parse_capture, reassemble};
use iotlexfuzz::codec::TplinkFrame;
use iotlexfuzz::injector::{run_campaign, run_payloads, Outcome, Payload, TargetSpec};
use iotlexfuzz::mock::{serve, MockBehavior, RouteMatcher};
use iotlexfuzz::protocol::{FieldId, FieldName, Protocol};
use iotlexfuzz::seeds::{build_corpus, reference_corpus, SeedCorpus};

fn fast_target(port: u16, protocol: Protocol) -> TargetSpec {
    let mut t = TargetSpec::new("127.0.0.1", port, protocol);
    t.read_timeout = Duration::from_millis(800);
    t.pacing = Duration::ZERO;
    t.max_parallel = 8;
    t
}

#[test]
fn credential_fixture_counts() {
    let start = Instant::now();
    let (bytes, planted) = credential_fixture(20543, 394);
    let cap = parse_capture(&bytes, CAM).unwrap();
    assert_eq!(cap.total_frames, 20543);
    let scan = scan_credentials(&cap.records, cap.total_frames);
    assert_eq!(scan.findings.len(), 394);
    let decoded: Vec<String> = scan
        .findings
        .iter()
        .map(|f| {
            let (u, p) = f.credentials().unwrap();
            format!("{u}:{p}")
        })
        .collect();
    assert_eq!(decoded, planted);
    assert_eq!(decoded[0], "admin:admin123");
    assert!(start.elapsed() < Duration::from_secs(5));
}

#[test]
fn repeated_requests_collapse_to_one_seed_per_field() {
    let frames: Vec<Frame> = (0..394u16)
        .map(|i| tcp((PHONE, 41000 + i), (CAM, 80), 1, PTZ_LEFT_REQUEST))
        .collect();
    let cap = parse_capture(&pcap(&frames), CAM).unwrap();
    let msgs = reassemble(&cap.records).messages;
    assert_eq!(msgs.len(), 394);
    let (corpus, warnings) = build_corpus(&msgs, "D3D", "fixture");
    assert!(warnings.is_empty());
    let uri = FieldId::new(Protocol::Http, FieldName::RequestUri);
    assert_eq!(corpus.seeds(&uri).count(), 1);
    for field in corpus.fields() {
        assert_eq!(corpus.seeds(&field).count(), 1, "{field:?}");
    }
    let auth = FieldId::new(Protocol::Http, FieldName::header("Authorization"));
    assert_eq!(corpus.seeds(&auth).next().unwrap().value, b"Basic YWRtaW46YWRtaW4xMjM=");
}

#[test]
fn rtsp_trace_yields_each_uri() {
    let uris = [
        "rtsp://192.168.4.7/0",
        "rtsp://192.168.4.7/1",
        "rtsp://192.168.4.7/stream1",
        "rtsp://192.168.4.7/stream2",
        "rtsp://192.168.4.7/1/stream1",
        "rtsp://192.168.4.7/1/stream2",
    ];
    let ezviz = std::net::Ipv4Addr::new(192, 168, 4, 7);
    let mut frames = Vec::new();
    for (i, uri) in uris.iter().enumerate() {
        let port = 42000 + i as u16;
        let req = format!("DESCRIBE {uri} RTSP/1.0\r\nCSeq: {}\r\nAccept: application/sdp\r\n\r\n", i + 2);
        frames.push(tcp((PHONE, port), (ezviz, 554), 1, req.as_bytes()));
        let resp = format!("RTSP/1.0 200 OK\r\nCSeq: {}\r\n\r\n", i + 2);
        frames.push(tcp((ezviz, 554), (PHONE, port), 1, resp.as_bytes()));
    }
    let cap = parse_capture(&pcap(&frames), ezviz).unwrap();
    let (corpus, _) = build_corpus(&reassemble(&cap.records).messages, "Ezviz", "trace");
    let uri = FieldId::new(Protocol::Rtsp, FieldName::RequestUri);
    let got: Vec<&[u8]> = corpus.seeds(&uri).map(|s| s.value.as_slice()).collect();
    assert_eq!(got, uris.iter().map(|u| u.as_bytes()).collect::<Vec<_>>());
    assert_eq!(corpus.seeds(&FieldId::new(Protocol::Rtsp, FieldName::Method)).count(), 1);
}

#[test]
fn corpus_file_round_trip() {
    let corpus = reference_corpus("D3D").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d3d.seeds");
    corpus.save(&path).unwrap();
    let back = SeedCorpus::load(&path).unwrap();
    assert_eq!(back.entries().len(), corpus.entries().len());
    for (a, b) in back.entries().iter().zip(corpus.entries()) {
        assert_eq!((&a.field, &a.value), (&b.field, &b.value));
    }
}

#[test]
fn dropped_connections_show_as_loss() {
    let registry = Registry::builtin();
    let vuln = registry.get("D3D_001").unwrap();
    let mut mock = MockBehavior::d3d_rtsp();
    mock.faults.drop_every = Some(10);
    let server = serve(mock).unwrap();
    let mutants = reference_campaign(&registry, "D3D_001", 200, 3);
    let records = run_campaign(&fast_target(server.port(), Protocol::Rtsp), &mutants).unwrap();
    let verdicts: Vec<_> = records.iter().map(|r| classify(vuln, r)).collect();
    let report = assess(vuln, "mock", verdicts, Duration::ZERO);
    assert_eq!(report.sent, 200);
    assert_eq!(report.no_response, 20);
    assert_eq!(report.loss_pct, 10.0);
    assert_eq!(server.connections(), 200);
    assert!(records.iter().all(|r| r.outcome == Outcome::Responded || r.outcome == Outcome::Reset));
}

#[test]
fn stalled_connections_time_out() {
    let mut mock = MockBehavior::tplink();
    mock.faults.stall_every = Some(2);
    mock.faults.stall_for = Duration::from_secs(2);
    let server = serve(mock).unwrap();
    let mut target = fast_target(server.port(), Protocol::TplinkSmarthome);
    target.read_timeout = Duration::from_millis(300);
    target.max_parallel = 1;
    let frame = TplinkFrame::from_plain(br#"{"system":{"get_sysinfo":null}}"#).to_bytes();
    let payloads: Vec<Payload> = (0..4)
        .map(|i| Payload {
            mutant_id: i,
            bytes: frame.clone(),
            structure_risk: false,
        })
        .collect();
    let records = run_payloads(&target, &payloads).unwrap();
    let outcomes: Vec<Outcome> = records.iter().map(|r| r.outcome).collect();
    assert_eq!(
        outcomes,
        vec![Outcome::Responded, Outcome::Timeout, Outcome::Responded, Outcome::Timeout]
    );
}

#[test]
fn lenient_image_mock_serves_mutated_paths() {
    let registry = Registry::builtin();
    let vuln = registry.get("D3D_002").unwrap();
    let server = serve(MockBehavior::d3d_http().with_matcher(RouteMatcher::Lenient(2))).unwrap();
    let mutants = reference_campaign(&registry, "D3D_002", 60, 11);
    let records = run_campaign(&fast_target(server.port(), Protocol::Http), &mutants).unwrap();
    let verdicts: Vec<_> = records.iter().map(|r| classify(vuln, r)).collect();
    let valid: Vec<_> = verdicts.iter().filter(|v| v.class == VerdictClass::Valid).collect();
    assert!(!valid.is_empty());
    assert!(valid.iter().all(|v| v.evidence.jpeg.as_deref().is_some_and(|j| j.starts_with(&[0xFF, 0xD8]))));
}

#[test]
fn every_reference_campaign_runs_against_its_mock() {
    let registry = Registry::builtin();
    for (id, mock) in [
        ("D3D_001", MockBehavior::d3d_rtsp()),
        ("D3D_002", MockBehavior::d3d_http()),
        ("D3D_003", MockBehavior::d3d_http()),
        ("Ezviz_000", MockBehavior::ezviz_rtsp()),
        ("Ezviz_001", MockBehavior::ezviz_http()),
        ("TPLink_Kasa_000", MockBehavior::tplink()),
    ] {
        let vuln = registry.get(id).unwrap();
        let server = serve(mock.clone()).unwrap();
        let mutants = reference_campaign(&registry, id, 40, 5);
        let records = run_campaign(&fast_target(server.port(), vuln.protocol), &mutants).unwrap();
        let live: Vec<_> = records.iter().map(|r| classify(vuln, r)).collect();
        let offline = simulate(vuln, &mock, &mutants);
        let classes = |v: &[iotlexfuzz::assess::ResponseVerdict]| v.iter().map(|x| x.class).collect::<Vec<_>>();
        assert_eq!(classes(&live), classes(&offline), "{id}");
        assert_eq!(live[0].class, VerdictClass::Valid, "{id}: unmutated seed should succeed");
    }
}
