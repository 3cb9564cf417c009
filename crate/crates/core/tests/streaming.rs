mod common;

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;

use milo::models::{Dataset, MODEL_TYPES};
use milo::node::{Node, NodeMap};
use milo::rng::SeededRng;
use milo::streaming::{
    client_download, client_predict, client_upload, open_payload, remote_call, seal_payload, serve,
    serve_document, Compression, RemoteCall, SealedEnvelope, StreamClient, StreamConfig, StreamKey,
};
use milo::tensor::{decode_tensor, encode_tensor};
use milo::transport::{export_model, ModelDocument};
use milo::{Error, Tensor};

fn key_a() -> StreamKey {
    StreamKey::from_bytes([0xA5; 32])
}

fn key_b() -> StreamKey {
    StreamKey::from_bytes([0x5A; 32])
}

fn golden_doc() -> ModelDocument {
    export_model(&common::golden_model()).unwrap()
}

fn client(url: &str, key: Option<StreamKey>) -> StreamClient {
    StreamClient::new(url, StreamConfig::new(key)).unwrap()
}

#[test]
fn health_is_plaintext_with_the_protocol_version() {
    let server = serve_document(None, StreamConfig::new(Some(key_a()))).unwrap();
    let text = client(&server.url(), None).health().unwrap();
    assert_eq!(text, "ok protocol=1");
}

#[test]
fn reference_model_predicts_sixteen_over_loopback() {
    let server = serve_document(Some(golden_doc()), StreamConfig::new(Some(key_a()))).unwrap();
    let c = client(&server.url(), Some(key_a()));
    let y = client_predict(&c, &Tensor::from_rows(&[vec![3.0, 5.0]]).unwrap()).unwrap();
    assert!((y.as_f64().unwrap()[0] - 16.0).abs() < 1e-9);
}

#[test]
fn remote_predictions_equal_local_predictions_bitwise() {
    let server = serve_document(None, StreamConfig::new(Some(key_a()))).unwrap();
    let c = client(&server.url(), Some(key_a()));
    let mut rng = SeededRng::new(2024);
    for model_type in MODEL_TYPES {
        let (model, ds) = common::random_fitted(model_type, &mut rng);
        client_upload(&c, &export_model(&model).unwrap()).unwrap();
        for _ in 0..100 {
            let x = common::random_inputs(&mut rng, 1, ds.n_features());
            let remote = client_predict(&c, &x).unwrap();
            assert_eq!(remote, model.predict(&x).unwrap(), "{model_type}");
        }
    }
}

#[test]
fn server_started_from_a_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(&path, common::golden_text()).unwrap();
    let mut cfg = StreamConfig::new(Some(key_a()));
    cfg.model_path = Some(path);
    let server = serve(cfg).unwrap();
    let y = client(&server.url(), Some(key_a()))
        .predict(&Tensor::from_rows(&[vec![3.0, 5.0]]).unwrap())
        .unwrap();
    assert!((y.as_f64().unwrap()[0] - 16.0).abs() < 1e-9);

    let mut bad = StreamConfig::new(None);
    bad.model_path = Some(dir.path().join("missing.json"));
    assert!(matches!(serve(bad), Err(Error::ModelLoadFailure(_))));
}

#[test]
fn occupied_port_is_a_bind_failure() {
    let first = serve_document(None, StreamConfig::new(None)).unwrap();
    let mut cfg = StreamConfig::new(None);
    cfg.port = first.addr().port();
    assert!(matches!(serve_document(None, cfg), Err(Error::BindFailure(_))));
}

#[test]
fn wrong_client_key_is_an_authentication_failure() {
    let server = serve_document(Some(golden_doc()), StreamConfig::new(Some(key_a()))).unwrap();
    let x = Tensor::from_rows(&[vec![3.0, 5.0]]).unwrap();
    let err = client(&server.url(), Some(key_b())).predict(&x).unwrap_err();
    assert!(matches!(err, Error::AuthenticationFailure), "{err}");
    let err = client(&server.url(), None).predict(&x).unwrap_err();
    assert!(matches!(err, Error::AuthenticationFailure), "{err}");
}

fn predict_request(cfg: &StreamConfig) -> SealedEnvelope {
    let mut body = NodeMap::new();
    body.insert("X".into(), encode_tensor(&Tensor::from_rows(&[vec![3.0, 5.0]]).unwrap()));
    seal_payload(Node::Map(body).to_compact_string().as_bytes(), cfg).unwrap()
}

#[test]
fn every_flipped_ciphertext_byte_fails_authentication() {
    let cfg = StreamConfig::new(Some(key_a()));
    let env = predict_request(&cfg);
    let raw = BASE64.decode(&env.payload).unwrap();
    for i in 0..raw.len() {
        let mut bytes = raw.clone();
        bytes[i] ^= 0x01;
        let tampered = SealedEnvelope {
            payload: BASE64.encode(&bytes),
            ..env.clone()
        };
        assert!(
            matches!(open_payload(&tampered, &cfg), Err(Error::AuthenticationFailure)),
            "byte {i}"
        );
    }
    let nonce = BASE64.decode(env.nonce.as_ref().unwrap()).unwrap();
    for i in 0..nonce.len() {
        let mut n = nonce.clone();
        n[i] ^= 0x80;
        let tampered = SealedEnvelope {
            nonce: Some(BASE64.encode(&n)),
            ..env.clone()
        };
        assert!(matches!(open_payload(&tampered, &cfg), Err(Error::AuthenticationFailure)));
    }
}

#[test]
fn tampered_request_is_rejected_by_the_server_with_401() {
    let cfg = StreamConfig::new(Some(key_a()));
    let server = serve_document(Some(golden_doc()), cfg.clone()).unwrap();
    let env = predict_request(&cfg);
    let mut raw = BASE64.decode(&env.payload).unwrap();
    raw[0] ^= 0xFF;
    let tampered = SealedEnvelope {
        payload: BASE64.encode(&raw),
        ..env
    };
    let resp = reqwest::blocking::Client::new()
        .post(format!("{}/predict", server.url()))
        .body(tampered.to_json())
        .send()
        .unwrap();
    assert_eq!(resp.status().as_u16(), 401);
    let reply = SealedEnvelope::parse(&resp.bytes().unwrap()).unwrap();
    let body = Node::parse_bytes(&open_payload(&reply, &cfg).unwrap()).unwrap();
    assert_eq!(
        body.get("error").and_then(|e| e.get("kind")).and_then(Node::as_str),
        Some("AuthenticationFailure")
    );
}

#[test]
fn malformed_frames_get_sealed_400s() {
    let cfg = StreamConfig::new(Some(key_a()));
    let server = serve_document(Some(golden_doc()), cfg.clone()).unwrap();
    let http = reqwest::blocking::Client::new();
    let resp = http
        .post(format!("{}/predict", server.url()))
        .body("not json")
        .send()
        .unwrap();
    assert_eq!(resp.status().as_u16(), 400);
    let reply = SealedEnvelope::parse(&resp.bytes().unwrap()).unwrap();
    assert!(open_payload(&reply, &cfg).is_ok());

    let bad_args = seal_payload(br#"{"X": "three"}"#, &cfg).unwrap();
    let resp = http
        .post(format!("{}/predict", server.url()))
        .body(bad_args.to_json())
        .send()
        .unwrap();
    assert_eq!(resp.status().as_u16(), 400);
}

#[test]
fn attributes_outside_the_allow_list_are_refused() {
    let cfg = StreamConfig::new(Some(key_a()));
    let server = serve_document(Some(golden_doc()), cfg.clone()).unwrap();
    let c = client(&server.url(), Some(key_a()));
    for attr in ["__dict__", "coef_", "extract_state", "__class__"] {
        let err = remote_call(&c, &RemoteCall::new(attr, NodeMap::new())).unwrap_err();
        assert!(matches!(&err, Error::UnknownAttribute(a) if a == attr), "{attr}: {err}");
    }
    let env = seal_payload(
        RemoteCall::new("__dict__", NodeMap::new()).to_node().to_compact_string().as_bytes(),
        &cfg,
    )
    .unwrap();
    let resp = reqwest::blocking::Client::new()
        .post(format!("{}/call", server.url()))
        .body(env.to_json())
        .send()
        .unwrap();
    assert_eq!(resp.status().as_u16(), 404);
}

#[test]
fn call_predict_matches_client_predict() {
    let server = serve_document(Some(golden_doc()), StreamConfig::new(Some(key_a()))).unwrap();
    let c = client(&server.url(), Some(key_a()));
    let x = Tensor::from_rows(&[vec![3.0, 5.0], vec![-1.0, 0.5]]).unwrap();
    let mut args = NodeMap::new();
    args.insert("X".into(), encode_tensor(&x));
    let reply = remote_call(&c, &RemoteCall::new("predict", args)).unwrap();
    assert_eq!(decode_tensor(reply.get("y").unwrap()).unwrap(), c.predict(&x).unwrap());
}

#[test]
fn fit_retrains_and_swaps_the_hosted_model() {
    let server = serve_document(Some(golden_doc()), StreamConfig::new(Some(key_a()))).unwrap();
    let c = client(&server.url(), Some(key_a()));
    let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0], vec![3.0, 1.0], vec![1.0, 4.0]];
    let y = vec![1.0, 2.0, 7.0, 8.0, 6.5];

    let mut args = NodeMap::new();
    args.insert("X".into(), encode_tensor(&Tensor::from_rows(&rows).unwrap()));
    args.insert("y".into(), encode_tensor(&Tensor::vector_f64(y.clone())));
    let ack = remote_call(&c, &RemoteCall::new("fit", args)).unwrap();
    assert_eq!(ack.get("ack"), Some(&Node::Bool(true)));
    assert_eq!(ack.get("model_type").and_then(Node::as_str), Some("LinearRegression"));

    let oracle = common::golden_model()
        .refit(&Dataset::from_rows(&rows, Some(y)).unwrap())
        .unwrap();
    let probe = Tensor::from_rows(&[vec![3.0, 5.0], vec![0.5, 0.5]]).unwrap();
    assert_eq!(c.predict(&probe).unwrap(), oracle.predict(&probe).unwrap());
    assert_eq!(
        client_download(&c).unwrap().canonical_bytes(),
        export_model(&oracle).unwrap().canonical_bytes()
    );
}

#[test]
fn fit_with_bad_arguments_leaves_the_model_in_place() {
    let server = serve_document(Some(golden_doc()), StreamConfig::new(Some(key_a()))).unwrap();
    let c = client(&server.url(), Some(key_a()));
    let err = remote_call(&c, &RemoteCall::new("fit", NodeMap::new())).unwrap_err();
    assert!(matches!(err, Error::InvalidArgs(_)), "{err}");
    assert_eq!(client_download(&c).unwrap().canonical_bytes(), golden_doc().canonical_bytes());
}

#[test]
fn download_returns_the_uploaded_document_exactly() {
    let server = serve_document(None, StreamConfig::new(Some(key_a()))).unwrap();
    let c = client(&server.url(), Some(key_a()));
    assert!(matches!(client_download(&c), Err(Error::NoHostedModel)));
    assert!(matches!(
        c.predict(&Tensor::from_rows(&[vec![1.0]]).unwrap()),
        Err(Error::NoHostedModel)
    ));

    let mut rng = SeededRng::new(5);
    for i in 0..MODEL_TYPES.len() {
        let doc = common::random_document(i, &mut rng);
        client_upload(&c, &doc).unwrap();
        assert_eq!(client_download(&c).unwrap().canonical_bytes(), doc.canonical_bytes());
    }
}

#[test]
fn invalid_upload_is_rejected_with_findings() {
    let server = serve_document(Some(golden_doc()), StreamConfig::new(Some(key_a()))).unwrap();
    let c = client(&server.url(), Some(key_a()));
    let text = common::golden_text().replace("\"n_jobs\": null", "\"n_jobs\": {\"py/reduce\": []}");
    let err = client_upload(&c, &ModelDocument::parse(&text).unwrap()).unwrap_err();
    match err {
        Error::ValidationRejected(findings) => assert!(findings[0].contains("py/reduce"), "{findings:?}"),
        other => panic!("expected rejection, got {other}"),
    }
    assert_eq!(client_download(&c).unwrap().canonical_bytes(), golden_doc().canonical_bytes());
}

#[test]
fn concurrent_downloads_see_whole_documents_during_uploads() {
    let server = serve_document(None, StreamConfig::new(Some(key_a()))).unwrap();
    let url = server.url();
    let mut rng = SeededRng::new(77);
    let docs: Vec<ModelDocument> = (0..2).map(|i| common::random_document(i, &mut rng)).collect();
    let allowed: HashSet<Vec<u8>> = docs.iter().map(ModelDocument::canonical_bytes).collect();
    client_upload(&client(&url, Some(key_a())), &docs[0]).unwrap();

    let stop = Arc::new(AtomicBool::new(false));
    let readers: Vec<_> = (0..4)
        .map(|_| {
            let (url, stop, allowed) = (url.clone(), stop.clone(), allowed.clone());
            std::thread::spawn(move || {
                let c = client(&url, Some(key_a()));
                let mut seen = 0;
                while !stop.load(Ordering::Relaxed) {
                    let got = client_download(&c).unwrap().canonical_bytes();
                    assert!(allowed.contains(&got), "torn document");
                    seen += 1;
                }
                seen
            })
        })
        .collect();
    let writer = client(&url, Some(key_a()));
    for i in 0..40 {
        client_upload(&writer, &docs[i % 2]).unwrap();
    }
    stop.store(true, Ordering::Relaxed);
    for r in readers {
        assert!(r.join().unwrap() > 0);
    }
}

#[test]
fn plaintext_uncompressed_channel_works_when_both_sides_agree() {
    let cfg = StreamConfig::new(None).with_compression(Compression::None);
    let server = serve_document(Some(golden_doc()), cfg.clone()).unwrap();
    let c = StreamClient::new(server.url(), cfg).unwrap();
    let y = c.predict(&Tensor::from_rows(&[vec![3.0, 5.0]]).unwrap()).unwrap();
    assert!((y.as_f64().unwrap()[0] - 16.0).abs() < 1e-9);
}

#[test]
fn oversize_requests_are_refused() {
    let mut cfg = StreamConfig::new(Some(key_a()));
    cfg.max_payload_bytes = 256;
    let server = serve_document(Some(golden_doc()), cfg.clone()).unwrap();
    let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 * 0.37, 1.0 / (i as f64 + 1.0)]).collect();
    let x = Tensor::from_rows(&rows).unwrap();

    let local = StreamClient::new(server.url(), cfg).unwrap();
    assert!(matches!(local.predict(&x), Err(Error::PayloadTooLarge { .. })));

    let generous = StreamClient::new(server.url(), StreamConfig::new(Some(key_a()))).unwrap();
    let err = generous.predict(&x).unwrap_err();
    assert!(matches!(&err, Error::RemoteError { kind, .. } if kind == "PayloadTooLarge"), "{err}");
}

#[test]
fn compression_shrinks_a_repetitive_body() {
    let body = "the model file is plain data. ".repeat(10 * 1024 / 30 + 1).into_bytes();
    assert!(body.len() >= 10 * 1024);
    let cfg = StreamConfig::new(Some(key_a()));
    let env = seal_payload(&body, &cfg).unwrap();
    let sent = BASE64.decode(&env.payload).unwrap();
    assert!(sent.len() < body.len(), "{} vs {}", sent.len(), body.len());
}

#[test]
fn nonces_do_not_repeat() {
    let cfg = StreamConfig::new(Some(key_a()));
    let mut seen = HashSet::new();
    for _ in 0..20_000 {
        let env = seal_payload(b"x", &cfg).unwrap();
        assert!(seen.insert(env.nonce.unwrap()));
    }
}
