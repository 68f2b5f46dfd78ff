use std::sync::Arc;
use std::time::Duration;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use futures::{SinkExt, StreamExt};
use rubsynth::synthetic::SyntheticRecording;
use rubsynth::trace::write_trace;
use rubsynth::{load_trace, write_wav, Corpus, PrepParams, SynthParams, WavEncoding};
use rubsynth_service::{decode_frame, router, CorpusSummary, Library, ServerMessage};
use tokio_tungstenite::tungstenite::Message;
use tower::ServiceExt;

const PNG_BYTES: &[u8] = b"\x89PNG\r\n\x1a\nnot-really-an-image";

fn corpus_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let (clip, trace) = SyntheticRecording {
        fragments: 500,
        seed: 2,
        ..Default::default()
    }
    .generate();
    let wav = dir.path().join("leather.wav");
    write_wav(&wav, &clip, WavEncoding::Float32).unwrap();
    let csv = dir.path().join("leather.csv");
    write_trace(&csv, &trace).unwrap();
    let (corpus, _) =
        Corpus::build(&wav, &load_trace(&csv).unwrap(), PrepParams::default(), 25).unwrap();
    corpus.save(dir.path().join("leather.json")).unwrap();
    std::fs::write(dir.path().join("leather.png"), PNG_BYTES).unwrap();
    dir
}

fn library(dir: &std::path::Path) -> Arc<Library> {
    Arc::new(Library::load_dir(dir, SynthParams::default(), 8).unwrap())
}

#[tokio::test]
async fn corpora_listing_and_images() {
    let dir = corpus_dir();
    let app = router(library(dir.path()));

    let res = app
        .clone()
        .oneshot(Request::get("/corpora").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    let body = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    let list: Vec<CorpusSummary> = serde_json::from_slice(&body).unwrap();
    assert_eq!(list.len(), 1);
    assert_eq!(list[0].id, "leather");
    assert!(list[0].fragments > 25);
    assert!((list[0].duration_s - 5.0).abs() < 1e-9);

    let res = app
        .clone()
        .oneshot(
            Request::get("/materials/leather/image")
                .body(Body::empty())
                .unwrap(),
        )
        .await
        .unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    assert_eq!(res.headers()["content-type"], "image/png");
    let body = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    assert_eq!(&body[..], PNG_BYTES);

    let res = app
        .oneshot(
            Request::get("/materials/velvet/image")
                .body(Body::empty())
                .unwrap(),
        )
        .await
        .unwrap();
    assert_eq!(res.status(), StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn websocket_session() {
    let dir = corpus_dir();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(library(dir.path()));
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/session"))
        .await
        .unwrap();

    let text = |v: &str| Message::Text(v.to_string().into());
    let next_text = |msg: Message| -> ServerMessage {
        match msg {
            Message::Text(t) => serde_json::from_str(&t).unwrap(),
            other => panic!("expected text, got {other:?}"),
        }
    };

    ws.send(text(r#"{"type":"open","corpus":"velvet","dpi":160}"#))
        .await
        .unwrap();
    match next_text(ws.next().await.unwrap().unwrap()) {
        ServerMessage::Error { code, .. } => assert_eq!(code, "unknown_corpus"),
        other => panic!("{other:?}"),
    }
    ws.send(text("not json")).await.unwrap();
    match next_text(ws.next().await.unwrap().unwrap()) {
        ServerMessage::Error { code, .. } => assert_eq!(code, "bad_request"),
        other => panic!("{other:?}"),
    }

    ws.send(text(
        r#"{"type":"open","corpus":"leather","dpi":160,"seed":4}"#,
    ))
    .await
    .unwrap();
    match next_text(ws.next().await.unwrap().unwrap()) {
        ServerMessage::Opened {
            sample_rate,
            block,
            format,
            ..
        } => {
            assert_eq!(
                (sample_rate, block, format.as_str()),
                (48_000, 480, "f32le")
            );
        }
        other => panic!("{other:?}"),
    }

    let mut expected_seq = 0u32;
    let mut heard = false;
    let deadline = tokio::time::Instant::now() + Duration::from_secs(10);
    let mut t = 0.0;
    while expected_seq < 60 {
        assert!(tokio::time::Instant::now() < deadline, "timed out");
        // one pointer message per received frame, 300 px/s
        let msg = format!(r#"{{"type":"pointer","t":{t},"x":{},"y":0}}"#, 3000.0 * t);
        ws.send(text(&msg)).await.unwrap();
        t += 0.01;
        match ws.next().await.unwrap().unwrap() {
            Message::Binary(bytes) => {
                assert_eq!(bytes.len(), 3_856);
                let (seq, block) = decode_frame(&bytes).unwrap();
                assert_eq!(seq, expected_seq);
                expected_seq += 1;
                heard |= block.channels.iter().flatten().any(|&s| s != 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
    assert!(heard, "moving pointer produced no sound");

    ws.send(text(r#"{"type":"close"}"#)).await.unwrap();
    // remaining frames then close
    loop {
        match ws.next().await {
            Some(Ok(Message::Binary(_))) => continue,
            Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
            Some(Ok(_)) => continue,
        }
    }
}
