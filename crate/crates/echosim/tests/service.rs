mod common;

use std::collections::BTreeMap;
use std::time::Duration;

use common::{completed, probe, repo_file, updates, Client};
use echosim::assets::{build_assets, load_manifest, AssetSource, LoadedAssets};
use echosim::phantom::{phantom, PhantomSpec};
use echosim::planes::default_planes;
use echosim::protocol::{CalibrationPhase, ClientMessage, ErrorCode, ServerMessage};
use echosim::service::{serve, RealtimeVolume, ServeConfig, ServeError};
use echosim::source::TelemetrySource;
use echosim_core::{AssetKey, FeedbackEvent, TiltClass, Variant, View};

const SECOND: Duration = Duration::from_secs(1);

fn config() -> ServeConfig {
    ServeConfig { port: 0, ..ServeConfig::default() }
}

fn small_assets(dir: &std::path::Path) -> LoadedAssets {
    let seq = phantom(&PhantomSpec { size: 16, frames: 6, ..Default::default() });
    let planes = default_planes(seq.geometry());
    let mut sources = BTreeMap::new();
    for class in [TiltClass::NormalView, TiltClass::TiltView] {
        sources.insert(
            AssetKey { view: View::Apical, class },
            AssetSource { id: "phantom".into(), sequence: seq.clone(), tilt_deg: 0.0 },
        );
    }
    let sensors = View::ALL.iter().map(|&v| (v, v.default_sensor())).collect();
    build_assets(&sources, &planes, &sensors, dir).unwrap();
    load_manifest(&dir.join("manifest.json")).unwrap()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn snapshot_comes_first() {
    let server = serve(config(), LoadedAssets::empty()).await.unwrap();
    let mut c = Client::connect(server.addr).await;
    match c.recv(SECOND).await {
        Some(ServerMessage::StateUpdate(u)) => {
            assert_eq!(u.seq, 0);
            assert_eq!((u.view, u.variant), (View::Apical, Variant::Tilt));
            assert_eq!((u.level, u.stage_max, u.completed), (2, 0, false));
            assert_eq!(u.feedback_event, None);
        }
        other => panic!("expected a snapshot, got {other:?}"),
    }
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn virtual_probe_completes_a_view() {
    let server = serve(config(), LoadedAssets::empty()).await.unwrap();
    let mut c = Client::connect(server.addr).await;
    c.recv(SECOND).await.unwrap();
    c.send(&probe(0.0, 0.0, Some(0))).await;
    c.send(&probe(91.0, 0.0, Some(0))).await;
    c.send(&probe(91.0, 7.0, Some(0))).await;
    let msgs = c.collect_until(3 * SECOND, completed).await;
    let ups = updates(&msgs);
    let events: Vec<FeedbackEvent> = ups.iter().filter_map(|u| u.feedback_event).collect();
    assert_eq!(events, [FeedbackEvent::LocationOk, FeedbackEvent::NotchOk, FeedbackEvent::ViewAcquired]);
    let bar: Vec<u8> = ups.iter().map(|u| u.stage_max).collect();
    assert!(bar.windows(2).all(|w| w[0] <= w[1]), "status bar went backwards: {bar:?}");
    assert_eq!(bar.last(), Some(&3));
    assert!(ups.last().unwrap().completed);
    for w in ups.windows(2) {
        assert_eq!(w[1].seq, w[0].seq + 1);
    }

    c.send(&ClientMessage::ResetAttempt {}).await;
    let msgs = c.collect_until(SECOND, |m| matches!(m, ServerMessage::StateUpdate(u) if u.attempt == 1)).await;
    let u = *updates(&msgs).last().unwrap();
    assert_eq!((u.attempt, u.stage_max, u.completed), (1, 0, false));
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn reconnect_sees_current_state() {
    let server = serve(config(), LoadedAssets::empty()).await.unwrap();
    let mut a = Client::connect(server.addr).await;
    a.recv(SECOND).await.unwrap();
    a.send(&probe(0.0, 0.0, Some(0))).await;
    let msgs = a.collect_until(SECOND, |m| matches!(m, ServerMessage::StateUpdate(u) if u.stage_max == 1)).await;
    let last_seq = updates(&msgs).last().unwrap().seq;
    drop(a);
    let mut b = Client::connect(server.addr).await;
    match b.recv(SECOND).await {
        Some(ServerMessage::StateUpdate(u)) => {
            assert_eq!(u.stage_max, 1);
            assert!(u.seq >= last_seq);
        }
        other => panic!("expected a snapshot, got {other:?}"),
    }
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn replay_rejects_virtual_probe() {
    let cfg = ServeConfig {
        source: TelemetrySource::Replay(repo_file("scripts/apical_script.json")),
        replay_waits_for_client: true,
        ..config()
    };
    let server = serve(cfg, LoadedAssets::empty()).await.unwrap();
    let mut c = Client::connect(server.addr).await;
    c.send(&probe(90.0, 7.0, Some(0))).await;
    let msgs = c.collect_until(2 * SECOND, |m| matches!(m, ServerMessage::Error { .. })).await;
    assert!(
        msgs.iter().any(|m| matches!(m, ServerMessage::Error { code: ErrorCode::SourceConflict, .. })),
        "{msgs:?}"
    );
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn bad_messages_get_errors_not_disconnects() {
    let server = serve(config(), LoadedAssets::empty()).await.unwrap();
    let mut c = Client::connect(server.addr).await;
    c.recv(SECOND).await.unwrap();
    c.send_raw(r#"{"type":"Teleport"}"#).await;
    assert!(matches!(c.recv(SECOND).await, Some(ServerMessage::Error { code: ErrorCode::BadMessage, .. })));
    c.send(&ClientMessage::QuizAnswer { item_id: "nope".into(), choice: 0 }).await;
    assert!(matches!(c.recv(SECOND).await, Some(ServerMessage::Error { code: ErrorCode::UnknownItem, .. })));
    c.send(&ClientMessage::QuizAnswer { item_id: "apical-notch".into(), choice: 0 }).await;
    assert!(matches!(c.recv(SECOND).await, Some(ServerMessage::QuizResult { .. })));
    c.send(&ClientMessage::StartCalibration {}).await;
    assert!(matches!(
        c.recv(SECOND).await,
        Some(ServerMessage::CalibrationStatus { phase: CalibrationPhase::Done, .. })
    ));
    c.send(&ClientMessage::SelectTarget { view: View::Subcostal, variant: Variant::Normal }).await;
    match c.recv(SECOND).await {
        Some(ServerMessage::StateUpdate(u)) => assert_eq!((u.view, u.variant, u.stage_max), (View::Subcostal, Variant::Normal, 0)),
        other => panic!("{other:?}"),
    }
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn frames_follow_the_clip_clock() {
    let dir = tempfile::tempdir().unwrap();
    let assets = small_assets(dir.path());
    let server = serve(config(), assets).await.unwrap();
    let mut c = Client::connect(server.addr).await;
    c.recv(SECOND).await.unwrap();
    // Placed and aligned but untilted: the normal clip plays.
    c.send(&probe(90.0, 0.0, Some(0))).await;
    let start = tokio::time::Instant::now();
    let msgs = c.collect_until(Duration::from_millis(700), |_| false).await;
    let elapsed = start.elapsed().as_secs_f64() * 1000.0;
    let frames: Vec<(AssetKey, usize, usize)> = msgs
        .iter()
        .filter_map(|m| match m {
            ServerMessage::FrameRef { asset_key, frame_index, frame_count } => Some((*asset_key, *frame_index, *frame_count)),
            _ => None,
        })
        .collect();
    assert!(!frames.is_empty());
    for (key, i, n) in &frames {
        assert_eq!(*key, AssetKey { view: View::Apical, class: TiltClass::NormalView });
        assert_eq!(*n, 6);
        assert!(i < n);
    }
    for w in frames.windows(2) {
        assert_ne!(w[0].1, w[1].1, "a frame is announced once");
    }
    // 50 ms per frame: about one index change per period.
    let expected = elapsed / 50.0;
    assert!((frames.len() as f64) <= expected + 2.0 && (frames.len() as f64) >= expected * 0.5, "{} frames in {elapsed} ms", frames.len());

    // Lifting the probe stops playback.
    c.send(&probe(90.0, 0.0, None)).await;
    c.collect_until(Duration::from_millis(100), |_| false).await;
    let after = c.collect_until(Duration::from_millis(300), |_| false).await;
    assert!(after.iter().all(|m| !matches!(m, ServerMessage::FrameRef { .. })), "{after:?}");

    // A tilt clip resolves; an undershot request falls back to the normal clip.
    c.send(&probe(90.0, 7.0, Some(0))).await;
    let msgs = c.collect_until(SECOND, |m| matches!(m, ServerMessage::FrameRef { .. })).await;
    assert!(matches!(msgs.last(), Some(ServerMessage::FrameRef { asset_key, .. }) if asset_key.class == TiltClass::TiltView));
    c.send(&probe(90.0, 3.0, Some(0))).await;
    let msgs = c.collect_until(SECOND, |m| matches!(m, ServerMessage::FrameRef { asset_key, .. } if asset_key.class != TiltClass::TiltView)).await;
    assert!(matches!(msgs.last(), Some(ServerMessage::FrameRef { asset_key, .. }) if asset_key.class == TiltClass::NormalView));
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn realtime_slices_are_streamed() {
    let seq = phantom(&PhantomSpec { size: 16, frames: 4, ..Default::default() });
    let planes = default_planes(seq.geometry());
    let cfg = ServeConfig { realtime: Some(RealtimeVolume { sequence: seq, planes }), ..config() };
    let server = serve(cfg, LoadedAssets::empty()).await.unwrap();
    let mut c = Client::connect(server.addr).await;
    c.recv(SECOND).await.unwrap();
    c.send(&probe(90.0, 0.0, Some(0))).await;
    let msgs = c.collect_until(SECOND, |m| matches!(m, ServerMessage::SliceFrame { .. })).await;
    match msgs.last() {
        Some(ServerMessage::SliceFrame { width, height, pixels, t }) => {
            use base64::Engine as _;
            let bytes = base64::engine::general_purpose::STANDARD.decode(pixels).unwrap();
            assert_eq!(bytes.len(), width * height);
            assert!(*t < 4);
        }
        other => panic!("{other:?}"),
    }
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stalled_client_does_not_block_others() {
    let seq = phantom(&PhantomSpec { size: 64, frames: 8, ..Default::default() });
    let planes = default_planes(seq.geometry());
    let cfg = ServeConfig {
        realtime: Some(RealtimeVolume { sequence: seq, planes }),
        queue_capacity: 4,
        ..config()
    };
    let server = serve(cfg, LoadedAssets::empty()).await.unwrap();
    // Never reads: its socket and queue fill with slices.
    let _stalled = Client::connect(server.addr).await;
    let mut c = Client::connect(server.addr).await;
    c.recv(SECOND).await.unwrap();
    c.send(&probe(0.0, 0.0, Some(0))).await;
    c.send(&probe(91.0, 0.0, Some(0))).await;
    c.send(&probe(91.0, 7.0, Some(0))).await;
    let msgs = c.collect_until(5 * SECOND, completed).await;
    assert!(msgs.last().is_some_and(completed));
    let seqs: Vec<u64> = updates(&msgs).iter().map(|u| u.seq).collect();
    for w in seqs.windows(2) {
        assert_eq!(w[1], w[0] + 1, "{seqs:?}");
    }
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn busy_port_is_reported() {
    let holder = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = holder.local_addr().unwrap().port();
    match serve(ServeConfig { port, ..config() }, LoadedAssets::empty()).await {
        Err(ServeError::PortInUse(p)) => assert_eq!(p, port),
        Err(e) => panic!("{e}"),
        Ok(_) => panic!("bound a busy port"),
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn http_side_serves_manifest_and_whitelisted_assets() {
    let dir = tempfile::tempdir().unwrap();
    let assets = small_assets(dir.path());
    std::fs::write(dir.path().join("secret.txt"), "x").unwrap();
    let server = serve(config(), assets).await.unwrap();
    let get = |path: &str| {
        let addr = server.addr;
        let path = path.to_owned();
        async move {
            use tokio::io::{AsyncReadExt, AsyncWriteExt};
            let mut s = tokio::net::TcpStream::connect(addr).await.unwrap();
            s.write_all(format!("GET {path} HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").as_bytes()).await.unwrap();
            let mut buf = Vec::new();
            s.read_to_end(&mut buf).await.unwrap();
            buf
        }
    };
    let ok = get("/assets/apical_tilt_view.gif").await;
    assert!(ok.starts_with(b"HTTP/1.1 200"));
    assert!(ok.windows(6).any(|w| w == b"GIF89a"));
    assert!(get("/assets/secret.txt").await.starts_with(b"HTTP/1.1 404"));
    assert!(get("/assets/..%2Fsecret.txt").await.starts_with(b"HTTP/1.1 404"));
    let m = get("/manifest").await;
    assert!(m.starts_with(b"HTTP/1.1 200"));
    assert!(String::from_utf8_lossy(&m).contains("apical:tilt_view"));
    assert!(get("/quiz").await.starts_with(b"HTTP/1.1 200"));
    server.shutdown().await;
}
