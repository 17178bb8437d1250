use axum::body::{Body, Bytes};
use axum::http::{Request, StatusCode};
use axum::Router;
use base64::Engine;
use http_body_util::BodyExt;
use radcut_core::graph_cut::{segment_one_slice, GraphParams};
use radcut_core::nrrd::{write_mask_nrrd, write_nrrd};
use radcut_core::phantom::PhantomSpec;
use radcut_core::session::{EventKind, ReplayLog, Session};
use radcut_core::template::{SeedPoint, Template};
use radcut_core::Point2;
use radcut_server::error::ErrorBody;
use radcut_server::store::Store;
use radcut_server::{router, CutResponse, FinalizeResponse, SessionState, SliceImage, VolumeInfo};
use serde_json::{json, Value};
use std::f64::consts::TAU;
use std::sync::Arc;
use tower::ServiceExt;

struct Fixture {
    _dir: tempfile::TempDir,
    store: Arc<Store>,
    app: Router,
    spec: PhantomSpec,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let spec = PhantomSpec::acceptance(15.0);
    let (vol, truth) = spec.generate().unwrap();
    std::fs::write(dir.path().join("tube.nrrd"), write_nrrd(&vol)).unwrap();
    std::fs::write(dir.path().join("tube-truth.nrrd"), write_mask_nrrd(&truth)).unwrap();
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let store = Arc::new(Store::new(dir.path()));
    Fixture {
        _dir: dir,
        app: router(store.clone()),
        store,
        spec,
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Bytes) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json");
    let req = req
        .body(body.map_or(Body::empty(), |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes())
}

async fn call_json<T: serde::de::DeserializeOwned>(app: &Router, method: &str, uri: &str, body: Option<Value>) -> T {
    let (status, bytes) = call(app, method, uri, body).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&bytes));
    serde_json::from_slice(&bytes).unwrap()
}

async fn expect_error(app: &Router, method: &str, uri: &str, body: Option<Value>, status: StatusCode) -> ErrorBody {
    let (got, bytes) = call(app, method, uri, body).await;
    assert_eq!(got, status, "{}", String::from_utf8_lossy(&bytes));
    let e: ErrorBody = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(e.code, status.as_u16());
    e
}

fn circle(c: Point2, r: f64, m: usize) -> Vec<Point2> {
    (0..m)
        .map(|i| Point2::from_polar(c, r, TAU * i as f64 / m as f64))
        .collect()
}

fn start_body(spec: &PhantomSpec) -> Value {
    let c = spec.centerline.at(0);
    json!({"volume": "tube", "z0": 0, "template": circle(c, 13.0, 32), "seed": c})
}

#[tokio::test]
async fn lists_volumes_and_renders_slices() {
    let f = fixture();
    let vols: Vec<VolumeInfo> = call_json(&f.app, "GET", "/volumes", None).await;
    let ids: Vec<&str> = vols.iter().map(|v| v.id.as_str()).collect();
    assert_eq!(ids, ["tube", "tube-truth"]);
    assert_eq!(vols[0].sizes, [128, 128, 24]);
    assert_eq!(vols[0].spacing, [1.0, 1.0, 3.0]);
    assert_eq!(vols[0].voxel_type, "float32");

    let img: SliceImage = call_json(&f.app, "GET", "/volumes/tube-truth/slices/5?window=0,1", None).await;
    assert_eq!((img.z, img.sizes, img.window), (5, [128, 128], [0.0, 1.0]));
    let png = base64::engine::general_purpose::STANDARD
        .decode(img.png_base64)
        .unwrap();
    let mut reader = png::Decoder::new(std::io::Cursor::new(png)).read_info().unwrap();
    let mut buf = vec![0; reader.output_buffer_size()];
    reader.next_frame(&mut buf).unwrap();
    let c = f.spec.centerline.at(5);
    assert_eq!(buf[c.y.round() as usize * 128 + c.x.round() as usize], 255);
    assert_eq!(buf[0], 0);

    expect_error(
        &f.app,
        "GET",
        "/volumes/tube/slices/24",
        None,
        StatusCode::UNPROCESSABLE_ENTITY,
    )
    .await;
    expect_error(
        &f.app,
        "GET",
        "/volumes/tube/slices/-1",
        None,
        StatusCode::UNPROCESSABLE_ENTITY,
    )
    .await;
    expect_error(
        &f.app,
        "GET",
        "/volumes/tube/slices/0?window=5,5",
        None,
        StatusCode::UNPROCESSABLE_ENTITY,
    )
    .await;
    let e = expect_error(&f.app, "GET", "/volumes/nope/slices/0", None, StatusCode::NOT_FOUND).await;
    assert_eq!(e.reason, "unknown-volume");
    expect_error(&f.app, "GET", "/volumes/notes/slices/0", None, StatusCode::NOT_FOUND).await;
}

#[tokio::test]
async fn seed_outside_template_is_422() {
    let f = fixture();
    let mut body = start_body(&f.spec);
    body["seed"] = json!([2.0, 2.0]);
    let e = expect_error(
        &f.app,
        "POST",
        "/sessions",
        Some(body),
        StatusCode::UNPROCESSABLE_ENTITY,
    )
    .await;
    assert_eq!(e.reason, "seed-outside-template");
    let e = expect_error(
        &f.app,
        "POST",
        "/sessions",
        Some(json!({"volume": "tube"})),
        StatusCode::UNPROCESSABLE_ENTITY,
    )
    .await;
    assert_eq!(e.reason, "schema-violation");
    let mut body = start_body(&f.spec);
    body["params"] = json!({"k": 40, "n": 40, "delta": 3, "t_weight": 0.2, "sf": 1.6});
    expect_error(
        &f.app,
        "POST",
        "/sessions",
        Some(body),
        StatusCode::UNPROCESSABLE_ENTITY,
    )
    .await;
}

#[tokio::test]
async fn responses_carry_the_in_process_cut() {
    let f = fixture();
    let resp: CutResponse = call_json(&f.app, "POST", "/sessions", Some(start_body(&f.spec))).await;
    let vol = f.store.volume("tube").unwrap();
    let c = f.spec.centerline.at(0);
    let template = Template::new(circle(c, 13.0, 32), 0).unwrap();
    let want = segment_one_slice(
        &vol.extract_slice(0).unwrap(),
        &template,
        SeedPoint {
            position: c,
            z_index: 0,
        },
        &GraphParams::default(),
    )
    .unwrap();
    assert_eq!(
        serde_json::to_string(&resp.cut.cut).unwrap(),
        serde_json::to_string(&want).unwrap()
    );
    assert_eq!(resp.cut.nodes.len(), 1600);
    assert_eq!(resp.session.current_z, Some(0));
}

#[tokio::test]
async fn same_payload_gives_identical_contours() {
    let f = fixture();
    let a: CutResponse = call_json(&f.app, "POST", "/sessions", Some(start_body(&f.spec))).await;
    let b: CutResponse = call_json(&f.app, "POST", "/sessions", Some(start_body(&f.spec))).await;
    assert_ne!(a.session.id, b.session.id);
    assert_eq!(a.cut, b.cut);

    let adv = json!({"direction": 1, "skip": 2});
    let (_, a1) = call(
        &f.app,
        "POST",
        &format!("/sessions/{}/advance", a.session.id),
        Some(adv.clone()),
    )
    .await;
    let (_, b1) = call(
        &f.app,
        "POST",
        &format!("/sessions/{}/advance", b.session.id),
        Some(adv),
    )
    .await;
    let cut = |bytes: &Bytes| serde_json::from_slice::<Value>(bytes).unwrap()["cut"].clone();
    assert_eq!(cut(&a1), cut(&b1));

    let c = f.spec.centerline.at(2);
    let redraw = json!({"template": circle(c, 14.0, 20), "seed": c});
    let uri = format!("/sessions/{}/redraw", a.session.id);
    let (s1, r1) = call(&f.app, "POST", &uri, Some(redraw.clone())).await;
    let (s2, r2) = call(&f.app, "POST", &uri, Some(redraw)).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(cut(&r1).to_string(), cut(&r2).to_string());
}

#[tokio::test]
async fn scripted_http_session_matches_replay() {
    let f = fixture();
    let log = f.spec.scripted_replay(2, 1.3, GraphParams::default());
    let mut id = String::new();
    for event in &log.events {
        match &event.kind {
            EventKind::Start {
                z0,
                template,
                seed,
                params,
            } => {
                let body = json!({"volume": "tube", "z0": z0, "template": template, "seed": seed, "params": params, "object": "phantom"});
                let r: CutResponse = call_json(&f.app, "POST", "/sessions", Some(body)).await;
                id = r.session.id;
            }
            EventKind::AcceptAndAdvance { direction, skip, .. } => {
                let body = json!({"direction": direction, "skip": skip});
                let _: CutResponse = call_json(&f.app, "POST", &format!("/sessions/{id}/advance"), Some(body)).await;
            }
            EventKind::Finalize => {
                let r: FinalizeResponse = call_json(
                    &f.app,
                    "POST",
                    &format!("/sessions/{id}/finalize"),
                    Some(json!({"reference": "tube-truth"})),
                )
                .await;
                let m = r.metrics.unwrap();
                assert!(m.dsc >= 90.0, "{m:?}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
    let (_, mask) = call(&f.app, "GET", &format!("/sessions/{id}/export/mask"), None).await;
    let (_, contours) = call(&f.app, "GET", &format!("/sessions/{id}/export/contours"), None).await;
    let (_, replay) = call(&f.app, "GET", &format!("/sessions/{id}/export/replay"), None).await;

    let direct = Session::replay(f.store.volume("tube").unwrap(), &log, None)
        .unwrap()
        .export()
        .unwrap();
    assert_eq!((contours.to_vec(), mask.to_vec()), direct);
    let served = ReplayLog::from_json(&replay).unwrap();
    let again = Session::replay(f.store.volume("tube").unwrap(), &served, None)
        .unwrap()
        .export()
        .unwrap();
    assert_eq!(again, direct);

    let state: SessionState = call_json(&f.app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(state.snapshot.contours.slices.len(), 24);
    assert!(state.snapshot.gaps.is_empty());
}

#[tokio::test]
async fn state_errors_are_409_and_unknown_ids_404() {
    let f = fixture();
    let r: CutResponse = call_json(&f.app, "POST", "/sessions", Some(start_body(&f.spec))).await;
    let id = r.session.id;
    let e = expect_error(
        &f.app,
        "GET",
        &format!("/sessions/{id}/export/mask"),
        None,
        StatusCode::CONFLICT,
    )
    .await;
    assert_eq!(e.reason, "illegal-state");
    expect_error(
        &f.app,
        "GET",
        &format!("/sessions/{id}/export/contours"),
        None,
        StatusCode::CONFLICT,
    )
    .await;
    let e = expect_error(
        &f.app,
        "POST",
        &format!("/sessions/{id}/finalize"),
        Some(json!({"reference": "nope"})),
        StatusCode::NOT_FOUND,
    )
    .await;
    assert_eq!(e.reason, "unknown-volume");

    let _: FinalizeResponse = call_json(&f.app, "POST", &format!("/sessions/{id}/finalize"), None).await;
    expect_error(
        &f.app,
        "POST",
        &format!("/sessions/{id}/advance"),
        Some(json!({"direction": 1})),
        StatusCode::CONFLICT,
    )
    .await;
    expect_error(
        &f.app,
        "POST",
        &format!("/sessions/{id}/finalize"),
        None,
        StatusCode::CONFLICT,
    )
    .await;
    expect_error(
        &f.app,
        "POST",
        &format!("/sessions/{id}/interpolate"),
        None,
        StatusCode::CONFLICT,
    )
    .await;

    let e = expect_error(&f.app, "GET", "/sessions/s999", None, StatusCode::NOT_FOUND).await;
    assert_eq!(e.reason, "unknown-session");
    expect_error(
        &f.app,
        "POST",
        "/sessions/s999/advance",
        Some(json!({"direction": 1})),
        StatusCode::NOT_FOUND,
    )
    .await;
    expect_error(
        &f.app,
        "GET",
        &format!("/sessions/{id}/export/video"),
        None,
        StatusCode::NOT_FOUND,
    )
    .await;
}

#[tokio::test]
async fn validation_errors_leave_session_intact() {
    let f = fixture();
    let r: CutResponse = call_json(&f.app, "POST", "/sessions", Some(start_body(&f.spec))).await;
    let uri = format!("/sessions/{}/advance", r.session.id);
    let e = expect_error(
        &f.app,
        "POST",
        &uri,
        Some(json!({"direction": -1})),
        StatusCode::UNPROCESSABLE_ENTITY,
    )
    .await;
    assert_eq!(e.reason, "index-out-of-range");
    let e = expect_error(
        &f.app,
        "POST",
        &uri,
        Some(json!({"direction": 2})),
        StatusCode::UNPROCESSABLE_ENTITY,
    )
    .await;
    assert_eq!(e.reason, "schema-violation");
    let state: SessionState = call_json(&f.app, "GET", &format!("/sessions/{}", r.session.id), None).await;
    assert_eq!(state.session.events, 1);
    assert_eq!(state.snapshot.current_cut.unwrap(), r.cut.cut);
}

// holding the std mutex across requests is the point of this test
#[allow(clippy::await_holding_lock)]
#[tokio::test]
async fn busy_session_rejects_a_second_writer() {
    let f = fixture();
    let r: CutResponse = call_json(&f.app, "POST", "/sessions", Some(start_body(&f.spec))).await;
    let other: CutResponse = call_json(&f.app, "POST", "/sessions", Some(start_body(&f.spec))).await;
    let slot = f.store.session(&r.session.id).unwrap();
    {
        let _held = slot.session.lock().unwrap();
        let uri = format!("/sessions/{}/advance", r.session.id);
        let e = expect_error(
            &f.app,
            "POST",
            &uri,
            Some(json!({"direction": 1})),
            StatusCode::CONFLICT,
        )
        .await;
        assert_eq!(e.reason, "session-busy");
        // other sessions are unaffected
        let _: CutResponse = call_json(
            &f.app,
            "POST",
            &format!("/sessions/{}/advance", other.session.id),
            Some(json!({"direction": 1})),
        )
        .await;
    }
    let _: CutResponse = call_json(
        &f.app,
        "POST",
        &format!("/sessions/{}/advance", r.session.id),
        Some(json!({"direction": 1})),
    )
    .await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_advances_are_serialized() {
    let f = fixture();
    let r: CutResponse = call_json(&f.app, "POST", "/sessions", Some(start_body(&f.spec))).await;
    let uri = format!("/sessions/{}/advance", r.session.id);
    let tasks: Vec<_> = (0..8)
        .map(|_| {
            let (app, uri) = (f.app.clone(), uri.clone());
            tokio::spawn(async move { call(&app, "POST", &uri, Some(json!({"direction": 1}))).await.0 })
        })
        .collect();
    let mut ok = 0;
    for t in tasks {
        match t.await.unwrap() {
            StatusCode::OK => ok += 1,
            StatusCode::CONFLICT => {}
            other => panic!("unexpected status {other}"),
        }
    }
    assert!(ok >= 1);
    let state: SessionState = call_json(&f.app, "GET", &format!("/sessions/{}", r.session.id), None).await;
    assert_eq!(state.session.events, 1 + ok);
    assert_eq!(state.session.current_z, Some(ok));
}
