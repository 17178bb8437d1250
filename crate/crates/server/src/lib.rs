//! HTTP/JSON facade over segmentation sessions.
//!
//! | route | body | response |
//! |---|---|---|
//! | `GET /volumes` | | `[VolumeInfo]` |
//! | `GET /volumes/{id}/slices/{z}?window=lo,hi` | | `SliceImage` |
//! | `POST /sessions` | `StartRequest` | `CutResponse` |
//! | `GET /sessions/{id}` | | `SessionState` |
//! | `POST /sessions/{id}/advance` | `AdvanceRequest` | `CutResponse` |
//! | `POST /sessions/{id}/redraw` | `RedrawRequest` | `CutResponse` |
//! | `POST /sessions/{id}/interpolate` | | `InterpolateResponse` |
//! | `POST /sessions/{id}/finalize` | `FinalizeRequest` | `FinalizeResponse` |
//! | `GET /sessions/{id}/export/{mask,contours,replay}` | | NRRD / JSON bytes |
//!
//! Errors are `{code, reason, detail}` with 404 for unknown ids, 409 for
//! illegal state transitions and busy sessions, 422 for invalid input and 500
//! for internal invariant violations.

pub mod error;
pub mod image;
pub mod store;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::header;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use error::{ApiError, ApiResult};
use radcut_core::contour_set::{write_contour_set, Provenance};
use radcut_core::graph_cut::{CutResult, GraphParams};
use radcut_core::metrics::OverlapReport;
use radcut_core::nrrd::write_mask_nrrd;
use radcut_core::session::{Direction, InterpolationReport, Session, SessionSnapshot, Status};
use radcut_core::volume::VoxelType;
use radcut_core::Point2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use store::{SessionSlot, Store};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeInfo {
    pub id: String,
    pub sizes: [usize; 3],
    pub spacing: [f64; 3],
    pub voxel_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceImage {
    pub volume: String,
    pub z: usize,
    pub sizes: [usize; 2],
    pub spacing: [f64; 2],
    pub window: [f64; 2],
    /// 8-bit greyscale PNG, row-major from y = 0.
    pub png_base64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRequest {
    pub volume: String,
    pub z0: usize,
    pub template: Vec<Point2>,
    pub seed: Point2,
    #[serde(default)]
    pub params: Option<GraphParams>,
    #[serde(default)]
    pub object: Option<String>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvanceRequest {
    pub direction: Direction,
    #[serde(default = "one")]
    pub skip: usize,
    #[serde(default)]
    pub params: Option<GraphParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedrawRequest {
    pub template: Vec<Point2>,
    pub seed: Point2,
    #[serde(default)]
    pub params: Option<GraphParams>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FinalizeRequest {
    /// Id of a mask volume in the data directory to compare against.
    #[serde(default)]
    pub reference: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub id: String,
    pub volume: String,
    pub status: Status,
    pub current_z: Option<usize>,
    pub params: GraphParams,
    pub elapsed_ms: u64,
    pub events: usize,
}

/// The cut under review, with the template and node grid it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutView {
    pub z: usize,
    pub provenance: Provenance,
    pub template: Vec<Point2>,
    pub seed: Point2,
    #[serde(flatten)]
    pub cut: CutResult,
    /// Node positions, ray-major (`k * n`).
    pub nodes: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutResponse {
    pub session: SessionHandle,
    pub cut: CutView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session: SessionHandle,
    pub snapshot: SessionSnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolateResponse {
    pub session: SessionHandle,
    pub report: InterpolationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalizeResponse {
    pub session: SessionHandle,
    pub report: InterpolationReport,
    pub metrics: Option<OverlapReport>,
}

pub type AppState = Arc<Store>;

pub fn router(store: AppState) -> Router {
    Router::new()
        .route("/volumes", get(list_volumes))
        .route("/volumes/{id}/slices/{z}", get(slice_image))
        .route("/sessions", post(start_session))
        .route("/sessions/{id}", get(session_state))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/redraw", post(redraw))
        .route("/sessions/{id}/interpolate", post(interpolate))
        .route("/sessions/{id}/finalize", post(finalize))
        .route("/sessions/{id}/export/{kind}", get(export))
        .with_state(store)
}

/// Serves the data directory until the process is stopped.
pub async fn serve(addr: SocketAddr, data_dir: PathBuf) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(Store::new(data_dir)))).await
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::invalid("schema-violation", format!("request body at {path}: {}", e.inner()))
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn handle(slot: &SessionSlot, s: &Session) -> SessionHandle {
    SessionHandle {
        id: slot.id.clone(),
        volume: slot.volume_id.clone(),
        status: s.status(),
        current_z: s.current().map(|c| c.z),
        params: *s.params(),
        elapsed_ms: s.replay_log().elapsed_ms(),
        events: s.replay_log().events.len(),
    }
}

fn cut_response(slot: &SessionSlot, s: &Session) -> ApiResult<CutResponse> {
    let c = s
        .current()
        .ok_or_else(|| ApiError::internal("no cut under review after a successful step"))?;
    Ok(CutResponse {
        session: handle(slot, s),
        cut: CutView {
            z: c.z,
            provenance: c.basis,
            template: c.template.markers.clone(),
            seed: c.seed.position,
            cut: c.segmentation.cut.clone(),
            nodes: c.segmentation.grid.positions.clone(),
        },
    })
}

async fn list_volumes(State(store): State<AppState>) -> ApiResult<Json<Vec<VolumeInfo>>> {
    blocking(move || {
        let mut out = Vec::new();
        for id in store.volume_ids()? {
            let v = store.volume(&id)?;
            let voxel_type = match v.data().voxel_type() {
                VoxelType::Uint8 => "uint8",
                VoxelType::Int16 => "int16",
                VoxelType::Float32 => "float32",
            };
            out.push(VolumeInfo {
                id,
                sizes: v.sizes(),
                spacing: v.spacing(),
                voxel_type: voxel_type.into(),
            });
        }
        Ok(Json(out))
    })
    .await
}

fn parse_window(raw: &str) -> ApiResult<(f64, f64)> {
    let bad = || ApiError::invalid("invalid-argument", format!("window must be lo,hi; got {raw:?}"));
    let (lo, hi) = raw.split_once(',').ok_or_else(bad)?;
    Ok((
        lo.trim().parse().map_err(|_| bad())?,
        hi.trim().parse().map_err(|_| bad())?,
    ))
}

async fn slice_image(
    State(store): State<AppState>,
    Path((id, z)): Path<(String, String)>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<Json<SliceImage>> {
    blocking(move || {
        let vol = store.volume(&id)?;
        let z: i64 = z
            .parse()
            .map_err(|_| ApiError::invalid("invalid-argument", format!("slice index {z:?}")))?;
        let z = vol.grid().check_z(z)?;
        let slice = vol.extract_slice(z)?;
        let (lo, hi) = match query.get("window") {
            Some(w) => parse_window(w)?,
            None => image::default_window(&slice),
        };
        let grey = image::window_to_u8(&slice.values, lo, hi)?;
        let png = image::encode_png(slice.sizes[0], slice.sizes[1], &grey)?;
        Ok(Json(SliceImage {
            volume: id,
            z,
            sizes: slice.sizes,
            spacing: slice.spacing,
            window: [lo, hi],
            png_base64: base64::engine::general_purpose::STANDARD.encode(png),
        }))
    })
    .await
}

async fn start_session(State(store): State<AppState>, body: Bytes) -> ApiResult<Json<CutResponse>> {
    let req: StartRequest = parse_body(&body)?;
    blocking(move || {
        let volume = store.volume(&req.volume)?;
        let object = req.object.unwrap_or_else(|| req.volume.clone());
        let session = Session::start(
            volume,
            object,
            req.z0,
            req.template,
            req.seed,
            req.params.unwrap_or_default(),
        )?;
        let slot = store.insert(req.volume, session);
        slot.with(|s| cut_response(&slot, s)).map(Json)
    })
    .await
}

async fn session_state(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionState>> {
    let slot = store.session(&id)?;
    blocking(move || {
        slot.with(|s| {
            Ok(Json(SessionState {
                session: handle(&slot, s),
                snapshot: s.snapshot(),
            }))
        })
    })
    .await
}

async fn advance(State(store): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<CutResponse>> {
    let slot = store.session(&id)?;
    let req: AdvanceRequest = parse_body(&body)?;
    blocking(move || {
        slot.with(|s| {
            s.accept_and_advance(req.direction, req.skip, req.params)?;
            cut_response(&slot, s).map(Json)
        })
    })
    .await
}

async fn redraw(State(store): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<CutResponse>> {
    let slot = store.session(&id)?;
    let req: RedrawRequest = parse_body(&body)?;
    blocking(move || {
        slot.with(|s| {
            s.redraw(req.template, req.seed, req.params)?;
            cut_response(&slot, s).map(Json)
        })
    })
    .await
}

async fn interpolate(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<InterpolateResponse>> {
    let slot = store.session(&id)?;
    blocking(move || {
        slot.with(|s| {
            let report = s.interpolate_missing()?;
            Ok(Json(InterpolateResponse {
                session: handle(&slot, s),
                report,
            }))
        })
    })
    .await
}

async fn finalize(
    State(store): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<FinalizeResponse>> {
    let slot = store.session(&id)?;
    let req: FinalizeRequest = if body.iter().all(u8::is_ascii_whitespace) {
        FinalizeRequest::default()
    } else {
        parse_body(&body)?
    };
    blocking(move || {
        // load the reference first so a bad id leaves the session untouched
        let reference = req.reference.as_deref().map(|r| store.mask(r)).transpose()?;
        slot.with(|s| {
            if let Some(r) = &reference {
                if r.grid() != s.volume().grid() {
                    return Err(ApiError::invalid(
                        "invalid-argument",
                        "reference mask geometry differs from the volume",
                    ));
                }
            }
            let report = s.finalize()?;
            let metrics = match &reference {
                Some(r) => Some(OverlapReport::compare(slot.id.clone(), &s.voxelize()?, r)?),
                None => None,
            };
            Ok(Json(FinalizeResponse {
                session: handle(&slot, s),
                report,
                metrics,
            }))
        })
    })
    .await
}

async fn export(
    State(store): State<AppState>,
    Path((id, kind)): Path<(String, String)>,
) -> ApiResult<impl IntoResponse> {
    let slot = store.session(&id)?;
    blocking(move || {
        slot.with(|s| match kind.as_str() {
            "mask" => Ok((
                [(header::CONTENT_TYPE, "application/octet-stream")],
                write_mask_nrrd(&s.voxelize()?),
            )),
            "contours" => {
                if s.status() != Status::Finalized {
                    return Err(ApiError::new(
                        axum::http::StatusCode::CONFLICT,
                        "illegal-state",
                        "session is not finalized",
                    ));
                }
                Ok((
                    [(header::CONTENT_TYPE, "application/json")],
                    write_contour_set(&s.contour_set())?,
                ))
            }
            "replay" => Ok(([(header::CONTENT_TYPE, "application/json")], s.replay_log().to_json())),
            other => Err(ApiError::not_found("unknown-export", format!("no export {other:?}"))),
        })
    })
    .await
}
