//! HTTP front end for live grouping sessions.
//!
//! Serves loopable 44.1 kHz previews of each texture and a pink-noise
//! masking track, and records sessions through the three-round protocol.
//! Texture parameters are never sent to clients, which only see opaque ids.

mod store;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::{Arc, OnceLock};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use texture_space::export::{preview_wav_bytes, wav_bytes, Manifest, PREVIEW_RATE};
use texture_space::grouping::{GroupingSession, TextureId};
use texture_space::session::{LiveSession, SessionEvent};
use texture_space::synthesis::{build_texture_set, pink_noise, TextureSet};
use texture_space::Error as CoreError;

pub use store::{replay_file, SessionHandle, SessionStore, StoreError};

/// Length of the masking track in seconds.
pub const MASKING_DURATION_S: f64 = 10.0;
/// Peak level of the masking track.
pub const MASKING_PEAK: f64 = 0.5;
const MASKING_SEED: u64 = 0x5eed;

/// The texture set being served and lazily rendered previews.
pub struct Catalog {
    pub manifest: Manifest,
    set: TextureSet,
    previews: Vec<OnceLock<Arc<Vec<u8>>>>,
    masking: OnceLock<Arc<Vec<u8>>>,
}

impl Catalog {
    /// Rebuilds the set a manifest describes and checks they agree.
    pub fn from_manifest(manifest: Manifest) -> Result<Self, CoreError> {
        let set = build_texture_set(manifest.fs, manifest.duration_s, manifest.base_seed);
        let agrees = set.entries.len() == manifest.textures.len()
            && set.entries.iter().zip(&manifest.textures).all(|(e, m)| {
                e.id == m.id
                    && e.seed == m.seed
                    && e.params.f0 == m.f0_hz
                    && e.params.amplitude == m.amplitude
                    && e.params.irregularity == m.irregularity
            });
        if !agrees {
            return Err(CoreError::InvalidSession(
                "manifest does not match the texture set its settings produce".into(),
            ));
        }
        let previews = (0..set.len()).map(|_| OnceLock::new()).collect();
        Ok(Self { manifest, set, previews, masking: OnceLock::new() })
    }

    pub fn from_set(set: TextureSet) -> Self {
        let manifest = Manifest::for_set(&set, PREVIEW_RATE, false);
        let previews = (0..set.len()).map(|_| OnceLock::new()).collect();
        Self { manifest, set, previews, masking: OnceLock::new() }
    }

    pub fn ids(&self) -> Vec<TextureId> {
        self.set.ids()
    }

    pub fn set(&self) -> &TextureSet {
        &self.set
    }

    pub fn into_set(self) -> TextureSet {
        self.set
    }

    /// WAV preview of one texture, rendered on first request.
    pub fn preview(&self, id: TextureId) -> Result<Arc<Vec<u8>>, CoreError> {
        let index = self.set.entries.iter().position(|e| e.id == id).ok_or(CoreError::UnknownTexture(id))?;
        if let Some(bytes) = self.previews[index].get() {
            return Ok(bytes.clone());
        }
        let signal = self.set.synthesize(&self.set.entries[index])?;
        let bytes = Arc::new(preview_wav_bytes(&signal.samples, signal.fs.round() as u32)?);
        Ok(self.previews[index].get_or_init(|| bytes).clone())
    }

    pub fn masking_noise(&self) -> Result<Arc<Vec<u8>>, CoreError> {
        if let Some(bytes) = self.masking.get() {
            return Ok(bytes.clone());
        }
        let n = (MASKING_DURATION_S * f64::from(PREVIEW_RATE)) as usize;
        let bytes = Arc::new(wav_bytes(&pink_noise(n, MASKING_SEED, MASKING_PEAK), PREVIEW_RATE)?);
        Ok(self.masking.get_or_init(|| bytes).clone())
    }
}

#[derive(Clone)]
pub struct AppState {
    pub catalog: Arc<Catalog>,
    pub store: Arc<SessionStore>,
}

impl AppState {
    pub fn new(catalog: Catalog, store: SessionStore) -> Self {
        Self { catalog: Arc::new(catalog), store: Arc::new(store) }
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    missing: Option<Vec<TextureId>>,
}

/// Error responses: 404 for unknown things, 409 for out-of-order actions,
/// 422 for invalid input, 500 for storage failures.
#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Core(CoreError),
    Store(StoreError),
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        ApiError::Core(e)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::Store(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::NotFound(what) => (StatusCode::NOT_FOUND, ErrorBody { error: what, missing: None }),
            ApiError::Core(e) => {
                let status = match &e {
                    CoreError::UnknownTexture(_) => StatusCode::NOT_FOUND,
                    CoreError::SessionState(_) => StatusCode::CONFLICT,
                    _ => StatusCode::UNPROCESSABLE_ENTITY,
                };
                let missing = match &e {
                    CoreError::MissingTextures { missing, .. } => Some(missing.clone()),
                    _ => None,
                };
                (status, ErrorBody { error: e.to_string(), missing })
            }
            ApiError::Store(e) => (StatusCode::INTERNAL_SERVER_ERROR, ErrorBody { error: e.to_string(), missing: None }),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct TextureListing {
    pub id: TextureId,
    pub duration_s: f64,
    pub audio_url: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TextureList {
    pub textures: Vec<TextureListing>,
    /// Display order: the session's scrambled order when one is given,
    /// otherwise manifest order.
    pub order: Vec<TextureId>,
}

#[derive(Debug, Deserialize)]
struct TextureQuery {
    session: Option<String>,
}

async fn list_textures(State(app): State<AppState>, Query(q): Query<TextureQuery>) -> ApiResult<Json<TextureList>> {
    let ids = app.catalog.ids();
    let order = match q.session {
        Some(sid) => app.store.get(&sid).ok_or_else(|| unknown_session(&sid))?.lock().await.display_order.clone(),
        None => ids.clone(),
    };
    let textures = ids
        .iter()
        .map(|&id| TextureListing {
            id,
            duration_s: app.catalog.manifest.duration_s,
            audio_url: format!("/textures/{id}/audio"),
        })
        .collect();
    Ok(Json(TextureList { textures, order }))
}

fn wav_response(bytes: Arc<Vec<u8>>) -> Response {
    ([(header::CONTENT_TYPE, "audio/wav")], bytes.as_ref().clone()).into_response()
}

async fn texture_audio(State(app): State<AppState>, Path(id): Path<TextureId>) -> ApiResult<Response> {
    let catalog = app.catalog.clone();
    let bytes = tokio::task::spawn_blocking(move || catalog.preview(id))
        .await
        .expect("preview task panicked")?;
    Ok(wav_response(bytes))
}

async fn masking_noise(State(app): State<AppState>) -> ApiResult<Response> {
    let catalog = app.catalog.clone();
    let bytes = tokio::task::spawn_blocking(move || catalog.masking_noise())
        .await
        .expect("masking task panicked")?;
    Ok(wav_response(bytes))
}

#[derive(Debug, Default, Deserialize)]
pub struct CreateSession {
    pub participant_id: String,
    /// Display-order seed; derived from the session id when absent.
    pub seed: Option<u64>,
    /// Start in the training phase, ended by a `begin` action.
    #[serde(default)]
    pub training: bool,
}

/// A session as clients see it.
#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub session: LiveSession,
    pub unassigned: Vec<TextureId>,
    /// The committed rounds in the analysis format.
    pub record: GroupingSession,
}

impl From<&LiveSession> for SessionView {
    fn from(s: &LiveSession) -> Self {
        Self { session: s.clone(), unassigned: s.unassigned(), record: s.to_grouping_session() }
    }
}

fn unknown_session(id: &str) -> ApiError {
    ApiError::NotFound(format!("no session {id:?}"))
}

async fn create_session(State(app): State<AppState>, Json(req): Json<CreateSession>) -> ApiResult<(StatusCode, Json<SessionView>)> {
    if req.participant_id.trim().is_empty() {
        return Err(CoreError::InvalidSession("participant_id must not be empty".into()).into());
    }
    let (id, derived_seed) = app.store.next_identity();
    let (session, created) = LiveSession::new(id, req.participant_id, app.catalog.ids(), req.seed.unwrap_or(derived_seed), req.training)?;
    let view = SessionView::from(&session);
    app.store.insert(session, &created)?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let handle = app.store.get(&id).ok_or_else(|| unknown_session(&id))?;
    let session = handle.lock().await;
    Ok(Json(SessionView::from(&*session)))
}

/// Body of `POST /sessions/{id}/assignments`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AssignmentAction {
    Begin,
    Assign { texture_id: TextureId, group: String },
    Unassign { texture_id: TextureId },
    Merge { from: String, into: String },
}

impl From<AssignmentAction> for SessionEvent {
    fn from(a: AssignmentAction) -> Self {
        match a {
            AssignmentAction::Begin => SessionEvent::Begin,
            AssignmentAction::Assign { texture_id, group } => SessionEvent::Assign { texture_id, group },
            AssignmentAction::Unassign { texture_id } => SessionEvent::Unassign { texture_id },
            AssignmentAction::Merge { from, into } => SessionEvent::Merge { from, into },
        }
    }
}

async fn mutate(app: &AppState, id: &str, event: SessionEvent) -> ApiResult<Json<SessionView>> {
    let handle = app.store.get(id).ok_or_else(|| unknown_session(id))?;
    let mut session = handle.lock().await;
    let mut next = session.clone();
    next.apply(&event)?;
    app.store.persist(&next, &event)?;
    *session = next;
    Ok(Json(SessionView::from(&*session)))
}

async fn post_assignment(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(action): Json<AssignmentAction>,
) -> ApiResult<Json<SessionView>> {
    mutate(&app, &id, action.into()).await
}

async fn commit_round(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    mutate(&app, &id, SessionEvent::CommitRound).await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NamesRequest {
    pub names: BTreeMap<String, String>,
}

async fn post_names(State(app): State<AppState>, Path(id): Path<String>, Json(req): Json<NamesRequest>) -> ApiResult<Json<SessionView>> {
    mutate(&app, &id, SessionEvent::SubmitNames { names: req.names }).await
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/textures", get(list_textures))
        .route("/textures/{id}/audio", get(texture_audio))
        .route("/masking-noise", get(masking_noise))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/assignments", post(post_assignment))
        .route("/sessions/{id}/commit-round", post(commit_round))
        .route("/sessions/{id}/names", post(post_names))
        .layer(tower_http::cors::CorsLayer::permissive())
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}
