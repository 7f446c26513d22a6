//! HTTP routes.
//!
//! | Route | Result |
//! |---|---|
//! | `POST /login` | `{"user": "alice", "password": "pw"}` → `{"token": "...", "user": "alice"}` |
//! | `POST /jobs` | multipart `file` + `spec` (JSON [`JobSpec`] without `file`) → `202 {"id": "...", "status": "queued"}` |
//! | `GET /jobs` | the caller's jobs, newest first |
//! | `GET /jobs/{id}` | the full [`JobRecord`] |
//! | `GET /jobs/{id}/result.xml` | `application/xml` when done |
//! | `GET /jobs/{id}/overlay/{page}.png` | `image/png` when done |
//! | `GET /health` | `ok` |
//!
//! All `/jobs` routes need `Authorization: Bearer <token>`. Artifact routes
//! answer `202` with a status payload while the job is queued or running and
//! `409` with the error once it failed. Jobs of other users, like unknown
//! ids, are `404`.

use std::path::Path;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, FromRequestParts, Multipart, Path as UrlPath, State};
use axum::http::request::Parts;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use refscan_core::pipelines::{FieldError, FileType, JobSpec, Pipeline, PipelineConfig};
use serde::Deserialize;
use serde_json::{json, Value};
use uuid::Uuid;

use crate::auth::Sessions;
use crate::store::{JobRecord, JobStatus, JobStore};

pub struct AppState {
    pub store: Arc<JobStore>,
    pub sessions: Sessions,
    pub pipeline: PipelineConfig,
}

pub type SharedState = Arc<AppState>;

#[derive(Debug)]
pub enum ApiError {
    Unauthorized,
    NotFound,
    Invalid(Vec<FieldError>),
    BadRequest(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::Unauthorized => (StatusCode::UNAUTHORIZED, json!({"error": "authentication required"})),
            ApiError::NotFound => (StatusCode::NOT_FOUND, json!({"error": "not found"})),
            ApiError::Invalid(fields) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({"error": "invalid job spec", "fields": fields}),
            ),
            ApiError::BadRequest(msg) => (StatusCode::BAD_REQUEST, json!({"error": msg})),
            ApiError::Internal(msg) => {
                tracing::error!(error = %msg, "internal error");
                (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": "internal error"}))
            }
        };
        let mut resp = (status, Json(body)).into_response();
        if status == StatusCode::UNAUTHORIZED {
            resp.headers_mut().insert(header::WWW_AUTHENTICATE, HeaderValue::from_static("Bearer"));
        }
        resp
    }
}

/// The authenticated caller.
#[derive(Debug, Clone)]
pub struct User(pub String);

impl FromRequestParts<SharedState> for User {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &SharedState) -> Result<Self, Self::Rejection> {
        let token = parts
            .headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or(ApiError::Unauthorized)?;
        state.sessions.user(token.trim()).map(User).ok_or(ApiError::Unauthorized)
    }
}

pub fn router(state: SharedState, max_upload_bytes: usize) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/login", post(login))
        .route("/jobs", post(submit).get(list_jobs))
        .route("/jobs/{id}", get(job_status))
        .route("/jobs/{id}/result.xml", get(result_xml))
        .route("/jobs/{id}/overlay/{file}", get(overlay_png))
        .layer(DefaultBodyLimit::max(max_upload_bytes))
        .with_state(state)
}

#[derive(Deserialize)]
struct LoginRequest {
    user: String,
    password: String,
}

async fn login(State(state): State<SharedState>, Json(req): Json<LoginRequest>) -> Result<Json<Value>, ApiError> {
    let token = state.sessions.login(&req.user, &req.password).ok_or(ApiError::Unauthorized)?;
    Ok(Json(json!({"token": token, "user": req.user})))
}

/// Parses the `spec` part field by field so every problem is reported
/// against its field.
pub fn parse_spec(text: &str) -> Result<JobSpec, Vec<FieldError>> {
    let value: Value = serde_json::from_str(text).map_err(|e| vec![FieldError::new("spec", format!("not JSON: {e}"))])?;
    let Value::Object(map) = value else {
        return Err(vec![FieldError::new("spec", "expected a JSON object")]);
    };
    let mut errors = Vec::new();
    for key in map.keys() {
        if !matches!(key.as_str(), "file" | "file_type" | "pipeline" | "dummy_text" | "detector" | "ocr_adapter") {
            errors.push(FieldError::new(key.as_str(), "unknown field"));
        }
    }
    fn named<T>(map: &serde_json::Map<String, Value>, key: &str, all: &[T], errors: &mut Vec<FieldError>) -> Option<T>
    where
        T: std::str::FromStr + std::fmt::Display,
    {
        let choices = || all.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
        match map.get(key) {
            None => {
                errors.push(FieldError::new(key, format!("missing; one of {}", choices())));
                None
            }
            Some(Value::String(s)) => s.parse().ok().or_else(|| {
                errors.push(FieldError::new(key, format!("unknown value `{s}`; one of {}", choices())));
                None
            }),
            Some(_) => {
                errors.push(FieldError::new(key, "expected a string"));
                None
            }
        }
    }
    let file_type = named::<FileType>(&map, "file_type", FileType::ALL, &mut errors);
    let pipeline = named::<Pipeline>(&map, "pipeline", Pipeline::ALL, &mut errors);
    let dummy_text = match map.get("dummy_text") {
        None | Some(Value::Null) => false,
        Some(Value::Bool(b)) => *b,
        Some(_) => {
            errors.push(FieldError::new("dummy_text", "expected a boolean"));
            false
        }
    };
    let detector = match map.get("detector") {
        None | Some(Value::Null) => None,
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| errors.push(FieldError::new("detector", e.to_string())))
            .ok(),
    };
    let ocr_adapter = match map.get("ocr_adapter") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            errors.push(FieldError::new("ocr_adapter", "expected a string"));
            None
        }
    };
    match (file_type, pipeline) {
        (Some(file_type), Some(pipeline)) if errors.is_empty() => {
            let mut spec = JobSpec::new("", file_type, pipeline);
            spec.dummy_text = dummy_text;
            spec.detector = detector;
            spec.ocr_adapter = ocr_adapter;
            Ok(spec)
        }
        _ => Err(errors),
    }
}

/// Keeps the last path component and replaces anything unusual.
fn safe_file_name(name: Option<&str>) -> String {
    let base = name
        .and_then(|n| n.rsplit(['/', '\\']).next())
        .unwrap_or("")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect::<String>();
    let base = base.trim_start_matches('.');
    if base.is_empty() {
        "upload".into()
    } else {
        base.to_string()
    }
}

fn summary(r: &JobRecord) -> Value {
    json!({
        "id": r.id,
        "status": r.status,
        "file_type": r.spec.file_type,
        "pipeline": r.spec.pipeline,
        "file_name": r.spec.file.file_name().map(|n| n.to_string_lossy()),
        "submitted_at": r.submitted_at,
        "finished_at": r.finished_at,
    })
}

async fn submit(State(state): State<SharedState>, User(user): User, mut multipart: Multipart) -> Result<Response, ApiError> {
    let mut spec_text = None;
    let mut upload: Option<(String, Vec<u8>)> = None;
    while let Some(field) = multipart.next_field().await.map_err(|e| ApiError::BadRequest(e.to_string()))? {
        match field.name() {
            Some("spec") => spec_text = Some(field.text().await.map_err(|e| ApiError::BadRequest(e.to_string()))?),
            Some("file") => {
                let name = safe_file_name(field.file_name());
                let bytes = field.bytes().await.map_err(|e| ApiError::BadRequest(e.to_string()))?;
                upload = Some((name, bytes.to_vec()));
            }
            _ => {}
        }
    }
    let mut errors = Vec::new();
    let spec = match spec_text.as_deref().map(parse_spec) {
        Some(Ok(spec)) => Some(spec),
        Some(Err(e)) => {
            errors.extend(e);
            None
        }
        None => {
            errors.push(FieldError::new("spec", "missing multipart field"));
            None
        }
    };
    if upload.is_none() {
        errors.push(FieldError::new("file", "missing multipart field"));
    }
    let (Some(mut spec), Some((name, bytes))) = (spec, upload) else {
        return Err(ApiError::Invalid(errors));
    };
    spec.file = Path::new("input").join(&name);
    spec.validate(&state.pipeline).map_err(ApiError::Invalid)?;

    let store = Arc::clone(&state.store);
    let record = tokio::task::spawn_blocking(move || {
        let id = store.reserve()?;
        let path = store.input_dir(id).join(&name);
        std::fs::write(&path, &bytes).map_err(crate::ServiceError::io(&path))?;
        spec.file = path;
        store.enqueue(id, &user, spec)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
    .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok((StatusCode::ACCEPTED, Json(json!({"id": record.id, "status": record.status}))).into_response())
}

async fn list_jobs(State(state): State<SharedState>, User(user): User) -> Json<Value> {
    Json(Value::Array(state.store.list(&user).iter().map(summary).collect()))
}

fn owned(state: &AppState, id: &str, user: &str) -> Result<JobRecord, ApiError> {
    let id: Uuid = id.parse().map_err(|_| ApiError::NotFound)?;
    state.store.get_owned(id, user).ok_or(ApiError::NotFound)
}

async fn job_status(State(state): State<SharedState>, User(user): User, UrlPath(id): UrlPath<String>) -> Result<Json<JobRecord>, ApiError> {
    owned(&state, &id, &user).map(Json)
}

/// The artifact `name` of a done job, or the status payload otherwise.
async fn artifact(state: &AppState, job: &JobRecord, name: Option<&str>, content_type: &'static str) -> Result<Response, ApiError> {
    match job.status {
        JobStatus::Queued | JobStatus::Processing => {
            Ok((StatusCode::ACCEPTED, Json(json!({"id": job.id, "status": job.status}))).into_response())
        }
        JobStatus::Failed => Ok((
            StatusCode::CONFLICT,
            Json(json!({"id": job.id, "status": job.status, "error": job.error})),
        )
            .into_response()),
        JobStatus::Done => {
            let name = name.ok_or(ApiError::NotFound)?;
            let path = state.store.output_dir(job.id).join(name);
            let bytes = tokio::fs::read(&path).await.map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => ApiError::NotFound,
                _ => ApiError::Internal(format!("{}: {e}", path.display())),
            })?;
            Ok(([(header::CONTENT_TYPE, content_type)], bytes).into_response())
        }
    }
}

async fn result_xml(State(state): State<SharedState>, User(user): User, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let job = owned(&state, &id, &user)?;
    artifact(&state, &job, job.result_paths.xml.as_deref(), "application/xml").await
}

async fn overlay_png(
    State(state): State<SharedState>,
    User(user): User,
    UrlPath((id, file)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let job = owned(&state, &id, &user)?;
    let page: u32 = file
        .strip_suffix(".png")
        .and_then(|p| p.parse().ok())
        .filter(|&p| p >= 1)
        .ok_or(ApiError::NotFound)?;
    let name = job.result_paths.overlays.get(page as usize - 1).cloned();
    artifact(&state, &job, name.as_deref(), "image/png").await
}
