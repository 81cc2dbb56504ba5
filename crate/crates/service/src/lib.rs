//! HTTP API exposing the ddbforge pipeline per design project.
//!
//! Every endpoint parses its inputs, calls the matching library function
//! and returns its result; no distribution logic lives here. Mutations carry
//! an optional `version` and fail with 409 when it is stale.

mod error;
mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use ddbforge_core::codegen::{generate_bundle, ScriptBundle};
use ddbforge_core::diag::Diagnostic;
use ddbforge_core::ident;
use ddbforge_core::pipeline::{check_topology, load_schema, InputError};
use ddbforge_core::policy::{resolve_table_policy, TablePolicyDoc};
use ddbforge_core::simulator::{generate_dataset, simulate, Dataset};
use ddbforge_core::topology::Topology;
use ddbforge_core::validator::{validate, validate_with_sample, ValidationReport};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json_;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use error::ApiError;
pub use store::{Project, Store};

/// Placeholder written over secrets when a request asks for redaction.
pub const REDACTED: &str = "<redacted>";
/// Row cap per table when a simulation asks for a seeded dataset without one.
pub const DEFAULT_SIM_ROWS: usize = 100;

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Write each project through to `<dir>/<id>.json` and load them at start.
    pub state_dir: Option<PathBuf>,
    /// Origin allowed by CORS. Any origin when unset.
    pub allowed_origin: Option<String>,
}

type AppState = Arc<Store>;

pub fn router(config: &ServiceConfig) -> std::io::Result<Router> {
    let store = Store::open(config.state_dir.clone())?;
    let origin = match &config.allowed_origin {
        Some(o) => AllowOrigin::exact(
            HeaderValue::from_str(o).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?,
        ),
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new().allow_origin(origin).allow_methods(Any).allow_headers(Any);
    Ok(Router::new()
        .route("/api/projects", post(create_project))
        .route("/api/projects/{id}", get(get_project))
        .route("/api/projects/{id}/schema", put(put_schema))
        .route("/api/projects/{id}/topology", put(put_topology))
        .route("/api/projects/{id}/policy/tables/{table}", put(put_table_policy))
        .route("/api/projects/{id}/validate", post(post_validate))
        .route("/api/projects/{id}/plan", post(post_plan))
        .route("/api/projects/{id}/generate", post(post_generate))
        .route("/api/projects/{id}/simulate", post(post_simulate))
        .layer(cors)
        .with_state(Arc::new(store)))
}

/// Serve until the process is stopped.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let app = router(&config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app).await
}

/// JSON body, empty meaning the type's default.
fn body<T: DeserializeOwned + Default>(bytes: &Bytes) -> Result<T, ApiError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(bytes).map_err(|e| ApiError::BadRequest(e.to_string()))
}

fn required<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::BadRequest(e.to_string()))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    #[serde(default)]
    name: String,
}

#[derive(Debug, Serialize)]
pub struct ProjectView {
    pub id: String,
    pub name: String,
    pub version: u64,
    pub schema_ddl: Option<String>,
    pub tables: Vec<String>,
    pub topology: Option<Topology>,
    pub policy: serde_json::Map<String, Json_>,
    pub last_report: Option<ValidationReport>,
    /// Whether `last_report` was computed at the current version.
    pub report_current: bool,
}

fn view(p: &mut Project) -> Result<ProjectView, ApiError> {
    let tables = p.schema()?.table_names().map(str::to_string).collect();
    let policy = p
        .policies
        .iter()
        .map(|(t, doc)| (ident::document(t), serde_json::to_value(doc).expect("policy serializes")))
        .collect();
    Ok(ProjectView {
        id: p.id.clone(),
        name: p.name.clone(),
        version: p.version,
        schema_ddl: p.schema_ddl.clone(),
        tables,
        topology: p.topology.clone(),
        policy,
        last_report: p.last_report.clone(),
        report_current: p.report_version == Some(p.version),
    })
}

async fn create_project(State(store): State<AppState>, bytes: Bytes) -> Result<Response, ApiError> {
    let req: CreateRequest = body(&bytes)?;
    let project = Project::new(uuid::Uuid::new_v4().simple().to_string(), req.name);
    let handle = store.insert(project)?;
    let mut p = handle.lock().expect("project lock");
    Ok((StatusCode::CREATED, Json(view(&mut p)?)).into_response())
}

async fn get_project(
    State(store): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<ProjectView>, ApiError> {
    let handle = store.get(&id)?;
    let mut p = handle.lock().expect("project lock");
    Ok(Json(view(&mut p)?))
}

#[derive(Debug, Serialize)]
pub struct MutationResult {
    pub version: u64,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaRequest {
    ddl: String,
    #[serde(default)]
    version: Option<u64>,
}

async fn put_schema(
    State(store): State<AppState>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> Result<Json<MutationResult>, ApiError> {
    let handle = store.get(&id)?;
    let req: SchemaRequest = required(&bytes)?;
    let mut p = handle.lock().expect("project lock");
    p.check_version(req.version)?;
    let (schema, diagnostics) = load_schema(&req.ddl)?;
    p.set_schema(req.ddl, schema);
    p.bump();
    store.save(&p)?;
    Ok(Json(MutationResult { version: p.version, diagnostics }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyRequest {
    topology: Topology,
    #[serde(default)]
    version: Option<u64>,
}

async fn put_topology(
    State(store): State<AppState>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> Result<Json<MutationResult>, ApiError> {
    let handle = store.get(&id)?;
    let req: TopologyRequest = required(&bytes)?;
    let mut p = handle.lock().expect("project lock");
    p.check_version(req.version)?;
    let (topology, diagnostics) = check_topology(req.topology)?;
    p.topology = Some(topology);
    p.bump();
    store.save(&p)?;
    Ok(Json(MutationResult { version: p.version, diagnostics }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyRequest {
    policy: TablePolicyDoc,
    #[serde(default)]
    version: Option<u64>,
}

async fn put_table_policy(
    State(store): State<AppState>,
    Path((id, table)): Path<(String, String)>,
    bytes: Bytes,
) -> Result<Json<MutationResult>, ApiError> {
    let handle = store.get(&id)?;
    let req: PolicyRequest = required(&bytes)?;
    let mut p = handle.lock().expect("project lock");
    p.check_version(req.version)?;
    let schema = p.schema()?;
    let name = ident::normalize(&table);
    if !schema.contains(&name) {
        return Err(ApiError::UnknownTable(name));
    }
    resolve_table_policy(&table, &req.policy, &schema, &p.topology()).map_err(InputError::Policy)?;
    p.upsert_policy(name, req.policy);
    p.bump();
    store.save(&p)?;
    Ok(Json(MutationResult { version: p.version, diagnostics: Vec::new() }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ValidateRequest {
    #[serde(default)]
    sample: Option<Json_>,
}

async fn post_validate(
    State(store): State<AppState>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> Result<Json<ValidationReport>, ApiError> {
    let handle = store.get(&id)?;
    let req: ValidateRequest = body(&bytes)?;
    let mut p = handle.lock().expect("project lock");
    let plan = p.plan()?;
    let report = match &req.sample {
        Some(sample) => {
            let data = Dataset::from_json_value(sample, &plan.schema).map_err(|e| {
                ApiError::Unprocessable { message: format!("sample: {e}"), diagnostics: Vec::new() }
            })?;
            validate_with_sample(&plan, &plan.schema, &data)
        }
        None => validate(&plan, &plan.schema),
    };
    // The report is derived state: recording it does not change the version.
    p.last_report = Some(report.clone());
    p.report_version = Some(p.version);
    store.save(&p)?;
    Ok(Json(report))
}

#[derive(Debug, Default, Deserialize)]
struct RedactQuery {
    #[serde(default)]
    redact: bool,
}

async fn post_plan(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RedactQuery>,
) -> Result<Response, ApiError> {
    let handle = store.get(&id)?;
    let mut p = handle.lock().expect("project lock");
    let mut plan = p.plan()?;
    if q.redact {
        plan = plan.redacted(REDACTED);
    }
    Ok(([(header::CONTENT_TYPE, "application/json")], plan.to_json()).into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateRequest {
    #[serde(default)]
    version: Option<u64>,
}

/// The bundle as an uncompressed tar archive, entries in bundle order.
pub fn bundle_archive(bundle: &ScriptBundle) -> Vec<u8> {
    let mut builder = tar::Builder::new(Vec::new());
    for (name, text) in bundle.files() {
        let mut header = tar::Header::new_gnu();
        header.set_size(text.len() as u64);
        header.set_mode(0o644);
        header.set_mtime(0);
        header.set_cksum();
        builder.append_data(&mut header, &name, text.as_bytes()).expect("in-memory archive");
    }
    builder.into_inner().expect("in-memory archive")
}

async fn post_generate(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RedactQuery>,
    bytes: Bytes,
) -> Result<Response, ApiError> {
    let handle = store.get(&id)?;
    let req: GenerateRequest = body(&bytes)?;
    let mut p = handle.lock().expect("project lock");
    p.check_version(req.version)?;
    match (&p.last_report, p.report_version) {
        (Some(r), Some(v)) if v == p.version && !r.is_invalid() => {}
        (Some(r), Some(v)) if v == p.version && r.is_invalid() => {
            return Err(ApiError::Conflict("the last validation found errors".into()))
        }
        _ => return Err(ApiError::Conflict("validate the current version before generating".into())),
    }
    let mut plan = p.plan()?;
    if q.redact {
        plan = plan.redacted(REDACTED);
    }
    let bundle = generate_bundle(&plan).map_err(|e| ApiError::Conflict(e.to_string()))?;
    let archive = bundle_archive(&bundle);
    Ok((
        [
            (header::CONTENT_TYPE, "application/x-tar".to_string()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{}_scripts.tar\"", p.id)),
        ],
        archive,
    )
        .into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateRequest {
    #[serde(default)]
    dataset: Option<Json_>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    max_rows: Option<usize>,
}

async fn post_simulate(
    State(store): State<AppState>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> Result<Response, ApiError> {
    let handle = store.get(&id)?;
    let req: SimulateRequest = required(&bytes)?;
    let mut p = handle.lock().expect("project lock");
    let plan = p.plan()?;
    if validate(&plan, &plan.schema).is_invalid() {
        return Err(ApiError::Conflict(
            "the plan has validation errors; simulation needs a valid plan".into(),
        ));
    }
    let data = match (&req.dataset, req.seed) {
        (Some(json), None) => Dataset::from_json_value(json, &plan.schema).map_err(|e| {
            ApiError::Unprocessable { message: format!("dataset: {e}"), diagnostics: Vec::new() }
        })?,
        (None, Some(seed)) => generate_dataset(&plan, seed, req.max_rows.unwrap_or(DEFAULT_SIM_ROWS))
            .map_err(|e| ApiError::Unprocessable { message: e.to_string(), diagnostics: Vec::new() })?,
        _ => return Err(ApiError::BadRequest("give exactly one of dataset or seed".into())),
    };
    let report = simulate(&plan, &data);
    Ok(([(header::CONTENT_TYPE, "application/json")], report.to_json()).into_response())
}
