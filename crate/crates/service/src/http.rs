//! JSON-over-HTTP API and static UI serving.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Redirect, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use coref_core::score::to_f64;
use coref_core::{Category, DiffReport, Mention, ScoreReport};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

use crate::error::ServiceError;
use crate::store::{Agreement, Link, NewProject, ProjectOptions, SourceFile, Store};

const BODY_LIMIT: usize = 32 * 1024 * 1024;

const UI_PLACEHOLDER: &str = "<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\"><title>coref</title></head>\n<body><p>No UI bundle is installed. Start the server with <code>--ui-dir</code> pointing at the built annotation UI.</p></body></html>\n";

type AppState = Arc<Store>;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        use ServiceError as E;
        let status = match &self {
            E::UnknownProject(_) | E::UnknownDocument(_) | E::UnknownAnnotator(_) => StatusCode::NOT_FOUND,
            E::RevisionConflict { .. } | E::WrongStage { .. } | E::ImportConflict(_) => StatusCode::CONFLICT,
            E::ParseError { .. }
            | E::SpanError(_)
            | E::UnknownMention(_)
            | E::InvalidLink(_)
            | E::UnknownDiscrepancy(_)
            | E::Invalid(_)
            | E::Analysis(_) => StatusCode::UNPROCESSABLE_ENTITY,
            E::Corrupt(_) | E::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = json!({ "error": self.code(), "message": self.to_string() });
        match &self {
            E::RevisionConflict { current, .. } => body["current_revision"] = json!(current),
            E::WrongStage { stage, .. } => body["stage"] = json!(stage),
            E::ParseError { file, .. } => body["file"] = json!(file),
            _ => {}
        }
        (status, Json(body)).into_response()
    }
}

fn invalid(e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Invalid(e.to_string())
}

/// Runs a store operation off the async executor.
async fn blocking<T, F>(store: &AppState, f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce(&Store) -> Result<T, ServiceError> + Send + 'static,
{
    let store = store.clone();
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ServiceError::Corrupt(format!("worker failed: {e}")))?
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TextDoc {
    name: String,
    text: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateProjectBody {
    name: String,
    #[serde(default)]
    annotators: Vec<String>,
    #[serde(default)]
    documents: Vec<TextDoc>,
    #[serde(default)]
    options: ProjectOptions,
    #[serde(default)]
    seed: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ImportBody {
    documents: Vec<TextDoc>,
    #[serde(default)]
    seed: bool,
}

#[derive(Deserialize)]
struct AnnotatorQuery {
    annotator: String,
}

#[derive(Deserialize)]
struct ChainsQuery {
    annotator: String,
    #[serde(default)]
    include_singletons: bool,
}

#[derive(Deserialize)]
struct PairQuery {
    a: String,
    b: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MarkablesBody {
    markables: Vec<Mention>,
    revision: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinksBody {
    links: Vec<Link>,
    revision: u64,
}

#[derive(Serialize)]
struct ScoreView<'a> {
    recall_num: u64,
    recall_den: u64,
    precision_num: u64,
    precision_den: u64,
    recall: Option<f64>,
    precision: Option<f64>,
    f_measure: Option<f64>,
    f_measure_exact: Option<String>,
    per_chain: &'a [(String, usize)],
}

impl<'a> From<&'a ScoreReport> for ScoreView<'a> {
    fn from(s: &'a ScoreReport) -> Self {
        Self {
            recall_num: s.recall_num,
            recall_den: s.recall_den,
            precision_num: s.precision_num,
            precision_den: s.precision_den,
            recall: s.recall.map(to_f64),
            precision: s.precision.map(to_f64),
            f_measure: s.f_measure.map(to_f64),
            f_measure_exact: s.f_measure.map(|f| f.to_string()),
            per_chain: &s.per_chain,
        }
    }
}

#[derive(Serialize)]
struct AgreementView<'a> {
    key: &'a str,
    response: &'a str,
    score: ScoreView<'a>,
    diff: &'a DiffReport,
}

fn agreement_json(a: &Agreement) -> Json<serde_json::Value> {
    Json(
        serde_json::to_value(AgreementView {
            key: &a.key,
            response: &a.response,
            score: (&a.score).into(),
            diff: &a.diff,
        })
        .expect("agreement serializes"),
    )
}

fn text_docs(docs: Vec<TextDoc>) -> Vec<SourceFile> {
    docs.into_iter().map(|d| SourceFile::new(d.name, d.text)).collect()
}

async fn list_projects(State(store): State<AppState>) -> impl IntoResponse {
    Json(store.list_projects())
}

async fn create_project(
    State(store): State<AppState>,
    body: Result<Json<CreateProjectBody>, JsonRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let Json(body) = body.map_err(invalid)?;
    let req = NewProject {
        name: body.name,
        annotators: body.annotators,
        documents: text_docs(body.documents),
        options: body.options,
        seed: body.seed,
    };
    let summary = blocking(&store, move |s| s.create_project(req)).await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn get_project(State(store): State<AppState>, Path(p): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(blocking(&store, move |s| s.project(&p)).await?))
}

async fn read_multipart(mut mp: Multipart) -> Result<(Vec<SourceFile>, bool), ServiceError> {
    let mut files = Vec::new();
    let mut seed = false;
    while let Some(field) = mp.next_field().await.map_err(invalid)? {
        let field_name = field.name().unwrap_or_default().to_owned();
        let file_name = field.file_name().map(str::to_owned);
        let bytes = field.bytes().await.map_err(invalid)?;
        match file_name {
            Some(name) => files.push(SourceFile::new(name, bytes.to_vec())),
            None if field_name == "seed" => seed = matches!(&bytes[..], b"true" | b"1" | b"on"),
            None => files.push(SourceFile::new(field_name, bytes.to_vec())),
        }
    }
    Ok((files, seed))
}

async fn import_docs(
    State(store): State<AppState>,
    Path(p): Path<String>,
    req: Request,
) -> Result<impl IntoResponse, ServiceError> {
    let is_multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let (files, seed) = if is_multipart {
        let mp = Multipart::from_request(req, &()).await.map_err(invalid)?;
        read_multipart(mp).await?
    } else {
        let Json(body) = Json::<ImportBody>::from_request(req, &()).await.map_err(invalid)?;
        (text_docs(body.documents), body.seed)
    };
    let ids = blocking(&store, move |s| s.import_documents(&p, files, seed)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "doc_ids": ids }))))
}

async fn get_document(
    State(store): State<AppState>,
    Path((p, d)): Path<(String, String)>,
    q: Result<Query<AnnotatorQuery>, QueryRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let Query(q) = q.map_err(invalid)?;
    Ok(Json(blocking(&store, move |s| s.document(&p, &d, &q.annotator)).await?))
}

async fn get_chains(
    State(store): State<AppState>,
    Path((p, d)): Path<(String, String)>,
    q: Result<Query<ChainsQuery>, QueryRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let Query(q) = q.map_err(invalid)?;
    Ok(Json(
        blocking(&store, move |s| s.chain_table(&p, &d, &q.annotator, q.include_singletons)).await?,
    ))
}

async fn put_markables(
    State(store): State<AppState>,
    Path((p, d)): Path<(String, String)>,
    q: Result<Query<AnnotatorQuery>, QueryRejection>,
    body: Result<Json<MarkablesBody>, JsonRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let Query(q) = q.map_err(invalid)?;
    let Json(body) = body.map_err(invalid)?;
    let revision = blocking(&store, move |s| {
        s.save_markables(&p, &d, &q.annotator, body.markables, body.revision)
    })
    .await?;
    Ok(Json(json!({ "revision": revision })))
}

async fn put_links(
    State(store): State<AppState>,
    Path((p, d)): Path<(String, String)>,
    q: Result<Query<AnnotatorQuery>, QueryRejection>,
    body: Result<Json<LinksBody>, JsonRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let Query(q) = q.map_err(invalid)?;
    let Json(body) = body.map_err(invalid)?;
    let chains = blocking(&store, move |s| {
        let revision = s.save_links(&p, &d, &q.annotator, body.links, body.revision)?;
        Ok((revision, s.chains(&p, &d, &q.annotator)?))
    })
    .await?;
    Ok(Json(json!({ "revision": chains.0, "chains": chains.1 })))
}

async fn post_advance(
    State(store): State<AppState>,
    Path((p, d)): Path<(String, String)>,
    q: Result<Query<AnnotatorQuery>, QueryRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let Query(q) = q.map_err(invalid)?;
    Ok(Json(blocking(&store, move |s| s.advance_stage(&p, &d, &q.annotator)).await?))
}

async fn get_export(
    State(store): State<AppState>,
    Path((p, d)): Path<(String, String)>,
    q: Result<Query<AnnotatorQuery>, QueryRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let Query(q) = q.map_err(invalid)?;
    let sgml = blocking(&store, move |s| s.export_sgml(&p, &d, &q.annotator)).await?;
    Ok(([(header::CONTENT_TYPE, "text/sgml; charset=utf-8")], sgml))
}

async fn get_agreement(
    State(store): State<AppState>,
    Path((p, d)): Path<(String, String)>,
    q: Result<Query<PairQuery>, QueryRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let Query(q) = q.map_err(invalid)?;
    let a = blocking(&store, move |s| s.compute_agreement(&p, &d, &q.a, &q.b)).await?;
    Ok(agreement_json(&a))
}

async fn put_diff_labels(
    State(store): State<AppState>,
    Path((p, d)): Path<(String, String)>,
    q: Result<Query<PairQuery>, QueryRejection>,
    body: Result<Json<BTreeMap<String, Option<Category>>>, JsonRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let Query(q) = q.map_err(invalid)?;
    let Json(labels) = body.map_err(invalid)?;
    let a = blocking(&store, move |s| s.set_diff_labels(&p, &d, &q.a, &q.b, labels)).await?;
    Ok(agreement_json(&a))
}

async fn get_tally(State(store): State<AppState>, Path(p): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    let tally = blocking(&store, move |s| s.tally(&p)).await?;
    let mut body = serde_json::to_value(&tally).expect("tally serializes");
    body["table"] = json!(tally.render_table());
    Ok(Json(body))
}

async fn ui_placeholder() -> Html<&'static str> {
    Html(UI_PLACEHOLDER)
}

/// Builds the API router. `ui_dir`, when given, is served under `/ui`.
pub fn router(store: Arc<Store>, ui_dir: Option<PathBuf>) -> Router {
    let doc = "/projects/{p}/docs/{d}";
    let api = Router::new()
        .route("/projects", get(list_projects).post(create_project))
        .route("/projects/{p}", get(get_project))
        .route("/projects/{p}/docs", post(import_docs))
        .route("/projects/{p}/tally", get(get_tally))
        .route(doc, get(get_document))
        .route(&format!("{doc}/chains"), get(get_chains))
        .route(&format!("{doc}/markables"), put(put_markables))
        .route(&format!("{doc}/links"), put(put_links))
        .route(&format!("{doc}/advance"), post(post_advance))
        .route(&format!("{doc}/export"), get(get_export))
        .route(&format!("{doc}/agreement"), get(get_agreement))
        .route(&format!("{doc}/diff-labels"), put(put_diff_labels))
        .route("/", get(|| async { Redirect::temporary("/ui/") }))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(store);
    let api = match ui_dir {
        Some(dir) => api.nest_service("/ui", ServeDir::new(dir).append_index_html_on_directories(true)),
        None => api
            .route("/ui", get(ui_placeholder))
            .route("/ui/", get(ui_placeholder)),
    };
    api.layer(TraceLayer::new_for_http())
}

/// Serves the API on `addr` until the process is stopped.
pub async fn serve(store: Arc<Store>, ui_dir: Option<PathBuf>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, root = %store.root().display(), "listening");
    axum::serve(listener, router(store, ui_dir)).await
}
