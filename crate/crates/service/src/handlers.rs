use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::Json;
use phrasebank::extraction::{normalize_plain_text, MediaType, RawContent};
use phrasebank::limits::{builtin_word_lists, ceiling_table, sentence_ceiling, CeilingResult, CeilingRow};
use phrasebank::metrics::{common_matrix, compute_metrics, CommonMatrix};
use phrasebank::projection::{even_groups, fit_report, snapshot_series, FitReport, SnapshotSeries, TrendPoint, Volume, DEFAULT_TARGETS};
use phrasebank::store::{
    DocumentDetail, DocumentFilter, DocumentId, DocumentSummary, Page, PageRequest, SentenceDetail, SentenceFilter,
    SentenceId, SentenceSummary, SentenceTranslation, TranslationId,
};
use phrasebank::translation::{self, TranslationResult};
use phrasebank::{ingest_document, CorpusMetrics, IngestStats, NewDocument, PlainText, Scope};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::{AppState, Shared};

type ApiResult<T> = Result<T, ApiError>;

async fn run<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Shared) -> phrasebank::Result<T> + Send + 'static,
{
    let shared = state.shared.clone();
    tokio::task::spawn_blocking(move || f(&shared))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(ApiError::from)
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    q.map(|Query(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

fn path<T>(p: Result<Path<T>, PathRejection>) -> ApiResult<T> {
    p.map(|Path(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

fn json<T>(j: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    match j {
        Ok(Json(v)) => Ok(v),
        Err(JsonRejection::MissingJsonContentType(e)) => Err(ApiError::new(
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            "unsupported_media",
            e.body_text(),
        )),
        Err(e) => Err(ApiError::bad_request(e.body_text())),
    }
}

fn page(page: Option<u32>, page_size: Option<u32>) -> ApiResult<PageRequest> {
    let default = PageRequest::default();
    Ok(PageRequest::new(page.unwrap_or(default.page), page_size.unwrap_or(default.page_size))?)
}

pub async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

pub async fn spec() -> ([(header::HeaderName, &'static str); 1], &'static str) {
    ([(header::CONTENT_TYPE, "application/json")], crate::API_SPEC)
}

pub async fn fallback() -> ApiError {
    ApiError::not_found("no such endpoint")
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UploadParams {
    source_tag: Option<String>,
    name: Option<String>,
    language: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UploadResponse {
    pub document_id: DocumentId,
    pub ingest_stats: IngestStats,
}

fn require_plain_text(mime: Option<&str>, filename: Option<&str>) -> ApiResult<()> {
    let media = match mime {
        Some(m) if !m.is_empty() && m != "application/octet-stream" => MediaType::from_mime(m),
        _ => filename.and_then(|f| MediaType::from_path(std::path::Path::new(f))),
    };
    if media == Some(MediaType::Text) {
        return Ok(());
    }
    Err(phrasebank::Error::UnsupportedMedia(format!(
        "{}; only text/plain uploads are accepted",
        mime.unwrap_or("unknown")
    ))
    .into())
}

fn body_error(status: StatusCode, text: String, limit: usize) -> ApiError {
    if status == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::new(status, "validation_failed", format!("upload exceeds the {limit}-byte limit"))
    } else {
        ApiError::bad_request(text)
    }
}

pub async fn upload_document(
    State(state): State<AppState>,
    params: Result<Query<UploadParams>, QueryRejection>,
    req: Request,
) -> ApiResult<(StatusCode, Json<UploadResponse>)> {
    let mut params = query(params)?;
    let limit = state.shared.upload_limit;
    let content_type = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_string();

    let bytes = if content_type.starts_with("multipart/form-data") {
        let mut multipart = Multipart::from_request(req, &())
            .await
            .map_err(|e| ApiError::bad_request(e.body_text()))?;
        let mut file = None;
        while let Some(field) = multipart
            .next_field()
            .await
            .map_err(|e| body_error(e.status(), e.body_text(), limit))?
        {
            let field_name = field.name().unwrap_or("").to_string();
            if let Some(filename) = field.file_name().map(str::to_string) {
                require_plain_text(field.content_type(), Some(&filename))?;
                let data = field
                    .bytes()
                    .await
                    .map_err(|e| body_error(e.status(), e.body_text(), limit))?;
                params.name.get_or_insert(filename);
                file = Some(data);
                continue;
            }
            let value = field
                .text()
                .await
                .map_err(|e| body_error(e.status(), e.body_text(), limit))?;
            match field_name.as_str() {
                "sourceTag" => params.source_tag = Some(value),
                "name" => params.name = Some(value),
                "language" => params.language = Some(value),
                "text" | "file" => file = Some(Bytes::from(value)),
                _ => {}
            }
        }
        file.ok_or_else(|| ApiError::bad_request("multipart upload has no file part"))?
    } else {
        require_plain_text(Some(&content_type), None)?;
        Bytes::from_request(req, &())
            .await
            .map_err(|e| body_error(e.status(), e.body_text(), limit))?
    };

    let source_tag = params
        .source_tag
        .ok_or_else(|| ApiError::bad_request("sourceTag is required"))?;
    let name = params.name.ok_or_else(|| ApiError::bad_request("name is required"))?;
    let language = params.language.unwrap_or_else(|| "en".into());
    let content = normalize_plain_text(&RawContent::new(bytes.to_vec(), "text/plain", name.clone()));
    let doc = NewDocument::new(source_tag, name, "text/plain", language, content);
    let (document_id, ingest_stats) = run(&state, move |s| ingest_document(s.repo.as_ref(), &s.tokenizer, &doc)).await?;
    Ok((
        StatusCode::CREATED,
        Json(UploadResponse {
            document_id,
            ingest_stats,
        }),
    ))
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DocumentQuery {
    query: Option<String>,
    source: Option<String>,
    page: Option<u32>,
    page_size: Option<u32>,
}

pub async fn list_documents(
    State(state): State<AppState>,
    q: Result<Query<DocumentQuery>, QueryRejection>,
) -> ApiResult<Json<Page<DocumentSummary>>> {
    let q = query(q)?;
    let req = page(q.page, q.page_size)?;
    let filter = DocumentFilter {
        source_tag: q.source.filter(|s| !s.is_empty()),
        name_substring: q.query.filter(|s| !s.is_empty()),
    };
    Ok(Json(run(&state, move |s| s.repo.list_documents(&filter, req)).await?))
}

pub async fn get_document(
    State(state): State<AppState>,
    id: Result<Path<u64>, PathRejection>,
) -> ApiResult<Json<DocumentDetail>> {
    let id = DocumentId(path(id)?);
    Ok(Json(run(&state, move |s| s.repo.get_document(id)).await?))
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SentenceQuery {
    query: Option<String>,
    language: Option<String>,
    min_occurrences: Option<u64>,
    page: Option<u32>,
    page_size: Option<u32>,
}

pub async fn list_sentences(
    State(state): State<AppState>,
    q: Result<Query<SentenceQuery>, QueryRejection>,
) -> ApiResult<Json<Page<SentenceSummary>>> {
    let q = query(q)?;
    let req = page(q.page, q.page_size)?;
    let filter = SentenceFilter {
        text_substring: q.query.filter(|s| !s.is_empty()),
        language_tag: q.language.filter(|s| !s.is_empty()),
        min_occurrences: q.min_occurrences,
    };
    Ok(Json(run(&state, move |s| s.repo.list_sentences(&filter, req)).await?))
}

pub async fn get_sentence(
    State(state): State<AppState>,
    id: Result<Path<u64>, PathRejection>,
) -> ApiResult<Json<SentenceDetail>> {
    let id = SentenceId(path(id)?);
    Ok(Json(run(&state, move |s| s.repo.get_sentence(id)).await?))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TranslateRequest {
    pub text: String,
    pub source_lang: String,
    pub target_lang: String,
}

pub async fn translate(
    State(state): State<AppState>,
    body: Result<Json<TranslateRequest>, JsonRejection>,
) -> ApiResult<Json<TranslationResult>> {
    let body = json(body)?;
    Ok(Json(
        run(&state, move |s| {
            translation::translate_text(
                s.repo.as_ref(),
                &s.tokenizer,
                &s.pairs,
                &PlainText::new(&body.text),
                &body.source_lang,
                &body.target_lang,
            )
        })
        .await?,
    ))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NewTranslation {
    pub target_lang: String,
    pub text: String,
    pub contributor: String,
}

pub async fn add_translation(
    State(state): State<AppState>,
    id: Result<Path<u64>, PathRejection>,
    body: Result<Json<NewTranslation>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<SentenceTranslation>)> {
    let id = SentenceId(path(id)?);
    let body = json(body)?;
    let t = run(&state, move |s| {
        translation::add_translation(s.repo.as_ref(), &s.pairs, id, &body.target_lang, &body.text, &body.contributor)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(t)))
}

pub async fn vote_translation(
    State(state): State<AppState>,
    id: Result<Path<u64>, PathRejection>,
) -> ApiResult<Json<SentenceTranslation>> {
    let id = TranslationId(path(id)?);
    Ok(Json(run(&state, move |s| translation::vote_translation(s.repo.as_ref(), id)).await?))
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsQuery {
    scope: Option<String>,
    documents: Option<String>,
    #[serde(default)]
    valid_only: bool,
}

fn parse_ids(list: &str) -> ApiResult<Vec<DocumentId>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| ApiError::bad_request(format!("invalid document id {s:?}")))
        })
        .collect()
}

/// `documents=1,2` selects a document set; otherwise `scope` is a source tag,
/// with `all` or no value meaning the whole store.
fn parse_scope(scope: Option<&str>, documents: Option<&str>) -> ApiResult<Scope> {
    if let Some(d) = documents {
        return Ok(Scope::Documents(parse_ids(d)?));
    }
    Ok(match scope {
        None | Some("") | Some("all") => Scope::All,
        Some(tag) => Scope::Source(tag.to_string()),
    })
}

pub async fn metrics(
    State(state): State<AppState>,
    q: Result<Query<MetricsQuery>, QueryRejection>,
) -> ApiResult<Json<CorpusMetrics>> {
    let q = query(q)?;
    let scope = parse_scope(q.scope.as_deref(), q.documents.as_deref())?;
    Ok(Json(
        run(&state, move |s| {
            compute_metrics(s.repo.as_ref(), &scope, q.valid_only.then_some(&s.rules))
        })
        .await?,
    ))
}

#[derive(Debug, Default, Deserialize)]
pub struct CommonQuery {
    sources: Option<String>,
}

pub async fn common(
    State(state): State<AppState>,
    q: Result<Query<CommonQuery>, QueryRejection>,
) -> ApiResult<Json<CommonMatrix>> {
    let q = query(q)?;
    let sources: Vec<String> = q
        .sources
        .unwrap_or_default()
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    if sources.is_empty() {
        return Err(ApiError::bad_request("sources is required, e.g. sources=a,b"));
    }
    Ok(Json(run(&state, move |s| common_matrix(s.repo.as_ref(), &sources)).await?))
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LimitsQuery {
    vocab: Option<u64>,
    max_words: Option<u32>,
}

pub async fn limits(q: Result<Query<LimitsQuery>, QueryRejection>) -> ApiResult<Json<CeilingResult>> {
    let q = query(q)?;
    let (Some(vocab), Some(max_words)) = (q.vocab, q.max_words) else {
        return Err(ApiError::bad_request("vocab and maxWords are required"));
    };
    Ok(Json(sentence_ceiling(vocab, max_words)?))
}

pub async fn limits_table() -> ApiResult<Json<Vec<CeilingRow>>> {
    let lengths = [
        phrasebank::limits::READABLE_MAX_WORDS,
        phrasebank::limits::COMPREHENSION_MAX_WORDS,
    ];
    Ok(Json(ceiling_table(&builtin_word_lists(), &lengths)?))
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProjectionQuery {
    target_pct: Option<f64>,
    #[serde(default)]
    valid_only: bool,
    points: Option<String>,
    source: Option<String>,
    snapshots: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProjectionResponse {
    pub fit: FitReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub required_volume: Option<Volume>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<SnapshotSeries>,
}

fn parse_points(list: &str) -> ApiResult<Vec<TrendPoint>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (x, y) = pair
                .split_once(':')
                .ok_or_else(|| ApiError::bad_request(format!("point {pair:?} is not x:y")))?;
            let x = x.parse().map_err(|_| ApiError::bad_request(format!("invalid x in {pair:?}")))?;
            let y = y.parse().map_err(|_| ApiError::bad_request(format!("invalid y in {pair:?}")))?;
            Ok(TrendPoint::new(x, y))
        })
        .collect()
}

pub const DEFAULT_SNAPSHOTS: usize = 5;

pub async fn projection(
    State(state): State<AppState>,
    q: Result<Query<ProjectionQuery>, QueryRejection>,
) -> ApiResult<Json<ProjectionResponse>> {
    let q = query(q)?;
    let explicit = q.points.as_deref().map(parse_points).transpose()?;
    let response = run(&state, move |s| {
        let (points, snapshots) = match explicit {
            Some(points) => (points, None),
            None => {
                let source = q.source.as_deref().filter(|t| !t.is_empty() && *t != "all");
                let groups = even_groups(s.repo.as_ref(), source, q.snapshots.unwrap_or(DEFAULT_SNAPSHOTS))?;
                let series = snapshot_series(s.repo.as_ref(), &groups, q.valid_only.then_some(&s.rules))?;
                (series.trend_points(), Some(series))
            }
        };
        let targets = match q.target_pct {
            Some(t) => vec![t],
            None => DEFAULT_TARGETS.to_vec(),
        };
        let fit = fit_report(&points, &targets)?;
        let required_volume = match q.target_pct {
            Some(t) => Some(fit.trend.required_volume(t)?),
            None => None,
        };
        Ok(ProjectionResponse {
            fit,
            required_volume,
            snapshots,
        })
    })
    .await?;
    Ok(Json(response))
}
