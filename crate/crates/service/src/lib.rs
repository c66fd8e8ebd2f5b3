//! HTTP/JSON API over a phrasebank store, mounted under `/api/v1`.
//!
//! Handlers are thin adapters: each response body is the JSON serialization
//! of the backing core function's output. Store calls run on the blocking
//! pool.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::http::{HeaderValue, Method};
use axum::routing::{get, post};
use axum::Router;
use phrasebank::translation::LanguagePairs;
use phrasebank::{Repository, RuleSet, Tokenizer};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

mod error;
pub mod handlers;

pub use error::ApiError;

pub const DEFAULT_UPLOAD_LIMIT: usize = 50 * 1024 * 1024;

/// Machine-readable description of the endpoints, served at `/api/v1/spec`.
pub const API_SPEC: &str = include_str!("api.json");

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub upload_limit: usize,
    /// Allowed CORS origin; any origin when `None`.
    pub cors_origin: Option<String>,
    pub pairs: LanguagePairs,
    pub rules: RuleSet,
    pub tokenizer: Tokenizer,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            upload_limit: DEFAULT_UPLOAD_LIMIT,
            cors_origin: None,
            pairs: LanguagePairs::default(),
            rules: RuleSet::default(),
            tokenizer: Tokenizer::default(),
        }
    }
}

pub struct Shared {
    pub repo: Arc<dyn Repository>,
    pub tokenizer: Tokenizer,
    pub pairs: LanguagePairs,
    pub rules: RuleSet,
    pub upload_limit: usize,
}

#[derive(Clone)]
pub struct AppState {
    pub shared: Arc<Shared>,
}

fn cors(origin: Option<&str>) -> phrasebank::Result<CorsLayer> {
    let allow = match origin {
        None | Some("*") => AllowOrigin::any(),
        Some(o) => AllowOrigin::exact(
            HeaderValue::from_str(o).map_err(|_| phrasebank::Error::Config(format!("invalid CORS origin {o:?}")))?,
        ),
    };
    Ok(CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers(Any))
}

pub fn router(repo: Arc<dyn Repository>, config: ServiceConfig) -> phrasebank::Result<Router> {
    let cors = cors(config.cors_origin.as_deref())?;
    let state = AppState {
        shared: Arc::new(Shared {
            repo,
            tokenizer: config.tokenizer,
            pairs: config.pairs,
            rules: config.rules,
            upload_limit: config.upload_limit,
        }),
    };
    use handlers::*;
    let api = Router::new()
        .route("/health", get(health))
        .route("/spec", get(spec))
        .route("/documents", get(list_documents).post(upload_document))
        .route("/documents/:id", get(get_document))
        .route("/sentences", get(list_sentences))
        .route("/sentences/:id", get(get_sentence))
        .route("/sentences/:id/translations", post(add_translation))
        .route("/translations/:id/vote", post(vote_translation))
        .route("/translate", post(translate))
        .route("/metrics", get(metrics))
        .route("/metrics/common", get(common))
        .route("/limits", get(limits))
        .route("/limits/table", get(limits_table))
        .route("/projection", get(projection));
    Ok(Router::new()
        .nest("/api/v1", api)
        .fallback(fallback)
        .layer(DefaultBodyLimit::max(config.upload_limit))
        .layer(cors)
        .with_state(state))
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, app: Router) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
