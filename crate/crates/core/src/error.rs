use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{kind} {id} not found")]
    NotFound { kind: &'static str, id: String },

    #[error("document {name:?} from source {source_tag:?} was already ingested")]
    AlreadyIngested { source_tag: String, name: String },

    #[error("{0}")]
    Validation(String),

    #[error("unsupported media type {0:?}")]
    UnsupportedMedia(String),

    #[error("unknown source tag {0:?}")]
    UnknownSource(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("trend with slope {slope} cannot be inverted")]
    NonInvertibleTrend { slope: f64 },

    #[error("unsupported language pair {source_lang}->{target_lang}; supported: {}", supported.join(", "))]
    UnsupportedLanguagePair {
        source_lang: String,
        target_lang: String,
        supported: Vec<String>,
    },

    #[error("storage: {0}")]
    Storage(#[from] rusqlite::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn not_found(kind: &'static str, id: impl ToString) -> Self {
        Error::NotFound {
            kind,
            id: id.to_string(),
        }
    }
}
