use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures raised by an OCR engine adapter.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("engine `{engine}` unavailable: {detail}")]
    Unavailable { engine: String, detail: String },
    #[error("engine `{engine}` does not support language `{language}`")]
    UnsupportedLanguage { engine: String, language: String },
    #[error("engine `{engine}` timed out after {millis} ms")]
    Timeout { engine: String, millis: u64 },
    #[error("no cached transcript for engine `{engine}`, image {image}, language `{language}`")]
    CacheMiss {
        engine: String,
        image: String,
        language: String,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing referenced file: {0}")]
    MissingFile(PathBuf),
    #[error("manifest line {line}: {message}")]
    ManifestLine { line: usize, message: String },
    #[error("duplicate article id `{0}`")]
    DuplicateId(String),
    #[error("reference text is empty after normalization{}", article_suffix(.article_id))]
    EmptyReference { article_id: Option<String> },
    #[error("article `{0}` has no hypothesis text")]
    MissingHypothesis(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("group `{group}` has {size} article(s); at least 2 are required")]
    GroupTooSmall { group: String, size: usize },
    #[error("error model is empty")]
    EmptyModel,
    #[error("target needs {requested} edits but only {max_achievable} eligible sites exist")]
    Unreachable {
        requested: usize,
        max_achievable: usize,
    },
    #[error("edit plan does not match text: {0}")]
    PlanMismatch(String),
    #[error("language `{0}` is not mapped to a script group")]
    UnknownGroup(String),
    #[error("no `{engine}` code for language `{code}`; nearest known: {}", .nearest.join(", "))]
    UnknownMapping {
        code: String,
        engine: String,
        nearest: Vec<String>,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

fn article_suffix(id: &Option<String>) -> String {
    match id {
        Some(id) => format!(" (article `{id}`)"),
        None => String::new(),
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for I/O, 2 for domain errors, 3 for engine failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::MissingFile(_) | Error::Csv(_) | Error::Image(_) => 1,
            Error::Engine(_) => 3,
            _ => 2,
        }
    }
}
