use std::path::{Path, PathBuf};

use possession_core::{AnalyticsError, CrfError, EvalError, GraphError, LabelError, ScorerError, SynthError};
use thiserror::Error;

use crate::scorefile::ScoreFileError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: line {line}: {msg}", path.display())]
    Row { path: PathBuf, line: u64, msg: String },
    #[error("{0}")]
    Data(String),
    #[error("missing artifact {}: run `{step}` first", path.display())]
    MissingArtifact { path: PathBuf, step: &'static str },
    #[error("{}: {source}", path.display())]
    ScoreFile { path: PathBuf, source: ScoreFileError },
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Crf(#[from] CrfError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code: 2 for configuration problems, 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |source| Error::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn row(path: &Path, line: u64, msg: impl Into<String>) -> Error {
        Error::Row { path: path.to_path_buf(), line, msg: msg.into() }
    }

    /// CSV errors carry their own line when the reader knows it.
    pub(crate) fn csv(path: &Path, err: csv::Error) -> Error {
        let line = err.position().map(|p| p.line());
        match (err.kind(), line) {
            (csv::ErrorKind::Io(_), _) => Error::Io { path: path.to_path_buf(), source: std::io::Error::other(err.to_string()) },
            (_, Some(line)) => Error::row(path, line, err.to_string()),
            (_, None) => Error::Data(format!("{}: {err}", path.display())),
        }
    }
}
