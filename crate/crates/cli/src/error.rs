use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tweetstack_core::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing artifact {path}; run `tweetstack {command}` first")]
    MissingArtifact { path: PathBuf, command: String },
    #[error("stale artifact {path}: {reason}")]
    Stale { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}
