use thiserror::Error;

use crate::experiments::ExperimentError;
use crate::io::ConfigError;
use crate::lindblad::EvolutionError;
use crate::model::ModelError;
use crate::spectral::SpectralError;

/// Any failure surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable tag for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Model(_) => "model",
            Error::Spectral(_) => "spectral",
            Error::Evolution(_) => "evolution",
            Error::Experiment(_) => "experiment",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
