use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical blowup at step {step}{}", replay_hint(*.path_index, *.seed))]
    NumericalBlowup {
        step: usize,
        path_index: Option<u64>,
        seed: Option<u64>,
    },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn replay_hint(path_index: Option<u64>, seed: Option<u64>) -> String {
    match (path_index, seed) {
        (Some(p), Some(s)) => format!(" (path {p}, master seed {s})"),
        (Some(p), None) => format!(" (path {p})"),
        _ => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Attaches the Monte Carlo replay coordinates to a blowup error.
    pub(crate) fn with_path(self, index: u64, master: u64) -> Self {
        match self {
            Error::NumericalBlowup { step, .. } => Error::NumericalBlowup {
                step,
                path_index: Some(index),
                seed: Some(master),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
