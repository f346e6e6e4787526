//! Candidate sources: chat-completions sampling with an on-disk transcript
//! cache, candidate directories, and a remote embedding provider.

mod embed;
mod pool;
mod prompt;
mod sampler;

use std::path::PathBuf;

use thiserror::Error;

pub use embed::{FallbackEmbedder, RemoteEmbedder, EMBED_TOKEN_VAR};
pub use pool::{load_candidates, CandidatePool, NamedCandidate};
pub use prompt::{ChatMessage, PromptBundle};
pub use sampler::{sample_candidates, sample_with, ChatBackend, HttpChatBackend, SamplingConfig, LLM_TOKEN_VAR};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid sampling config: {0}")]
    InvalidConfig(String),
    #[error("every completion request failed; last error: {0}")]
    Endpoint(String),
    #[error("no parsable candidate in {0}")]
    EmptyPool(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn io_error(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> GatewayError {
    let path = path.into();
    move |source| GatewayError::Io { path, source }
}
