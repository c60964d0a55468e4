//! Crawl-session persistence. One JSON document per session with stable
//! field names; bodies are stored inline, which is plenty at campaign scale.

use std::path::Path;

use super::CrawlSession;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed crawl session {path}: {source}")]
    Malformed {
        path: String,
        source: serde_json::Error,
    },
}

pub fn save_session(session: &CrawlSession, path: &Path) -> Result<(), StoreError> {
    let text = serde_json::to_string_pretty(session).expect("session serializes");
    std::fs::write(path, text).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_session(path: &Path) -> Result<CrawlSession, StoreError> {
    let text = std::fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| StoreError::Malformed {
        path: path.display().to_string(),
        source,
    })
}
