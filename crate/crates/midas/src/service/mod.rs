//! The annotation service: a store of locks and records behind an HTTP API.

pub mod http;
pub mod store;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use midas_core::metrics::KappaMode;
use midas_core::Taxonomy;
use serde::Deserialize;

use crate::formats::{self, FileError};
use store::{AnnotationStore, StoreConfig, SystemClock, DEFAULT_LOCK_TTL_MS};

/// Service configuration file (TOML). Relative paths are resolved against
/// the directory holding the file.
///
/// ```toml
/// corpus = "corpus.jsonl"
/// log = "annotations.jsonl"
/// model = "model.json"        # optional, enables suggestions
/// scheme = "scheme.tsv"       # optional, defaults to the built-in scheme
/// export = "export.jsonl"     # optional, target of POST /export
/// host = "127.0.0.1"
/// port = 8080
/// lock_ttl_secs = 600
/// kappa_mode = "exact_set"
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub corpus: PathBuf,
    pub log: PathBuf,
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub scheme: Option<PathBuf>,
    #[serde(default)]
    pub export: Option<PathBuf>,
    #[serde(default = "default_host")]
    pub host: String,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default = "default_ttl")]
    pub lock_ttl_secs: u64,
    #[serde(default)]
    pub kappa_mode: KappaMode,
}

fn default_host() -> String {
    "127.0.0.1".into()
}

fn default_port() -> u16 {
    8080
}

fn default_ttl() -> u64 {
    DEFAULT_LOCK_TTL_MS / 1000
}

impl ServiceConfig {
    pub fn parse(src: &str, base: &Path, origin: &str) -> Result<Self, FileError> {
        let mut c: ServiceConfig = toml::from_str(src).map_err(|e| FileError::invalid(origin, e.message()))?;
        if c.lock_ttl_secs == 0 {
            return Err(FileError::invalid(origin, "lock_ttl_secs must be positive"));
        }
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut c.corpus);
        fix(&mut c.log);
        for p in [&mut c.model, &mut c.scheme, &mut c.export].into_iter().flatten() {
            fix(p);
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, FileError> {
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&formats::read_text(path)?, base, &path.display().to_string())
    }
}

/// Loads every file named by the config and builds the router state.
pub fn build_state(config: &ServiceConfig) -> Result<http::AppState, String> {
    let taxonomy = match &config.scheme {
        Some(p) => formats::scheme::read_scheme(p).map_err(|e| e.to_string())?,
        None => Taxonomy::builtin(),
    };
    let conversations = formats::corpus::read_corpus(&config.corpus).map_err(|e| e.to_string())?;
    let model = match &config.model {
        Some(p) => Some(formats::read_json(p).map_err(|e| e.to_string())?),
        None => None,
    };
    let store = AnnotationStore::open(
        taxonomy,
        conversations,
        &config.log,
        model,
        Arc::new(SystemClock),
        StoreConfig { lock_ttl_ms: config.lock_ttl_secs * 1000, kappa_mode: config.kappa_mode },
    )
    .map_err(|e| e.to_string())?;
    Ok(http::AppState { store: Arc::new(store), export_path: config.export.clone() })
}

/// Serves until the process is stopped.
pub async fn serve(config: ServiceConfig) -> Result<(), String> {
    let state = build_state(&config)?;
    let addr = format!("{}:{}", config.host, config.port);
    let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| format!("bind {addr}: {e}"))?;
    eprintln!("midas annotation service listening on {}", listener.local_addr().map_err(|e| e.to_string())?);
    axum::serve(listener, http::router(state)).await.map_err(|e| e.to_string())
}
