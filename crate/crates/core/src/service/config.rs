use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, ExternalBackend, MockBackend, MockConfig, DEFAULT_TOP_M};
use crate::error::{Error, Result};
use crate::predictive::MAX_K;
use crate::samples::CORPUS_A;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Mock,
    External,
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "external" => Ok(BackendKind::External),
            other => Err(Error::Config(format!(
                "unknown backend {other:?} (expected mock or external)"
            ))),
        }
    }
}

/// Service settings, read from a `key = value` file (TOML syntax) with
/// environment overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub backend: BackendKind,
    /// Training text for the mock backend; the built-in sample corpus when unset.
    pub corpus_path: Option<PathBuf>,
    /// Base URL of the inference server for the external backend.
    pub endpoint: Option<String>,
    pub backend_timeout_ms: u64,
    pub default_k: usize,
    pub default_phrase_tokens: usize,
    pub top_m: usize,
    /// Directory for per-session logs. Logs stay in memory when unset.
    pub log_dir: Option<PathBuf>,
    /// Sync every log append to storage before responding.
    pub durable_logs: bool,
    pub session_ttl_seconds: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            backend: BackendKind::Mock,
            corpus_path: None,
            endpoint: None,
            backend_timeout_ms: 10_000,
            default_k: 3,
            default_phrase_tokens: 2,
            top_m: DEFAULT_TOP_M,
            log_dir: None,
            durable_logs: false,
            session_ttl_seconds: 1800,
        }
    }
}

pub const ENV_OVERRIDES: [&str; 5] = [
    "COWRITE_PORT",
    "COWRITE_LOG_DIR",
    "COWRITE_BACKEND",
    "COWRITE_CORPUS_PATH",
    "COWRITE_ENDPOINT",
];

impl ServiceConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Reads `path` when given, applies the process environment and validates.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut config = match path {
            Some(path) => Self::from_path(path)?,
            None => Self::default(),
        };
        config.apply_env(|key| std::env::var(key).ok())?;
        config.validate()?;
        Ok(config)
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(port) = lookup("COWRITE_PORT") {
            self.port = port
                .parse()
                .map_err(|_| Error::Config(format!("COWRITE_PORT is not a port number: {port:?}")))?;
        }
        if let Some(dir) = lookup("COWRITE_LOG_DIR") {
            self.log_dir = Some(dir.into());
        }
        if let Some(backend) = lookup("COWRITE_BACKEND") {
            self.backend = backend.parse()?;
        }
        if let Some(path) = lookup("COWRITE_CORPUS_PATH") {
            self.corpus_path = Some(path.into());
        }
        if let Some(url) = lookup("COWRITE_ENDPOINT") {
            self.endpoint = Some(url);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_K).contains(&self.default_k) {
            return Err(Error::Config(format!(
                "default_k must be between 1 and {MAX_K}, got {}",
                self.default_k
            )));
        }
        if self.default_phrase_tokens == 0 {
            return Err(Error::Config("default_phrase_tokens must be at least 1".into()));
        }
        if self.top_m < 2 || self.top_m < self.default_k {
            return Err(Error::Config(format!(
                "top_m must be at least 2 and at least default_k, got {}",
                self.top_m
            )));
        }
        if self.session_ttl_seconds == 0 {
            return Err(Error::Config("session_ttl_seconds must be positive".into()));
        }
        if self.backend == BackendKind::External && self.endpoint.is_none() {
            return Err(Error::Config("the external backend needs an endpoint".into()));
        }
        if let Some(dir) = &self.log_dir {
            check_writable(dir)?;
        }
        Ok(())
    }

    pub fn load_backend(&self) -> Result<Arc<dyn Backend>> {
        match self.backend {
            BackendKind::Mock => {
                let backend = match &self.corpus_path {
                    Some(path) => MockBackend::from_path(path, MockConfig::default())?,
                    None => MockBackend::new(CORPUS_A, MockConfig::default()),
                };
                Ok(Arc::new(backend))
            }
            BackendKind::External => {
                let endpoint = self
                    .endpoint
                    .as_deref()
                    .ok_or_else(|| Error::Config("the external backend needs an endpoint".into()))?;
                let timeout = Duration::from_millis(self.backend_timeout_ms);
                Ok(Arc::new(ExternalBackend::connect(endpoint, timeout)?))
            }
        }
    }
}

fn check_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let probe = dir.join(format!(".probe-{}", uuid::Uuid::new_v4()));
    std::fs::write(&probe, b"").map_err(|e| Error::file(&probe, e))?;
    std::fs::remove_file(&probe).map_err(|e| Error::file(&probe, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    #[test]
    fn sample_config_matches_defaults() {
        let sample = ServiceConfig::parse(include_str!("../../../../cowrite.example.toml")).unwrap();
        assert_eq!(sample, ServiceConfig::default());
    }

    #[test]
    fn parses_key_value_file() {
        let config = ServiceConfig::parse(
            "port = 9000\nbackend = \"mock\"\ncorpus_path = \"corpus.txt\"\ndefault_k = 5\n# comment\ntop_m = 8\n",
        )
        .unwrap();
        assert_eq!(config.port, 9000);
        assert_eq!(config.default_k, 5);
        assert_eq!(config.top_m, 8);
        assert_eq!(config.corpus_path.as_deref(), Some(Path::new("corpus.txt")));
        assert_eq!(config.default_phrase_tokens, 2);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(matches!(ServiceConfig::parse("prot = 1"), Err(Error::Config(_))));
    }

    #[test]
    fn environment_overrides_file_values() {
        let env: HashMap<&str, &str> = [("COWRITE_PORT", "7000"), ("COWRITE_BACKEND", "external")].into();
        let mut config = ServiceConfig::parse("port = 9000").unwrap();
        config.apply_env(|k| env.get(k).map(|v| v.to_string())).unwrap();
        assert_eq!(config.port, 7000);
        assert_eq!(config.backend, BackendKind::External);
        assert!(config.validate().is_err(), "external without endpoint");
        let mut bad = ServiceConfig::default();
        assert!(bad.apply_env(|k| (k == "COWRITE_PORT").then(|| "x".into())).is_err());
    }

    #[test]
    fn validation_bounds() {
        let ok = ServiceConfig::default();
        ok.validate().unwrap();
        for config in [
            ServiceConfig {
                default_k: 0,
                ..ok.clone()
            },
            ServiceConfig {
                default_k: 11,
                ..ok.clone()
            },
            ServiceConfig { top_m: 1, ..ok.clone() },
            ServiceConfig {
                default_phrase_tokens: 0,
                ..ok.clone()
            },
        ] {
            assert!(config.validate().is_err(), "{config:?}");
        }
    }

    #[test]
    fn log_dir_must_be_writable() {
        let dir = tempfile::tempdir().unwrap();
        let nested = ServiceConfig {
            log_dir: Some(dir.path().join("a/b")),
            ..Default::default()
        };
        nested.validate().unwrap();
        assert!(dir.path().join("a/b").is_dir());
        let file = dir.path().join("file");
        std::fs::write(&file, "").unwrap();
        let blocked = ServiceConfig {
            log_dir: Some(file.join("sub")),
            ..Default::default()
        };
        assert!(blocked.validate().is_err());
    }

    #[test]
    fn default_backend_is_the_sample_mock() {
        let backend = ServiceConfig::default().load_backend().unwrap();
        assert_eq!(backend.model_id(), MockBackend::from_corpus(CORPUS_A).model_id());
    }
}
