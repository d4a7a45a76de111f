//! Flat `key = value` configuration with environment overrides.
//!
//! Every key can be overridden by an environment variable named after it in
//! upper case with dots replaced by underscores (`ftw.worker_count` becomes
//! `FTW_WORKER_COUNT`). Relative paths are resolved against the directory of
//! the config file. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("{key}: unknown config key")]
    UnknownKey { key: String },
    #[error("{key}: invalid value {value:?}: {reason}")]
    Invalid {
        key: &'static str,
        value: String,
        reason: String,
    },
    #[error("{key}: {path} does not exist")]
    MissingFile { key: &'static str, path: PathBuf },
}

impl ConfigError {
    /// The offending key, when the error is about one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey { key } => Some(key),
            ConfigError::Invalid { key, .. } | ConfigError::MissingFile { key, .. } => Some(key),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrawlerBackend {
    Http,
    Corpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnlineMode {
    None,
    Mock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    pub ftw_worker_count: usize,
    pub stw_worker_count: usize,
    pub stw_dequeue_timeout: Duration,
    pub queue_capacity: usize,
    pub queue_max_attempts: u32,
    pub queue_journal_path: Option<PathBuf>,
    pub crawler_backend: CrawlerBackend,
    pub crawler_corpus_path: Option<PathBuf>,
    pub crawler_timeout: Duration,
    pub crawler_max_bytes: usize,
    pub blacklist_feed_path: Option<PathBuf>,
    pub blacklist_sync_interval: Duration,
    pub cache_journal_path: Option<PathBuf>,
    pub cache_ttl_rbpd: Duration,
    pub cache_ttl_error: Duration,
    /// `None` uses the bundled KB.
    pub rbpd_kb_path: Option<PathBuf>,
    pub online_mode: OnlineMode,
    pub online_mock_path: Option<PathBuf>,
    pub api_bind_addr: SocketAddr,
    pub api_review_token: Option<String>,
    pub api_static_dir: Option<PathBuf>,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            ftw_worker_count: 8,
            stw_worker_count: 4,
            stw_dequeue_timeout: Duration::from_millis(100),
            queue_capacity: 10_000,
            queue_max_attempts: 3,
            queue_journal_path: None,
            crawler_backend: CrawlerBackend::Http,
            crawler_corpus_path: None,
            crawler_timeout: Duration::from_secs(10),
            crawler_max_bytes: 2 * 1024 * 1024,
            blacklist_feed_path: None,
            blacklist_sync_interval: Duration::from_secs(300),
            cache_journal_path: None,
            cache_ttl_rbpd: Duration::from_secs(7 * 86_400),
            cache_ttl_error: Duration::from_secs(3_600),
            rbpd_kb_path: None,
            online_mode: OnlineMode::None,
            online_mock_path: None,
            api_bind_addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            api_review_token: None,
            api_static_dir: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "ftw.worker_count",
    "stw.worker_count",
    "stw.dequeue_timeout_ms",
    "queue.capacity",
    "queue.max_attempts",
    "queue.journal_path",
    "crawler.backend",
    "crawler.corpus_path",
    "crawler.timeout_secs",
    "crawler.max_bytes",
    "blacklist.feed_path",
    "blacklist.sync_interval_secs",
    "cache.journal_path",
    "cache.ttl_rbpd_days",
    "cache.ttl_error_hours",
    "rbpd.kb_path",
    "online_blacklist.mode",
    "online_blacklist.mock_path",
    "api.bind_addr",
    "api.review_token",
    "api.static_dir",
];

/// `ftw.worker_count` -> `FTW_WORKER_COUNT`.
pub fn env_name(key: &str) -> String {
    key.to_ascii_uppercase().replace('.', "_")
}

impl AppConfig {
    /// Reads `path` with overrides from the process environment.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::load_with_env(path, |k| std::env::var(k).ok())
    }

    pub fn load_with_env(path: impl AsRef<Path>, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, env)
    }

    pub fn parse(text: &str, base: &Path, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut raw: BTreeMap<&'static str, String> = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: idx + 1 })?;
            let key = key.trim();
            let known = KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| ConfigError::UnknownKey { key: key.to_string() })?;
            raw.insert(known, value.trim().to_string());
        }
        for key in KEYS {
            if let Some(value) = env(&env_name(key)) {
                raw.insert(key, value.trim().to_string());
            }
        }

        let mut cfg = AppConfig::default();
        let v = Values { raw: &raw, base };
        v.count("ftw.worker_count", &mut cfg.ftw_worker_count)?;
        v.count("stw.worker_count", &mut cfg.stw_worker_count)?;
        v.duration(
            "stw.dequeue_timeout_ms",
            Duration::from_millis,
            &mut cfg.stw_dequeue_timeout,
        )?;
        v.count("queue.capacity", &mut cfg.queue_capacity)?;
        v.count("queue.max_attempts", &mut cfg.queue_max_attempts)?;
        v.path("queue.journal_path", &mut cfg.queue_journal_path);
        v.choice(
            "crawler.backend",
            &[("http", CrawlerBackend::Http), ("corpus", CrawlerBackend::Corpus)],
            &mut cfg.crawler_backend,
        )?;
        v.path("crawler.corpus_path", &mut cfg.crawler_corpus_path);
        v.duration("crawler.timeout_secs", Duration::from_secs, &mut cfg.crawler_timeout)?;
        v.count("crawler.max_bytes", &mut cfg.crawler_max_bytes)?;
        v.path("blacklist.feed_path", &mut cfg.blacklist_feed_path);
        v.duration(
            "blacklist.sync_interval_secs",
            Duration::from_secs,
            &mut cfg.blacklist_sync_interval,
        )?;
        v.path("cache.journal_path", &mut cfg.cache_journal_path);
        v.duration(
            "cache.ttl_rbpd_days",
            |d| Duration::from_secs(d * 86_400),
            &mut cfg.cache_ttl_rbpd,
        )?;
        v.duration(
            "cache.ttl_error_hours",
            |h| Duration::from_secs(h * 3_600),
            &mut cfg.cache_ttl_error,
        )?;
        v.path("rbpd.kb_path", &mut cfg.rbpd_kb_path);
        v.choice(
            "online_blacklist.mode",
            &[("none", OnlineMode::None), ("mock", OnlineMode::Mock)],
            &mut cfg.online_mode,
        )?;
        v.path("online_blacklist.mock_path", &mut cfg.online_mock_path);
        v.parsed("api.bind_addr", &mut cfg.api_bind_addr)?;
        if let Some(token) = raw.get("api.review_token").filter(|t| !t.is_empty()) {
            cfg.api_review_token = Some(token.clone());
        }
        v.path("api.static_dir", &mut cfg.api_static_dir);

        if cfg.crawler_backend == CrawlerBackend::Corpus && cfg.crawler_corpus_path.is_none() {
            return Err(invalid(
                "crawler.corpus_path",
                "",
                "required when crawler.backend = corpus",
            ));
        }
        if cfg.online_mode == OnlineMode::Mock && cfg.online_mock_path.is_none() {
            return Err(invalid(
                "online_blacklist.mock_path",
                "",
                "required when online_blacklist.mode = mock",
            ));
        }
        Ok(cfg)
    }

    /// Checks that every configured input file exists. Journal paths are
    /// outputs and may be absent.
    pub fn check_inputs(&self) -> Result<(), ConfigError> {
        let inputs = [
            ("rbpd.kb_path", &self.rbpd_kb_path),
            ("blacklist.feed_path", &self.blacklist_feed_path),
            ("crawler.corpus_path", &self.crawler_corpus_path),
            ("online_blacklist.mock_path", &self.online_mock_path),
            ("api.static_dir", &self.api_static_dir),
        ];
        for (key, path) in inputs {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(ConfigError::MissingFile {
                        key,
                        path: path.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

fn invalid(key: &'static str, value: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        key,
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

struct Values<'a> {
    raw: &'a BTreeMap<&'static str, String>,
    base: &'a Path,
}

impl Values<'_> {
    fn parsed<T: FromStr>(&self, key: &'static str, out: &mut T) -> Result<(), ConfigError>
    where
        T::Err: fmt::Display,
    {
        if let Some(value) = self.raw.get(key) {
            *out = value.parse().map_err(|e| invalid(key, value, e))?;
        }
        Ok(())
    }

    fn count<T>(&self, key: &'static str, out: &mut T) -> Result<(), ConfigError>
    where
        T: FromStr + PartialOrd + From<u8> + Copy,
        T::Err: fmt::Display,
    {
        self.parsed(key, out)?;
        if *out < T::from(1) {
            return Err(invalid(key, &self.raw[key], "must be at least 1"));
        }
        Ok(())
    }

    fn duration(
        &self,
        key: &'static str,
        unit: impl Fn(u64) -> Duration,
        out: &mut Duration,
    ) -> Result<(), ConfigError> {
        let mut n: u64 = 0;
        if self.raw.contains_key(key) {
            self.count(key, &mut n)?;
            *out = unit(n);
        }
        Ok(())
    }

    fn choice<T: Copy>(&self, key: &'static str, options: &[(&str, T)], out: &mut T) -> Result<(), ConfigError> {
        if let Some(value) = self.raw.get(key) {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            *out = options
                .iter()
                .find(|(n, _)| n.eq_ignore_ascii_case(value))
                .map(|(_, t)| *t)
                .ok_or_else(|| invalid(key, value, format!("expected one of {}", names.join("|"))))?;
        }
        Ok(())
    }

    fn path(&self, key: &'static str, out: &mut Option<PathBuf>) {
        if let Some(value) = self.raw.get(key).filter(|v| !v.is_empty()) {
            let p = PathBuf::from(value);
            *out = Some(if p.is_absolute() { p } else { self.base.join(p) });
        }
    }
}
