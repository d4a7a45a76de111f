//! Timeout-bounded page fetching.
//!
//! Two backends implement [`Fetcher`]: [`HttpFetcher`] for live pages and
//! [`CorpusFetcher`], which serves pages from a local manifest and can
//! simulate latency and failures deterministically.
//!
//! Corpus manifest lines are tab separated:
//!
//! ```text
//! <normalized-url> <TAB> <html-path>[ <TAB> delay_ms=<n>][ <TAB> error=<kind>][ <TAB> final=<url>]
//! ```
//!
//! `kind` is one of `timeout`, `dns`, `connect`, `too_large` or `http_<code>`.
//! `final=` makes the entry behave as if the server redirected there, so the
//! returned content carries that URL. Relative html paths resolve against the
//! manifest's directory; `-` means "no body" and is only valid with `error=`.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::Utc;

use crate::model::WebpageContent;
use crate::url::{normalize, UrlRecord};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);
pub const DEFAULT_MAX_BYTES: usize = 2 * 1024 * 1024;
pub const MAX_REDIRECTS: usize = 5;

/// Status reported when the redirect limit is exceeded.
pub const REDIRECT_LIMIT_STATUS: u16 = 310;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FetchError {
    Timeout,
    Dns,
    Connect,
    HttpStatus(u16),
    TooLarge,
}

impl fmt::Display for FetchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FetchError::Timeout => f.write_str("timeout"),
            FetchError::Dns => f.write_str("dns"),
            FetchError::Connect => f.write_str("connect"),
            FetchError::HttpStatus(code) => write!(f, "http_{code}"),
            FetchError::TooLarge => f.write_str("too_large"),
        }
    }
}

impl std::str::FromStr for FetchError {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "timeout" => Ok(FetchError::Timeout),
            "dns" => Ok(FetchError::Dns),
            "connect" => Ok(FetchError::Connect),
            "too_large" => Ok(FetchError::TooLarge),
            other => other
                .strip_prefix("http_")
                .and_then(|code| code.parse().ok())
                .map(FetchError::HttpStatus)
                .ok_or_else(|| format!("unknown fetch error kind {other:?}")),
        }
    }
}

/// Exactly one of content or error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchOutcome {
    Content(WebpageContent),
    Error(FetchError),
}

impl FetchOutcome {
    pub fn content(&self) -> Option<&WebpageContent> {
        match self {
            FetchOutcome::Content(c) => Some(c),
            FetchOutcome::Error(_) => None,
        }
    }

    pub fn error(&self) -> Option<FetchError> {
        match self {
            FetchOutcome::Content(_) => None,
            FetchOutcome::Error(e) => Some(*e),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FetchLimits {
    pub timeout: Duration,
    pub max_bytes: usize,
}

impl Default for FetchLimits {
    fn default() -> Self {
        Self {
            timeout: DEFAULT_TIMEOUT,
            max_bytes: DEFAULT_MAX_BYTES,
        }
    }
}

pub trait Fetcher: Send + Sync {
    fn fetch(&self, url: &UrlRecord, limits: FetchLimits) -> FetchOutcome;
}

impl<F: Fetcher + ?Sized> Fetcher for Arc<F> {
    fn fetch(&self, url: &UrlRecord, limits: FetchLimits) -> FetchOutcome {
        (**self).fetch(url, limits)
    }
}

fn truncate_utf8(mut s: String, max_bytes: usize) -> String {
    if s.len() > max_bytes {
        let mut cut = max_bytes;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        s.truncate(cut);
    }
    s
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("manifest {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {reason}")]
    Invalid { line: usize, reason: String },
}

#[derive(Debug, Clone)]
struct CorpusEntry {
    html: Option<Arc<str>>,
    delay: Option<Duration>,
    error: Option<FetchError>,
    final_url: Option<UrlRecord>,
}

/// Fetcher backed by a manifest of local HTML files.
#[derive(Debug, Clone, Default)]
pub struct CorpusFetcher {
    entries: HashMap<String, CorpusEntry>,
    default_delay: Duration,
}

impl CorpusFetcher {
    pub fn load(manifest: impl AsRef<Path>) -> Result<Self, ManifestError> {
        let manifest = manifest.as_ref();
        let text = std::fs::read_to_string(manifest).map_err(|source| ManifestError::Io {
            path: manifest.to_path_buf(),
            source,
        })?;
        let base = manifest.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses manifest text, resolving relative html paths against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ManifestError> {
        let mut entries = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let invalid = |reason: String| ManifestError::Invalid { line, reason };
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let mut fields = raw.split('\t');
            let url = fields.next().unwrap_or_default().trim();
            let url = normalize(url).map_err(|e| invalid(e.to_string()))?;
            let html_path = fields
                .next()
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| invalid("missing html path".into()))?;

            let mut entry = CorpusEntry {
                html: None,
                delay: None,
                error: None,
                final_url: None,
            };
            for opt in fields.map(str::trim).filter(|s| !s.is_empty()) {
                let (key, value) = opt
                    .split_once('=')
                    .ok_or_else(|| invalid(format!("option {opt:?} is not key=value")))?;
                match key {
                    "delay_ms" => {
                        let ms: u64 = value.parse().map_err(|_| invalid(format!("bad delay_ms {value:?}")))?;
                        entry.delay = Some(Duration::from_millis(ms));
                    }
                    "error" => entry.error = Some(value.parse().map_err(invalid)?),
                    "final" => entry.final_url = Some(normalize(value).map_err(|e| invalid(e.to_string()))?),
                    other => return Err(invalid(format!("unknown option {other:?}"))),
                }
            }

            if html_path == "-" {
                if entry.error.is_none() {
                    return Err(invalid("html path '-' requires error=".into()));
                }
            } else {
                let path = base.join(html_path);
                let html = std::fs::read(&path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
                entry.html = Some(String::from_utf8_lossy(&html).into());
            }
            if entries.insert(url.normalized.clone(), entry).is_some() {
                return Err(invalid(format!("duplicate url {}", url.normalized)));
            }
        }
        Ok(Self {
            entries,
            default_delay: Duration::ZERO,
        })
    }

    /// Builds a corpus from in-memory pages (no delays or errors).
    pub fn from_pages<I, S>(pages: I) -> Self
    where
        I: IntoIterator<Item = (UrlRecord, S)>,
        S: Into<Arc<str>>,
    {
        let entries = pages
            .into_iter()
            .map(|(url, html)| {
                (
                    url.normalized,
                    CorpusEntry {
                        html: Some(html.into()),
                        delay: None,
                        error: None,
                        final_url: None,
                    },
                )
            })
            .collect();
        Self {
            entries,
            default_delay: Duration::ZERO,
        }
    }

    /// Delay applied to entries that do not declare their own `delay_ms`.
    pub fn with_default_delay(mut self, delay: Duration) -> Self {
        self.default_delay = delay;
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, url: &UrlRecord) -> bool {
        self.entries.contains_key(url.key())
    }

    pub fn urls(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl Fetcher for CorpusFetcher {
    fn fetch(&self, url: &UrlRecord, limits: FetchLimits) -> FetchOutcome {
        let started = Instant::now();
        let Some(entry) = self.entries.get(url.key()) else {
            return FetchOutcome::Error(FetchError::Dns);
        };
        if entry.error == Some(FetchError::Timeout) {
            std::thread::sleep(limits.timeout);
            return FetchOutcome::Error(FetchError::Timeout);
        }
        let delay = entry.delay.unwrap_or(self.default_delay);
        if delay > limits.timeout {
            std::thread::sleep(limits.timeout);
            return FetchOutcome::Error(FetchError::Timeout);
        }
        if !delay.is_zero() {
            std::thread::sleep(delay);
        }
        if let Some(err) = entry.error {
            return FetchOutcome::Error(err);
        }
        let html = entry.html.as_deref().unwrap_or_default().to_string();
        let final_url = entry.final_url.clone().unwrap_or_else(|| url.clone());
        FetchOutcome::Content(WebpageContent {
            url: final_url,
            html: truncate_utf8(html, limits.max_bytes),
            screenshot: None,
            fetched_at: Utc::now(),
            fetch_ms: started.elapsed().as_millis() as u64,
        })
    }
}

/// Live HTTP(S) fetcher. Plain GET, no script execution.
pub struct HttpFetcher {
    client: reqwest::blocking::Client,
}

impl HttpFetcher {
    pub fn new() -> Result<Self, reqwest::Error> {
        let client = reqwest::blocking::Client::builder()
            .redirect(reqwest::redirect::Policy::limited(MAX_REDIRECTS))
            .user_agent(concat!("phishwatch/", env!("CARGO_PKG_VERSION")))
            .build()?;
        Ok(Self { client })
    }
}

fn classify_reqwest_error(err: &reqwest::Error) -> FetchError {
    if err.is_timeout() {
        return FetchError::Timeout;
    }
    if err.is_redirect() {
        return FetchError::HttpStatus(REDIRECT_LIMIT_STATUS);
    }
    if let Some(status) = err.status() {
        return FetchError::HttpStatus(status.as_u16());
    }
    let mut source: Option<&dyn std::error::Error> = Some(err);
    while let Some(e) = source {
        let msg = e.to_string().to_ascii_lowercase();
        if msg.contains("dns") || msg.contains("failed to lookup") || msg.contains("name or service not known") {
            return FetchError::Dns;
        }
        if let Some(io) = e.downcast_ref::<std::io::Error>() {
            if io.kind() == std::io::ErrorKind::TimedOut {
                return FetchError::Timeout;
            }
        }
        source = e.source();
    }
    FetchError::Connect
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, url: &UrlRecord, limits: FetchLimits) -> FetchOutcome {
        let started = Instant::now();
        let response = match self.client.get(&url.normalized).timeout(limits.timeout).send() {
            Ok(r) => r,
            Err(err) => return FetchOutcome::Error(classify_reqwest_error(&err)),
        };
        let status = response.status();
        if !status.is_success() {
            return FetchOutcome::Error(FetchError::HttpStatus(status.as_u16()));
        }
        let final_url = normalize(response.url().as_str()).unwrap_or_else(|_| url.clone());

        let mut body = Vec::with_capacity(limits.max_bytes.min(64 * 1024));
        let mut reader = response.take(limits.max_bytes as u64);
        let mut buf = [0u8; 16 * 1024];
        loop {
            if started.elapsed() > limits.timeout {
                return FetchOutcome::Error(FetchError::Timeout);
            }
            match reader.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => body.extend_from_slice(&buf[..n]),
                Err(err) if err.kind() == std::io::ErrorKind::TimedOut => {
                    return FetchOutcome::Error(FetchError::Timeout)
                }
                Err(err) => {
                    let timed_out = err
                        .get_ref()
                        .and_then(|e| e.downcast_ref::<reqwest::Error>())
                        .is_some_and(reqwest::Error::is_timeout);
                    return FetchOutcome::Error(if timed_out {
                        FetchError::Timeout
                    } else {
                        FetchError::Connect
                    });
                }
            }
        }
        let html = truncate_utf8(String::from_utf8_lossy(&body).into_owned(), limits.max_bytes);
        FetchOutcome::Content(WebpageContent {
            url: final_url,
            html,
            screenshot: None,
            fetched_at: Utc::now(),
            fetch_ms: started.elapsed().as_millis() as u64,
        })
    }
}

/// Wraps a fetcher and counts calls.
pub struct CountingFetcher<F> {
    inner: F,
    calls: AtomicUsize,
}

impl<F> CountingFetcher<F> {
    pub fn new(inner: F) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<F: Fetcher> Fetcher for CountingFetcher<F> {
    fn fetch(&self, url: &UrlRecord, limits: FetchLimits) -> FetchOutcome {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.fetch(url, limits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn url(s: &str) -> UrlRecord {
        normalize(s).unwrap()
    }

    fn corpus(dir: &Path, manifest: &str) -> Result<CorpusFetcher, ManifestError> {
        std::fs::write(dir.join("paypal_fake.html"), "<title>PayPal</title>").unwrap();
        std::fs::write(dir.join("plain.html"), "<p>hello</p>").unwrap();
        std::fs::write(dir.join("manifest.tsv"), manifest).unwrap();
        CorpusFetcher::load(dir.join("manifest.tsv"))
    }

    fn limits(ms: u64) -> FetchLimits {
        FetchLimits {
            timeout: Duration::from_millis(ms),
            max_bytes: DEFAULT_MAX_BYTES,
        }
    }

    #[test]
    fn corpus_lookup_returns_file_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let c = corpus(
            dir.path(),
            "# fixture\nhttps://evil.tld/login\tpaypal_fake.html\nhttps://a.tld\tplain.html\nhttps://b.tld\tplain.html\tdelay_ms=5\n",
        )
        .unwrap();
        assert_eq!(c.len(), 3);
        let out = c.fetch(&url("https://evil.tld/login"), limits(1000));
        assert_eq!(out.content().unwrap().html, "<title>PayPal</title>");
        assert_eq!(out.content().unwrap().screenshot, None);
    }

    #[test]
    fn corpus_injected_delay_times_out() {
        let dir = tempfile::tempdir().unwrap();
        let c = corpus(dir.path(), "https://a.tld\tplain.html\tdelay_ms=50\n").unwrap();
        let start = Instant::now();
        assert_eq!(
            c.fetch(&url("https://a.tld"), limits(10)).error(),
            Some(FetchError::Timeout)
        );
        let elapsed = start.elapsed();
        assert!(
            elapsed >= Duration::from_millis(10) && elapsed < Duration::from_millis(45),
            "{elapsed:?}"
        );
    }

    #[test]
    fn corpus_declared_timeout_waits_for_expiry() {
        let dir = tempfile::tempdir().unwrap();
        let c = corpus(dir.path(), "https://a.tld\t-\terror=timeout\n").unwrap();
        let start = Instant::now();
        assert_eq!(
            c.fetch(&url("https://a.tld"), limits(15)).error(),
            Some(FetchError::Timeout)
        );
        assert!(start.elapsed() >= Duration::from_millis(15));
    }

    #[test]
    fn corpus_miss_is_dns() {
        let c = CorpusFetcher::default();
        assert_eq!(
            c.fetch(&url("https://nowhere.tld"), limits(10)).error(),
            Some(FetchError::Dns)
        );
    }

    #[test]
    fn corpus_errors_and_final_url() {
        let dir = tempfile::tempdir().unwrap();
        let c = corpus(
            dir.path(),
            "https://a.tld\t-\terror=http_404\nhttps://b.tld\tplain.html\tfinal=https://www.B.tld/home/\n",
        )
        .unwrap();
        assert_eq!(
            c.fetch(&url("https://a.tld"), limits(10)).error(),
            Some(FetchError::HttpStatus(404))
        );
        let out = c.fetch(&url("https://b.tld"), limits(10));
        assert_eq!(out.content().unwrap().url.normalized, "https://www.b.tld/home");
    }

    #[test]
    fn manifest_validation() {
        let dir = tempfile::tempdir().unwrap();
        for bad in [
            "https://a.tld\tmissing.html\n",
            "https://a.tld\n",
            "https://a.tld\t-\n",
            "https://a.tld\tplain.html\tdelay_ms=soon\n",
            "https://a.tld\tplain.html\terror=meltdown\n",
            "https://a.tld\tplain.html\nhttps://A.tld/\tplain.html\n",
            "not a url\tplain.html\n",
        ] {
            assert!(
                matches!(corpus(dir.path(), bad), Err(ManifestError::Invalid { .. })),
                "{bad:?}"
            );
        }
        assert!(matches!(
            CorpusFetcher::load(dir.path().join("nope.tsv")),
            Err(ManifestError::Io { .. })
        ));
    }

    #[test]
    fn truncates_at_max_bytes() {
        let c = CorpusFetcher::from_pages([(url("https://a.tld"), "héllo world")]);
        let out = c.fetch(
            &url("https://a.tld"),
            FetchLimits {
                timeout: Duration::from_secs(1),
                max_bytes: 2,
            },
        );
        assert_eq!(out.content().unwrap().html, "h");
    }

    #[test]
    fn fetch_error_names_round_trip() {
        for e in [
            FetchError::Timeout,
            FetchError::Dns,
            FetchError::Connect,
            FetchError::HttpStatus(503),
            FetchError::TooLarge,
        ] {
            assert_eq!(e.to_string().parse::<FetchError>().unwrap(), e);
        }
    }
}
