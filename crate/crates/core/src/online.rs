//! Online blacklist lookups performed by the slow path.
//!
//! Real providers sit behind URL-matching APIs that need credentials; none
//! are bundled. [`MockOnlineBlacklist`] is file- or set-backed with optional
//! failure injection, and [`NoOnlineBlacklist`] answers `NotListed` for all.

use std::collections::HashSet;
use std::io;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use crate::url::{normalize, UrlRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnlineCheck {
    Listed,
    NotListed,
    /// Provider could not answer. Callers treat this as `NotListed`.
    Unavailable,
}

/// Never fetches the page itself.
pub trait OnlineBlacklistClient: Send + Sync {
    fn check(&self, url: &UrlRecord) -> OnlineCheck;
}

impl<C: OnlineBlacklistClient + ?Sized> OnlineBlacklistClient for Arc<C> {
    fn check(&self, url: &UrlRecord) -> OnlineCheck {
        (**self).check(url)
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NoOnlineBlacklist;

impl OnlineBlacklistClient for NoOnlineBlacklist {
    fn check(&self, _: &UrlRecord) -> OnlineCheck {
        OnlineCheck::NotListed
    }
}

#[derive(Debug, Default)]
pub struct MockOnlineBlacklist {
    listed: HashSet<String>,
    unavailable: AtomicBool,
    latency: Duration,
    calls: AtomicUsize,
}

impl MockOnlineBlacklist {
    pub fn new<I, S>(listed: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            listed: listed
                .into_iter()
                .filter_map(|u| normalize(u.as_ref()).ok())
                .map(|u| u.normalized)
                .collect(),
            ..Self::default()
        }
    }

    /// Newline-delimited URLs, `#` comments; unparseable lines are skipped.
    pub fn load(path: impl AsRef<Path>) -> io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        ))
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    /// While set, every check answers `Unavailable`.
    pub fn set_unavailable(&self, down: bool) {
        self.unavailable.store(down, Ordering::SeqCst);
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn len(&self) -> usize {
        self.listed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.listed.is_empty()
    }
}

impl OnlineBlacklistClient for MockOnlineBlacklist {
    fn check(&self, url: &UrlRecord) -> OnlineCheck {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
        if self.unavailable.load(Ordering::SeqCst) {
            OnlineCheck::Unavailable
        } else if self.listed.contains(url.key()) {
            OnlineCheck::Listed
        } else {
            OnlineCheck::NotListed
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_lookup_and_failure_injection() {
        let mock = MockOnlineBlacklist::new(["HTTP://Evil.example.com/", "not a url"]);
        assert_eq!(mock.len(), 1);
        let evil = normalize("http://evil.example.com").unwrap();
        let fine = normalize("http://fine.example.com").unwrap();
        assert_eq!(mock.check(&evil), OnlineCheck::Listed);
        assert_eq!(mock.check(&fine), OnlineCheck::NotListed);
        mock.set_unavailable(true);
        assert_eq!(mock.check(&evil), OnlineCheck::Unavailable);
        assert_eq!(mock.calls(), 3);
    }

    #[test]
    fn load_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("listed.txt");
        std::fs::write(&path, "# listed\nhttps://a.example.com/x\n\nhttps://b.example.com\n").unwrap();
        let mock = MockOnlineBlacklist::load(&path).unwrap();
        assert_eq!(mock.len(), 2);
        assert_eq!(
            NoOnlineBlacklist.check(&normalize("https://a.example.com/x").unwrap()),
            OnlineCheck::NotListed
        );
    }
}
