//! Verdict cache: finished verdicts keyed by normalized URL.
//!
//! Writes follow last-write-wins, except that a `UserFeedback` entry can only
//! be replaced by another `UserFeedback` write. Every accepted write is
//! appended to an optional journal which is replayed (and compacted) when
//! the cache is reopened.

pub mod journal;

use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap};
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, NaiveDate, Utc};
use dashmap::mapref::entry::Entry;
use dashmap::DashMap;
use serde::{Deserialize, Serialize};

use crate::clock::{self, SharedClock};
use crate::model::{Verdict, VerdictSource, VerdictStatus};
use crate::url::UrlRecord;

use self::journal::Journal;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheEntry {
    pub key: String,
    pub verdict: Verdict,
    pub expires_at: Option<DateTime<Utc>>,
}

impl CacheEntry {
    pub fn is_live(&self, now: DateTime<Utc>) -> bool {
        self.expires_at.is_none_or(|t| t > now)
    }
}

#[derive(Debug, Clone)]
pub struct CacheConfig {
    /// TTL for RBPD, online-blacklist and any other non-error, non-feedback verdict.
    pub ttl_verdict: Duration,
    pub ttl_error: Duration,
    pub journal_path: Option<PathBuf>,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            ttl_verdict: Duration::days(7),
            ttl_error: Duration::hours(1),
            journal_path: None,
        }
    }
}

impl CacheConfig {
    fn ttl_for(&self, verdict: &Verdict) -> Option<Duration> {
        if verdict.source == VerdictSource::UserFeedback {
            None
        } else if verdict.status == VerdictStatus::Error {
            Some(self.ttl_error)
        } else {
            Some(self.ttl_verdict)
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("pending verdicts are never cached")]
    PendingRejected,
    #[error("journal write failed: {0}")]
    Journal(#[from] io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct BrandCount {
    pub brand: String,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StatsReport {
    pub window_days: u32,
    pub unique_phishing_count: u64,
    /// Descending by count, ties by brand name.
    pub per_brand_counts: Vec<BrandCount>,
    pub per_day_phishing_counts: BTreeMap<NaiveDate, u64>,
    pub source_counts: BTreeMap<VerdictSource, u64>,
    /// `source_counts` normalized to fractions; empty when there is no phishing.
    pub source_distribution: BTreeMap<VerdictSource, f64>,
}

impl StatsReport {
    /// Share of phishing verdicts that came from either blacklist.
    pub fn blacklist_family_share(&self) -> f64 {
        self.source_distribution
            .iter()
            .filter(|(s, _)| s.is_blacklist_family())
            .map(|(_, f)| f)
            .sum()
    }
}

pub struct VerdictCache {
    entries: DashMap<String, CacheEntry>,
    config: CacheConfig,
    journal: Option<Journal>,
    clock: SharedClock,
}

impl Default for VerdictCache {
    fn default() -> Self {
        Self::in_memory(CacheConfig::default(), clock::system())
    }
}

impl VerdictCache {
    pub fn in_memory(config: CacheConfig, clock: SharedClock) -> Self {
        Self {
            entries: DashMap::new(),
            config: CacheConfig {
                journal_path: None,
                ..config
            },
            journal: None,
            clock,
        }
    }

    /// Opens the cache, replaying `config.journal_path` if set. Expired
    /// records are dropped and the journal is compacted to the live set.
    pub fn open(config: CacheConfig, clock: SharedClock) -> io::Result<Self> {
        let Some(path) = config.journal_path.clone() else {
            return Ok(Self::in_memory(config, clock));
        };
        let replay = Journal::replay(&path)?;
        let now = clock.now();
        let mut live: HashMap<String, CacheEntry> = HashMap::new();
        for entry in replay.entries {
            if entry.verdict.status == VerdictStatus::Pending {
                continue;
            }
            live.insert(entry.key.clone(), entry);
        }
        live.retain(|_, e| e.is_live(now));
        let mut ordered: Vec<&CacheEntry> = live.values().collect();
        ordered.sort_by(|a, b| a.verdict.decided_at.cmp(&b.verdict.decided_at).then(a.key.cmp(&b.key)));
        let journal = Journal::rewrite(&path, ordered)?;
        tracing::info!(path = %path.display(), entries = live.len(), malformed = replay.malformed, "verdict journal replayed");
        Ok(Self {
            entries: live.into_iter().collect(),
            config,
            journal: Some(journal),
            clock,
        })
    }

    pub fn config(&self) -> &CacheConfig {
        &self.config
    }

    pub fn journal_path(&self) -> Option<&Path> {
        self.journal.as_ref().map(|j| j.path())
    }

    pub fn get(&self, url: &UrlRecord) -> Option<Verdict> {
        self.get_key(url.key())
    }

    pub fn get_key(&self, key: &str) -> Option<Verdict> {
        let now = self.clock.now();
        self.entries
            .get(key)
            .filter(|e| e.is_live(now))
            .map(|e| e.verdict.clone())
    }

    /// Stores `verdict` for `url`. Returns `Ok(false)` when a live
    /// `UserFeedback` entry blocks a non-feedback write.
    pub fn put(&self, url: &UrlRecord, verdict: Verdict) -> Result<bool, CacheError> {
        self.put_key(url.key(), verdict)
    }

    pub fn put_key(&self, key: &str, verdict: Verdict) -> Result<bool, CacheError> {
        if verdict.status == VerdictStatus::Pending {
            return Err(CacheError::PendingRejected);
        }
        let now = self.clock.now();
        let entry = CacheEntry {
            key: key.to_string(),
            expires_at: self.config.ttl_for(&verdict).map(|ttl| now + ttl),
            verdict,
        };
        match self.entries.entry(key.to_string()) {
            Entry::Occupied(mut slot) => {
                let existing = slot.get();
                if existing.is_live(now)
                    && existing.verdict.source == VerdictSource::UserFeedback
                    && entry.verdict.source != VerdictSource::UserFeedback
                {
                    return Ok(false);
                }
                // Journal while still holding the shard lock so the on-disk
                // order per key matches the in-memory order.
                self.append(&entry)?;
                slot.insert(entry);
            }
            Entry::Vacant(slot) => {
                self.append(&entry)?;
                slot.insert(entry);
            }
        }
        Ok(true)
    }

    fn append(&self, entry: &CacheEntry) -> io::Result<()> {
        match &self.journal {
            Some(journal) => journal.append(entry),
            None => Ok(()),
        }
    }

    pub fn flush(&self) -> io::Result<()> {
        match &self.journal {
            Some(journal) => journal.flush(),
            None => Ok(()),
        }
    }

    /// Number of live entries.
    pub fn len(&self) -> usize {
        let now = self.clock.now();
        self.entries.iter().filter(|e| e.is_live(now)).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Live entries, in no particular order.
    pub fn entries(&self) -> Vec<CacheEntry> {
        let now = self.clock.now();
        self.entries
            .iter()
            .filter(|e| e.is_live(now))
            .map(|e| e.value().clone())
            .collect()
    }

    /// Drops expired entries from memory.
    pub fn purge_expired(&self) -> usize {
        let now = self.clock.now();
        let before = self.entries.len();
        self.entries.retain(|_, e| e.is_live(now));
        before - self.entries.len()
    }

    pub fn aggregate_stats(&self, window_days: u32) -> StatsReport {
        let window_days = window_days.max(1);
        let now = self.clock.now();
        let since = now - Duration::days(i64::from(window_days));

        let mut unique = 0u64;
        let mut per_brand: HashMap<String, u64> = HashMap::new();
        let mut per_day: BTreeMap<NaiveDate, u64> = BTreeMap::new();
        let mut source_counts: BTreeMap<VerdictSource, u64> = BTreeMap::new();
        for item in self.entries.iter() {
            let entry = item.value();
            let v = &entry.verdict;
            if v.status != VerdictStatus::Phishing || !entry.is_live(now) || v.decided_at <= since {
                continue;
            }
            unique += 1;
            if let Some(brand) = &v.target_brand {
                *per_brand.entry(brand.clone()).or_default() += 1;
            }
            *per_day.entry(v.decided_at.date_naive()).or_default() += 1;
            *source_counts.entry(v.source).or_default() += 1;
        }

        let mut per_brand_counts: Vec<BrandCount> = per_brand
            .into_iter()
            .map(|(brand, count)| BrandCount { brand, count })
            .collect();
        per_brand_counts.sort_by(|a, b| (Reverse(a.count), &a.brand).cmp(&(Reverse(b.count), &b.brand)));

        let total: u64 = source_counts.values().sum();
        let source_distribution = source_counts
            .iter()
            .map(|(s, n)| (*s, *n as f64 / total as f64))
            .collect();

        StatsReport {
            window_days,
            unique_phishing_count: unique,
            per_brand_counts,
            per_day_phishing_counts: per_day,
            source_counts,
            source_distribution,
        }
    }
}
