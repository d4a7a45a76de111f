//! Fast task worker: answers from local state or defers to the slow path.
//!
//! Lookup order for one URL:
//! 1. a live `UserFeedback` cache entry
//! 2. the local blacklist (phishing / `LocalBlacklist`)
//! 3. any other live cache entry
//! 4. enqueue and answer `Pending`
//!
//! Nothing here touches the network or parses pages.

use std::collections::HashMap;
use std::sync::Arc;

use crate::blacklist::BlacklistStore;
use crate::cache::VerdictCache;
use crate::clock::SharedClock;
use crate::model::{DetectBatch, Verdict, VerdictSource};
use crate::par::Exec;
use crate::queue::{EnqueueOutcome, TaskQueue};
use crate::url::{normalize, UrlRecord};

pub const DEFAULT_FTW_WORKERS: usize = 8;

/// Detail on a `Pending` answer whose URL could not be queued.
pub const QUEUE_FULL_DETAIL: &str = "queue_full";
pub const UNPARSEABLE_DETAIL: &str = "unparseable";

#[derive(Debug, Clone, Copy)]
pub struct FtwConfig {
    pub worker_count: usize,
    /// How the lookup phase of a batch is executed.
    pub exec: Exec,
}

impl Default for FtwConfig {
    fn default() -> Self {
        Self {
            worker_count: DEFAULT_FTW_WORKERS,
            exec: Exec::default(),
        }
    }
}

/// What the fast path knows about a URL without enqueueing anything.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Lookup {
    Known(Verdict),
    Unknown,
}

#[derive(Clone)]
pub struct FastTaskWorker {
    blacklist: Arc<BlacklistStore>,
    cache: Arc<VerdictCache>,
    queue: Arc<TaskQueue>,
    clock: SharedClock,
    config: FtwConfig,
}

impl FastTaskWorker {
    pub fn new(
        blacklist: Arc<BlacklistStore>,
        cache: Arc<VerdictCache>,
        queue: Arc<TaskQueue>,
        clock: SharedClock,
        config: FtwConfig,
    ) -> Self {
        assert!(config.worker_count >= 1, "ftw.worker_count must be at least 1");
        Self {
            blacklist,
            cache,
            queue,
            clock,
            config,
        }
    }

    pub fn config(&self) -> &FtwConfig {
        &self.config
    }

    /// Steps 1-3 of the lookup order.
    pub fn lookup(&self, url: &UrlRecord) -> Lookup {
        let cached = self.cache.get(url);
        if let Some(v) = cached.as_ref().filter(|v| v.source == VerdictSource::UserFeedback) {
            return Lookup::Known(v.clone());
        }
        if self.blacklist.contains(url) {
            return Lookup::Known(Verdict::phishing(VerdictSource::LocalBlacklist, self.clock.now()));
        }
        match cached {
            Some(v) => Lookup::Known(v),
            None => Lookup::Unknown,
        }
    }

    pub fn process_one(&self, url: &UrlRecord) -> Verdict {
        match self.lookup(url) {
            Lookup::Known(v) => v,
            Lookup::Unknown => self.defer(url),
        }
    }

    /// Normalizes `raw` first; unparseable input is answered without enqueueing.
    pub fn process_raw(&self, raw: &str) -> Verdict {
        match normalize(raw) {
            Ok(url) => self.process_one(&url),
            Err(_) => self.unparseable(),
        }
    }

    pub fn process_batch(&self, batch: &DetectBatch) -> Vec<Verdict> {
        let urls: Vec<Option<UrlRecord>> = batch.urls.iter().cloned().map(Some).collect();
        self.process_parsed(&urls)
    }

    /// Batch entry point for raw strings, as received over the API.
    pub fn process_raw_batch<S: AsRef<str> + Sync>(&self, raws: &[S]) -> Vec<Verdict> {
        let urls = self.config.exec.map(raws, |r| normalize(r.as_ref()).ok());
        self.process_parsed(&urls)
    }

    fn process_parsed(&self, urls: &[Option<UrlRecord>]) -> Vec<Verdict> {
        // Lookups are read-only and may fan out; enqueueing stays in
        // submission order so FIFO order follows the batch.
        let lookups = self.config.exec.map(urls, |u| u.as_ref().map(|u| self.lookup(u)));
        let mut decided: HashMap<&str, Verdict> = HashMap::new();
        urls.iter()
            .zip(lookups)
            .map(|(url, lookup)| match (url, lookup) {
                (Some(url), Some(lookup)) => {
                    if let Some(v) = decided.get(url.key()) {
                        return v.clone();
                    }
                    let verdict = match lookup {
                        Lookup::Known(v) => v,
                        Lookup::Unknown => self.defer(url),
                    };
                    decided.insert(url.key(), verdict.clone());
                    verdict
                }
                _ => self.unparseable(),
            })
            .collect()
    }

    fn defer(&self, url: &UrlRecord) -> Verdict {
        let now = self.clock.now();
        match self.queue.enqueue(url) {
            EnqueueOutcome::Enqueued | EnqueueOutcome::AlreadyTracked => Verdict::pending(now),
            EnqueueOutcome::Full => {
                tracing::warn!(url = %url, "slow task queue full, url not tracked");
                Verdict::pending(now).with_detail(QUEUE_FULL_DETAIL)
            }
        }
    }

    fn unparseable(&self) -> Verdict {
        Verdict::error(VerdictSource::None, UNPARSEABLE_DETAIL, self.clock.now())
    }
}
