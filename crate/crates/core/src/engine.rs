//! Wires the stores, queue and workers together from an [`AppConfig`].
//!
//! Construction order: KB, blacklist (initial load), cache (journal replay),
//! queue (journal recovery), fast and slow workers. Nothing runs in the
//! background until [`Engine::start`]. [`Engine::shutdown`] closes the queue,
//! lets the slow workers finish what they hold, and flushes both journals.

use std::sync::Arc;
use std::time::Duration;

use parking_lot::Mutex;
use serde::Serialize;

use crate::blacklist::{BlacklistStore, FileFeed, SyncHandle};
use crate::cache::{CacheConfig, VerdictCache};
use crate::clock::{self, SharedClock};
use crate::config::{AppConfig, ConfigError, CrawlerBackend, OnlineMode};
use crate::crawler::{CorpusFetcher, FetchLimits, Fetcher, HttpFetcher};
use crate::ftw::{FastTaskWorker, FtwConfig};
use crate::online::{MockOnlineBlacklist, NoOnlineBlacklist, OnlineBlacklistClient};
use crate::par::Exec;
use crate::queue::{QueueConfig, Recovery, TaskQueue};
use crate::rbpd::{BrandKb, RbpdDetector, ReferenceDetector};
use crate::stw::{CompletionHook, SlowTaskWorker, StwConfig, StwPool};

#[derive(Debug, thiserror::Error)]
pub enum BootError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{key}: {source}")]
    Component {
        key: &'static str,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

impl BootError {
    pub fn key(&self) -> Option<&str> {
        match self {
            BootError::Config(e) => e.key(),
            BootError::Component { key, .. } => Some(key),
        }
    }

    fn at(key: &'static str) -> impl FnOnce(Box<dyn std::error::Error + Send + Sync>) -> Self {
        move |source| BootError::Component { key, source }
    }
}

/// Replacements for components that would otherwise be built from config.
#[derive(Default)]
pub struct Overrides {
    pub clock: Option<SharedClock>,
    pub fetcher: Option<Arc<dyn Fetcher>>,
    pub online: Option<Arc<dyn OnlineBlacklistClient>>,
    pub detector: Option<Arc<dyn RbpdDetector>>,
    pub kb: Option<Arc<BrandKb>>,
    pub hook: Option<CompletionHook>,
    pub exec: Option<Exec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WorkerCounts {
    pub ftw: usize,
    pub stw: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Health {
    pub queue_depth: usize,
    pub blacklist_version: u64,
    pub cache_size: usize,
    pub workers: WorkerCounts,
}

pub struct Engine {
    config: AppConfig,
    clock: SharedClock,
    kb: Arc<BrandKb>,
    blacklist: Arc<BlacklistStore>,
    cache: Arc<VerdictCache>,
    queue: Arc<TaskQueue>,
    ftw: FastTaskWorker,
    stw: Arc<SlowTaskWorker>,
    recovery: Recovery,
    pool: Mutex<Option<StwPool>>,
    sync: Mutex<Option<SyncHandle>>,
}

fn boxed<E: std::error::Error + Send + Sync + 'static>(e: E) -> Box<dyn std::error::Error + Send + Sync> {
    Box::new(e)
}

impl Engine {
    pub fn build(config: AppConfig) -> Result<Self, BootError> {
        Self::build_with(config, Overrides::default())
    }

    pub fn build_with(config: AppConfig, overrides: Overrides) -> Result<Self, BootError> {
        config.check_inputs()?;
        let clock = overrides.clock.unwrap_or_else(clock::system);

        let kb = match (overrides.kb, &config.rbpd_kb_path) {
            (Some(kb), _) => kb,
            (None, Some(path)) => Arc::new(
                BrandKb::load(path)
                    .map_err(boxed)
                    .map_err(BootError::at("rbpd.kb_path"))?,
            ),
            (None, None) => Arc::new(BrandKb::bundled()),
        };

        let blacklist = Arc::new(BlacklistStore::new(clock.clone()));
        if let Some(path) = &config.blacklist_feed_path {
            blacklist
                .load_path(path)
                .map_err(boxed)
                .map_err(BootError::at("blacklist.feed_path"))?;
        }

        let cache = Arc::new(
            VerdictCache::open(
                CacheConfig {
                    ttl_verdict: chrono::Duration::from_std(config.cache_ttl_rbpd).unwrap_or(chrono::Duration::MAX),
                    ttl_error: chrono::Duration::from_std(config.cache_ttl_error).unwrap_or(chrono::Duration::MAX),
                    journal_path: config.cache_journal_path.clone(),
                },
                clock.clone(),
            )
            .map_err(boxed)
            .map_err(BootError::at("cache.journal_path"))?,
        );

        let (queue, recovery) = TaskQueue::open(
            QueueConfig {
                capacity: config.queue_capacity,
                max_attempts: config.queue_max_attempts,
                journal_path: config.queue_journal_path.clone(),
            },
            clock.clone(),
        )
        .map_err(boxed)
        .map_err(BootError::at("queue.journal_path"))?;
        let queue = Arc::new(queue);

        let fetcher: Arc<dyn Fetcher> = match overrides.fetcher {
            Some(f) => f,
            None => match config.crawler_backend {
                CrawlerBackend::Corpus => {
                    let path = config.crawler_corpus_path.as_ref().expect("validated");
                    Arc::new(
                        CorpusFetcher::load(path)
                            .map_err(boxed)
                            .map_err(BootError::at("crawler.corpus_path"))?,
                    )
                }
                CrawlerBackend::Http => Arc::new(
                    HttpFetcher::new()
                        .map_err(boxed)
                        .map_err(BootError::at("crawler.backend"))?,
                ),
            },
        };

        let online: Arc<dyn OnlineBlacklistClient> = match overrides.online {
            Some(o) => o,
            None => match config.online_mode {
                OnlineMode::None => Arc::new(NoOnlineBlacklist),
                OnlineMode::Mock => {
                    let path = config.online_mock_path.as_ref().expect("validated");
                    Arc::new(
                        MockOnlineBlacklist::load(path)
                            .map_err(boxed)
                            .map_err(BootError::at("online_blacklist.mock_path"))?,
                    )
                }
            },
        };

        let detector: Arc<dyn RbpdDetector> = overrides
            .detector
            .unwrap_or_else(|| Arc::new(ReferenceDetector::new(kb.clone())));

        let ftw = FastTaskWorker::new(
            blacklist.clone(),
            cache.clone(),
            queue.clone(),
            clock.clone(),
            FtwConfig {
                worker_count: config.ftw_worker_count,
                exec: overrides.exec.unwrap_or_default(),
            },
        );
        let mut stw = SlowTaskWorker::new(
            queue.clone(),
            cache.clone(),
            fetcher,
            online,
            detector,
            clock.clone(),
            FetchLimits {
                timeout: config.crawler_timeout,
                max_bytes: config.crawler_max_bytes,
            },
        );
        if let Some(hook) = overrides.hook {
            stw = stw.with_hook(hook);
        }
        let stw = Arc::new(stw);
        for task in &recovery.exhausted {
            stw.abandon(task);
        }

        Ok(Self {
            config,
            clock,
            kb,
            blacklist,
            cache,
            queue,
            ftw,
            stw,
            recovery,
            pool: Mutex::new(None),
            sync: Mutex::new(None),
        })
    }

    /// Launches the slow worker pool and, if a feed is configured, the
    /// blacklist sync loop. Idempotent.
    pub fn start(&self) {
        let mut pool = self.pool.lock();
        if pool.is_none() {
            *pool = Some(self.stw.run_pool(StwConfig {
                worker_count: self.config.stw_worker_count,
                fetch: FetchLimits {
                    timeout: self.config.crawler_timeout,
                    max_bytes: self.config.crawler_max_bytes,
                },
                dequeue_timeout: self.config.stw_dequeue_timeout,
            }));
        }
        let mut sync = self.sync.lock();
        if sync.is_none() {
            if let Some(path) = &self.config.blacklist_feed_path {
                *sync = Some(
                    self.blacklist
                        .spawn_sync(Arc::new(FileFeed::new(path)), self.config.blacklist_sync_interval),
                );
            }
        }
    }

    pub fn is_running(&self) -> bool {
        self.pool.lock().is_some()
    }

    /// Waits for the queue to empty. Returns false on timeout.
    pub fn wait_idle(&self, timeout: Duration) -> bool {
        let deadline = std::time::Instant::now() + timeout;
        while !self.queue.is_idle() {
            if std::time::Instant::now() >= deadline {
                return false;
            }
            std::thread::sleep(Duration::from_millis(2));
        }
        true
    }

    pub fn shutdown(&self) {
        self.queue.close();
        if let Some(sync) = self.sync.lock().take() {
            sync.stop();
        }
        if let Some(pool) = self.pool.lock().take() {
            pool.stop();
        }
        if let Err(err) = self.queue.flush() {
            tracing::error!(%err, "flushing queue journal");
        }
        if let Err(err) = self.cache.flush() {
            tracing::error!(%err, "flushing verdict journal");
        }
    }

    pub fn health(&self) -> Health {
        Health {
            queue_depth: self.queue.depth(),
            blacklist_version: self.blacklist.version(),
            cache_size: self.cache.len(),
            workers: WorkerCounts {
                ftw: self.config.ftw_worker_count,
                stw: self.config.stw_worker_count,
            },
        }
    }

    pub fn config(&self) -> &AppConfig {
        &self.config
    }

    pub fn clock(&self) -> &SharedClock {
        &self.clock
    }

    pub fn kb(&self) -> &Arc<BrandKb> {
        &self.kb
    }

    pub fn blacklist(&self) -> &Arc<BlacklistStore> {
        &self.blacklist
    }

    pub fn cache(&self) -> &Arc<VerdictCache> {
        &self.cache
    }

    pub fn queue(&self) -> &Arc<TaskQueue> {
        &self.queue
    }

    pub fn ftw(&self) -> &FastTaskWorker {
        &self.ftw
    }

    pub fn stw(&self) -> &Arc<SlowTaskWorker> {
        &self.stw
    }

    /// What the queue journal held when the engine was built.
    pub fn recovery(&self) -> &Recovery {
        &self.recovery
    }
}

impl Drop for Engine {
    fn drop(&mut self) {
        self.shutdown();
    }
}
