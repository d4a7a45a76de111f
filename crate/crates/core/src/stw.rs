//! Slow task worker: online blacklist, crawl, brand analysis, write-back.

use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crate::cache::VerdictCache;
use crate::clock::SharedClock;
use crate::crawler::{FetchLimits, FetchOutcome, Fetcher};
use crate::model::{Verdict, VerdictSource};
use crate::online::{OnlineBlacklistClient, OnlineCheck};
use crate::queue::{DetectionTask, RequeueOutcome, TaskQueue};
use crate::rbpd::RbpdDetector;
use crate::url::UrlRecord;

pub const DEFAULT_STW_WORKERS: usize = 4;
pub const DEFAULT_DEQUEUE_TIMEOUT: Duration = Duration::from_millis(100);
pub const EXHAUSTED_DETAIL: &str = "retries_exhausted";

#[derive(Debug, Clone, Copy)]
pub struct StwConfig {
    pub worker_count: usize,
    pub fetch: FetchLimits,
    /// How long an idle worker blocks before re-checking for stop.
    pub dequeue_timeout: Duration,
}

impl Default for StwConfig {
    fn default() -> Self {
        Self {
            worker_count: DEFAULT_STW_WORKERS,
            fetch: FetchLimits::default(),
            dequeue_timeout: DEFAULT_DEQUEUE_TIMEOUT,
        }
    }
}

/// Called once per finished task, after the cache write and `complete`.
pub type CompletionHook = Arc<dyn Fn(&DetectionTask, &Verdict) + Send + Sync>;

pub struct SlowTaskWorker {
    queue: Arc<TaskQueue>,
    cache: Arc<VerdictCache>,
    fetcher: Arc<dyn Fetcher>,
    online: Arc<dyn OnlineBlacklistClient>,
    detector: Arc<dyn RbpdDetector>,
    clock: SharedClock,
    limits: FetchLimits,
    hook: Option<CompletionHook>,
}

impl SlowTaskWorker {
    pub fn new(
        queue: Arc<TaskQueue>,
        cache: Arc<VerdictCache>,
        fetcher: Arc<dyn Fetcher>,
        online: Arc<dyn OnlineBlacklistClient>,
        detector: Arc<dyn RbpdDetector>,
        clock: SharedClock,
        limits: FetchLimits,
    ) -> Self {
        Self {
            queue,
            cache,
            fetcher,
            online,
            detector,
            clock,
            limits,
            hook: None,
        }
    }

    pub fn with_hook(mut self, hook: CompletionHook) -> Self {
        self.hook = Some(hook);
        self
    }

    /// The verdict pipeline on its own: no cache, no queue.
    pub fn analyze(&self, url: &UrlRecord) -> Verdict {
        match self.online.check(url) {
            OnlineCheck::Listed => return Verdict::phishing(VerdictSource::OnlineBlacklist, self.clock.now()),
            OnlineCheck::Unavailable => {
                tracing::warn!(url = %url, "online blacklist unavailable, treating as not listed")
            }
            OnlineCheck::NotListed => {}
        }
        match self.fetcher.fetch(url, self.limits) {
            FetchOutcome::Error(err) => Verdict::error(VerdictSource::None, err.to_string(), self.clock.now()),
            FetchOutcome::Content(content) => self.detector.analyze(&content.url, &content),
        }
    }

    /// Runs one dequeued task to completion: verdict, cache write, then
    /// `complete`. Never panics on pipeline failures; those become `Error`
    /// verdicts.
    pub fn process_task(&self, task: &DetectionTask) -> Verdict {
        let verdict = self.analyze(&task.url);
        self.finish(task, verdict)
    }

    fn finish(&self, task: &DetectionTask, verdict: Verdict) -> Verdict {
        match self.cache.put(&task.url, verdict.clone()) {
            Ok(true) => {}
            Ok(false) => tracing::debug!(url = %task.url, "user feedback entry kept"),
            Err(err) => tracing::error!(url = %task.url, %err, "verdict write failed"),
        }
        if let Err(err) = self.queue.complete(task) {
            tracing::error!(%err, "completing task");
        }
        if let Some(hook) = &self.hook {
            hook(task, &verdict);
        }
        verdict
    }

    /// Handles a task whose processing panicked.
    fn recover(&self, task: &DetectionTask) {
        match self.queue.requeue(task) {
            Ok(RequeueOutcome::Requeued { attempt }) => {
                tracing::warn!(url = %task.url, attempt, "task panicked, requeued")
            }
            Ok(RequeueOutcome::Dropped) => {
                tracing::error!(url = %task.url, "task panicked on its last attempt");
                let v = Verdict::error(VerdictSource::None, EXHAUSTED_DETAIL, self.clock.now());
                if let Err(err) = self.cache.put(&task.url, v.clone()) {
                    tracing::error!(url = %task.url, %err, "verdict write failed");
                }
                if let Some(hook) = &self.hook {
                    hook(task, &v);
                }
            }
            Err(err) => tracing::error!(%err, "requeue after panic"),
        }
    }

    /// Caches an `Error` verdict for a task that will not be retried, such
    /// as one recovered from a journal after its last attempt.
    pub fn abandon(&self, task: &DetectionTask) {
        let v = Verdict::error(VerdictSource::None, EXHAUSTED_DETAIL, self.clock.now());
        if let Err(err) = self.cache.put(&task.url, v) {
            tracing::error!(url = %task.url, %err, "verdict write failed");
        }
    }

    pub fn run_pool(self: &Arc<Self>, config: StwConfig) -> StwPool {
        assert!(config.worker_count >= 1, "stw.worker_count must be at least 1");
        let stop = Arc::new(AtomicBool::new(false));
        let busy = Arc::new(AtomicUsize::new(0));
        let panics = Arc::new(AtomicUsize::new(0));
        let handles = (0..config.worker_count)
            .map(|i| {
                let worker = Arc::clone(self);
                let stop = Arc::clone(&stop);
                let busy = Arc::clone(&busy);
                let panics = Arc::clone(&panics);
                thread::Builder::new()
                    .name(format!("stw-{i}"))
                    .spawn(move || worker.run_loop(&stop, &busy, &panics, config.dequeue_timeout))
                    .expect("spawn stw thread")
            })
            .collect();
        StwPool {
            queue: Arc::clone(&self.queue),
            stop,
            busy,
            panics,
            handles,
            worker_count: config.worker_count,
        }
    }

    fn run_loop(&self, stop: &AtomicBool, busy: &AtomicUsize, panics: &AtomicUsize, timeout: Duration) {
        while !stop.load(Ordering::SeqCst) {
            let Some(task) = self.queue.dequeue(timeout) else {
                continue;
            };
            busy.fetch_add(1, Ordering::SeqCst);
            let outcome = panic::catch_unwind(AssertUnwindSafe(|| self.analyze(&task.url)));
            match outcome {
                Ok(verdict) => {
                    self.finish(&task, verdict);
                }
                Err(_) => {
                    panics.fetch_add(1, Ordering::SeqCst);
                    self.recover(&task);
                }
            }
            busy.fetch_sub(1, Ordering::SeqCst);
        }
    }
}

pub struct StwPool {
    queue: Arc<TaskQueue>,
    stop: Arc<AtomicBool>,
    busy: Arc<AtomicUsize>,
    panics: Arc<AtomicUsize>,
    handles: Vec<JoinHandle<()>>,
    worker_count: usize,
}

impl StwPool {
    pub fn worker_count(&self) -> usize {
        self.worker_count
    }

    /// Workers currently processing a task.
    pub fn busy(&self) -> usize {
        self.busy.load(Ordering::SeqCst)
    }

    pub fn panics(&self) -> usize {
        self.panics.load(Ordering::SeqCst)
    }

    /// Blocks until the queue has nothing queued or in flight, or `timeout`
    /// passes. Returns whether the queue drained.
    pub fn wait_idle(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        while !self.queue.is_idle() {
            if Instant::now() >= deadline {
                return false;
            }
            thread::sleep(Duration::from_millis(2));
        }
        true
    }

    /// Stops taking new tasks, lets in-flight ones finish, and joins.
    /// Queued tasks stay in the queue.
    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        self.queue.wake_all();
        for handle in self.handles.drain(..) {
            let _ = handle.join();
        }
    }
}

impl Drop for StwPool {
    fn drop(&mut self) {
        self.shutdown();
    }
}
