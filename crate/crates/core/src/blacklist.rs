//! Local blacklist: an immutable snapshot of normalized URLs swapped
//! atomically on every feed reload.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use arc_swap::ArcSwap;
use chrono::{DateTime, Utc};

use crate::clock::{self, SharedClock};
use crate::url::{normalize, UrlRecord};

#[derive(Debug, Clone)]
pub struct BlacklistSnapshot {
    pub entries: HashSet<String>,
    pub version: u64,
    pub loaded_at: DateTime<Utc>,
    pub feed_name: String,
    /// Lines that were not comments but failed to normalize.
    pub skipped_count: usize,
}

impl BlacklistSnapshot {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Where feed contents come from.
pub trait FeedSource: Send + Sync {
    fn name(&self) -> String;
    fn open(&self) -> io::Result<Box<dyn BufRead + Send>>;
}

/// Newline-delimited URL file on disk.
#[derive(Debug, Clone)]
pub struct FileFeed {
    path: PathBuf,
}

impl FileFeed {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl FeedSource for FileFeed {
    fn name(&self) -> String {
        self.path.display().to_string()
    }

    fn open(&self) -> io::Result<Box<dyn BufRead + Send>> {
        Ok(Box::new(BufReader::new(File::open(&self.path)?)))
    }
}

/// In-memory feed, handy for seeding and tests.
#[derive(Debug, Clone, Default)]
pub struct StaticFeed {
    pub name: String,
    pub lines: Vec<String>,
}

impl StaticFeed {
    pub fn new<I, S>(name: &str, lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            name: name.to_string(),
            lines: lines.into_iter().map(Into::into).collect(),
        }
    }
}

impl FeedSource for StaticFeed {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn open(&self) -> io::Result<Box<dyn BufRead + Send>> {
        Ok(Box::new(io::Cursor::new(self.lines.join("\n").into_bytes())))
    }
}

pub struct BlacklistStore {
    current: ArcSwap<BlacklistSnapshot>,
    next_version: AtomicU64,
    // Serializes version assignment with the swap so versions never go backwards.
    writer: parking_lot::Mutex<()>,
    clock: SharedClock,
}

impl Default for BlacklistStore {
    fn default() -> Self {
        Self::new(clock::system())
    }
}

impl BlacklistStore {
    /// An empty store at version 0.
    pub fn new(clock: SharedClock) -> Self {
        let empty = BlacklistSnapshot {
            entries: HashSet::new(),
            version: 0,
            loaded_at: clock.now(),
            feed_name: String::new(),
            skipped_count: 0,
        };
        Self {
            current: ArcSwap::from_pointee(empty),
            next_version: AtomicU64::new(1),
            writer: parking_lot::Mutex::new(()),
            clock,
        }
    }

    pub fn snapshot(&self) -> Arc<BlacklistSnapshot> {
        self.current.load_full()
    }

    pub fn version(&self) -> u64 {
        self.current.load().version
    }

    pub fn contains(&self, url: &UrlRecord) -> bool {
        self.current.load().entries.contains(url.key())
    }

    /// Reads the whole feed, then swaps it in. On I/O failure the previous
    /// snapshot stays in place.
    pub fn load_feed(&self, source: &dyn FeedSource) -> io::Result<Arc<BlacklistSnapshot>> {
        let reader = source.open()?;
        self.load_reader(&source.name(), reader)
    }

    pub fn load_path(&self, path: impl AsRef<Path>) -> io::Result<Arc<BlacklistSnapshot>> {
        self.load_feed(&FileFeed::new(path.as_ref()))
    }

    pub fn load_reader(&self, feed_name: &str, reader: impl BufRead) -> io::Result<Arc<BlacklistSnapshot>> {
        let mut entries = HashSet::new();
        let mut skipped_count = 0;
        for line in reader.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match normalize(line) {
                Ok(rec) => {
                    entries.insert(rec.normalized);
                }
                Err(_) => skipped_count += 1,
            }
        }
        if skipped_count > 0 {
            tracing::warn!(feed = feed_name, skipped_count, "skipped unparseable blacklist lines");
        }
        let _guard = self.writer.lock();
        let snapshot = Arc::new(BlacklistSnapshot {
            entries,
            version: self.next_version.fetch_add(1, Ordering::SeqCst),
            loaded_at: self.clock.now(),
            feed_name: feed_name.to_string(),
            skipped_count,
        });
        self.current.store(Arc::clone(&snapshot));
        Ok(snapshot)
    }

    /// Reloads `source` every `interval` on a background thread until the
    /// returned handle is stopped or dropped.
    pub fn spawn_sync(self: &Arc<Self>, source: Arc<dyn FeedSource>, interval: Duration) -> SyncHandle {
        assert!(!interval.is_zero(), "sync interval must be positive");
        let stop = Arc::new(AtomicBool::new(false));
        let store = Arc::clone(self);
        let flag = Arc::clone(&stop);
        let handle = thread::Builder::new()
            .name("blacklist-sync".into())
            .spawn(move || {
                let tick = Duration::from_millis(20).min(interval);
                'outer: loop {
                    let mut waited = Duration::ZERO;
                    while waited < interval {
                        if flag.load(Ordering::Relaxed) {
                            break 'outer;
                        }
                        let step = tick.min(interval - waited);
                        thread::sleep(step);
                        waited += step;
                    }
                    match store.load_feed(source.as_ref()) {
                        Ok(snap) => tracing::debug!(version = snap.version, entries = snap.len(), "blacklist synced"),
                        Err(err) => tracing::warn!(feed = %source.name(), %err, "blacklist sync failed, keeping previous snapshot"),
                    }
                }
            })
            .expect("spawn blacklist sync thread");
        SyncHandle {
            stop,
            handle: Some(handle),
        }
    }
}

pub struct SyncHandle {
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl SyncHandle {
    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for SyncHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}
