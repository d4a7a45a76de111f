//! Slow task queue: a bounded FIFO that refuses to hold the same normalized
//! URL twice, whether it is waiting or already being worked on.
//!
//! With a journal configured, every transition is appended to disk so a
//! restarted process can pick up tasks that were queued or in flight when
//! the previous one died.

use std::collections::{HashMap, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use parking_lot::{Condvar, Mutex};

use crate::clock::{self, SharedClock};
use crate::url::{normalize, UrlRecord};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionTask {
    pub url: UrlRecord,
    pub enqueued_at: DateTime<Utc>,
    pub attempt: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Enqueued,
    AlreadyTracked,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequeueOutcome {
    Requeued {
        attempt: u32,
    },
    /// Attempt budget spent (or no room); the URL is no longer tracked.
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueueError {
    #[error("task for {0} is not in flight")]
    UnknownTask(String),
}

#[derive(Debug, Clone)]
pub struct QueueConfig {
    pub capacity: usize,
    pub max_attempts: u32,
    pub journal_path: Option<PathBuf>,
}

impl Default for QueueConfig {
    fn default() -> Self {
        Self {
            capacity: 10_000,
            max_attempts: 3,
            journal_path: None,
        }
    }
}

/// Where a tracked URL currently is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackedState {
    pub enqueued_at: DateTime<Utc>,
    pub in_flight: bool,
}

#[derive(Default)]
struct State {
    queued: VecDeque<DetectionTask>,
    tracked: HashMap<String, TrackedState>,
    closed: bool,
}

pub struct TaskQueue {
    state: Mutex<State>,
    available: Condvar,
    config: QueueConfig,
    journal: Option<Mutex<File>>,
    clock: SharedClock,
}

/// What [`TaskQueue::open`] did with the previous process's leftovers.
#[derive(Debug, Default, Clone)]
pub struct Recovery {
    pub requeued: Vec<DetectionTask>,
    /// In-flight tasks that had already used their last attempt.
    pub exhausted: Vec<DetectionTask>,
}

impl Default for TaskQueue {
    fn default() -> Self {
        Self::new(QueueConfig::default(), clock::system())
    }
}

impl TaskQueue {
    /// A purely in-memory queue (any journal path is ignored).
    pub fn new(config: QueueConfig, clock: SharedClock) -> Self {
        assert!(config.capacity >= 1, "queue capacity must be at least 1");
        Self {
            state: Mutex::new(State::default()),
            available: Condvar::new(),
            config: QueueConfig {
                journal_path: None,
                ..config
            },
            journal: None,
            clock,
        }
    }

    /// Opens a journaled queue, recovering unfinished tasks from a previous run.
    ///
    /// Tasks that were only queued come back with the same attempt number;
    /// tasks that were in flight come back with `attempt + 1`, unless that
    /// would exceed `max_attempts`, in which case they are reported in
    /// [`Recovery::exhausted`] and not re-queued.
    pub fn open(config: QueueConfig, clock: SharedClock) -> io::Result<(Self, Recovery)> {
        let Some(path) = config.journal_path.clone() else {
            return Ok((Self::new(config, clock), Recovery::default()));
        };
        let leftovers = replay_journal(&path)?;
        let mut recovery = Recovery::default();
        let mut state = State::default();
        for (task, in_flight) in leftovers {
            let task = if in_flight {
                DetectionTask {
                    attempt: task.attempt + 1,
                    ..task
                }
            } else {
                task
            };
            if task.attempt > config.max_attempts {
                recovery.exhausted.push(task);
                continue;
            }
            if state.queued.len() >= config.capacity {
                tracing::warn!(url = %task.url, "queue full during recovery, dropping task");
                continue;
            }
            state.tracked.insert(
                task.url.normalized.clone(),
                TrackedState {
                    enqueued_at: task.enqueued_at,
                    in_flight: false,
                },
            );
            state.queued.push_back(task.clone());
            recovery.requeued.push(task);
        }

        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension("compact");
        {
            let mut out = io::BufWriter::new(File::create(&tmp)?);
            for task in &state.queued {
                writeln!(out, "{}", enqueue_record(task))?;
            }
            out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        let file = OpenOptions::new().append(true).open(&path)?;
        if !recovery.requeued.is_empty() || !recovery.exhausted.is_empty() {
            tracing::info!(
                requeued = recovery.requeued.len(),
                exhausted = recovery.exhausted.len(),
                "recovered slow tasks from journal"
            );
        }

        Ok((
            Self {
                state: Mutex::new(state),
                available: Condvar::new(),
                config,
                journal: Some(Mutex::new(file)),
                clock,
            },
            recovery,
        ))
    }

    pub fn config(&self) -> &QueueConfig {
        &self.config
    }

    fn log(&self, record: String) {
        if let Some(journal) = &self.journal {
            let mut file = journal.lock();
            if let Err(err) = file.write_all(format!("{record}\n").as_bytes()) {
                tracing::error!(%err, "queue journal write failed");
            }
        }
    }

    pub fn enqueue(&self, url: &UrlRecord) -> EnqueueOutcome {
        let mut state = self.state.lock();
        if state.tracked.contains_key(url.key()) {
            return EnqueueOutcome::AlreadyTracked;
        }
        if state.closed || state.queued.len() >= self.config.capacity {
            return EnqueueOutcome::Full;
        }
        let task = DetectionTask {
            url: url.clone(),
            enqueued_at: self.clock.now(),
            attempt: 1,
        };
        self.log(enqueue_record(&task));
        state.tracked.insert(
            url.normalized.clone(),
            TrackedState {
                enqueued_at: task.enqueued_at,
                in_flight: false,
            },
        );
        state.queued.push_back(task);
        drop(state);
        self.available.notify_one();
        EnqueueOutcome::Enqueued
    }

    /// Takes the oldest task, waiting up to `timeout`. The task stays tracked
    /// (blocking re-enqueue) until [`TaskQueue::complete`].
    pub fn dequeue(&self, timeout: Duration) -> Option<DetectionTask> {
        let deadline = Instant::now() + timeout;
        let mut state = self.state.lock();
        loop {
            if let Some(task) = state.queued.pop_front() {
                if let Some(t) = state.tracked.get_mut(task.url.key()) {
                    t.in_flight = true;
                }
                self.log(format!("D\t{}", task.url.normalized));
                return Some(task);
            }
            if self.available.wait_until(&mut state, deadline).timed_out() && state.queued.is_empty() {
                return None;
            }
        }
    }

    pub fn complete(&self, task: &DetectionTask) -> Result<(), QueueError> {
        let mut state = self.state.lock();
        match state.tracked.get(task.url.key()) {
            Some(t) if t.in_flight => {
                state.tracked.remove(task.url.key());
                self.log(format!("C\t{}", task.url.normalized));
                Ok(())
            }
            _ => Err(QueueError::UnknownTask(task.url.normalized.clone())),
        }
    }

    /// Puts an in-flight task back with `attempt + 1` after a worker failure.
    pub fn requeue(&self, task: &DetectionTask) -> Result<RequeueOutcome, QueueError> {
        let mut state = self.state.lock();
        match state.tracked.get(task.url.key()) {
            Some(t) if t.in_flight => {}
            _ => return Err(QueueError::UnknownTask(task.url.normalized.clone())),
        }
        let attempt = task.attempt + 1;
        if attempt > self.config.max_attempts || state.queued.len() >= self.config.capacity {
            state.tracked.remove(task.url.key());
            self.log(format!("C\t{}", task.url.normalized));
            return Ok(RequeueOutcome::Dropped);
        }
        let retry = DetectionTask {
            attempt,
            ..task.clone()
        };
        self.log(format!("R\t{}\t{}", attempt, task.url.normalized));
        if let Some(t) = state.tracked.get_mut(task.url.key()) {
            t.in_flight = false;
        }
        state.queued.push_back(retry);
        drop(state);
        self.available.notify_one();
        Ok(RequeueOutcome::Requeued { attempt })
    }

    /// Refuses further enqueues (they report `Full`). Dequeue, complete and
    /// requeue keep working so in-flight work can finish.
    pub fn close(&self) {
        self.state.lock().closed = true;
    }

    pub fn is_closed(&self) -> bool {
        self.state.lock().closed
    }

    /// Wakes every blocked consumer (used on shutdown).
    pub fn wake_all(&self) {
        self.available.notify_all();
    }

    pub fn depth(&self) -> usize {
        self.state.lock().queued.len()
    }

    pub fn in_flight(&self) -> usize {
        self.state.lock().tracked.values().filter(|t| t.in_flight).count()
    }

    /// Nothing queued and nothing in flight.
    pub fn is_idle(&self) -> bool {
        self.state.lock().tracked.is_empty()
    }

    pub fn tracked(&self, url: &UrlRecord) -> Option<TrackedState> {
        self.state.lock().tracked.get(url.key()).copied()
    }

    /// Snapshot of queued (not in-flight) tasks, oldest first.
    pub fn queued_tasks(&self) -> Vec<DetectionTask> {
        self.state.lock().queued.iter().cloned().collect()
    }

    pub fn flush(&self) -> io::Result<()> {
        match &self.journal {
            Some(file) => file.lock().sync_data(),
            None => Ok(()),
        }
    }
}

fn enqueue_record(task: &DetectionTask) -> String {
    format!(
        "E\t{}\t{}\t{}",
        task.attempt,
        task.enqueued_at.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true),
        task.url.normalized
    )
}

/// Replays the journal into unfinished tasks, oldest enqueue first. The
/// flag says whether the task was in flight.
fn replay_journal(path: &Path) -> io::Result<Vec<(DetectionTask, bool)>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut seq = 0u64;
    let mut live: HashMap<String, (u64, DetectionTask, bool)> = HashMap::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            ["E", attempt, at, url] => {
                let (Ok(attempt), Ok(at), Ok(url)) =
                    (attempt.parse::<u32>(), DateTime::parse_from_rfc3339(at), normalize(url))
                else {
                    tracing::warn!(line, "skipping malformed queue journal record");
                    continue;
                };
                seq += 1;
                let task = DetectionTask {
                    url,
                    enqueued_at: at.with_timezone(&Utc),
                    attempt,
                };
                live.insert(task.url.normalized.clone(), (seq, task, false));
            }
            ["D", url] => {
                if let Some(entry) = live.get_mut(*url) {
                    entry.2 = true;
                }
            }
            ["R", attempt, url] => {
                if let (Some(entry), Ok(attempt)) = (live.get_mut(*url), attempt.parse::<u32>()) {
                    seq += 1;
                    entry.0 = seq;
                    entry.1.attempt = attempt;
                    entry.2 = false;
                }
            }
            ["C", url] => {
                live.remove(*url);
            }
            _ if line.trim().is_empty() => {}
            _ => tracing::warn!(line, "skipping malformed queue journal record"),
        }
    }
    let mut tasks: Vec<_> = live.into_values().collect();
    tasks.sort_by_key(|(seq, _, _)| *seq);
    Ok(tasks
        .into_iter()
        .map(|(_, task, in_flight)| (task, in_flight))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn url(s: &str) -> UrlRecord {
        normalize(s).unwrap()
    }

    fn queue(capacity: usize) -> TaskQueue {
        TaskQueue::new(
            QueueConfig {
                capacity,
                ..QueueConfig::default()
            },
            clock::system(),
        )
    }

    #[test]
    fn closed_queue_refuses_new_work() {
        let q = queue(10);
        q.enqueue(&url("https://a.tld"));
        let task = q.dequeue(Duration::from_millis(10)).unwrap();
        q.close();
        assert_eq!(q.enqueue(&url("https://b.tld")), EnqueueOutcome::Full);
        q.complete(&task).unwrap();
        assert!(q.is_idle());
    }

    #[test]
    fn enqueue_and_dedup() {
        let q = queue(10);
        assert_eq!(q.enqueue(&url("https://a.tld")), EnqueueOutcome::Enqueued);
        assert_eq!(q.depth(), 1);
        assert_eq!(q.enqueue(&url("HTTPS://A.TLD/")), EnqueueOutcome::AlreadyTracked);
        assert_eq!(q.depth(), 1);
    }

    #[test]
    fn bounded() {
        let q = queue(2);
        assert_eq!(q.enqueue(&url("https://a.tld")), EnqueueOutcome::Enqueued);
        assert_eq!(q.enqueue(&url("https://b.tld")), EnqueueOutcome::Enqueued);
        assert_eq!(q.enqueue(&url("https://c.tld")), EnqueueOutcome::Full);
        assert!(q.tracked(&url("https://c.tld")).is_none());
    }

    #[test]
    fn fifo() {
        let q = queue(10);
        q.enqueue(&url("https://a.tld"));
        q.enqueue(&url("https://b.tld"));
        let t = Duration::from_millis(5);
        assert_eq!(q.dequeue(t).unwrap().url.host, "a.tld");
        assert_eq!(q.dequeue(t).unwrap().url.host, "b.tld");
    }

    #[test]
    fn dequeue_times_out() {
        let q = queue(10);
        let start = Instant::now();
        assert!(q.dequeue(Duration::from_millis(10)).is_none());
        assert!(start.elapsed() >= Duration::from_millis(10));
    }

    #[test]
    fn in_flight_blocks_reenqueue_until_complete() {
        let q = queue(10);
        let a = url("https://a.tld");
        q.enqueue(&a);
        let task = q.dequeue(Duration::from_millis(5)).unwrap();
        assert_eq!(q.enqueue(&a), EnqueueOutcome::AlreadyTracked);
        assert_eq!(q.in_flight(), 1);
        q.complete(&task).unwrap();
        assert_eq!(q.enqueue(&a), EnqueueOutcome::Enqueued);
    }

    #[test]
    fn complete_unknown_or_twice() {
        let q = queue(10);
        let ghost = DetectionTask {
            url: url("https://ghost.tld"),
            enqueued_at: Utc::now(),
            attempt: 1,
        };
        assert!(matches!(q.complete(&ghost), Err(QueueError::UnknownTask(_))));
        q.enqueue(&url("https://a.tld"));
        let task = q.dequeue(Duration::from_millis(5)).unwrap();
        q.complete(&task).unwrap();
        assert!(matches!(q.complete(&task), Err(QueueError::UnknownTask(_))));
        // Queued but not dequeued is not completable either.
        q.enqueue(&url("https://b.tld"));
        let queued = q.queued_tasks().pop().unwrap();
        assert!(q.complete(&queued).is_err());
    }

    #[test]
    fn requeue_until_budget_spent() {
        let q = queue(10);
        q.enqueue(&url("https://a.tld"));
        let mut task = q.dequeue(Duration::from_millis(5)).unwrap();
        assert_eq!(q.requeue(&task).unwrap(), RequeueOutcome::Requeued { attempt: 2 });
        task = q.dequeue(Duration::from_millis(5)).unwrap();
        assert_eq!(task.attempt, 2);
        assert_eq!(q.requeue(&task).unwrap(), RequeueOutcome::Requeued { attempt: 3 });
        task = q.dequeue(Duration::from_millis(5)).unwrap();
        assert_eq!(q.requeue(&task).unwrap(), RequeueOutcome::Dropped);
        assert!(q.is_idle());
    }

    #[test]
    fn blocked_consumer_wakes_on_enqueue() {
        let q = Arc::new(queue(10));
        let consumer = {
            let q = Arc::clone(&q);
            std::thread::spawn(move || q.dequeue(Duration::from_secs(5)))
        };
        std::thread::sleep(Duration::from_millis(20));
        q.enqueue(&url("https://a.tld"));
        assert!(consumer.join().unwrap().is_some());
    }

    #[test]
    fn journal_recovers_queued_and_in_flight() {
        let dir = tempfile::tempdir().unwrap();
        let config = QueueConfig {
            journal_path: Some(dir.path().join("queue.journal")),
            ..QueueConfig::default()
        };
        {
            let (q, rec) = TaskQueue::open(config.clone(), clock::system()).unwrap();
            assert!(rec.requeued.is_empty());
            for host in ["a", "b", "c", "d"] {
                q.enqueue(&url(&format!("https://{host}.tld")));
            }
            let a = q.dequeue(Duration::from_millis(5)).unwrap();
            q.complete(&a).unwrap();
            let _b = q.dequeue(Duration::from_millis(5)).unwrap();
            // process "dies" here with b in flight, c and d queued
        }
        let (q, rec) = TaskQueue::open(config.clone(), clock::system()).unwrap();
        let hosts: Vec<(&str, u32)> = rec.requeued.iter().map(|t| (t.url.host.as_str(), t.attempt)).collect();
        assert_eq!(hosts, vec![("b.tld", 2), ("c.tld", 1), ("d.tld", 1)]);
        assert_eq!(q.depth(), 3);
        assert_eq!(q.enqueue(&url("https://b.tld")), EnqueueOutcome::AlreadyTracked);
    }

    #[test]
    fn journal_caps_attempts() {
        let dir = tempfile::tempdir().unwrap();
        let config = QueueConfig {
            journal_path: Some(dir.path().join("queue.journal")),
            ..QueueConfig::default()
        };
        {
            let (q, _) = TaskQueue::open(config.clone(), clock::system()).unwrap();
            q.enqueue(&url("https://a.tld"));
            q.dequeue(Duration::from_millis(5)).unwrap();
        }
        for expected in [2, 3] {
            let (q, rec) = TaskQueue::open(config.clone(), clock::system()).unwrap();
            assert_eq!(rec.requeued[0].attempt, expected);
            q.dequeue(Duration::from_millis(5)).unwrap();
        }
        let (q, rec) = TaskQueue::open(config, clock::system()).unwrap();
        assert!(rec.requeued.is_empty());
        assert_eq!(rec.exhausted.len(), 1);
        assert_eq!(rec.exhausted[0].attempt, 4);
        assert!(q.is_idle());
    }
}
