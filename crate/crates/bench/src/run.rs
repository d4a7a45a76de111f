use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use phishwatch_core::blacklist::{BlacklistStore, StaticFeed};
use phishwatch_core::clock;
use phishwatch_core::config::AppConfig;
use phishwatch_core::crawler::{CorpusFetcher, FetchLimits, FetchOutcome, Fetcher};
use phishwatch_core::engine::{Engine, Overrides};
use phishwatch_core::model::{Verdict, VerdictSource, VerdictStatus, WebpageContent};
use phishwatch_core::online::{NoOnlineBlacklist, OnlineBlacklistClient, OnlineCheck};
use phishwatch_core::queue::DetectionTask;
use phishwatch_core::rbpd::{BrandKb, RbpdDetector, ReferenceDetector};
use phishwatch_core::url::{normalize, UrlRecord};

use crate::fixtures::{read_url_list, MANIFEST};
use crate::report::{distribution, write_csv, BenchReport, LatencySummary, RequestSample};
use crate::{BenchConfig, BenchError, BenchMode};

/// Wraps a detector with a fixed analysis delay.
pub struct SlowDetector<D> {
    pub inner: D,
    pub delay: Duration,
}

impl<D: RbpdDetector> RbpdDetector for SlowDetector<D> {
    fn analyze(&self, url: &UrlRecord, content: &WebpageContent) -> Verdict {
        if !self.delay.is_zero() {
            thread::sleep(self.delay);
        }
        self.inner.analyze(url, content)
    }
}

/// The first `floor(fraction * len)` phishing URLs.
pub fn seed_list(phishing: &[String], fraction: f64) -> &[String] {
    // The epsilon keeps 0.6 * 1000 from flooring to 599.
    let n = (fraction * phishing.len() as f64 + 1e-9).floor() as usize;
    &phishing[..n.min(phishing.len())]
}

struct Inputs {
    urls: Vec<String>,
    seeded: Vec<String>,
    corpus: CorpusFetcher,
    kb: Arc<BrandKb>,
}

fn prepare(config: &BenchConfig) -> Result<Inputs, BenchError> {
    config.validate()?;
    let benign = read_url_list(&config.benign_list)?;
    let phishing = read_url_list(&config.phishing_list)?;
    if benign.is_empty() && phishing.is_empty() {
        return Err(BenchError::ConfigInvalid("both url lists are empty".into()));
    }
    let kb = Arc::new(match &config.kb_path {
        Some(p) => BrandKb::load(p).map_err(|e| BenchError::ConfigInvalid(e.to_string()))?,
        None => BrandKb::bundled(),
    });
    let manifest = config.fixtures_dir.join(MANIFEST);
    if !manifest.exists() {
        return Err(BenchError::FixtureMissing(format!(
            "{} (run gen-fixtures first)",
            manifest.display()
        )));
    }
    let corpus = CorpusFetcher::load(&manifest)
        .map_err(|e| BenchError::FixtureMissing(e.to_string()))?
        .with_default_delay(Duration::from_millis(config.simulated_crawl_ms));

    // Interleave so both classes see the same load over time.
    let mut urls = Vec::with_capacity(benign.len() + phishing.len());
    for i in 0..benign.len().max(phishing.len()) {
        urls.extend(benign.get(i).cloned());
        urls.extend(phishing.get(i).cloned());
    }
    for u in &urls {
        let rec = normalize(u).map_err(|e| BenchError::ConfigInvalid(format!("{u}: {e}")))?;
        if !corpus.contains(&rec) {
            return Err(BenchError::FixtureMissing(format!("no corpus page for {u}")));
        }
    }
    let seeded = seed_list(&phishing, config.blacklist_seed_fraction).to_vec();
    Ok(Inputs {
        urls,
        seeded,
        corpus,
        kb,
    })
}

/// Runs `f` over every URL from `clients` threads, timing each call.
fn drive<F>(urls: &[String], clients: usize, f: F) -> Vec<(Instant, f64, Verdict)>
where
    F: Fn(&str) -> Verdict + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<(Instant, f64, Verdict)>>> = urls.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|s| {
        for _ in 0..clients.max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(url) = urls.get(i) else { break };
                let start = Instant::now();
                let verdict = f(url);
                let ms = start.elapsed().as_secs_f64() * 1e3;
                *slots[i].lock().unwrap() = Some((start, ms, verdict));
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every url driven"))
        .collect()
}

pub fn run(config: &BenchConfig) -> Result<(BenchReport, Vec<RequestSample>), BenchError> {
    let inputs = prepare(config)?;
    let started = Instant::now();
    let (timed, finals, completion) = match config.mode {
        BenchMode::FastSlow => fast_slow(config, inputs)?,
        BenchMode::Sequential => sequential(config, inputs),
    };
    let wall_time_ms = started.elapsed().as_secs_f64() * 1e3;

    let samples: Vec<RequestSample> = timed
        .iter()
        .map(|(url, ms, v)| RequestSample {
            url: url.clone(),
            mode: config.mode,
            ms: *ms,
            status: v.status,
            source: v.source,
        })
        .collect();
    let latencies: Vec<f64> = samples.iter().map(|s| s.ms).collect();
    let summary = LatencySummary::from_samples(&latencies);
    let phishing_sources: Vec<VerdictSource> = finals
        .iter()
        .filter(|v| v.status == VerdictStatus::Phishing)
        .map(|v| v.source)
        .collect();
    let source_distribution = distribution(&phishing_sources);
    let blacklist_family_share = source_distribution
        .iter()
        .filter(|(s, _)| s.is_blacklist_family())
        .map(|(_, f)| f)
        .sum();
    let mut final_status_counts = BTreeMap::new();
    for v in &finals {
        *final_status_counts.entry(v.status).or_default() += 1;
    }
    let report = BenchReport {
        mode: config.mode,
        n_requests: samples.len(),
        mean_ms: summary.mean_ms,
        p50_ms: summary.p50_ms,
        p95_ms: summary.p95_ms,
        p99_ms: summary.p99_ms,
        completion,
        source_distribution,
        phishing_reports: phishing_sources.len(),
        blacklist_family_share,
        wall_time_ms,
        final_status_counts,
    };
    if let Some(out) = &config.output_path {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(out, serde_json::to_string_pretty(&report).expect("report serializes"))?;
        write_csv(&out.with_extension("csv"), &samples)?;
    }
    Ok((report, samples))
}

type Timed = Vec<(String, f64, Verdict)>;

fn fast_slow(
    config: &BenchConfig,
    inputs: Inputs,
) -> Result<(Timed, Vec<Verdict>, Option<LatencySummary>), BenchError> {
    let done: Arc<Mutex<HashMap<String, Instant>>> = Arc::default();
    let sink = done.clone();
    let engine_config = AppConfig {
        ftw_worker_count: config.clients.max(1),
        stw_worker_count: config.stw_workers.max(1),
        stw_dequeue_timeout: Duration::from_millis(20),
        queue_capacity: inputs.urls.len().max(10_000),
        ..AppConfig::default()
    };
    let engine = Engine::build_with(
        engine_config,
        Overrides {
            fetcher: Some(Arc::new(inputs.corpus)),
            online: Some(Arc::new(NoOnlineBlacklist)),
            detector: Some(Arc::new(SlowDetector {
                inner: ReferenceDetector::new(inputs.kb.clone()),
                delay: Duration::from_millis(config.simulated_rbpd_ms),
            })),
            kb: Some(inputs.kb),
            hook: Some(Arc::new(move |t: &DetectionTask, _: &Verdict| {
                sink.lock().unwrap().insert(t.url.normalized.clone(), Instant::now());
            })),
            ..Overrides::default()
        },
    )
    .map_err(|e| BenchError::ConfigInvalid(e.to_string()))?;
    engine.blacklist().load_feed(&StaticFeed::new("seed", inputs.seeded))?;
    engine.start();

    let ftw = engine.ftw();
    let timed = drive(&inputs.urls, config.clients, |u| ftw.process_raw(u));
    if !engine.wait_idle(config.drain_timeout) {
        return Err(BenchError::DrainTimeout(config.drain_timeout));
    }

    let done = done.lock().unwrap();
    let completion_ms: Vec<f64> = inputs
        .urls
        .iter()
        .zip(&timed)
        .filter(|(_, (_, _, v))| v.status == VerdictStatus::Pending)
        .filter_map(|(u, (start, _, _))| {
            let key = normalize(u).ok()?.normalized;
            done.get(&key).map(|t| t.duration_since(*start).as_secs_f64() * 1e3)
        })
        .collect();
    let finals: Vec<Verdict> = inputs.urls.iter().map(|u| ftw.process_raw(u)).collect();
    engine.shutdown();

    let timed = inputs
        .urls
        .into_iter()
        .zip(timed)
        .map(|(u, (_, ms, v))| (u, ms, v))
        .collect();
    let completion = (!completion_ms.is_empty()).then(|| LatencySummary::from_samples(&completion_ms));
    Ok((timed, finals, completion))
}

/// Every component runs for every URL before the answer is returned.
fn sequential(config: &BenchConfig, inputs: Inputs) -> (Timed, Vec<Verdict>, Option<LatencySummary>) {
    let clock = clock::system();
    let blacklist = BlacklistStore::new(clock.clone());
    blacklist
        .load_feed(&StaticFeed::new("seed", inputs.seeded))
        .expect("static feed loads");
    let online = NoOnlineBlacklist;
    let fetcher = inputs.corpus;
    let detector = SlowDetector {
        inner: ReferenceDetector::new(inputs.kb),
        delay: Duration::from_millis(config.simulated_rbpd_ms),
    };
    let limits = FetchLimits::default();

    let timed = drive(&inputs.urls, config.clients, |raw| {
        let Ok(url) = normalize(raw) else {
            return Verdict::error(VerdictSource::None, "unparseable", clock.now());
        };
        let listed_locally = blacklist.contains(&url);
        let listed_online = online.check(&url) == OnlineCheck::Listed;
        let analyzed = match fetcher.fetch(&url, limits) {
            FetchOutcome::Content(page) => detector.analyze(&page.url, &page),
            FetchOutcome::Error(err) => Verdict::error(VerdictSource::None, err.to_string(), clock.now()),
        };
        if listed_locally {
            Verdict::phishing(VerdictSource::LocalBlacklist, clock.now())
        } else if listed_online {
            Verdict::phishing(VerdictSource::OnlineBlacklist, clock.now())
        } else {
            analyzed
        }
    });
    let finals = timed.iter().map(|(_, _, v)| v.clone()).collect();
    let timed = inputs
        .urls
        .into_iter()
        .zip(timed)
        .map(|(u, (_, ms, v))| (u, ms, v))
        .collect();
    (timed, finals, None)
}
