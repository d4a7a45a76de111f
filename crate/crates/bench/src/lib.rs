//! Benchmark harness: the fast/slow pipeline against a sequential baseline
//! over a local fixture corpus.

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub mod fixtures;
pub mod report;
pub mod run;

pub use fixtures::{gen_fixtures, read_url_list, synth_urls, write_url_list, FixtureSet};
pub use report::{BenchReport, LatencySummary, RequestSample};
pub use run::{run, seed_list, SlowDetector};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid bench config: {0}")]
    ConfigInvalid(String),
    #[error("fixture missing: {0}")]
    FixtureMissing(String),
    #[error("slow path did not drain within {0:?}")]
    DrainTimeout(Duration),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMode {
    FastSlow,
    Sequential,
}

impl BenchMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BenchMode::FastSlow => "fast-slow",
            BenchMode::Sequential => "sequential",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub mode: BenchMode,
    pub benign_list: PathBuf,
    pub phishing_list: PathBuf,
    pub blacklist_seed_fraction: f64,
    pub simulated_crawl_ms: u64,
    pub simulated_rbpd_ms: u64,
    /// JSON report path; per-request CSV goes next to it.
    pub output_path: Option<PathBuf>,
    /// Directory holding `manifest.tsv` from `gen-fixtures`.
    pub fixtures_dir: PathBuf,
    pub kb_path: Option<PathBuf>,
    pub clients: usize,
    pub stw_workers: usize,
    pub drain_timeout: Duration,
}

impl BenchConfig {
    pub fn new(mode: BenchMode, benign_list: PathBuf, phishing_list: PathBuf, fixtures_dir: PathBuf) -> Self {
        Self {
            mode,
            benign_list,
            phishing_list,
            blacklist_seed_fraction: 0.5,
            simulated_crawl_ms: 500,
            simulated_rbpd_ms: 50,
            output_path: None,
            fixtures_dir,
            kb_path: None,
            clients: 8,
            stw_workers: 4,
            drain_timeout: Duration::from_secs(600),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if !(0.0..=1.0).contains(&self.blacklist_seed_fraction) {
            return Err(BenchError::ConfigInvalid(format!(
                "blacklist_seed_fraction must be in [0, 1], got {}",
                self.blacklist_seed_fraction
            )));
        }
        if self.clients == 0 || self.stw_workers == 0 {
            return Err(BenchError::ConfigInvalid(
                "clients and stw_workers must be positive".into(),
            ));
        }
        Ok(())
    }
}
