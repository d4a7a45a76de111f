use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use phishwatch_core::model::{VerdictSource, VerdictStatus};

use crate::BenchMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub count: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

/// Nearest-rank percentile over sorted samples.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl LatencySummary {
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let count = sorted.len();
        let mean_ms = if count == 0 {
            0.0
        } else {
            sorted.iter().sum::<f64>() / count as f64
        };
        Self {
            count,
            mean_ms,
            p50_ms: percentile(&sorted, 50.0),
            p95_ms: percentile(&sorted, 95.0),
            p99_ms: percentile(&sorted, 99.0),
            max_ms: sorted.last().copied().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestSample {
    pub url: String,
    pub mode: BenchMode,
    pub ms: f64,
    pub status: VerdictStatus,
    pub source: VerdictSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub mode: BenchMode,
    pub n_requests: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    /// Submit-to-verdict time for URLs answered `Pending` (fast-slow only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<LatencySummary>,
    /// Share of final phishing verdicts by source.
    pub source_distribution: BTreeMap<VerdictSource, f64>,
    pub phishing_reports: usize,
    pub blacklist_family_share: f64,
    pub wall_time_ms: f64,
    /// Final verdict count by status over all URLs.
    pub final_status_counts: BTreeMap<VerdictStatus, usize>,
}

pub fn distribution(sources: &[VerdictSource]) -> BTreeMap<VerdictSource, f64> {
    let mut counts: BTreeMap<VerdictSource, usize> = BTreeMap::new();
    for s in sources {
        *counts.entry(*s).or_default() += 1;
    }
    let total = sources.len() as f64;
    counts.into_iter().map(|(s, n)| (s, n as f64 / total)).collect()
}

pub fn write_csv(path: &Path, samples: &[RequestSample]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["url", "mode", "ms", "status", "source"])?;
    for s in samples {
        w.write_record([
            s.url.as_str(),
            s.mode.as_str(),
            &format!("{:.3}", s.ms),
            s.status.as_str(),
            s.source.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&s, 50.0), 50.0);
        assert_eq!(percentile(&s, 95.0), 95.0);
        assert_eq!(percentile(&s, 99.0), 99.0);
        assert_eq!(percentile(&[7.0], 99.0), 7.0);
        assert_eq!(percentile(&[], 50.0), 0.0);
    }

    #[test]
    fn summary_is_ordered() {
        let s = LatencySummary::from_samples(&[5.0, 1.0, 3.0, 100.0, 2.0]);
        assert_eq!(s.count, 5);
        assert!((s.mean_ms - 22.2).abs() < 1e-9);
        assert!(s.p50_ms <= s.p95_ms && s.p95_ms <= s.p99_ms);
        assert_eq!(s.max_ms, 100.0);
    }

    #[test]
    fn distribution_sums_to_one() {
        use VerdictSource::*;
        let d = distribution(&[LocalBlacklist, LocalBlacklist, Rbpd, OnlineBlacklist]);
        assert_eq!(d[&LocalBlacklist], 0.5);
        assert!((d.values().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(distribution(&[]).is_empty());
    }
}
