//! User-submitted corrections, held until a reviewer approves or rejects them.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use phishwatch_core::cache::VerdictCache;
use phishwatch_core::clock::SharedClock;
use phishwatch_core::model::{Verdict, VerdictSource, VerdictStatus};
use phishwatch_core::url::UrlRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposedStatus {
    Benign,
    Phishing,
}

impl From<ProposedStatus> for VerdictStatus {
    fn from(p: ProposedStatus) -> Self {
        match p {
            ProposedStatus::Benign => VerdictStatus::Benign,
            ProposedStatus::Phishing => VerdictStatus::Phishing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewState {
    PendingReview,
    Approved,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Approve,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub id: String,
    pub url: String,
    pub proposed_status: ProposedStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposed_brand: Option<String>,
    pub comment: String,
    pub state: ReviewState,
    pub submitted_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewed_at: Option<DateTime<Utc>>,
}

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum ReviewError {
    #[error("no feedback with id {0}")]
    NotFound(String),
    #[error("feedback {0} was already reviewed")]
    AlreadyReviewed(String),
    #[error("could not record the verdict: {0}")]
    Cache(String),
}

pub struct FeedbackStore {
    records: Mutex<HashMap<String, FeedbackRecord>>,
    next_id: AtomicU64,
    cache: Arc<VerdictCache>,
    clock: SharedClock,
}

impl FeedbackStore {
    pub fn new(cache: Arc<VerdictCache>, clock: SharedClock) -> Self {
        Self {
            records: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            cache,
            clock,
        }
    }

    pub fn submit(
        &self,
        url: &UrlRecord,
        proposed_status: ProposedStatus,
        proposed_brand: Option<String>,
        comment: String,
    ) -> FeedbackRecord {
        let id = format!("fb-{}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let record = FeedbackRecord {
            id: id.clone(),
            url: url.normalized.clone(),
            proposed_status,
            proposed_brand,
            comment,
            state: ReviewState::PendingReview,
            submitted_at: self.clock.now(),
            reviewed_at: None,
        };
        self.records.lock().insert(id, record.clone());
        record
    }

    pub fn get(&self, id: &str) -> Option<FeedbackRecord> {
        self.records.lock().get(id).cloned()
    }

    pub fn all(&self) -> Vec<FeedbackRecord> {
        let mut all: Vec<_> = self.records.lock().values().cloned().collect();
        all.sort_by(|a, b| a.submitted_at.cmp(&b.submitted_at).then(a.id.cmp(&b.id)));
        all
    }

    /// Approval writes the proposed verdict into the cache as user feedback
    /// before the record changes state, all under the store lock.
    pub fn review(&self, id: &str, decision: Decision) -> Result<FeedbackRecord, ReviewError> {
        let mut records = self.records.lock();
        let record = records
            .get_mut(id)
            .ok_or_else(|| ReviewError::NotFound(id.to_string()))?;
        if record.state != ReviewState::PendingReview {
            return Err(ReviewError::AlreadyReviewed(id.to_string()));
        }
        let now = self.clock.now();
        if decision == Decision::Approve {
            let mut verdict = Verdict::new(record.proposed_status.into(), VerdictSource::UserFeedback, now)
                .with_detail(format!("feedback {}", record.id));
            if let Some(brand) = &record.proposed_brand {
                verdict = verdict.with_brand(brand.clone());
            }
            self.cache
                .put_key(&record.url, verdict)
                .map_err(|e| ReviewError::Cache(e.to_string()))?;
        }
        record.state = match decision {
            Decision::Approve => ReviewState::Approved,
            Decision::Reject => ReviewState::Rejected,
        };
        record.reviewed_at = Some(now);
        Ok(record.clone())
    }
}
