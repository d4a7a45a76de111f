use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::url::UrlRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Benign,
    Phishing,
    Pending,
    Error,
}

/// Which mechanism produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictSource {
    LocalBlacklist,
    Cache,
    OnlineBlacklist,
    Rbpd,
    UserFeedback,
    None,
}

impl VerdictSource {
    /// Local and online blacklists together.
    pub fn is_blacklist_family(self) -> bool {
        matches!(self, Self::LocalBlacklist | Self::OnlineBlacklist)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} {value:?}")]
pub struct ParseEnumError {
    kind: &'static str,
    value: String,
}

macro_rules! snake_names {
    ($ty:ident, $kind:literal, { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = ParseEnumError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok(Self::$variant),)+
                    _ => Err(ParseEnumError { kind: $kind, value: s.to_string() }),
                }
            }
        }
    };
}

snake_names!(VerdictStatus, "status", {
    Benign => "benign",
    Phishing => "phishing",
    Pending => "pending",
    Error => "error",
});

snake_names!(VerdictSource, "source", {
    LocalBlacklist => "local_blacklist",
    Cache => "cache",
    OnlineBlacklist => "online_blacklist",
    Rbpd => "rbpd",
    UserFeedback => "user_feedback",
    None => "none",
});

/// A detection result for one URL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: VerdictStatus,
    pub source: VerdictSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_brand: Option<String>,
    pub decided_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Verdict {
    pub fn new(status: VerdictStatus, source: VerdictSource, decided_at: DateTime<Utc>) -> Self {
        Self {
            status,
            source,
            target_brand: None,
            decided_at,
            detail: None,
        }
    }

    pub fn benign(source: VerdictSource, at: DateTime<Utc>) -> Self {
        Self::new(VerdictStatus::Benign, source, at)
    }

    pub fn phishing(source: VerdictSource, at: DateTime<Utc>) -> Self {
        Self::new(VerdictStatus::Phishing, source, at)
    }

    /// Acknowledgement that the URL was handed to the slow path.
    pub fn pending(at: DateTime<Utc>) -> Self {
        Self::new(VerdictStatus::Pending, VerdictSource::None, at)
    }

    pub fn error(source: VerdictSource, detail: impl Into<String>, at: DateTime<Utc>) -> Self {
        Self::new(VerdictStatus::Error, source, at).with_detail(detail)
    }

    pub fn with_brand(mut self, brand: impl Into<String>) -> Self {
        self.target_brand = Some(brand.into());
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn is_terminal(&self) -> bool {
        self.status != VerdictStatus::Pending
    }
}

/// Fetched page content. `screenshot` is never populated; analysis is HTML only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WebpageContent {
    /// Final URL after redirects.
    pub url: UrlRecord,
    pub html: String,
    pub screenshot: Option<Vec<u8>>,
    pub fetched_at: DateTime<Utc>,
    pub fetch_ms: u64,
}

impl WebpageContent {
    pub fn new(url: UrlRecord, html: impl Into<String>, fetched_at: DateTime<Utc>) -> Self {
        Self {
            url,
            html: html.into(),
            screenshot: None,
            fetched_at,
            fetch_ms: 0,
        }
    }
}

/// An ordered batch of URLs submitted together.
#[derive(Debug, Clone)]
pub struct DetectBatch {
    pub urls: Vec<UrlRecord>,
    pub submitted_at: DateTime<Utc>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in [
            VerdictSource::LocalBlacklist,
            VerdictSource::Cache,
            VerdictSource::OnlineBlacklist,
            VerdictSource::Rbpd,
            VerdictSource::UserFeedback,
            VerdictSource::None,
        ] {
            assert_eq!(s.as_str().parse::<VerdictSource>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.as_str()));
        }
        assert!("In Queue".parse::<VerdictStatus>().is_err());
    }

    #[test]
    fn pending_has_no_source() {
        let v = Verdict::pending(Utc::now());
        assert_eq!(v.source, VerdictSource::None);
        assert!(!v.is_terminal());
    }
}
