//! Append-only text journal of accepted cache writes.
//!
//! One record per line, tab-separated `name=value` fields (tabs shown as `<TAB>`):
//!
//! ```text
//! key=https://evil.tld/login <TAB> status=phishing <TAB> source=rbpd <TAB> target_brand=PayPal <TAB> decided_at=2025-01-01T00:00:00Z <TAB> expires_at=2025-01-08T00:00:00Z
//! ```
//!
//! Absent optional fields are omitted. Backslash, tab, CR and newline inside
//! values are escaped as `\\`, `\t`, `\r`, `\n`.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use parking_lot::Mutex;

use super::CacheEntry;
use crate::model::Verdict;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordError {
    #[error("field {0:?} missing")]
    Missing(&'static str),
    #[error("field {field:?} invalid: {value:?}")]
    Invalid { field: &'static str, value: String },
    #[error("malformed field {0:?}")]
    Malformed(String),
}

pub fn encode(entry: &CacheEntry) -> String {
    let v = &entry.verdict;
    let mut fields = vec![
        ("key", entry.key.clone()),
        ("status", v.status.to_string()),
        ("source", v.source.to_string()),
    ];
    if let Some(brand) = &v.target_brand {
        fields.push(("target_brand", brand.clone()));
    }
    fields.push(("decided_at", rfc3339(v.decided_at)));
    if let Some(expires) = entry.expires_at {
        fields.push(("expires_at", rfc3339(expires)));
    }
    if let Some(detail) = &v.detail {
        fields.push(("detail", detail.clone()));
    }
    fields
        .into_iter()
        .map(|(name, value)| format!("{name}={}", escape(&value)))
        .collect::<Vec<_>>()
        .join("\t")
}

pub fn decode(line: &str) -> Result<CacheEntry, RecordError> {
    let mut key = None;
    let mut status = None;
    let mut source = None;
    let mut target_brand = None;
    let mut decided_at = None;
    let mut expires_at = None;
    let mut detail = None;
    for field in line.split('\t') {
        let (name, raw) = field
            .split_once('=')
            .ok_or_else(|| RecordError::Malformed(field.to_string()))?;
        let value = unescape(raw).ok_or_else(|| RecordError::Malformed(field.to_string()))?;
        match name {
            "key" => key = Some(value),
            "status" => {
                status = Some(
                    value
                        .parse()
                        .map_err(|_| RecordError::Invalid { field: "status", value })?,
                )
            }
            "source" => {
                source = Some(
                    value
                        .parse()
                        .map_err(|_| RecordError::Invalid { field: "source", value })?,
                )
            }
            "target_brand" => target_brand = Some(value),
            "decided_at" => decided_at = Some(parse_time("decided_at", value)?),
            "expires_at" => expires_at = Some(parse_time("expires_at", value)?),
            "detail" => detail = Some(value),
            // Unknown fields are ignored so older readers survive newer journals.
            _ => {}
        }
    }
    Ok(CacheEntry {
        key: key.ok_or(RecordError::Missing("key"))?,
        verdict: Verdict {
            status: status.ok_or(RecordError::Missing("status"))?,
            source: source.ok_or(RecordError::Missing("source"))?,
            target_brand,
            decided_at: decided_at.ok_or(RecordError::Missing("decided_at"))?,
            detail,
        },
        expires_at,
    })
}

fn rfc3339(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn parse_time(field: &'static str, value: String) -> Result<DateTime<Utc>, RecordError> {
    DateTime::parse_from_rfc3339(&value)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|_| RecordError::Invalid { field, value })
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            '\\' => out.push('\\'),
            't' => out.push('\t'),
            'n' => out.push('\n'),
            'r' => out.push('\r'),
            _ => return None,
        }
    }
    Some(out)
}

/// Open journal file, appended to under a lock.
pub struct Journal {
    path: PathBuf,
    file: Mutex<File>,
}

pub struct Replay {
    pub entries: Vec<CacheEntry>,
    pub malformed: usize,
}

impl Journal {
    /// Reads every well-formed record from `path` (missing file = empty).
    pub fn replay(path: &Path) -> io::Result<Replay> {
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Ok(Replay {
                    entries: Vec::new(),
                    malformed: 0,
                })
            }
            Err(e) => return Err(e),
        };
        let mut entries = Vec::new();
        let mut malformed = 0;
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match decode(&line) {
                Ok(entry) => entries.push(entry),
                Err(err) => {
                    // A torn final line after a crash lands here too.
                    tracing::warn!(line = idx + 1, %err, "skipping malformed journal record");
                    malformed += 1;
                }
            }
        }
        Ok(Replay { entries, malformed })
    }

    /// Atomically rewrites the journal to hold exactly `live`, then opens it
    /// for appending.
    pub fn rewrite<'a>(path: &Path, live: impl IntoIterator<Item = &'a CacheEntry>) -> io::Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension("compact");
        {
            let mut out = io::BufWriter::new(File::create(&tmp)?);
            for entry in live {
                writeln!(out, "{}", encode(entry))?;
            }
            out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    pub fn append(&self, entry: &CacheEntry) -> io::Result<()> {
        let mut line = encode(entry);
        line.push('\n');
        self.file.lock().write_all(line.as_bytes())
    }

    pub fn flush(&self) -> io::Result<()> {
        self.file.lock().sync_data()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
