//! Brand knowledge base: which brands exist, how pages refer to them, and
//! which registrable domains legitimately belong to them.
//!
//! File format, one brand per line, `#` starts a comment:
//!
//! ```text
//! PayPal <TAB> aliases=paypal,pay pal <TAB> domains=paypal.com,paypal.me
//! ```
//!
//! The lowercased brand name is always an alias. Aliases must be unique
//! across the whole KB and domains must already be registrable domains.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::url::registrable_domain;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrandKbEntry {
    pub brand: String,
    pub aliases: BTreeSet<String>,
    pub domains: BTreeSet<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("cannot read kb {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("kb line {line}: {reason}")]
    Invalid { line: usize, reason: String },
}

/// Validated, read-only brand set, ordered by brand name.
#[derive(Debug, Clone, Default)]
pub struct BrandKb {
    entries: Vec<BrandKbEntry>,
    index: HashMap<String, usize>,
}

/// Default KB shipped with the crate.
pub const BUNDLED_KB: &str = include_str!("../../data/brands.kb");

impl BrandKb {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, KbError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| KbError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_KB).expect("bundled kb is valid")
    }

    pub fn parse(text: &str) -> Result<Self, KbError> {
        let mut entries = Vec::new();
        let mut lines = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            entries.push(parse_line(raw, line)?);
            lines.push(line);
        }
        Self::build(entries, &lines)
    }

    /// Validates hand-built entries. Line numbers in errors are 1-based
    /// positions in `entries`.
    pub fn from_entries(entries: Vec<BrandKbEntry>) -> Result<Self, KbError> {
        let lines: Vec<usize> = (1..=entries.len()).collect();
        let entries = entries
            .into_iter()
            .zip(&lines)
            .map(|(e, &line)| canonical_entry(e.brand, e.aliases, e.domains, line))
            .collect::<Result<Vec<_>, _>>()?;
        Self::build(entries, &lines)
    }

    fn build(entries: Vec<BrandKbEntry>, lines: &[usize]) -> Result<Self, KbError> {
        let mut seen_brands: HashMap<String, usize> = HashMap::new();
        let mut seen_aliases: HashMap<String, (String, usize)> = HashMap::new();
        for (entry, &line) in entries.iter().zip(lines) {
            if let Some(first) = seen_brands.insert(entry.brand.to_lowercase(), line) {
                return Err(KbError::Invalid {
                    line,
                    reason: format!("brand {:?} already defined on line {first}", entry.brand),
                });
            }
            for alias in &entry.aliases {
                if let Some((other, first)) = seen_aliases.insert(alias.clone(), (entry.brand.clone(), line)) {
                    return Err(KbError::Invalid {
                        line,
                        reason: format!("alias {alias:?} also belongs to {other:?} (line {first})"),
                    });
                }
            }
        }
        let mut entries = entries;
        entries.sort_by(|a, b| a.brand.cmp(&b.brand));
        let index = entries.iter().enumerate().map(|(i, e)| (e.brand.clone(), i)).collect();
        Ok(Self { entries, index })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in lexicographic brand order.
    pub fn entries(&self) -> &[BrandKbEntry] {
        &self.entries
    }

    pub fn get(&self, brand: &str) -> Option<&BrandKbEntry> {
        self.index.get(brand).map(|&i| &self.entries[i])
    }

    /// True when `domain` is one of `brand`'s legitimate registrable domains.
    pub fn is_legitimate(&self, brand: &str, domain: &str) -> bool {
        self.get(brand).is_some_and(|e| e.domains.contains(domain))
    }
}

fn parse_line(raw: &str, line: usize) -> Result<BrandKbEntry, KbError> {
    let invalid = |reason: String| KbError::Invalid { line, reason };
    let mut fields = raw.split('\t');
    let brand = fields.next().unwrap_or_default().trim().to_string();
    let mut aliases = None;
    let mut domains = None;
    for field in fields.map(str::trim).filter(|f| !f.is_empty()) {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| invalid(format!("field {field:?} is not key=value")))?;
        let list: BTreeSet<String> = value
            .split(',')
            .map(|s| s.trim().to_lowercase())
            .filter(|s| !s.is_empty())
            .collect();
        match key.trim() {
            "aliases" => aliases = Some(list),
            "domains" => domains = Some(list),
            other => return Err(invalid(format!("unknown field {other:?}"))),
        }
    }
    let domains = domains.ok_or_else(|| invalid("missing domains=".into()))?;
    canonical_entry(brand, aliases.unwrap_or_default(), domains, line)
}

fn canonical_entry(
    brand: String,
    aliases: BTreeSet<String>,
    domains: BTreeSet<String>,
    line: usize,
) -> Result<BrandKbEntry, KbError> {
    let invalid = |reason: String| KbError::Invalid { line, reason };
    let brand = brand.trim().to_string();
    if brand.is_empty() {
        return Err(invalid("empty brand name".into()));
    }
    let mut aliases: BTreeSet<String> = aliases
        .into_iter()
        .map(|a| a.trim().to_lowercase())
        .filter(|a| !a.is_empty())
        .collect();
    aliases.insert(brand.to_lowercase());
    if let Some(bad) = aliases.iter().find(|a| !a.chars().any(char::is_alphanumeric)) {
        return Err(invalid(format!("alias {bad:?} has no letters or digits")));
    }

    let domains: BTreeSet<String> = domains.into_iter().map(|d| d.trim().to_lowercase()).collect();
    if domains.is_empty() {
        return Err(invalid(format!("brand {brand:?} has no domains")));
    }
    for domain in &domains {
        if crate::url::normalize(domain).map(|u| u.host) != Ok(domain.clone()) {
            return Err(invalid(format!("domain {domain:?} is not a hostname")));
        }
        if registrable_domain(domain) != *domain {
            return Err(invalid(format!(
                "domain {domain:?} is not a registrable domain (did you mean {:?}?)",
                registrable_domain(domain)
            )));
        }
    }
    Ok(BrandKbEntry {
        brand,
        aliases,
        domains,
    })
}
