//! URL canonicalization and registrable-domain lookup.
//!
//! Every blacklist probe, cache key and queue entry is keyed on the
//! normalized string produced here, so the rules below are the matching
//! contract for the whole service:
//!
//! * scheme and host are lowercased, scheme defaults to `https`
//! * default ports (80 for http, 443 for https) are dropped
//! * the fragment is removed
//! * trailing slashes on the path are removed (so `/` becomes empty)
//! * userinfo, path and query are kept byte-for-byte
//!
//! IDN hosts are left in whatever ASCII/punycode form they were submitted in.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::psl;

/// A submitted URL together with its canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UrlRecord {
    pub raw: String,
    pub normalized: String,
    pub host: String,
    pub registrable_domain: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UrlError {
    #[error("empty url")]
    Empty,
    #[error("unparseable url: {0}")]
    Unparseable(&'static str),
}

impl UrlRecord {
    pub fn parse(raw: &str) -> Result<Self, UrlError> {
        normalize(raw)
    }

    /// The normalized string, used as the key everywhere.
    pub fn key(&self) -> &str {
        &self.normalized
    }
}

impl fmt::Display for UrlRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.normalized)
    }
}

/// Canonicalizes `raw` into a [`UrlRecord`].
pub fn normalize(raw: &str) -> Result<UrlRecord, UrlError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(UrlError::Empty);
    }
    if trimmed.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return Err(UrlError::Unparseable("contains whitespace"));
    }

    let (scheme, rest) = match trimmed.find("://") {
        Some(idx) => {
            let scheme = &trimmed[..idx];
            if scheme.is_empty()
                || !scheme.starts_with(|c: char| c.is_ascii_alphabetic())
                || !scheme
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
            {
                return Err(UrlError::Unparseable("bad scheme"));
            }
            (scheme.to_ascii_lowercase(), &trimmed[idx + 3..])
        }
        None => ("https".to_string(), trimmed),
    };
    if scheme != "http" && scheme != "https" {
        return Err(UrlError::Unparseable("unsupported scheme"));
    }

    // Drop the fragment first; '#' never belongs to any other component.
    let rest = match rest.find('#') {
        Some(idx) => &rest[..idx],
        None => rest,
    };

    let authority_end = rest.find(['/', '?']).unwrap_or(rest.len());
    let authority = &rest[..authority_end];
    let tail = &rest[authority_end..];

    let (userinfo, hostport) = match authority.rfind('@') {
        Some(idx) => (Some(&authority[..idx]), &authority[idx + 1..]),
        None => (None, authority),
    };

    let (host, port) = split_host_port(hostport)?;
    let host = host.to_ascii_lowercase();
    let host = host.strip_suffix('.').unwrap_or(&host).to_string();
    validate_host(&host)?;

    let port = match port {
        Some(p) if (scheme == "http" && p == 80) || (scheme == "https" && p == 443) => None,
        other => other,
    };

    let (path, query) = match tail.find('?') {
        Some(idx) => (&tail[..idx], Some(&tail[idx..])),
        None => (tail, None),
    };
    let path = path.trim_end_matches('/');

    let mut normalized = String::with_capacity(trimmed.len() + 8);
    normalized.push_str(&scheme);
    normalized.push_str("://");
    if let Some(userinfo) = userinfo {
        normalized.push_str(userinfo);
        normalized.push('@');
    }
    normalized.push_str(&host);
    if let Some(port) = port {
        normalized.push(':');
        normalized.push_str(&port.to_string());
    }
    normalized.push_str(path);
    if let Some(query) = query {
        normalized.push_str(query);
    }

    let registrable_domain = registrable_domain(&host);
    Ok(UrlRecord {
        raw: raw.to_string(),
        normalized,
        host,
        registrable_domain,
    })
}

fn split_host_port(hostport: &str) -> Result<(&str, Option<u16>), UrlError> {
    if hostport.is_empty() {
        return Err(UrlError::Unparseable("missing host"));
    }
    if let Some(stripped) = hostport.strip_prefix('[') {
        let close = stripped
            .find(']')
            .ok_or(UrlError::Unparseable("unterminated ipv6 literal"))?;
        let host = &hostport[..close + 2];
        let after = &stripped[close + 1..];
        return match after {
            "" => Ok((host, None)),
            p if p.starts_with(':') => Ok((host, Some(parse_port(&p[1..])?))),
            _ => Err(UrlError::Unparseable("junk after ipv6 literal")),
        };
    }
    match hostport.rfind(':') {
        Some(idx) => Ok((&hostport[..idx], Some(parse_port(&hostport[idx + 1..])?))),
        None => Ok((hostport, None)),
    }
}

fn parse_port(s: &str) -> Result<u16, UrlError> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(UrlError::Unparseable("bad port"));
    }
    s.parse().map_err(|_| UrlError::Unparseable("port out of range"))
}

fn validate_host(host: &str) -> Result<(), UrlError> {
    if host.is_empty() {
        return Err(UrlError::Unparseable("missing host"));
    }
    if host.starts_with('[') {
        let inner = &host[1..host.len() - 1];
        if inner.is_empty() || !inner.chars().all(|c| c.is_ascii_hexdigit() || c == ':' || c == '.') {
            return Err(UrlError::Unparseable("bad ipv6 literal"));
        }
        return Ok(());
    }
    for label in host.split('.') {
        if label.is_empty() || label.len() > 63 {
            return Err(UrlError::Unparseable("bad host label"));
        }
        if !label
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
        {
            return Err(UrlError::Unparseable("bad host character"));
        }
    }
    Ok(())
}

/// eTLD+1 of a lowercased host, using the bundled suffix snapshot.
///
/// Unknown suffixes fall back to the last two labels. Single-label hosts,
/// IP literals and hosts that are themselves a public suffix come back
/// unchanged.
pub fn registrable_domain(host: &str) -> String {
    if !host.contains('.') || host.starts_with('[') || is_ipv4(host) {
        return host.to_string();
    }
    let labels: Vec<&str> = host.split('.').collect();
    let suffix_labels = psl::longest_suffix_labels(&labels).unwrap_or(1);
    if suffix_labels >= labels.len() {
        return host.to_string();
    }
    labels[labels.len() - suffix_labels - 1..].join(".")
}

fn is_ipv4(host: &str) -> bool {
    let parts: Vec<&str> = host.split('.').collect();
    parts.len() == 4 && parts.iter().all(|p| p.parse::<u8>().is_ok())
}

/// True when the last label of `host` is a known public suffix (used by the
/// scheme-less URL extractor to tell hosts from file names).
pub fn has_known_suffix(host: &str) -> bool {
    let labels: Vec<&str> = host.split('.').collect();
    labels.len() >= 2 && psl::longest_suffix_labels(&labels).is_some()
}
