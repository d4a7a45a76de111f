//! Pulls URLs out of free text such as an email body.
//!
//! Rules:
//! - tokens are delimited by whitespace, brackets `()[]{}<>` and quotes `"'` and backtick
//! - within a token, text before an `http://` / `https://` marker is discarded
//! - trailing `.,;:!?` are stripped
//! - a token without a scheme is accepted only if it contains no `@` and its
//!   host ends in a known public suffix (so `e.g.` and `file.txt` are not URLs)
//! - results are deduplicated by normalized form, first occurrence wins

use std::collections::HashSet;

use crate::url::{has_known_suffix, normalize};

const DELIMITERS: &[char] = &['(', ')', '[', ']', '{', '}', '<', '>', '"', '\'', '`'];
const TRAILING: &[char] = &['.', ',', ';', ':', '!', '?'];

/// URLs in `text`, as written, in first-occurrence order.
pub fn extract_urls(text: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for token in text.split(|c: char| c.is_whitespace() || DELIMITERS.contains(&c)) {
        let Some(candidate) = candidate(token) else { continue };
        let Ok(url) = normalize(candidate) else { continue };
        if seen.insert(url.normalized) {
            out.push(candidate.to_string());
        }
    }
    out
}

fn candidate(token: &str) -> Option<&str> {
    let lower = token.to_ascii_lowercase();
    let with_scheme = ["https://", "http://"].iter().filter_map(|m| lower.find(m)).min();
    match with_scheme {
        Some(start) => {
            let c = token[start..].trim_end_matches(TRAILING);
            let rest = &c[c.find("//").map_or(0, |i| i + 2)..];
            (!rest.is_empty()).then_some(c)
        }
        None => {
            let c = token.trim_end_matches(TRAILING);
            if c.contains('@') || c.contains("://") || !c.contains('.') {
                return None;
            }
            let host_end = c.find(['/', '?', '#', ':']).unwrap_or(c.len());
            let host = c[..host_end].to_ascii_lowercase();
            (host.contains('.') && has_known_suffix(&host)).then_some(c)
        }
    }
}
