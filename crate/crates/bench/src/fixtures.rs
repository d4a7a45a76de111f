//! Desk-scale fixture corpus: one local HTML page per benchmark URL.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use phishwatch_core::par::Exec;
use phishwatch_core::rbpd::{BrandKb, BrandKbEntry};
use phishwatch_core::url::{normalize, UrlRecord};

use crate::BenchError;

pub const MANIFEST: &str = "manifest.tsv";

#[derive(Debug, Clone)]
pub struct FixtureSet {
    pub manifest: PathBuf,
    /// Brand impersonated by each phishing URL, in input order.
    pub phishing_brands: Vec<String>,
    /// For benign URLs rendered as brand pages: the brand; `None` for brandless pages.
    pub benign_brands: Vec<Option<String>>,
}

/// Newline-delimited URL list; blank lines and `#` comments skipped.
pub fn read_url_list(path: &Path) -> Result<Vec<String>, BenchError> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::FixtureMissing(format!("{}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

pub fn write_url_list(path: &Path, urls: &[String]) -> io::Result<()> {
    let mut out = io::BufWriter::new(fs::File::create(path)?);
    for u in urls {
        writeln!(out, "{u}")?;
    }
    out.flush()
}

/// Deterministic synthetic URL lists: `n` benign and `n` phishing.
pub fn synth_urls(n: usize, kb: &BrandKb) -> (Vec<String>, Vec<String>) {
    const TLDS: [&str; 6] = ["com", "net", "org", "io", "xyz", "top"];
    let benign = (0..n)
        .map(|i| format!("https://site{i}.example-{}.{}/page/{i}", i % 97, TLDS[i % 3]))
        .collect();
    let phishing = (0..n)
        .map(|i| {
            let brand = &kb.entries()[i % kb.len()];
            let slug: String = brand
                .brand
                .to_lowercase()
                .chars()
                .filter(|c| c.is_alphanumeric())
                .collect();
            format!("https://{slug}-verify-{i}.account-check.{}/login", TLDS[3 + i % 3])
        })
        .collect();
    (benign, phishing)
}

fn brand_page(entry: &BrandKbEntry) -> String {
    let b = &entry.brand;
    format!(
        "<!doctype html>\n<html><head><title>{b} - Sign in</title>\n\
         <meta property=\"og:site_name\" content=\"{b}\"></head>\n<body>\n\
         <img src=\"logo.png\" alt=\"{b}\">\n\
         <h1>Sign in to your {b} account</h1>\n\
         <form action=\"/session\" method=\"post\"><input name=\"user\"><input name=\"password\" type=\"password\"></form>\n\
         <footer>\u{a9} 2024 {b}. All rights reserved.</footer>\n</body></html>\n"
    )
}

fn brandless_page(i: usize) -> String {
    format!(
        "<!doctype html>\n<html><head><title>Notes {i}</title></head>\n<body>\n\
         <h1>Notes {i}</h1>\n<p>Plain page number {i} with nothing to sign in to.</p>\n</body></html>\n"
    )
}

/// Picks the round-robin brand for phishing URL `i`, skipping a brand whose
/// own domain hosts the URL (that page could never be phishing for it).
fn phishing_brand<'a>(kb: &'a BrandKb, i: usize, url: &UrlRecord) -> &'a BrandKbEntry {
    let n = kb.len();
    (0..n)
        .map(|k| &kb.entries()[(i + k) % n])
        .find(|e| !e.domains.contains(&url.registrable_domain))
        .unwrap_or(&kb.entries()[i % n])
}

enum Page {
    Phishing {
        brand: String,
        html: String,
    },
    Benign {
        brand: Option<String>,
        html: String,
        final_url: Option<String>,
    },
}

/// Writes one page per URL into `out_dir` and a manifest linking them.
///
/// Phishing URLs get a page impersonating a KB brand chosen round-robin.
/// Even-indexed benign URLs get a brandless page; odd-indexed ones get a
/// brand page whose fetch lands (via `final=`) on that brand's own domain.
pub fn gen_fixtures(
    benign: &[String],
    phishing: &[String],
    kb: &BrandKb,
    out_dir: &Path,
    exec: Exec,
) -> Result<FixtureSet, BenchError> {
    if kb.is_empty() {
        return Err(BenchError::ConfigInvalid("brand kb is empty".into()));
    }
    let pages_dir = out_dir.join("pages");
    fs::create_dir_all(&pages_dir)?;
    let parse = |u: &String| normalize(u).map_err(|e| BenchError::ConfigInvalid(format!("{u}: {e}")));
    let benign_urls = benign.iter().map(parse).collect::<Result<Vec<_>, _>>()?;
    let phishing_urls = phishing.iter().map(parse).collect::<Result<Vec<_>, _>>()?;

    let phishing_idx: Vec<usize> = (0..phishing_urls.len()).collect();
    let phishing_pages = exec.map(&phishing_idx, |&i| {
        let url = &phishing_urls[i];
        let entry = phishing_brand(kb, i, url);
        Page::Phishing {
            brand: entry.brand.clone(),
            html: brand_page(entry),
        }
    });
    let benign_idx: Vec<usize> = (0..benign_urls.len()).collect();
    let benign_pages = exec.map(&benign_idx, |&i| {
        let url = &benign_urls[i];
        if i % 2 == 0 {
            Page::Benign {
                brand: None,
                html: brandless_page(i),
                final_url: None,
            }
        } else {
            let entry = &kb.entries()[(i / 2) % kb.len()];
            let domain = entry.domains.iter().next().expect("kb entries have domains");
            let path = url.normalized.splitn(4, '/').nth(3).unwrap_or("");
            Page::Benign {
                brand: Some(entry.brand.clone()),
                html: brand_page(entry),
                final_url: Some(format!("https://www.{domain}/{path}")),
            }
        }
    });

    let mut manifest = io::BufWriter::new(fs::File::create(out_dir.join(MANIFEST))?);
    writeln!(manifest, "# url\thtml\toptions")?;
    let mut set = FixtureSet {
        manifest: out_dir.join(MANIFEST),
        phishing_brands: Vec::with_capacity(phishing.len()),
        benign_brands: Vec::with_capacity(benign.len()),
    };
    let mut seen = std::collections::HashSet::new();
    let all = benign_urls
        .iter()
        .zip(benign_pages)
        .enumerate()
        .map(|(i, (u, p))| (format!("b{i}.html"), u, p))
        .chain(
            phishing_urls
                .iter()
                .zip(phishing_pages)
                .enumerate()
                .map(|(i, (u, p))| (format!("p{i}.html"), u, p)),
        );
    for (file, url, page) in all {
        if !seen.insert(url.normalized.clone()) {
            return Err(BenchError::ConfigInvalid(format!("duplicate url {}", url.normalized)));
        }
        let (html, option) = match page {
            Page::Phishing { brand, html } => {
                set.phishing_brands.push(brand);
                (html, String::new())
            }
            Page::Benign { brand, html, final_url } => {
                set.benign_brands.push(brand);
                (html, final_url.map(|f| format!("\tfinal={f}")).unwrap_or_default())
            }
        };
        fs::write(pages_dir.join(&file), html)?;
        writeln!(manifest, "{}\tpages/{file}{option}", url.normalized)?;
    }
    manifest.flush()?;
    Ok(set)
}
