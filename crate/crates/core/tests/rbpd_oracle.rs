#[path = "support/oracle.rs"]
mod oracle;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use chrono::Utc;
use phishwatch_core::crawler::{CorpusFetcher, FetchLimits, Fetcher};
use phishwatch_core::model::{VerdictStatus, WebpageContent};
use phishwatch_core::rbpd::{classify, extract_brand_intention, BrandKb};
use phishwatch_core::url::normalize;
use proptest::prelude::*;

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus")
}

fn oracle_brands(kb: &BrandKb) -> Vec<oracle::Brand> {
    kb.entries()
        .iter()
        .map(|e| oracle::Brand {
            name: e.brand.clone(),
            aliases: e.aliases.iter().cloned().collect(),
            domains: e.domains.iter().cloned().collect(),
        })
        .collect()
}

fn corpus_pages() -> Vec<(String, WebpageContent)> {
    let corpus = CorpusFetcher::load(corpus_dir().join("manifest.tsv")).unwrap();
    let mut urls: Vec<String> = corpus.urls().map(str::to_string).collect();
    urls.sort();
    urls.into_iter()
        .map(|u| {
            let page = corpus
                .fetch(&normalize(&u).unwrap(), FetchLimits::default())
                .content()
                .cloned()
                .unwrap();
            (u, page)
        })
        .collect()
}

fn expected() -> HashMap<String, (String, String)> {
    std::fs::read_to_string(corpus_dir().join("expected.tsv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (
                normalize(f[0]).unwrap().normalized,
                (f[1].to_string(), f[2].to_string()),
            )
        })
        .collect()
}

#[test]
fn corpus_has_twenty_pages() {
    assert_eq!(corpus_pages().len(), 20);
    assert_eq!(expected().len(), 20);
}

#[test]
fn corpus_matches_hand_labels() {
    let kb = BrandKb::bundled();
    let labels = expected();
    for (url, page) in corpus_pages() {
        let v = classify(&page.url, &page, &kb);
        let (status, brand) = &labels[&url];
        assert_eq!(v.status.as_str(), status, "{url}");
        assert_eq!(v.target_brand.clone().unwrap_or_default(), *brand, "{url}");
    }
}

#[test]
fn corpus_agrees_with_oracle() {
    let kb = BrandKb::bundled();
    let brands = oracle_brands(&kb);
    let mut agree = 0;
    let pages = corpus_pages();
    for (url, page) in &pages {
        let intent = extract_brand_intention(page, &kb);
        let v = classify(&page.url, page, &kb);
        let o = oracle::judge(&page.html, &page.url.host, &brands);
        assert_eq!(intent.score, o.score, "score for {url}");
        assert_eq!(intent.brand, o.brand, "brand for {url}");
        assert_eq!(v.status == VerdictStatus::Phishing, o.phishing, "verdict for {url}");
        agree += 1;
    }
    assert_eq!(agree, pages.len());
}

/// Every corpus page, re-hosted on every legitimate domain of every brand,
/// is never phishing for that brand.
#[test]
fn legitimate_hosting_is_never_phishing_for_own_brand() {
    let kb = BrandKb::bundled();
    let mut checked = 0;
    for (_, page) in corpus_pages() {
        for entry in kb.entries() {
            for domain in &entry.domains {
                for host in [
                    domain.clone(),
                    format!("www.{domain}"),
                    format!("login.secure.{domain}"),
                ] {
                    let url = normalize(&format!("https://{host}/{}", page.url.normalized.len())).unwrap();
                    let rehosted = WebpageContent::new(url.clone(), page.html.clone(), page.fetched_at);
                    let v = classify(&url, &rehosted, &kb);
                    assert!(
                        !(v.status == VerdictStatus::Phishing
                            && v.target_brand.as_deref() == Some(entry.brand.as_str())),
                        "{} flagged for own brand {}",
                        url,
                        entry.brand
                    );
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 20 * kb.len());
}

fn snippet(kind: usize, alias: &str) -> String {
    let squashed: String = alias.chars().filter(|c| c.is_alphanumeric()).collect();
    match kind {
        0 => format!("<p>{alias}</p>"),
        1 => format!("<img src=\"x.png\" alt=\"{alias} logo\">"),
        2 => format!("<p>Copyright 2024 {alias}</p>"),
        3 => format!("<form action=\"https://{squashed}-check.example.top/p\"></form>"),
        4 => format!("<a href=\"https://www.{squashed}.example.com/\">x</a>"),
        5 => format!("<script>{alias} {alias} {alias}</script>"),
        6 => format!("<p>x{squashed}y</p>"),
        _ => "<form action=\"/post\"></form>".to_string(),
    }
}

fn page_strategy(brands: usize) -> impl Strategy<Value = (Option<usize>, Option<usize>, Vec<(usize, usize)>)> {
    (
        proptest::option::of(0..brands),
        proptest::option::of(0..brands),
        proptest::collection::vec((0..8usize, 0..brands), 0..12),
    )
}

fn build_page(kb: &BrandKb, title: Option<usize>, meta: Option<usize>, parts: &[(usize, usize)]) -> String {
    let name = |i: usize| kb.entries()[i].aliases.iter().next().unwrap().clone();
    let mut html = String::from("<html><head>");
    if let Some(t) = title {
        html += &format!("<title>Sign in - {}</title>", name(t));
    }
    if let Some(m) = meta {
        html += &format!("<meta property=\"og:site_name\" content=\"{}\">", name(m));
    }
    html += "</head><body>\n";
    for (kind, b) in parts {
        html += &snippet(*kind, &name(*b));
        html.push('\n');
    }
    html + "</body></html>"
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn generated_pages_agree_with_oracle(
        (title, meta, parts) in page_strategy(BrandKb::bundled().len()),
        host_pick in 0usize..3,
    ) {
        let kb = BrandKb::bundled();
        let html = build_page(&kb, title, meta, &parts);
        let host = ["random-site.example.top", "www.paypal.com", "chase-secure.co.uk"][host_pick];
        let url = normalize(&format!("https://{host}/login")).unwrap();
        let page = WebpageContent::new(url.clone(), html.clone(), Utc::now());
        let intent = extract_brand_intention(&page, &kb);
        let v = classify(&url, &page, &kb);
        let o = oracle::judge(&html, &url.host, &oracle_brands(&kb));
        prop_assert_eq!(intent.score, o.score, "{}", html);
        prop_assert_eq!(intent.brand, o.brand, "{}", html);
        prop_assert_eq!(v.status == VerdictStatus::Phishing, o.phishing);
    }

    #[test]
    fn generated_pages_on_own_domain_are_not_phishing(
        (title, meta, parts) in page_strategy(BrandKb::bundled().len()),
        owner in 0usize..15,
        sub in "[a-z]{0,6}",
    ) {
        let kb = BrandKb::bundled();
        let entry = &kb.entries()[owner % kb.len()];
        let html = build_page(&kb, title, meta, &parts);
        let domain = entry.domains.iter().next().unwrap();
        let host = if sub.is_empty() { domain.clone() } else { format!("{sub}.{domain}") };
        let url = normalize(&format!("https://{host}/")).unwrap();
        let page = WebpageContent::new(url.clone(), html, Utc::now());
        let v = classify(&url, &page, &kb);
        prop_assert!(!(v.status == VerdictStatus::Phishing && v.target_brand.as_deref() == Some(entry.brand.as_str())));
    }

    #[test]
    fn phishing_from_rbpd_always_names_a_brand(
        (title, meta, parts) in page_strategy(BrandKb::bundled().len()),
    ) {
        let kb = BrandKb::bundled();
        let url = normalize("https://unrelated.example.top/").unwrap();
        let page = WebpageContent::new(url.clone(), build_page(&kb, title, meta, &parts), Utc::now());
        let v = classify(&url, &page, &kb);
        if v.status == VerdictStatus::Phishing {
            prop_assert!(v.target_brand.is_some());
        }
    }
}
