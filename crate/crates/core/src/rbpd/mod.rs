//! Reference-based phishing detection.
//!
//! A page is first assigned a *brand intention*: the brand its content
//! claims to be. If it claims a brand but is hosted outside every
//! legitimate domain of that brand, it is phishing. A page hosted on one of
//! its claimed brand's own domains can therefore never be flagged for that
//! brand.
//!
//! Brand intention comes from seven HTML signals. Each signal contributes
//! its weight at most once per brand:
//!
//! | signal             | weight | fires when an alias of the brand ...              |
//! |--------------------|--------|---------------------------------------------------|
//! | `Title`            | 3      | appears in `<title>`                              |
//! | `MetaSiteName`     | 3      | appears in `og:site_name` / `application-name`    |
//! | `LogoAlt`          | 2      | appears in an `<img alt>`                         |
//! | `CopyrightLine`    | 2      | follows a `©`/`(c)`/`copyright` marker on a line  |
//! | `FormActionDomain` | 2      | is a label of a form's target host                |
//! | `AnchorDomain`     | 1      | is a label of a link's target host                |
//! | `KeywordFrequency` | 1      | occurs 3 or more times in visible text            |
//!
//! Text matches are case-insensitive on word boundaries. Host matches split
//! the host on `.` and `-` and compare against the alias with
//! non-alphanumerics removed. Relative form/link targets resolve to the
//! page's own host. The highest-scoring brand wins if it reaches
//! [`INTENTION_THRESHOLD`]; ties go to the lexicographically smallest brand.

pub mod kb;

use std::fmt;
use std::sync::{Arc, LazyLock};

use scraper::{ElementRef, Html, Node, Selector};
use serde::{Deserialize, Serialize};

pub use self::kb::{BrandKb, BrandKbEntry, KbError};
use crate::model::{Verdict, VerdictSource, WebpageContent};
use crate::url::{normalize, UrlRecord};

pub const INTENTION_THRESHOLD: u32 = 3;
pub const KEYWORD_MIN_OCCURRENCES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SignalKind {
    Title,
    MetaSiteName,
    LogoAlt,
    CopyrightLine,
    FormActionDomain,
    AnchorDomain,
    KeywordFrequency,
}

impl SignalKind {
    pub const ALL: [SignalKind; 7] = [
        SignalKind::Title,
        SignalKind::MetaSiteName,
        SignalKind::LogoAlt,
        SignalKind::CopyrightLine,
        SignalKind::FormActionDomain,
        SignalKind::AnchorDomain,
        SignalKind::KeywordFrequency,
    ];

    pub fn weight(self) -> u32 {
        match self {
            SignalKind::Title | SignalKind::MetaSiteName => 3,
            SignalKind::LogoAlt | SignalKind::CopyrightLine | SignalKind::FormActionDomain => 2,
            SignalKind::AnchorDomain | SignalKind::KeywordFrequency => 1,
        }
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub kind: SignalKind,
    pub matched_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrandIntention {
    /// Present iff `score >= INTENTION_THRESHOLD`.
    pub brand: Option<String>,
    /// Score of the best candidate brand (0 when nothing matched).
    pub score: u32,
    /// Evidence for the best candidate, in signal order.
    pub evidence: Vec<Evidence>,
}

/// Anything that can turn fetched content into a verdict.
///
/// Implementations must be pure: the same URL and content always yield the
/// same verdict.
pub trait RbpdDetector: Send + Sync {
    fn analyze(&self, url: &UrlRecord, content: &WebpageContent) -> Verdict;
}

impl<D: RbpdDetector + ?Sized> RbpdDetector for Arc<D> {
    fn analyze(&self, url: &UrlRecord, content: &WebpageContent) -> Verdict {
        (**self).analyze(url, content)
    }
}

/// The scoring-table detector over a brand KB.
#[derive(Debug, Clone)]
pub struct ReferenceDetector {
    kb: Arc<BrandKb>,
}

impl ReferenceDetector {
    pub fn new(kb: Arc<BrandKb>) -> Self {
        Self { kb }
    }

    pub fn kb(&self) -> &BrandKb {
        &self.kb
    }
}

impl RbpdDetector for ReferenceDetector {
    fn analyze(&self, url: &UrlRecord, content: &WebpageContent) -> Verdict {
        classify(url, content, &self.kb)
    }
}

/// Page features the signals are computed from; independent of the KB.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PageFeatures {
    pub title: Option<String>,
    pub site_names: Vec<String>,
    pub img_alts: Vec<String>,
    pub copyright_lines: Vec<String>,
    pub form_hosts: Vec<String>,
    pub anchor_hosts: Vec<String>,
    /// Text under `<body>` with script, style and template contents removed.
    pub visible_text: String,
}

macro_rules! selector {
    ($name:ident, $css:literal) => {
        static $name: LazyLock<Selector> = LazyLock::new(|| Selector::parse($css).expect("valid selector"));
    };
}

selector!(TITLE, "title");
selector!(META, "meta");
selector!(IMG, "img[alt]");
selector!(FORM, "form");
selector!(ANCHOR, "a[href]");
selector!(BODY, "body");

const HIDDEN_CONTAINERS: [&str; 4] = ["script", "style", "template", "noscript"];

impl PageFeatures {
    pub fn extract(html: &str, page: &UrlRecord) -> Self {
        if html.trim().is_empty() {
            return Self::default();
        }
        let doc = Html::parse_document(html);

        let title = doc
            .select(&TITLE)
            .next()
            .map(|t| t.text().collect::<String>().trim().to_string())
            .filter(|t| !t.is_empty());

        let site_names = doc
            .select(&META)
            .filter(|m| {
                let v = m.value();
                let key = v.attr("property").or_else(|| v.attr("name")).unwrap_or_default();
                key.eq_ignore_ascii_case("og:site_name") || key.eq_ignore_ascii_case("application-name")
            })
            .filter_map(|m| m.value().attr("content").map(str::to_string))
            .collect();

        let img_alts = doc
            .select(&IMG)
            .filter_map(|i| i.value().attr("alt"))
            .filter(|a| !a.trim().is_empty())
            .map(str::to_string)
            .collect();

        let form_hosts = doc
            .select(&FORM)
            .filter_map(|f| resolve_host(f.value().attr("action").unwrap_or(""), page))
            .collect();

        let anchor_hosts = doc
            .select(&ANCHOR)
            .filter_map(|a| resolve_host(a.value().attr("href").unwrap_or(""), page))
            .collect();

        let visible_text = doc.select(&BODY).next().map(visible_text).unwrap_or_default();
        let copyright_lines = copyright_lines(&visible_text);

        Self {
            title,
            site_names,
            img_alts,
            copyright_lines,
            form_hosts,
            anchor_hosts,
            visible_text,
        }
    }
}

fn visible_text(body: ElementRef<'_>) -> String {
    let mut parts = Vec::new();
    for node in body.descendants() {
        let Node::Text(text) = node.value() else { continue };
        let hidden = node.ancestors().any(|a| match a.value() {
            Node::Element(e) => HIDDEN_CONTAINERS.contains(&e.name()),
            _ => false,
        });
        if !hidden {
            parts.push(&**text);
        }
    }
    parts.join(" ")
}

/// Every stretch of text from a copyright marker to the end of its line.
pub fn copyright_lines(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    // Lowercasing can change byte lengths for some scripts; fall back to
    // scanning the original text in that case.
    let haystack = if lower.len() == text.len() { &lower } else { text };
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < haystack.len() {
        let next = ["©", "(c)", "copyright"]
            .iter()
            .filter_map(|m| haystack[pos..].find(m).map(|i| pos + i))
            .min();
        let Some(start) = next else { break };
        let end = text[start..].find('\n').map_or(text.len(), |i| start + i);
        out.push(text[start..end].trim().to_string());
        pos = end.max(start + 1);
        while !haystack.is_char_boundary(pos) {
            pos += 1;
        }
    }
    out
}

/// Host a form/link target points at. Relative targets resolve to the page
/// host; non-web schemes and fragments-only yield nothing.
fn resolve_host(target: &str, page: &UrlRecord) -> Option<String> {
    let target = target.trim();
    let lower = target.to_ascii_lowercase();
    if lower.starts_with("http://") || lower.starts_with("https://") {
        return normalize(target).ok().map(|u| u.host);
    }
    if let Some(rest) = target.strip_prefix("//") {
        return normalize(&format!("https://{rest}")).ok().map(|u| u.host);
    }
    if target.starts_with('#') && !target.is_empty() {
        return None;
    }
    if let Some(colon) = target.find(':') {
        let scheme = &target[..colon];
        if !scheme.is_empty() && scheme.chars().all(|c| c.is_ascii_alphanumeric() || "+-.".contains(c)) {
            // mailto:, javascript:, tel: and friends
            return None;
        }
    }
    Some(page.host.clone())
}

/// Occurrences of `alias` (already lowercase) in `lower_text` on word boundaries.
pub fn count_alias(lower_text: &str, alias: &str) -> usize {
    if alias.is_empty() {
        return 0;
    }
    let mut count = 0;
    let mut from = 0;
    while let Some(i) = lower_text[from..].find(alias) {
        let start = from + i;
        let end = start + alias.len();
        let before_ok = lower_text[..start]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric());
        let after_ok = lower_text[end..].chars().next().is_none_or(|c| !c.is_alphanumeric());
        if before_ok && after_ok {
            count += 1;
            from = end;
        } else {
            from = start + lower_text[start..].chars().next().map_or(1, char::len_utf8);
        }
    }
    count
}

fn mentions(text: &str, entry: &BrandKbEntry) -> bool {
    let lower = text.to_lowercase();
    entry.aliases.iter().any(|a| count_alias(&lower, a) > 0)
}

fn host_matches(host: &str, entry: &BrandKbEntry) -> bool {
    let labels: Vec<&str> = host.split(['.', '-']).collect();
    entry.aliases.iter().any(|alias| {
        let compact: String = alias.chars().filter(|c| c.is_alphanumeric()).collect();
        labels.iter().any(|l| *l == compact)
    })
}

/// Evidence for one brand, in signal order.
pub fn brand_evidence(features: &PageFeatures, entry: &BrandKbEntry) -> Vec<Evidence> {
    let mut evidence = Vec::new();
    let mut push = |kind, text: &str| {
        evidence.push(Evidence {
            kind,
            matched_text: text.to_string(),
        })
    };
    if let Some(title) = features.title.as_deref().filter(|t| mentions(t, entry)) {
        push(SignalKind::Title, title);
    }
    if let Some(name) = features.site_names.iter().find(|n| mentions(n, entry)) {
        push(SignalKind::MetaSiteName, name);
    }
    if let Some(alt) = features.img_alts.iter().find(|a| mentions(a, entry)) {
        push(SignalKind::LogoAlt, alt);
    }
    if let Some(line) = features.copyright_lines.iter().find(|l| mentions(l, entry)) {
        push(SignalKind::CopyrightLine, line);
    }
    if let Some(host) = features.form_hosts.iter().find(|h| host_matches(h, entry)) {
        push(SignalKind::FormActionDomain, host);
    }
    if let Some(host) = features.anchor_hosts.iter().find(|h| host_matches(h, entry)) {
        push(SignalKind::AnchorDomain, host);
    }
    let lower = features.visible_text.to_lowercase();
    let occurrences: usize = entry.aliases.iter().map(|a| count_alias(&lower, a)).sum();
    if occurrences >= KEYWORD_MIN_OCCURRENCES {
        push(SignalKind::KeywordFrequency, &format!("{} x{occurrences}", entry.brand));
    }
    evidence
}

pub fn score(evidence: &[Evidence]) -> u32 {
    evidence.iter().map(|e| e.kind.weight()).sum()
}

pub fn intention_from_features(features: &PageFeatures, kb: &BrandKb) -> BrandIntention {
    let mut best: Option<(&BrandKbEntry, u32, Vec<Evidence>)> = None;
    // KB entries are sorted by brand, so strict '>' keeps the smallest name on ties.
    for entry in kb.entries() {
        let evidence = brand_evidence(features, entry);
        let total = score(&evidence);
        if total > 0 && best.as_ref().is_none_or(|(_, s, _)| total > *s) {
            best = Some((entry, total, evidence));
        }
    }
    match best {
        Some((entry, total, evidence)) => BrandIntention {
            brand: (total >= INTENTION_THRESHOLD).then(|| entry.brand.clone()),
            score: total,
            evidence,
        },
        None => BrandIntention {
            brand: None,
            score: 0,
            evidence: Vec::new(),
        },
    }
}

pub fn extract_brand_intention(content: &WebpageContent, kb: &BrandKb) -> BrandIntention {
    intention_from_features(&PageFeatures::extract(&content.html, &content.url), kb)
}

fn describe(evidence: &[Evidence]) -> String {
    evidence
        .iter()
        .map(|e| format!("{}: {}", e.kind, e.matched_text))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Classifies a fetched page. `url` must be the final (post-redirect) URL.
pub fn classify(url: &UrlRecord, content: &WebpageContent, kb: &BrandKb) -> Verdict {
    let features = PageFeatures::extract(&content.html, url);
    let intention = intention_from_features(&features, kb);
    let at = content.fetched_at;
    match intention.brand {
        None => Verdict::benign(VerdictSource::Rbpd, at),
        Some(brand) if kb.is_legitimate(&brand, &url.registrable_domain) => {
            Verdict::benign(VerdictSource::Rbpd, at).with_detail(format!("{brand} page on its own domain"))
        }
        Some(brand) => Verdict::phishing(VerdictSource::Rbpd, at)
            .with_detail(describe(&intention.evidence))
            .with_brand(brand),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VerdictStatus;
    use chrono::Utc;

    fn kb() -> BrandKb {
        BrandKb::parse(
            "PayPal\taliases=paypal\tdomains=paypal.com\nChase\taliases=chase\tdomains=chase.com\nBank of America\taliases=bofa\tdomains=bankofamerica.com\n",
        )
        .unwrap()
    }

    fn page(url: &str, html: &str) -> WebpageContent {
        WebpageContent::new(normalize(url).unwrap(), html, Utc::now())
    }

    #[test]
    fn title_plus_form_scores_five() {
        let p = page(
            "https://random-host.xyz/login",
            r#"<html><head><title>PayPal - Log in</title></head><body><form action="https://paypal-secure.xyz/post"><input name="u"></form></body></html>"#,
        );
        let intent = extract_brand_intention(&p, &kb());
        assert_eq!(intent.brand.as_deref(), Some("PayPal"));
        assert_eq!(intent.score, 5);
        let kinds: Vec<_> = intent.evidence.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![SignalKind::Title, SignalKind::FormActionDomain]);
    }

    #[test]
    fn empty_html_has_no_brand() {
        let intent = extract_brand_intention(&page("https://a.xyz", ""), &kb());
        assert_eq!(
            intent,
            BrandIntention {
                brand: None,
                score: 0,
                evidence: vec![]
            }
        );
    }

    #[test]
    fn single_body_mention_is_not_enough() {
        let intent = extract_brand_intention(
            &page(
                "https://a.xyz",
                "<html><body><p>I paid with paypal yesterday.</p></body></html>",
            ),
            &kb(),
        );
        assert_eq!(intent.brand, None);
        assert_eq!(intent.score, 0);
    }

    #[test]
    fn keyword_frequency_needs_three_visible_mentions() {
        let three = "<body><p>PayPal PayPal</p><div>paypal</div><script>paypal paypal</script></body>";
        let f = PageFeatures::extract(three, &normalize("https://a.xyz").unwrap());
        let e = brand_evidence(&f, kb().get("PayPal").unwrap());
        assert_eq!(e.last().unwrap().kind, SignalKind::KeywordFrequency);
        let two = "<body><p>PayPal</p><div>paypal</div><script>paypal paypal</script><style>.paypal{}</style></body>";
        let f = PageFeatures::extract(two, &normalize("https://a.xyz").unwrap());
        assert!(brand_evidence(&f, kb().get("PayPal").unwrap()).is_empty());
    }

    #[test]
    fn word_boundaries() {
        assert_eq!(count_alias("paypal paypalx xpaypal pay-paypal.", "paypal"), 2);
        assert_eq!(count_alias("bank of america, bank of americana", "bank of america"), 1);
        assert_eq!(count_alias("chasechase chase", "chase"), 1);
    }

    #[test]
    fn copyright_marker_lines() {
        let lines = copyright_lines("foo\n© 2024 PayPal, Inc. All rights\nbar (c) Chase\nCopyright Nobody");
        assert_eq!(
            lines,
            vec!["© 2024 PayPal, Inc. All rights", "(c) Chase", "Copyright Nobody"]
        );
    }

    #[test]
    fn relative_targets_resolve_to_page_host() {
        let p = normalize("https://paypal-verify.xyz/a").unwrap();
        assert_eq!(resolve_host("/post", &p).as_deref(), Some("paypal-verify.xyz"));
        assert_eq!(resolve_host("", &p).as_deref(), Some("paypal-verify.xyz"));
        assert_eq!(resolve_host("//cdn.chase.com/x", &p).as_deref(), Some("cdn.chase.com"));
        assert_eq!(resolve_host("mailto:x@paypal.com", &p), None);
        assert_eq!(resolve_host("javascript:void(0)", &p), None);
        assert_eq!(resolve_host("#top", &p), None);
    }

    #[test]
    fn tie_breaks_on_brand_name() {
        let html = "<html><head><title>PayPal and Chase</title></head><body></body></html>";
        let intent = extract_brand_intention(&page("https://a.xyz", html), &kb());
        assert_eq!(intent.brand.as_deref(), Some("Chase"));
        assert_eq!(intent.score, 3);
    }

    #[test]
    fn multiword_brand_and_compact_host_alias() {
        let html = r#"<html><head><title>Bank of America | Sign in</title></head><body><a href="https://secure-bankofamerica.top/x">x</a></body></html>"#;
        let intent = extract_brand_intention(&page("https://a.xyz", html), &kb());
        assert_eq!(intent.brand.as_deref(), Some("Bank of America"));
        assert_eq!(intent.score, 4);
    }

    #[test]
    fn classify_examples() {
        let kb = kb();
        let html =
            r#"<html><head><title>PayPal - Log in</title></head><body><form action="/signin"></form></body></html>"#;

        let legit = page("https://login.paypal.com/signin", html);
        let v = classify(&legit.url, &legit, &kb);
        assert_eq!((v.status, v.source), (VerdictStatus::Benign, VerdictSource::Rbpd));

        let fake = page("https://paypa1-login.xyz/signin", html);
        let v = classify(&fake.url, &fake, &kb);
        assert_eq!(v.status, VerdictStatus::Phishing);
        assert_eq!(v.target_brand.as_deref(), Some("PayPal"));
        assert!(v.detail.unwrap().contains("Title: PayPal - Log in"));

        let plain = page(
            "https://random.xyz",
            "<html><head><title>Welcome</title></head><body>hi</body></html>",
        );
        let v = classify(&plain.url, &plain, &kb);
        assert_eq!((v.status, v.target_brand), (VerdictStatus::Benign, None));
    }

    #[test]
    fn classify_is_deterministic() {
        let p = page(
            "https://evil.xyz",
            "<title>Chase Online</title><body>chase chase chase</body>",
        );
        let a = classify(&p.url, &p, &kb());
        let b = classify(&p.url, &p, &kb());
        assert_eq!(a, b);
    }
}
