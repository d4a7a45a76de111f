// Regex-only re-derivation of the brand scoring table, used to cross-check
// the DOM-based detector. Shares no code with the library beyond plain data.
#![allow(dead_code)]

use regex::Regex;
use std::sync::OnceLock;

pub struct Brand {
    pub name: String,
    pub aliases: Vec<String>,
    pub domains: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleVerdict {
    pub brand: Option<String>,
    pub score: u32,
    pub phishing: bool,
}

fn re(cell: &'static OnceLock<Regex>, pat: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pat).unwrap())
}

fn decode(s: &str) -> String {
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&copy;", "©")
        .replace("&nbsp;", "\u{a0}")
        .replace("&amp;", "&")
}

fn strip_hidden(html: &str) -> String {
    static C: [OnceLock<Regex>; 5] = [const { OnceLock::new() }; 5];
    let mut out = html.to_string();
    let pats = [
        r"(?is)<!--.*?-->",
        r"(?is)<script\b[^>]*>.*?</script\s*>",
        r"(?is)<style\b[^>]*>.*?</style\s*>",
        r"(?is)<template\b[^>]*>.*?</template\s*>",
        r"(?is)<noscript\b[^>]*>.*?</noscript\s*>",
    ];
    for (cell, pat) in C.iter().zip(pats) {
        out = re(cell, pat).replace_all(&out, " ").into_owned();
    }
    out
}

/// Every start tag named `name`, as attribute maps (names lowercased).
fn tags(html: &str, name: &str) -> Vec<Vec<(String, String)>> {
    static ATTR: OnceLock<Regex> = OnceLock::new();
    let attr = re(
        &ATTR,
        r#"([A-Za-z_:][-A-Za-z0-9_:.]*)\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s"'>]+))"#,
    );
    let tag = Regex::new(&format!(r"(?is)<{name}\b([^>]*)>")).unwrap();
    tag.captures_iter(html)
        .map(|c| {
            attr.captures_iter(&c[1])
                .map(|a| {
                    let v = a.get(2).or(a.get(3)).or(a.get(4)).map_or("", |m| m.as_str());
                    (a[1].to_ascii_lowercase(), decode(v))
                })
                .collect()
        })
        .collect()
}

fn attr<'a>(t: &'a [(String, String)], name: &str) -> Option<&'a str> {
    t.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
}

fn visible_text(html: &str) -> String {
    static BODY: OnceLock<Regex> = OnceLock::new();
    static TAG: OnceLock<Regex> = OnceLock::new();
    let cleaned = strip_hidden(html);
    let body = match re(&BODY, r"(?is)<body\b[^>]*>(.*?)(?:</body\s*>|\z)").captures(&cleaned) {
        Some(c) => c[1].to_string(),
        None => return String::new(),
    };
    decode(&re(&TAG, r"(?s)<[^>]*>").replace_all(&body, " "))
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric()
}

fn occurrences(text: &str, alias: &str) -> usize {
    let hay: Vec<char> = text.to_lowercase().chars().collect();
    let needle: Vec<char> = alias.chars().collect();
    if needle.is_empty() || needle.len() > hay.len() {
        return 0;
    }
    let mut n = 0;
    let mut i = 0;
    while i + needle.len() <= hay.len() {
        if hay[i..i + needle.len()] == needle[..]
            && (i == 0 || !is_word(hay[i - 1]))
            && (i + needle.len() == hay.len() || !is_word(hay[i + needle.len()]))
        {
            n += 1;
            i += needle.len();
        } else {
            i += 1;
        }
    }
    n
}

fn mentions(text: &str, b: &Brand) -> bool {
    b.aliases.iter().any(|a| occurrences(text, a) > 0)
}

fn host_of(target: &str, page_host: &str) -> Option<String> {
    static ABS: OnceLock<Regex> = OnceLock::new();
    static SCHEME: OnceLock<Regex> = OnceLock::new();
    let t = target.trim();
    if let Some(c) = re(&ABS, r"(?i)^(?:https?:)?//(?:[^@/?#]*@)?([^:/?#]*)").captures(t) {
        return Some(c[1].to_ascii_lowercase().trim_end_matches('.').to_string());
    }
    if t.starts_with('#') || re(&SCHEME, r"^[A-Za-z][A-Za-z0-9+.-]*:").is_match(t) {
        return None;
    }
    Some(page_host.to_string())
}

fn host_hit(host: &str, b: &Brand) -> bool {
    b.aliases.iter().any(|a| {
        let squashed: String = a.chars().filter(|c| c.is_alphanumeric()).collect();
        host.split(['.', '-']).any(|label| label == squashed)
    })
}

fn copyright_windows(text: &str) -> Vec<String> {
    static MARK: OnceLock<Regex> = OnceLock::new();
    re(&MARK, r"(?i)(?:©|\(c\)|copyright)[^\n]*")
        .find_iter(text)
        .map(|m| m.as_str().to_string())
        .collect()
}

pub fn brand_score(html: &str, page_host: &str, b: &Brand) -> u32 {
    static TITLE: OnceLock<Regex> = OnceLock::new();
    let mut score = 0;
    if let Some(c) = re(&TITLE, r"(?is)<title\b[^>]*>(.*?)</title\s*>").captures(html) {
        if mentions(&decode(&c[1]), b) {
            score += 3;
        }
    }
    let metas = tags(html, "meta");
    let site = metas.iter().any(|m| {
        let key = attr(m, "property")
            .or(attr(m, "name"))
            .unwrap_or("")
            .to_ascii_lowercase();
        (key == "og:site_name" || key == "application-name") && attr(m, "content").is_some_and(|c| mentions(c, b))
    });
    if site {
        score += 3;
    }
    if tags(html, "img")
        .iter()
        .any(|i| attr(i, "alt").is_some_and(|a| mentions(a, b)))
    {
        score += 2;
    }
    let text = visible_text(html);
    if copyright_windows(&text).iter().any(|w| mentions(w, b)) {
        score += 2;
    }
    let form_hit = tags(html, "form")
        .iter()
        .filter_map(|f| host_of(attr(f, "action").unwrap_or(""), page_host))
        .any(|h| host_hit(&h, b));
    if form_hit {
        score += 2;
    }
    let anchor_hit = tags(html, "a")
        .iter()
        .filter_map(|a| attr(a, "href"))
        .filter_map(|h| host_of(h, page_host))
        .any(|h| host_hit(&h, b));
    if anchor_hit {
        score += 1;
    }
    let total: usize = b.aliases.iter().map(|a| occurrences(&text, a)).sum();
    if total >= 3 {
        score += 1;
    }
    score
}

/// eTLD+1 for the handful of suffixes the fixtures use.
pub fn site_of(host: &str) -> String {
    const TWO_LEVEL: &[&str] = &["co.uk", "com.au", "co.jp", "com.br", "github.io"];
    let labels: Vec<&str> = host.split('.').collect();
    let keep = if labels.len() >= 3 && TWO_LEVEL.contains(&labels[labels.len() - 2..].join(".").as_str()) {
        3
    } else {
        2
    };
    labels[labels.len().saturating_sub(keep)..].join(".")
}

pub fn judge(html: &str, page_host: &str, brands: &[Brand]) -> OracleVerdict {
    let mut ranked: Vec<(u32, &str, &Brand)> = brands
        .iter()
        .map(|b| (brand_score(html, page_host, b), b.name.as_str(), b))
        .collect();
    ranked.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(y.1)));
    let Some(&(score, _, top)) = ranked.first() else {
        return OracleVerdict {
            brand: None,
            score: 0,
            phishing: false,
        };
    };
    if score < 3 {
        return OracleVerdict {
            brand: None,
            score,
            phishing: false,
        };
    }
    let site = site_of(page_host);
    OracleVerdict {
        brand: Some(top.name.clone()),
        score,
        phishing: !top.domains.contains(&site),
    }
}
