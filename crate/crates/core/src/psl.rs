//! Small bundled snapshot of the public suffix list.
//!
//! Only plain rules are carried (no wildcard or exception rules). Hosts whose
//! suffix is not listed fall back to "last label is the suffix".

use std::collections::HashSet;
use std::sync::OnceLock;

const SUFFIXES: &[&str] = &[
    // generic
    "com",
    "net",
    "org",
    "edu",
    "gov",
    "mil",
    "int",
    "info",
    "biz",
    "name",
    "pro",
    "mobi",
    "app",
    "dev",
    "io",
    "co",
    "me",
    "tv",
    "cc",
    "ws",
    "xyz",
    "top",
    "site",
    "online",
    "shop",
    "store",
    "club",
    "live",
    "link",
    "click",
    "icu",
    "vip",
    "buzz",
    "cloud",
    "tech",
    "space",
    "website",
    "fun",
    "life",
    "world",
    "today",
    "support",
    "services",
    "email",
    "digital",
    "network",
    "security",
    "bank",
    "finance",
    "money",
    "help",
    "page",
    "blog",
    "news",
    // country codes
    "ac",
    "ae",
    "ar",
    "at",
    "au",
    "be",
    "bg",
    "br",
    "by",
    "ca",
    "ch",
    "cl",
    "cn",
    "cz",
    "de",
    "dk",
    "ee",
    "es",
    "eu",
    "fi",
    "fr",
    "gr",
    "hk",
    "hr",
    "hu",
    "id",
    "ie",
    "il",
    "in",
    "ir",
    "is",
    "it",
    "jp",
    "kr",
    "kz",
    "lt",
    "lu",
    "lv",
    "ly",
    "ma",
    "mx",
    "my",
    "ng",
    "nl",
    "no",
    "nz",
    "pe",
    "ph",
    "pk",
    "pl",
    "pt",
    "ro",
    "rs",
    "ru",
    "sa",
    "se",
    "sg",
    "si",
    "sk",
    "su",
    "th",
    "tk",
    "tr",
    "tw",
    "ua",
    "uk",
    "us",
    "uy",
    "ve",
    "vn",
    "za",
    // second level
    "co.uk",
    "org.uk",
    "ac.uk",
    "gov.uk",
    "ltd.uk",
    "plc.uk",
    "me.uk",
    "net.uk",
    "sch.uk",
    "com.au",
    "net.au",
    "org.au",
    "edu.au",
    "gov.au",
    "id.au",
    "co.nz",
    "org.nz",
    "net.nz",
    "govt.nz",
    "ac.nz",
    "co.jp",
    "ne.jp",
    "or.jp",
    "ac.jp",
    "go.jp",
    "co.kr",
    "or.kr",
    "ac.kr",
    "go.kr",
    "com.br",
    "net.br",
    "org.br",
    "gov.br",
    "co.in",
    "net.in",
    "org.in",
    "gov.in",
    "ac.in",
    "firm.in",
    "com.cn",
    "net.cn",
    "org.cn",
    "gov.cn",
    "edu.cn",
    "com.hk",
    "org.hk",
    "edu.hk",
    "gov.hk",
    "com.sg",
    "edu.sg",
    "gov.sg",
    "org.sg",
    "net.sg",
    "com.my",
    "gov.my",
    "edu.my",
    "com.tw",
    "org.tw",
    "edu.tw",
    "com.mx",
    "org.mx",
    "gob.mx",
    "com.ar",
    "gob.ar",
    "com.tr",
    "gov.tr",
    "edu.tr",
    "co.za",
    "org.za",
    "gov.za",
    "com.ng",
    "gov.ng",
    "co.id",
    "or.id",
    "go.id",
    "ac.id",
    "co.th",
    "or.th",
    "go.th",
    "in.th",
    "com.vn",
    "gov.vn",
    "com.ph",
    "gov.ph",
    "com.pk",
    "gov.pk",
    "com.sa",
    "gov.sa",
    "com.ua",
    "gov.ua",
    "co.il",
    "org.il",
    "gov.il",
    "ac.il",
    "com.pl",
    "net.pl",
    "org.pl",
    "com.ru",
    "org.ru",
    "co.ke",
    "com.eg",
    "com.co",
    "com.pe",
    "com.ve",
    "com.uy",
    // hosting platforms commonly abused by phishing kits
    "github.io",
    "gitlab.io",
    "herokuapp.com",
    "netlify.app",
    "vercel.app",
    "pages.dev",
    "workers.dev",
    "web.app",
    "firebaseapp.com",
    "appspot.com",
    "blogspot.com",
    "azurewebsites.net",
    "cloudfront.net",
    "s3.amazonaws.com",
    "ngrok.io",
    "glitch.me",
    "repl.co",
    "weebly.com",
    "wixsite.com",
    "000webhostapp.com",
];

fn table() -> &'static HashSet<&'static str> {
    static TABLE: OnceLock<HashSet<&'static str>> = OnceLock::new();
    TABLE.get_or_init(|| SUFFIXES.iter().copied().collect())
}

/// Number of trailing labels covered by the longest listed suffix, if any.
pub fn longest_suffix_labels(labels: &[&str]) -> Option<usize> {
    let table = table();
    (1..=labels.len())
        .rev()
        .find(|&n| table.contains(labels[labels.len() - n..].join(".").as_str()))
}
