use std::path::{Path, PathBuf};

use phishwatch_bench::{
    gen_fixtures, read_url_list, run, seed_list, synth_urls, write_url_list, BenchConfig, BenchError, BenchMode,
};
use phishwatch_core::crawler::{CorpusFetcher, FetchLimits, Fetcher};
use phishwatch_core::model::{VerdictSource, VerdictStatus};
use phishwatch_core::par::Exec;
use phishwatch_core::rbpd::{classify, BrandKb};
use phishwatch_core::url::normalize;

const TWO_BRANDS: &str =
    "Acme Bank\taliases=acme bank,acmebank\tdomains=acmebank.com\nGlobex\taliases=globex\tdomains=globex.net\n";

struct Lists {
    benign: PathBuf,
    phishing: PathBuf,
    fixtures: PathBuf,
}

fn lists(dir: &Path, benign: &[String], phishing: &[String], kb: &BrandKb) -> Lists {
    let l = Lists {
        benign: dir.join("benign.txt"),
        phishing: dir.join("phishing.txt"),
        fixtures: dir.join("fixtures"),
    };
    write_url_list(&l.benign, benign).unwrap();
    write_url_list(&l.phishing, phishing).unwrap();
    gen_fixtures(benign, phishing, kb, &l.fixtures, Exec::Parallel).unwrap();
    l
}

fn config(mode: BenchMode, l: &Lists) -> BenchConfig {
    BenchConfig {
        simulated_crawl_ms: 0,
        simulated_rbpd_ms: 0,
        ..BenchConfig::new(mode, l.benign.clone(), l.phishing.clone(), l.fixtures.clone())
    }
}

#[test]
fn phishing_brands_round_robin() {
    let kb = BrandKb::parse(TWO_BRANDS).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let phishing: Vec<String> = (0..10).map(|i| format!("https://login-{i}.phish.top/x")).collect();
    let set = gen_fixtures(&[], &phishing, &kb, dir.path(), Exec::Sequential).unwrap();
    let acme = set.phishing_brands.iter().filter(|b| *b == "Acme Bank").count();
    let globex = set.phishing_brands.iter().filter(|b| *b == "Globex").count();
    assert_eq!((acme, globex), (5, 5));
}

#[test]
fn generated_pages_classify_as_labelled() {
    let kb = BrandKb::bundled();
    let dir = tempfile::tempdir().unwrap();
    let (benign, phishing) = synth_urls(40, &kb);
    let set = gen_fixtures(&benign, &phishing, &kb, dir.path(), Exec::Parallel).unwrap();
    let corpus = CorpusFetcher::load(&set.manifest).unwrap();
    assert_eq!(corpus.len(), 80);

    for (u, brand) in phishing.iter().zip(&set.phishing_brands) {
        let page = corpus.fetch(&normalize(u).unwrap(), FetchLimits::default());
        let page = page.content().unwrap();
        let v = classify(&page.url, page, &kb);
        assert_eq!(v.status, VerdictStatus::Phishing, "{u}");
        assert_eq!(v.target_brand.as_deref(), Some(brand.as_str()));
    }
    for (i, u) in benign.iter().enumerate() {
        let page = corpus.fetch(&normalize(u).unwrap(), FetchLimits::default());
        let page = page.content().unwrap();
        let v = classify(&page.url, page, &kb);
        assert_eq!(v.status, VerdictStatus::Benign, "{u}");
        // Odd benign pages carry a brand but land on its own domain.
        assert_eq!(set.benign_brands[i].is_some(), i % 2 == 1);
    }
}

#[test]
fn fixture_generation_is_exec_independent() {
    let kb = BrandKb::bundled();
    let (benign, phishing) = synth_urls(100, &kb);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sa = gen_fixtures(&benign, &phishing, &kb, a.path(), Exec::Sequential).unwrap();
    let sb = gen_fixtures(&benign, &phishing, &kb, b.path(), Exec::Parallel).unwrap();
    assert_eq!(sa.phishing_brands, sb.phishing_brands);
    assert_eq!(
        std::fs::read_to_string(&sa.manifest).unwrap(),
        std::fs::read_to_string(&sb.manifest).unwrap()
    );
}

#[test]
fn duplicate_urls_are_rejected() {
    let kb = BrandKb::bundled();
    let dir = tempfile::tempdir().unwrap();
    let urls = vec![
        "https://a.example.com/".to_string(),
        "https://A.example.com".to_string(),
    ];
    let err = gen_fixtures(&urls, &[], &kb, dir.path(), Exec::Sequential).unwrap_err();
    assert!(matches!(err, BenchError::ConfigInvalid(_)), "{err}");
}

#[test]
fn url_lists_round_trip_and_skip_comments() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("l.txt");
    std::fs::write(&p, "# header\nhttps://a.com\n\n  https://b.com  \n").unwrap();
    assert_eq!(read_url_list(&p).unwrap(), ["https://a.com", "https://b.com"]);
    assert!(matches!(
        read_url_list(&dir.path().join("nope.txt")),
        Err(BenchError::FixtureMissing(_))
    ));
}

#[test]
fn seed_fraction_takes_a_prefix() {
    let urls: Vec<String> = (0..1000).map(|i| i.to_string()).collect();
    assert_eq!(seed_list(&urls, 0.6).len(), 600);
    assert_eq!(seed_list(&urls, 0.0).len(), 0);
    assert_eq!(seed_list(&urls, 1.0).len(), 1000);
    assert_eq!(seed_list(&urls[..3], 0.5).len(), 1);
}

#[test]
fn missing_fixtures_are_reported() {
    let kb = BrandKb::bundled();
    let dir = tempfile::tempdir().unwrap();
    let (benign, phishing) = synth_urls(4, &kb);
    let l = lists(dir.path(), &benign, &phishing, &kb);
    let mut cfg = config(BenchMode::FastSlow, &l);
    cfg.fixtures_dir = dir.path().join("elsewhere");
    assert!(matches!(run(&cfg), Err(BenchError::FixtureMissing(_))));

    // A URL with no corpus page is also missing.
    write_url_list(&l.benign, &["https://not-generated.example.com/".to_string()]).unwrap();
    let cfg = config(BenchMode::FastSlow, &l);
    assert!(matches!(run(&cfg), Err(BenchError::FixtureMissing(_))));
}

#[test]
fn bad_seed_fraction_is_invalid() {
    let kb = BrandKb::bundled();
    let dir = tempfile::tempdir().unwrap();
    let (benign, phishing) = synth_urls(2, &kb);
    let l = lists(dir.path(), &benign, &phishing, &kb);
    let mut cfg = config(BenchMode::Sequential, &l);
    cfg.blacklist_seed_fraction = 1.5;
    assert!(matches!(run(&cfg), Err(BenchError::ConfigInvalid(_))));
}

#[test]
fn fully_seeded_fast_path_is_all_blacklist() {
    let kb = BrandKb::bundled();
    let dir = tempfile::tempdir().unwrap();
    let (_, phishing) = synth_urls(200, &kb);
    let l = lists(dir.path(), &[], &phishing, &kb);
    let cfg = BenchConfig {
        blacklist_seed_fraction: 1.0,
        simulated_crawl_ms: 500,
        ..config(BenchMode::FastSlow, &l)
    };
    let (report, samples) = run(&cfg).unwrap();
    assert_eq!(report.n_requests, 200);
    assert!(report.mean_ms < 5.0, "mean {}", report.mean_ms);
    assert_eq!(report.source_distribution.len(), 1);
    assert_eq!(report.source_distribution[&VerdictSource::LocalBlacklist], 1.0);
    assert!(report.completion.is_none());
    assert!(samples.iter().all(|s| s.status == VerdictStatus::Phishing));
}

#[test]
fn unseeded_fast_slow_drains_to_rbpd_verdicts() {
    let kb = BrandKb::bundled();
    let dir = tempfile::tempdir().unwrap();
    let (benign, phishing) = synth_urls(30, &kb);
    let l = lists(dir.path(), &benign, &phishing, &kb);
    let out = dir.path().join("out/report.json");
    let cfg = BenchConfig {
        blacklist_seed_fraction: 0.0,
        simulated_crawl_ms: 20,
        output_path: Some(out.clone()),
        ..config(BenchMode::FastSlow, &l)
    };
    let (report, samples) = run(&cfg).unwrap();
    assert!(samples.iter().all(|s| s.status == VerdictStatus::Pending));
    assert_eq!(report.completion.unwrap().count, 60);
    assert_eq!(report.final_status_counts[&VerdictStatus::Phishing], 30);
    assert_eq!(report.final_status_counts[&VerdictStatus::Benign], 30);
    assert_eq!(report.source_distribution[&VerdictSource::Rbpd], 1.0);

    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(json["mode"], "fast-slow");
    let csv = std::fs::read_to_string(out.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 61);
    assert!(csv.starts_with("url,mode,ms,status,source"));
}

#[test]
fn sequential_waits_for_every_component() {
    let kb = BrandKb::bundled();
    let dir = tempfile::tempdir().unwrap();
    let (benign, phishing) = synth_urls(4, &kb);
    let l = lists(dir.path(), &benign, &phishing, &kb);
    let cfg = BenchConfig {
        blacklist_seed_fraction: 1.0,
        simulated_crawl_ms: 60,
        simulated_rbpd_ms: 20,
        ..config(BenchMode::Sequential, &l)
    };
    let (report, samples) = run(&cfg).unwrap();
    // Even blacklisted URLs pay for the crawl and the analysis.
    assert!(samples.iter().all(|s| s.ms >= 80.0), "{samples:?}");
    assert_eq!(report.source_distribution[&VerdictSource::LocalBlacklist], 1.0);
    assert_eq!(report.final_status_counts[&VerdictStatus::Benign], 4);
}
