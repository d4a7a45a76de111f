use std::hint::black_box;
use std::sync::Arc;

use chrono::Utc;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use phishwatch_bench::{gen_fixtures, synth_urls};
use phishwatch_core::crawler::{CorpusFetcher, FetchLimits, Fetcher};
use phishwatch_core::model::WebpageContent;
use phishwatch_core::par::Exec;
use phishwatch_core::rbpd::{BrandKb, RbpdDetector, ReferenceDetector};
use phishwatch_core::url::normalize;

fn pages(n: usize, kb: &BrandKb) -> Vec<WebpageContent> {
    let dir = tempfile::tempdir().unwrap();
    let (benign, phishing) = synth_urls(n / 2, kb);
    let set = gen_fixtures(&benign, &phishing, kb, dir.path(), Exec::Parallel).unwrap();
    let corpus = CorpusFetcher::load(&set.manifest).unwrap();
    benign
        .iter()
        .chain(&phishing)
        .map(|u| {
            let url = normalize(u).unwrap();
            match corpus.fetch(&url, FetchLimits::default()).content() {
                Some(c) => c.clone(),
                None => WebpageContent::new(url, "", Utc::now()),
            }
        })
        .collect()
}

fn classify(c: &mut Criterion) {
    let kb = Arc::new(BrandKb::bundled());
    let detector = ReferenceDetector::new(kb.clone());
    let mut group = c.benchmark_group("rbpd_classify");
    group.sample_size(20);
    for n in [64usize, 512] {
        let pages = pages(n, &kb);
        group.throughput(Throughput::Elements(pages.len() as u64));
        for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, n), &pages, |b, pages| {
                b.iter(|| black_box(exec.map_all(pages, |p| detector.analyze(&p.url, p))))
            });
        }
    }
    group.finish();

    let mut gen = c.benchmark_group("gen_fixtures");
    gen.sample_size(10);
    let (benign, phishing) = synth_urls(500, &kb);
    for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        gen.bench_function(name, |b| {
            b.iter(|| {
                let dir = tempfile::tempdir().unwrap();
                black_box(gen_fixtures(&benign, &phishing, &kb, dir.path(), exec).unwrap())
            })
        });
    }
    gen.finish();
}

criterion_group!(benches, classify);
criterion_main!(benches);
