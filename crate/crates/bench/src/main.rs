use std::path::PathBuf;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand};

use phishwatch_bench::{gen_fixtures, read_url_list, run, synth_urls, write_url_list, BenchConfig, BenchMode};
use phishwatch_core::par::Exec;
use phishwatch_core::rbpd::BrandKb;

#[derive(Parser, Debug)]
#[command(name = "bench", version, about = "phishwatch latency benchmark")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run one benchmark mode and write the report.
    Run {
        #[arg(long, value_enum)]
        mode: BenchMode,
        #[arg(long)]
        benign_list: PathBuf,
        #[arg(long)]
        phishing_list: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        blacklist_seed_fraction: f64,
        #[arg(long, default_value_t = 500)]
        simulated_crawl_ms: u64,
        #[arg(long, default_value_t = 50)]
        simulated_rbpd_ms: u64,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "bench-fixtures")]
        fixtures: PathBuf,
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        clients: usize,
        #[arg(long, default_value_t = 4)]
        stw_workers: usize,
        #[arg(long, default_value_t = 600)]
        drain_timeout_secs: u64,
    },
    /// Render one local page per URL plus a corpus manifest.
    GenFixtures {
        #[arg(long)]
        benign_list: PathBuf,
        #[arg(long)]
        phishing_list: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        kb: Option<PathBuf>,
    },
    /// Write deterministic synthetic benign and phishing URL lists.
    SynthUrls {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long)]
        benign_out: PathBuf,
        #[arg(long)]
        phishing_out: PathBuf,
        #[arg(long)]
        kb: Option<PathBuf>,
    },
}

fn load_kb(path: Option<&PathBuf>) -> anyhow::Result<BrandKb> {
    match path {
        Some(p) => BrandKb::load(p).with_context(|| format!("loading kb {}", p.display())),
        None => Ok(BrandKb::bundled()),
    }
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    match Cli::parse().cmd {
        Cmd::Run {
            mode,
            benign_list,
            phishing_list,
            blacklist_seed_fraction,
            simulated_crawl_ms,
            simulated_rbpd_ms,
            output,
            fixtures,
            kb,
            clients,
            stw_workers,
            drain_timeout_secs,
        } => {
            let config = BenchConfig {
                blacklist_seed_fraction,
                simulated_crawl_ms,
                simulated_rbpd_ms,
                output_path: Some(output.clone()),
                kb_path: kb,
                clients,
                stw_workers,
                drain_timeout: Duration::from_secs(drain_timeout_secs),
                ..BenchConfig::new(mode, benign_list, phishing_list, fixtures)
            };
            let (report, _) = run(&config)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            eprintln!("report written to {}", output.display());
        }
        Cmd::GenFixtures {
            benign_list,
            phishing_list,
            out,
            kb,
        } => {
            let kb = load_kb(kb.as_ref())?;
            let benign = read_url_list(&benign_list)?;
            let phishing = read_url_list(&phishing_list)?;
            let set = gen_fixtures(&benign, &phishing, &kb, &out, Exec::Parallel)?;
            println!(
                "{} pages, manifest {}",
                benign.len() + phishing.len(),
                set.manifest.display()
            );
        }
        Cmd::SynthUrls {
            n,
            benign_out,
            phishing_out,
            kb,
        } => {
            let kb = load_kb(kb.as_ref())?;
            let (benign, phishing) = synth_urls(n, &kb);
            write_url_list(&benign_out, &benign)?;
            write_url_list(&phishing_out, &phishing)?;
            println!("{n} benign, {n} phishing");
        }
    }
    Ok(())
}
