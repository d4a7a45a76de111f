use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use tracing_subscriber::EnvFilter;

use phishwatch_core::config::AppConfig;
use phishwatch_core::engine::Overrides;
use phishwatch_core::rbpd::BrandKb;
use phishwatch_server::app::{runtime, Running};

/// Phishing URL detection service.
#[derive(Parser, Debug)]
#[command(name = "phishwatch", version)]
struct Args {
    /// Path to the key=value config file.
    #[arg(long)]
    config: PathBuf,
    /// Validate the config (and the files it names) and exit.
    #[arg(long)]
    check: bool,
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("PHISHWATCH_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let args = Args::parse();
    let config = AppConfig::load(&args.config).with_context(|| format!("loading {}", args.config.display()))?;

    if args.check {
        config.check_inputs()?;
        if let Some(path) = &config.rbpd_kb_path {
            BrandKb::load(path).context("rbpd.kb_path")?;
        }
        println!("config ok");
        return Ok(());
    }

    let rt = runtime(config.ftw_worker_count)?;
    rt.block_on(async move {
        let running = Running::start(config, Overrides::default()).await?;
        println!("listening on {}", running.local_addr());
        std::io::stdout().flush()?;
        wait_for_signal().await;
        tracing::info!("shutting down");
        running.shutdown().await;
        anyhow::Ok(())
    })
}

async fn wait_for_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = signal(SignalKind::terminate()).expect("install SIGTERM handler");
        tokio::select! {
            _ = term.recv() => {}
            _ = tokio::signal::ctrl_c() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}
