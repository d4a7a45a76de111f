//! Process lifecycle: boot the engine, serve the API, shut down in order.

use std::net::SocketAddr;
use std::sync::Arc;

use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use phishwatch_core::config::AppConfig;
use phishwatch_core::engine::{BootError, Engine, Overrides};

use crate::api::{self, ApiState};

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error(transparent)]
    Boot(#[from] BootError),
    #[error("api.bind_addr: cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("runtime: {0}")]
    Runtime(#[source] std::io::Error),
}

/// A booted engine with the API listening.
pub struct Running {
    state: ApiState,
    addr: SocketAddr,
    stop_tx: oneshot::Sender<()>,
    serve: JoinHandle<std::io::Result<()>>,
}

impl Running {
    /// Builds the engine, starts its workers, then binds and serves. The
    /// listener only opens once the blacklist and cache journal are loaded.
    pub async fn start(config: AppConfig, overrides: Overrides) -> Result<Self, ServerError> {
        let bind = config.api_bind_addr;
        let static_dir = config.api_static_dir.clone();
        let engine = tokio::task::spawn_blocking(move || Engine::build_with(config, overrides))
            .await
            .expect("engine build task")?;
        let engine = Arc::new(engine);
        engine.start();

        let listener = TcpListener::bind(bind)
            .await
            .map_err(|source| ServerError::Bind { addr: bind, source })?;
        let addr = listener
            .local_addr()
            .map_err(|source| ServerError::Bind { addr: bind, source })?;
        let state = ApiState::new(engine);
        let app = api::router(state.clone(), static_dir.as_deref());
        let (stop_tx, stop_rx) = oneshot::channel::<()>();
        let serve = tokio::spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = stop_rx.await;
                })
                .await
        });
        tracing::info!(%addr, "api listening");
        Ok(Self {
            state,
            addr,
            stop_tx,
            serve,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn engine(&self) -> &Arc<Engine> {
        &self.state.engine
    }

    pub fn state(&self) -> &ApiState {
        &self.state
    }

    /// Stops accepting requests, then closes the queue, lets slow workers
    /// finish their current tasks and flushes the journals.
    pub async fn shutdown(self) {
        let _ = self.stop_tx.send(());
        match self.serve.await {
            Ok(Err(err)) => tracing::error!(%err, "api server error"),
            Err(err) => tracing::error!(%err, "api server task failed"),
            Ok(Ok(())) => {}
        }
        let engine = self.state.engine.clone();
        let _ = tokio::task::spawn_blocking(move || engine.shutdown()).await;
        tracing::info!("shutdown complete");
    }
}

/// [`Running`] on its own runtime, for synchronous callers such as tests
/// and the bench harness.
pub struct BackgroundServer {
    runtime: tokio::runtime::Runtime,
    running: Option<Running>,
}

impl BackgroundServer {
    pub fn start(config: AppConfig, overrides: Overrides) -> Result<Self, ServerError> {
        let runtime = runtime(config.ftw_worker_count).map_err(ServerError::Runtime)?;
        let running = runtime.block_on(Running::start(config, overrides))?;
        Ok(Self {
            runtime,
            running: Some(running),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.running().local_addr()
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.local_addr())
    }

    pub fn engine(&self) -> &Arc<Engine> {
        self.running().engine()
    }

    pub fn state(&self) -> &ApiState {
        self.running().state()
    }

    fn running(&self) -> &Running {
        self.running.as_ref().expect("server running")
    }

    pub fn stop(mut self) {
        self.stop_inner();
    }

    fn stop_inner(&mut self) {
        if let Some(running) = self.running.take() {
            self.runtime.block_on(running.shutdown());
        }
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        self.stop_inner();
    }
}

/// Request handling runs on `ftw.worker_count` threads.
pub fn runtime(workers: usize) -> std::io::Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(workers.max(1))
        .thread_name("ftw")
        .enable_all()
        .build()
}
