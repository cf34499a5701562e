//! Verification-queue service: ingestion, the operator queue, metrics,
//! weights and attribute rankings over HTTP, with every state change kept in
//! a JSON-lines event log that restores the state exactly on restart.

pub mod api;
pub mod config;
pub mod engine;
pub mod error;
pub mod events;
pub mod service;

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

pub use config::{Mode, Normalization, ServiceConfig};
pub use engine::{Engine, ItemStatus, QueueItem};
pub use error::{Result, ServiceError};
pub use events::{Entry, Event, EventLog};
pub use service::Service;

/// A bound listener over an opened state.
pub struct Server {
    listener: tokio::net::TcpListener,
    shared: api::Shared,
    timeout: Option<Duration>,
}

impl Server {
    /// Replays the event log and binds `cfg.bind`.
    pub async fn bind(cfg: ServiceConfig) -> Result<Self> {
        let bind = cfg.bind.clone();
        let timeout = cfg.timeout();
        let svc = tokio::task::spawn_blocking(move || Service::open(cfg))
            .await
            .map_err(|e| ServiceError::Config(format!("startup failed: {e}")))??;
        let listener = tokio::net::TcpListener::bind(&bind).await?;
        Ok(Self {
            listener,
            shared: Arc::new(RwLock::new(svc)),
            timeout,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Serves until ctrl-c.
    pub async fn run(self) -> Result<()> {
        if self.timeout.is_some() {
            let ticker = self.shared.clone();
            tokio::spawn(async move {
                let mut every = tokio::time::interval(Duration::from_millis(250));
                loop {
                    every.tick().await;
                    let s = ticker.clone();
                    let done = tokio::task::spawn_blocking(move || {
                        let mut guard = s.write().unwrap_or_else(|p| p.into_inner());
                        guard.tick(Instant::now())
                    })
                    .await;
                    if let Ok(Err(e)) = done {
                        tracing::warn!(error = %e, "timeout close failed");
                    }
                }
            });
        }
        tracing::info!(addr = %self.listener.local_addr()?, "listening");
        axum::serve(self.listener, api::router(self.shared))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    }
}

/// Opens the state, binds and serves until ctrl-c.
pub async fn serve(cfg: ServiceConfig) -> Result<()> {
    Server::bind(cfg).await?.run().await
}
