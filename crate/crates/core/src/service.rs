//! HTTP services: the probe agent and the stub workflow node.
//!
//! Agent:
//! - `GET /v1/ping?host=<h>&samples=<n>&timeout_ms=<t>` -> [`AgentReply`]
//! - `GET /v1/http?url=<u>&samples=<n>&timeout_ms=<t>` -> [`AgentReply`]
//! - `GET /v1/health` -> `{"ok": true}`
//!
//! Stub node:
//! - `GET /work?delay_ms=<n>&bytes=<n>` -> `bytes` pseudo-random bytes after `delay_ms`
//! - `GET /v1/health`

use std::net::{SocketAddr, TcpListener as StdListener};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::extract::Query;
use axum::routing::get;
use axum::{Json, Router};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use tokio::sync::oneshot;

use crate::error::{Error, Result};
use crate::measurement::{echo_samples, http_samples, AgentReply};

const MAX_SAMPLES: u32 = 100;
const MAX_TIMEOUT_MS: u64 = 30_000;
const MAX_BODY_BYTES: usize = 64 << 20;

#[derive(Deserialize)]
struct PingQuery {
    host: String,
    samples: Option<u32>,
    timeout_ms: Option<u64>,
}

#[derive(Deserialize)]
struct HttpQuery {
    url: String,
    samples: Option<u32>,
    timeout_ms: Option<u64>,
}

#[derive(Deserialize)]
struct WorkQuery {
    #[serde(default)]
    delay_ms: u64,
    #[serde(default)]
    bytes: usize,
}

fn limits(samples: Option<u32>, timeout_ms: Option<u64>) -> (u32, Duration) {
    let samples = samples.unwrap_or(5).clamp(1, MAX_SAMPLES);
    let timeout = timeout_ms.unwrap_or(3000).clamp(1, MAX_TIMEOUT_MS);
    (samples, Duration::from_millis(timeout))
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "ok": true }))
}

async fn ping(Query(q): Query<PingQuery>) -> Json<AgentReply> {
    let (samples, timeout) = limits(q.samples, q.timeout_ms);
    let (rtts_ms, failures, _) =
        tokio::task::spawn_blocking(move || echo_samples(&q.host, samples, timeout))
            .await
            .unwrap_or((
                Vec::new(),
                samples,
                crate::measurement::EchoMethod::TcpConnect,
            ));
    Json(AgentReply {
        ok: !rtts_ms.is_empty(),
        rtts_ms,
        failures,
    })
}

async fn http(Query(q): Query<HttpQuery>) -> Json<AgentReply> {
    let (samples, timeout) = limits(q.samples, q.timeout_ms);
    let (rtts_ms, failures) =
        tokio::task::spawn_blocking(move || http_samples(&q.url, samples, timeout))
            .await
            .unwrap_or((Vec::new(), samples));
    Json(AgentReply {
        ok: !rtts_ms.is_empty(),
        rtts_ms,
        failures,
    })
}

async fn work(Query(q): Query<WorkQuery>) -> Vec<u8> {
    tokio::time::sleep(Duration::from_millis(q.delay_ms)).await;
    let mut body = vec![0u8; q.bytes.min(MAX_BODY_BYTES)];
    ChaCha8Rng::seed_from_u64(q.bytes as u64).fill_bytes(&mut body);
    body
}

pub fn agent_router() -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/ping", get(ping))
        .route("/v1/http", get(http))
}

pub fn node_router() -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/work", get(work))
}

/// Binds `addr`, reporting bind failures synchronously.
pub fn bind(addr: &str) -> Result<StdListener> {
    let listener = StdListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    Ok(listener)
}

/// Serves `router` on an already-bound listener until `shutdown` resolves.
pub async fn serve(
    listener: StdListener,
    router: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<()> {
    let listener = tokio::net::TcpListener::from_std(listener)?;
    axum::serve(listener, router)
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(Error::Io)
}

/// A service running on its own thread and runtime; stops on drop.
pub struct BackgroundServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl BackgroundServer {
    pub fn start(addr: &str, router: Router) -> Result<Self> {
        let listener = bind(addr)?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let thread = std::thread::spawn(move || {
            let _ = runtime.block_on(serve(listener, router, async {
                let _ = rx.await;
            }));
        });
        Ok(BackgroundServer {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn agent(addr: &str) -> Result<Self> {
        Self::start(addr, agent_router())
    }

    pub fn node(addr: &str) -> Result<Self> {
        Self::start(addr, node_router())
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
