//! Local HTTP API and server-sent event stream over a running session.

mod api;
mod error;
mod stream;

use std::future::Future;
use std::io;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use audible_trace_core::{Session, SessionEvent};
use axum::response::Html;
use axum::routing::{get, post};
use axum::Router;
use tokio::net::TcpListener;
use tokio::sync::broadcast;
use tower_http::services::ServeDir;

pub use error::ApiError;
pub use stream::{EVENT_ERROR, EVENT_LAGGED, EVENT_NARRATION};

/// Events buffered per client before the slowest ones start missing events.
pub const STREAM_BUFFER: usize = 256;

pub struct AppState {
    pub session: Arc<Session>,
    tx: broadcast::Sender<Arc<SessionEvent>>,
}

impl AppState {
    /// Subscribes to the session so every event reaches connected stream clients.
    pub fn new(session: Arc<Session>) -> Arc<Self> {
        let (tx, _) = broadcast::channel(STREAM_BUFFER);
        let sink = tx.clone();
        session.subscribe(Box::new(move |ev| {
            let _ = sink.send(Arc::new(ev.clone()));
        }));
        Arc::new(AppState { session, tx })
    }

    pub fn stream_clients(&self) -> usize {
        self.tx.receiver_count()
    }
}

const PLACEHOLDER_PAGE: &str = r#"<!doctype html>
<html lang="en">
<head><meta charset="utf-8"><title>audible-trace</title></head>
<body>
<h1>audible-trace</h1>
<p>No dashboard assets are installed. The API is available:</p>
<ul>
<li><a href="/api/errors">/api/errors</a></li>
<li><a href="/api/stats">/api/stats</a></li>
<li>/api/stream (server-sent events)</li>
</ul>
</body>
</html>
"#;

/// All routes. Static assets come from `ui_dir` when given.
pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/errors", get(api::list_errors))
        .route("/api/errors/{id}", get(api::get_error))
        .route("/api/errors/{id}/context", get(api::get_context))
        .route("/api/errors/{id}/resolution", post(api::post_resolution))
        .route("/api/errors/{id}/narrate", post(api::post_narrate))
        .route("/api/stream", get(stream::stream))
        .route("/api/stats", get(api::get_stats))
        .route("/api", get(api::api_not_found))
        .route("/api/{*rest}", get(api::api_not_found).post(api::api_not_found))
        .method_not_allowed_fallback(api::method_not_allowed)
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => api
            .route("/", get(|| async { Html(PLACEHOLDER_PAGE) }))
            .fallback(api::api_not_found),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("{0}")]
    PortBusy(ApiError),
    #[error("cannot listen: {0}")]
    Io(#[from] io::Error),
}

/// Loopback unless `external` is set.
pub fn bind_addr(port: u16, external: bool) -> SocketAddr {
    let ip = if external {
        IpAddr::V4(Ipv4Addr::UNSPECIFIED)
    } else {
        IpAddr::V4(Ipv4Addr::LOCALHOST)
    };
    SocketAddr::new(ip, port)
}

pub async fn bind(addr: SocketAddr) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        io::ErrorKind::AddrInUse => ServeError::PortBusy(ApiError::port_busy(addr.port())),
        _ => ServeError::Io(e),
    })
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}
