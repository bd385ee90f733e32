use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use audible_trace_core::Session;
use audible_trace_dashboard::{bind, bind_addr, router, serve, AppState, ServeError};
use tokio::runtime::Runtime;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

/// The dashboard running on its own runtime beside the synchronous pipeline.
pub struct Dashboard {
    rt: Runtime,
    stop: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<std::io::Result<()>>>,
    addr: SocketAddr,
}

impl Dashboard {
    pub fn start(
        session: Arc<Session>,
        port: u16,
        external: bool,
        ui_dir: Option<PathBuf>,
    ) -> Result<Self, ServeError> {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .thread_name("dashboard")
            .enable_all()
            .build()?;
        let listener = rt.block_on(bind(bind_addr(port, external)))?;
        let addr = listener.local_addr()?;
        let app = router(AppState::new(session), ui_dir);
        let (tx, rx) = oneshot::channel::<()>();
        let task = rt.spawn(serve(listener, app, async {
            let _ = rx.await;
        }));
        log::info!("dashboard listening on http://{addr}");
        Ok(Dashboard {
            rt,
            stop: Some(tx),
            task: Some(task),
            addr,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stop(mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(task) = self.task.take() {
            let _ = self
                .rt
                .block_on(async { tokio::time::timeout(Duration::from_secs(2), task).await });
        }
        self.rt.shutdown_timeout(Duration::from_millis(200));
    }
}
