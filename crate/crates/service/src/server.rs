use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::Context;
use tokio::net::TcpListener;

use crate::api::{router, Shared};
use crate::engine::Engine;

/// Reloads the snapshot file and swaps it in. On failure the old snapshot
/// keeps serving.
pub fn reload(shared: &Shared, path: &Path) -> anyhow::Result<String> {
    let engine = Engine::open(path)?;
    let id = engine.id().to_string();
    shared.replace(engine);
    Ok(id)
}

pub async fn serve(engine: Engine, snapshot: PathBuf, bind: SocketAddr) -> anyhow::Result<()> {
    let listener = TcpListener::bind(bind)
        .await
        .with_context(|| format!("cannot listen on {bind}"))?;
    let shared = Shared::new(engine);
    eprintln!("serving snapshot {} on http://{}", shared.current().id(), listener.local_addr()?);

    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut hangup = signal(SignalKind::hangup())?;
        let shared = shared.clone();
        tokio::spawn(async move {
            while hangup.recv().await.is_some() {
                match reload(&shared, &snapshot) {
                    Ok(id) => eprintln!("reloaded snapshot {id}"),
                    Err(e) => eprintln!("reload failed, keeping current snapshot: {e:#}"),
                }
            }
        });
    }
    #[cfg(not(unix))]
    let _ = snapshot;

    axum::serve(listener, router(shared))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
