use std::convert::Infallible;
use std::sync::Arc;

use audible_trace_core::SessionEvent;
use axum::extract::State;
use axum::response::sse::{Event, KeepAlive, Sse};
use futures::Stream;
use tokio::sync::broadcast::error::RecvError;

use crate::AppState;

pub const EVENT_ERROR: &str = "error";
pub const EVENT_NARRATION: &str = "narration";
/// Sent in place of events a slow client missed.
pub const EVENT_LAGGED: &str = "lagged";

fn to_sse(ev: &SessionEvent) -> Event {
    let name = match ev {
        SessionEvent::Error { .. } => EVENT_ERROR,
        SessionEvent::Narration(_) => EVENT_NARRATION,
    };
    let data = serde_json::to_string(ev).unwrap_or_else(|_| "{}".into());
    let e = Event::default().event(name).data(data);
    match ev {
        SessionEvent::Error { record, .. } => e.id(record.id().to_string()),
        SessionEvent::Narration(_) => e,
    }
}

pub async fn stream(
    State(st): State<Arc<AppState>>,
) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = st.tx.subscribe();
    let events = futures::stream::unfold(rx, |mut rx| async move {
        let ev = match rx.recv().await {
            Ok(ev) => to_sse(&ev),
            Err(RecvError::Lagged(n)) => Event::default()
                .event(EVENT_LAGGED)
                .data(format!("{{\"skipped\":{n}}}")),
            Err(RecvError::Closed) => return None,
        };
        Some((Ok(ev), rx))
    });
    Sse::new(events).keep_alive(KeepAlive::default())
}
