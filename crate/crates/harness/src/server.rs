//! HTTP identification service speaking the `/identify` wire protocol, with
//! an optional per-client query budget.

use std::collections::HashMap;
use std::net::{SocketAddr, TcpListener};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use tokio::sync::oneshot;

use raf_core::oracle::{
    extract_embedding, match_embedding, Gallery, IdentifyRequest, WireError, IDENTIFY_PATH, TOKEN_HEADER,
};

use crate::HarnessError;

pub const ANONYMOUS_TOKEN: &str = "anonymous";

struct AppState {
    gallery: Arc<Gallery>,
    budget: Option<u32>,
    spent: Mutex<HashMap<String, u32>>,
}

impl AppState {
    /// Charges one query to `token`; false once its budget is spent.
    fn charge(&self, token: &str) -> bool {
        let Some(budget) = self.budget else {
            return true;
        };
        let mut spent = self.spent.lock().expect("budget lock poisoned");
        let used = spent.entry(token.to_string()).or_insert(0);
        if *used >= budget {
            return false;
        }
        *used += 1;
        true
    }
}

fn wire_error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(WireError { error: msg.into() })).into_response()
}

async fn identify(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Response {
    let request: IdentifyRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return wire_error(StatusCode::BAD_REQUEST, format!("bad request body: {e}")),
    };
    let image = match request.decode_image() {
        Ok(i) => i,
        Err(e) => return wire_error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let token = headers
        .get(TOKEN_HEADER)
        .and_then(|v| v.to_str().ok())
        .unwrap_or(ANONYMOUS_TOKEN);
    if !state.charge(token) {
        return wire_error(StatusCode::TOO_MANY_REQUESTS, "budget_exhausted");
    }
    let gallery = Arc::clone(&state.gallery);
    let result = tokio::task::spawn_blocking(move || match_embedding(&extract_embedding(&image), &gallery)).await;
    match result {
        Ok(Ok(resp)) => (StatusCode::OK, Json(resp)).into_response(),
        Ok(Err(e)) => wire_error(StatusCode::BAD_REQUEST, e.to_string()),
        Err(e) => wire_error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

pub fn router(gallery: Arc<Gallery>, budget: Option<u32>) -> Router {
    let state = Arc::new(AppState {
        gallery,
        budget,
        spent: Mutex::new(HashMap::new()),
    });
    Router::new().route(IDENTIFY_PATH, post(identify)).with_state(state)
}

/// A service running on its own thread. Dropping it shuts the service down.
pub struct OracleServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<Result<(), String>>>,
}

impl OracleServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the service stops (it only stops on error or drop).
    pub fn join(mut self) -> Result<(), HarnessError> {
        let thread = self.thread.take().expect("server thread present");
        match thread.join() {
            Ok(r) => r.map_err(HarnessError::Io),
            Err(_) => Err(HarnessError::Io("server thread panicked".into())),
        }
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for OracleServer {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Binds `bind` and serves `gallery`. Bind failures are returned before any
/// thread starts.
pub fn serve_oracle(gallery: Arc<Gallery>, bind: &str, budget: Option<u32>) -> Result<OracleServer, HarnessError> {
    let bind_err = |reason: String| HarnessError::Bind {
        addr: bind.to_string(),
        reason,
    };
    let listener = TcpListener::bind(bind).map_err(|e| bind_err(e.to_string()))?;
    listener.set_nonblocking(true).map_err(|e| bind_err(e.to_string()))?;
    let addr = listener.local_addr().map_err(|e| bind_err(e.to_string()))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| HarnessError::Io(e.to_string()))?;
    let app = router(gallery, budget);
    let (tx, rx) = oneshot::channel::<()>();

    let thread = std::thread::spawn(move || {
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).map_err(|e| e.to_string())?;
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
                .map_err(|e| e.to_string())
        })
    });
    log::info!("identification service listening on {addr}");
    Ok(OracleServer {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
